# -*- coding: utf-8 -*-
#
# unichange documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import sys, os

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath('../'))

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.todo', 'sphinx.ext.mathjax', 'sphinx.ext.viewcode']

autodoc_member_order = 'bysource'

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'unichange'
copyright = '2026, The UniChange Development Team'

# The short X.Y version.
version = '1.0'
# The full version, including alpha/beta/rc tags.
release = '1.0.0'

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
html_domain_indices = True
htmlhelp_basename = 'unichange'

# -- Options for LaTeX output --------------------------------------------------

latex_elements = {
}

latex_documents = [
  ('index', 'unichange.tex', 'unichange Documentation',
   '2026, The UniChange Development Team', 'manual'),
]

# -- Options for manual page output --------------------------------------------

man_pages = [
    ('index', 'unichange', 'unichange Documentation',
     ['2026, The UniChange Development Team'], 1)
]

# -- Options for Texinfo output ------------------------------------------------

texinfo_documents = [
  ('index', 'unichange', 'unichange Documentation',
   '2026, The UniChange Development Team', 'unichange',
   'Instruction-driven binary and semantic change detection.',
   'Remote Sensing'),
]

# -- Options for Epub output ---------------------------------------------------

epub_title = 'unichange'
epub_author = '2026, The UniChange Development Team'
epub_publisher = '2026, The UniChange Development Team'
epub_copyright = '2026, The UniChange Development Team'
