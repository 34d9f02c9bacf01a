#!/usr/bin/env python
#
#    Copyright (C) 2026 The UniChange Development Team.
#    See the AUTHORS.md file for a full list of copyright holders.
#
#    This file is part of UniChange.
#
#    UniChange is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    UniChange is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with UniChange.  If not, see <http://www.gnu.org/licenses/>.

import os
import io
from setuptools import setup

def main():
    current_directory = os.path.dirname(__file__)
    # Read long description from file. The variable storing the
    # long description is passed into a standardised argument of
    # setuptools.setup
    readme_path = os.path.join(current_directory, 'README.rst')
    with io.open(readme_path, encoding='utf-8') as readme_file:
        long_description = readme_file.read()

    setup(
          name='unichange',
          version='1.0.0',
          description = "Instruction-driven binary and semantic change detection.",
          long_description = long_description,
          author = "The UniChange Development Team.",
          packages = ['unichange',
                      'unichange.data',
                      'unichange.lib',
                      'unichange.text',
                      'unichange.vision',
                      'unichange.decoder',
                      'unichange.losses',
                      'unichange.metrics',
                      'unichange.datagen',
                      'unichange.harness',
                     ],
          package_dir = {
              'unichange': 'unichange',
              'unichange.data': 'unichange/data',
              'unichange.lib': 'unichange/lib',
              'unichange.text': 'unichange/text',
              'unichange.vision': 'unichange/vision',
              'unichange.decoder': 'unichange/decoder',
              'unichange.losses': 'unichange/losses',
              'unichange.metrics': 'unichange/metrics',
              'unichange.datagen': 'unichange/datagen',
              'unichange.harness': 'unichange/harness',
              },
          scripts=["unichange-cli/unichange"],
          provides=['unichange'],
          python_requires='>=3.10',
          install_requires=['numpy', 'torch>=2.1', 'Pillow', 'matplotlib', 'gitpython'],
          license='GPLv3',
          test_suite = "tests",
          keywords = ['remote sensing', 'change detection', 'semantic segmentation'],
        )

if __name__=='__main__':
    main()
