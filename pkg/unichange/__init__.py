#    Copyright (C) 2026 The UniChange Development Team. See the AUTHORS.md file for a full list of copyright holders.
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

import unichange.data
import unichange.lib
import unichange.text
import unichange.vision
import unichange.decoder
import unichange.losses
import unichange.metrics
import unichange.datagen
import unichange.harness
from unichange.config import *
from unichange.data.changeTypes import BadArguments

__version__ = "1.0.0"
# Git SHA key of the source tree, when imported from a git checkout.
try:
    import git
    __git_sha_key__ = git.Repo(os.path.dirname(os.path.abspath(__file__)),
                               search_parent_directories=True).head.object.hexsha
except Exception:
    __git_sha_key__ = "local"
__license__ = "GPLv3"
