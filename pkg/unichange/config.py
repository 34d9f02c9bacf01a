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


# Logging set-up for unichange: a package logger printing coloured level names
# on the console, with an optional plain-text copy of the output in a file.

import logging

_BLACK, _RED, _GREEN, _YELLOW, _BLUE, _MAGENTA, _CYAN, _WHITE = range(8)

_RESET_SEQ = "\033[0m"
_COLOR_SEQ = "\033[1;%dm"
_BOLD_SEQ = "\033[1m"

_COLORS = {
    'WARNING': _YELLOW,
    'INFO': _GREEN,
    'DEBUG': _BLUE,
    'CRITICAL': _MAGENTA,
    'ERROR': _RED
}

_FORMAT = "[$BOLD%(name)s$RESET] %(levelname)s: %(message)s"

LOG_LEVELS = ('debug', 'info', 'warning', 'error', 'critical')

def formatter_message(message, use_color = True):
    r""" Substitute the $RESET and $BOLD place-holders of a format string.

    :arg str message: The format string, possibly holding place-holders.
    :arg bool use_color: Replace the place-holders by terminal escape sequences
      if True, remove them otherwise.
    :returns: The format string, ready for a logging.Formatter.
    :rtype: str
    """
    if use_color:
        message = message.replace("$RESET", _RESET_SEQ).replace("$BOLD", _BOLD_SEQ)
    else:
        message = message.replace("$RESET", "").replace("$BOLD", "")
    return message

class ColoredFormatter(logging.Formatter):
    """ Formatter painting the level name of every record. """
    def __init__(self, msg, use_color = True):
        logging.Formatter.__init__(self, msg)
        self.use_color = use_color

    def format(self, record):
        levelname = record.levelname
        if self.use_color and levelname in _COLORS:
            record.levelname = _COLOR_SEQ % (30 + _COLORS[levelname]) + levelname + _RESET_SEQ
        try:
            return logging.Formatter.format(self, record)
        finally:
            # Other handlers of the same record must see the plain name.
            record.levelname = levelname

def ColoredLogger(name):
    """ Return the named logger, with a coloured console handler attached once.

    :arg str name: Logger name.
    :rtype: logging.Logger
    """
    logger = logging.getLogger(name)
    logger.setLevel(logging.INFO)
    for handler in logger.handlers:
        if isinstance(handler.formatter, ColoredFormatter):
            return logger
    consoleHandler = logging.StreamHandler()
    consoleHandler.setFormatter(ColoredFormatter(formatter_message(_FORMAT, True)))
    logger.addHandler(consoleHandler)
    logger.propagate = False
    return logger

LOG = ColoredLogger("unichange")

def setLogOutputFile(path):
    """ Copy all log output into a file, without colour sequences.

    :arg str path: Name of the log file. The file is appended to.
    """
    file_handler = logging.FileHandler(path)
    file_handler.setFormatter(ColoredFormatter(formatter_message(_FORMAT, False), use_color=False))
    LOG.addHandler(file_handler)
    LOG.info('unichange log output also copied to file '+path)

def setLogLevel(level):
    """ Set the verbosity of the package logger.

    :arg str level: One of debug, info, warning, error, critical (any case).
    :raises: ValueError if the level name is not recognised.
    """
    if level.lower() not in LOG_LEVELS:
        raise ValueError('Unknown log level '+str(level)+', expected one of '+', '.join(LOG_LEVELS)+'.\n')
    LOG.setLevel(level.upper())

def provenance():
    """ Log and return provenance information.

    Reports the unichange version and git SHA key, as well as the versions of
    the numerical dependencies (torch and numpy). The returned dictionary is
    stored inside checkpoints.

    :rtype: dict
    """
    import numpy
    import torch
    from unichange import __version__
    from unichange import __git_sha_key__
    info = {'unichange': __version__,
            'git_sha_key': __git_sha_key__,
            'torch': torch.__version__,
            'numpy': numpy.__version__}
    LOG.info('unichange version ' + str(__version__) + ' with git sha key ' + str(__git_sha_key__))
    if __git_sha_key__ == "local":
        LOG.info('unichange probably imported from a source tree outside git control.')
    LOG.info('torch version ' + torch.__version__ + ', numpy version ' + numpy.__version__)
    return info
