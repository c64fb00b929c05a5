########################################################################
## IMPORTS
########################################################################
import logging
import sys

PACKAGE_LOGGER = "CM_QOperator"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

logger = logging.getLogger(PACKAGE_LOGGER)
logger.addHandler(logging.NullHandler())

_state = {"show_logs": False, "handler": None}


########################################################################
## SHOW / HIDE LOGS
########################################################################
def show_logs(show=True, verbose=False):
    '''
    Switch the package logs on or off.

    Mirrors the "ShowLogs" key of an experiment config file. When logs are
    hidden only warnings and errors reach the console.
    '''
    _state["show_logs"] = bool(show)
    if _state["handler"] is None:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        _state["handler"] = handler
    if show:
        logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    else:
        logger.setLevel(logging.WARNING)


########################################################################
## PROGRESS BAR
########################################################################
def progress(count, total, status=''):
    if not _state["show_logs"] or total <= 0:
        return
    bar_len = 40
    filled_len = int(round(bar_len * count / float(total)))

    percents = round(100.0 * count / float(total), 1)
    bar = '=' * filled_len + '-' * (bar_len - filled_len)

    sys.stderr.write('[%s] %s%s ...%s\r' % (bar, percents, '%', status))
    if count >= total:
        sys.stderr.write('\n')
    sys.stderr.flush()
