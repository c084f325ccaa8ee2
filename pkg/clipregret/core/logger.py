# Copyright (c) Facebook, Inc. and its affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.
#

import logging.config
import os
import typing as tp

# provide a way to change level through CLIPREGRET_LOG_LEVEL environment variable:
# level "CRITICAL" (50) or more (eg.: "100") will deactivate clipregret logger
# "NOCONFIG" will avoid configuration
LOG_VARNAME = "CLIPREGRET_LOG_LEVEL"
level_str = os.environ.get(LOG_VARNAME, "INFO").upper()
level: int | str = level_str if not level_str.isdigit() else int(level_str)


CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {"clipregret_basic": {"format": "%(name)s %(levelname)s (%(asctime)s) - %(message)s"}},
    "handlers": {
        "clipregret_out": {
            "class": "logging.StreamHandler",
            "level": "DEBUG",
            "formatter": "clipregret_basic",
            "stream": "ext://sys.stdout",
        },
        "clipregret_err": {
            "class": "logging.StreamHandler",
            "level": "WARNING",
            "formatter": "clipregret_basic",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {"clipregret": {"handlers": ["clipregret_err", "clipregret_out"], "level": level}},
}


if level != "NOCONFIG":
    logging.config.dictConfig(CONFIG)


def get_logger() -> logging.Logger:
    return logging.getLogger("clipregret")


def exception(*args: str) -> None:
    get_logger().exception(*args)


def check_failures(episode: int, checks: tp.Sequence[str], **values: float) -> None:
    """Logs the failed checks of an episode at WARNING level, with the given residuals"""
    if not checks:
        return
    details = "".join(f", {name}={value:.6g}" for name, value in sorted(values.items()))
    get_logger().warning(f"Episode {episode}: checks {', '.join(checks)} failed{details}")
