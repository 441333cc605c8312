import json
import logging
import logging.config

from .base import LOG_FORMAT, LOG_LEVEL


class JSONFormatter(logging.Formatter):
    """One JSON object per log line"""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "time": self.formatTime(record),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload)


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "json": {
            "()": "config.settings.custom_logging.JSONFormatter",
        },
        "text": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "level": LOG_LEVEL,
            "class": "logging.StreamHandler",
            "formatter": "json" if LOG_FORMAT == "json" else "text",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        package: {
            "handlers": ["console"],
            "level": LOG_LEVEL,
            "propagate": False,
        }
        for package in ("application", "driven", "driving")
    },
}


def configure_logging() -> None:
    """Install the LOGGING configuration"""
    logging.config.dictConfig(LOGGING)
