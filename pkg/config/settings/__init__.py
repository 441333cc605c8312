from .base import *  # noqa
from .custom_logging import configure_logging  # noqa
