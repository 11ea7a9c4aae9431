"""Distance-driven 802.11ax MCS selection from FTM range readings, with a DCF link simulator."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("ftmrate")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
