import logging
import sys

LOG_FMT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"


def setup_logging(level: int | str = logging.INFO) -> logging.Logger:
    """Route every harness logger to stderr so stdout stays for results."""
    logging.basicConfig(level=level, format=LOG_FMT, stream=sys.stderr, force=True)
    # httpx logs every request at INFO
    logging.getLogger("httpx").setLevel(logging.WARNING)
    return logging.getLogger("gridqa")
