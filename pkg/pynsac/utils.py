import logging
import os

import numpy

LOG_FORMAT = "%(levelname)s:%(name)s:%(message)s"


def show_versions():
    """Method to print the version of dependencies."""
    from pynsac import __version__ as pn_version
    from pandas import __version__ as pd_version
    from numpy import __version__ as np_version
    from scipy import __version__ as sp_version
    from sys import version as os_version
    from xarray import __version__ as xr_version
    from yaml import __version__ as yaml_version

    msg = (
        f"Python version: {os_version}\n"
        f"Numpy version: {np_version}\n"
        f"Scipy version: {sp_version}\n"
        f"Pandas version: {pd_version}\n"
        f"xarray version: {xr_version}\n"
        f"PyYAML version: {yaml_version}\n"
        f"pynsac version: {pn_version}"
    )
    return print(msg)


def check_positive(**values):
    """Method to check that every named value is strictly positive and finite."""
    for name, value in values.items():
        if value is None or not numpy.isfinite(value) or value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")


def check_nonnegative(**values):
    """Method to check that every named value is nonnegative and finite."""
    for name, value in values.items():
        if value is None or not numpy.isfinite(value) or value < 0:
            raise ValueError(f"{name} must be nonnegative, got {value}")


def check_time_grid(coarse, fine, name="k"):
    """Method to check that ``coarse`` is an integer multiple of ``fine``.

    Returns
    -------
    int, the ratio ``coarse / fine``.

    """
    ratio = coarse / fine
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * ratio:
        raise ValueError(
            f"{name} = {coarse} is not an integer multiple of {fine}; the time "
            f"grids must nest"
        )
    return m


def steps_for(duration, k, name="duration"):
    """Method to convert a time span into a whole number of steps of size k."""
    n = int(round(duration / k))
    if abs(duration - n * k) > 1e-9 * max(duration, k):
        raise ValueError(f"{name} = {duration} is not a multiple of k = {k}")
    return n


def worker_count():
    """Number of worker processes from the ``PYNSAC_WORKERS`` variable."""
    raw = os.environ.get("PYNSAC_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PYNSAC_WORKERS must be an integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"PYNSAC_WORKERS must be >= 1, got {n}")
    return n


def setup_logging(level=logging.INFO):
    """Install a single stderr handler on the ``pynsac`` logger."""
    logger = logging.getLogger("pynsac")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(level)
    return logger
