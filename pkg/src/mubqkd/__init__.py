"""Simulation of entanglement-based BBM92 key distribution with measurement
bases corrected from the tomographic nearest pure state."""

from . import channel, correction, harness, optics, protocol, qstate, timetag, tomography
from .config import RunConfig, load_config, parse_config
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
