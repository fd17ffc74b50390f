"""Quantum measurement noise, disturbance and uncertainty relations in finite dimension."""
from qmeter.exceptions import (
    DimensionError,
    IncompatibleError,
    QmeterError,
    ValidationError,
    ZeroProbabilityError,
)
from qmeter.grid import CyclicGrid
from qmeter.instrument import Channel, Instrument
from qmeter.model import IndirectModel
from qmeter.povm import Povm
from qmeter.uncertainty import UncertaintyReport, evaluate

__version__ = "0.1.0"
