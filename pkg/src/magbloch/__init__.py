"""Plane-wave realisation of periodic magnetic Schrodinger operators.

Bloch fibers, band structures, complex-quasimomentum invertibility probes,
the transversal-averaging hypothesis on the magnetic potential, and the
auxiliary Dirac operator with its projection identities.
"""

from .lattice import DirectionFrame, Lattice, ReciprocalIndex, build_lattice, decompose, enumerate_indices
from .potential import SampledField, TrigPolynomial
from .conditions import AveragingMeasure, ConditionReport
from .fiber import FiberMatrix, FiberPoint, PlaneWaveBasis
from .spectrum import BandStructure, ThomasProbeReport
from .dirac import CliffordRep
from .verify import RatioReport

__version__ = "0.1.0"

__all__ = [
    "AveragingMeasure",
    "BandStructure",
    "CliffordRep",
    "ConditionReport",
    "DirectionFrame",
    "FiberMatrix",
    "FiberPoint",
    "Lattice",
    "PlaneWaveBasis",
    "RatioReport",
    "ReciprocalIndex",
    "SampledField",
    "ThomasProbeReport",
    "TrigPolynomial",
    "build_lattice",
    "decompose",
    "enumerate_indices",
]
