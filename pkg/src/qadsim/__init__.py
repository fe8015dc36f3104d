"""Circuit quantum acousto-dynamics simulation and analysis toolkit.

Simulates a superconducting qubit strongly coupled to a single mode of a
bulk acoustic resonator: open-system Jaynes-Cummings dynamics with pulse
protocols for climbing the phonon Fock ladder, constrained Fock-population
extraction from probe traces, displaced-parity Wigner tomography with
maximum-likelihood state reconstruction, and an acoustic mode-structure and
coupling-rate solver for the plano-convex resonator geometry.
"""

__version__ = "0.1.0"

from .dynamics import (  # noqa: F401
    JointState,
    PulseSegment,
    SystemParams,
    TimeTrace,
)
from .populations import PopulationDistribution  # noqa: F401
from .tomography import Preparation, WignerGrid  # noqa: F401
from .acoustic import AcousticGeometry, MaterialParams, ModeRecord  # noqa: F401
