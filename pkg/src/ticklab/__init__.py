"""ticklab: statistics, witnesses and certified bounds for ticking clocks."""
__version__ = "0.1.0"

from .errors import TickLabError  # noqa: E402
from .models import (  # noqa: E402
    ClassicalClock,
    MulticyclicParams,
    QuantumClock,
    QubitParams,
    build_cyclic,
    build_multicyclic,
    build_oneway,
    build_qubit,
    build_qutrit,
    classical,
    quantum,
)
from .stats import TickStatistics, pmf, pmf_series, tick_statistics  # noqa: E402

__all__ = [
    "ClassicalClock",
    "MulticyclicParams",
    "QuantumClock",
    "QubitParams",
    "TickLabError",
    "TickStatistics",
    "build_cyclic",
    "build_multicyclic",
    "build_oneway",
    "build_qubit",
    "build_qutrit",
    "classical",
    "pmf",
    "pmf_series",
    "quantum",
    "tick_statistics",
    "__version__",
]
