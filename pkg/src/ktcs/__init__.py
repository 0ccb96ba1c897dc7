"""K-dimensional trio coherent states: construction, statistics, phase space,
completeness and trapped-ion preparation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError, KtcsError, ValidationError,
)
from .fock import (  # noqa: E402
    KtcsParams, TrioState, build_ktcs, build_tcs, normalization, normalization_series,
    overlap, overlap_closed_form,
)
from .statistics import (  # noqa: E402
    csi_measures, factorial_moment, find_crossover, joint_factorial_moment, mandel,
    mandel_limit, number_distribution,
)
from .phase_space import count_peaks, fringe_minimum, q_point, q_slice  # noqa: E402

__all__ = [
    "__version__", "KtcsError", "ValidationError", "ConvergenceError",
    "KtcsParams", "TrioState", "build_ktcs", "build_tcs", "normalization",
    "normalization_series", "overlap", "overlap_closed_form",
    "number_distribution", "factorial_moment", "joint_factorial_moment", "mandel",
    "mandel_limit", "csi_measures", "find_crossover",
    "q_point", "q_slice", "count_peaks", "fringe_minimum",
]
