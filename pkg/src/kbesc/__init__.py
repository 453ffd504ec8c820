"""Extremum seeking with certified surrogate gradient steps.

A sampled-data tuner for unknown steady-state cost maps: dithered standard
steps collect measurements, a minimum-norm kernel surrogate of the cost map
is refit online, and worst-case certificates decide when a surrogate
gradient step can replace measured ones without giving up descent.
"""

from .approximator import Approximation, Dataset, Sample, fit
from .certifier import (
    BoundKind,
    CertificateBound,
    armijo_upper_bound,
    descent_lower_bound,
)
from .conic import (
    BallLpProblem,
    QpProblem,
    SelectorTube,
    SolveResult,
    SolveStatus,
    TubeConstraint,
    solve_ball_lp,
    solve_qp,
)
from .errors import (
    ApproximationUnavailable,
    CertificationUnavailable,
    DataInconsistencyError,
    KbescError,
    SimulationDivergenceError,
)
from .esc import (
    EscConfig,
    RunTrace,
    StepKind,
    UpdateRecord,
    kernel_step,
    line_search,
    run,
    standard_step,
)
from .kernels import GramBlock, KernelSpec, SliceLabel
from .plant import (
    PlantModel,
    PlantSession,
    PlantState,
    initial_state,
    integrate,
    measure,
    static_map,
    two_state_benchmark,
    two_state_steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "Approximation",
    "ApproximationUnavailable",
    "BallLpProblem",
    "BoundKind",
    "CertificateBound",
    "CertificationUnavailable",
    "DataInconsistencyError",
    "Dataset",
    "EscConfig",
    "GramBlock",
    "KbescError",
    "KernelSpec",
    "PlantModel",
    "PlantSession",
    "PlantState",
    "QpProblem",
    "RunTrace",
    "Sample",
    "SelectorTube",
    "SimulationDivergenceError",
    "SliceLabel",
    "SolveResult",
    "SolveStatus",
    "StepKind",
    "TubeConstraint",
    "UpdateRecord",
    "armijo_upper_bound",
    "descent_lower_bound",
    "fit",
    "initial_state",
    "integrate",
    "kernel_step",
    "line_search",
    "measure",
    "run",
    "solve_ball_lp",
    "solve_qp",
    "standard_step",
    "static_map",
    "two_state_benchmark",
    "two_state_steady_state",
    "__version__",
]
