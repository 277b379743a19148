"""Skorokhod problem and reflected SDEs on the nonnegative orthant.

Reflection at the face ``{x_j = 0}`` pushes along the j-th column of
``I - Q^T`` for a nonnegative zero-diagonal matrix ``Q``.  The central
algorithm is the fast scheme, which applies one positive-part push per grid
step instead of a full projection.
"""

from .core import ReflectionMatrix, positive_part, read_matrix, sup_norm, validate_matrix
from .paths import (
    GridPath,
    StepFunction,
    delay_one_step,
    discretize,
    modulus_of_continuity,
    read_path_csv,
    sup_distance,
    write_path_csv,
)
from .projection import ProjectionResult, project_fixed_point, verify_lemma1, z_sequence
from .report import RateReport, fit_loglog
from .sde import (
    DiffusionModel,
    DriverStream,
    WienerConfig,
    coarsen,
    fast_euler_diffusion,
    fast_euler_semimartingale,
    generate_wiener,
    strong_error,
)
from .skorokhod import (
    BoundReport,
    SkorokhodSolution,
    check_theorem3,
    check_theorem4,
    fast_scheme,
    fixed_point_oracle,
    step_function_exact,
)

__version__ = "0.1.0"
