"""Nuclear-norm regularized matrix completion with relative recovery bounds."""

from .errors import InvalidArgument
from .linalg import TruncatedSVD, norms, svd, truncate
from .sampling import (
    ObservationSet,
    SampleMultiset,
    apply_romega,
    max_multiplicity,
    romega_inner,
    sample_uniform,
)
from .solver import SolverConfig, SolverResult, kkt_residual, select_lambda, solve, svt_prox
from .tangent import TangentSpace, coherence, project_t, project_tperp

__version__ = "0.1.0"
