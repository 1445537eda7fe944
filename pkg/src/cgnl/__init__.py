"""Compact generalized non-local operation with brute-force oracles."""
from . import _backend
from .analysis import AffinityMask, cgnl_affinity, export_mask, nl_affinity
from .compact import (BatchNormState, CgnlGradients, GroupConfig, batchnorm_forward,
                      cgnl_backward, cgnl_block, cgnl_forward)
from .core import BlockParams, devectorize, init_params, linear_transform, vectorize
from .errors import (CgnlError, ConfigError, DegenerateInputError, FormatError, GeometryError,
                     NumericError, OracleLimitError, ShapeError)
from .io import read_feature_map, write_feature_map
from .kernels import (KernelSpec, TaylorCoeffs, kernel_exact, lift, remainder_bound,
                      taylor_coefficients, taylor_eval)
from .oracle import bilinear_pool, gnl_forward_exact, gnl_pairwise, nl_forward, nl_pairwise

__version__ = "0.1.0"
BACKEND = _backend.NAME
