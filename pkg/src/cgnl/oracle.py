"""Brute-force references that materialize the full pairwise matrix.

These exist for correctness checks and as the quadratic baseline of the
benchmark; they are not meant to scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._parallel import run_groups
from ._workspace import Scratch
from .core import BlockParams, as_feature_map, devectorize, linear_transform
from .errors import ConfigError, OracleLimitError, ShapeError
from .kernels import KernelSpec, l2_normalize, taylor_coefficients

ORACLE_LIMIT = 4096
FAMILY_CODE = {"dot": 0, "embedded_gaussian": 1, "rbf": 2}


@dataclass(frozen=True, eq=False)
class PairwiseMatrix:
    data: np.ndarray
    kind: str  # "nl" (N x N) or "gnl" (NC x NC)


def ordered_matmul(a, b) -> np.ndarray:
    """``a @ b`` summed over the inner index in ascending order."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.multiply.outer(a[:, 0], b[0])
    for k in range(1, a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k])
    return out


def dot_pairwise(theta, phi) -> np.ndarray:
    """Dot-product pairwise term ``theta @ phi.T`` over rows."""
    return ordered_matmul(theta, np.asarray(phi, dtype=np.float64).T)


def nl_pairwise(x, params: BlockParams) -> PairwiseMatrix:
    x = as_feature_map(x)
    params.check_channels(x.shape[1])
    theta = linear_transform(x, params.w_theta)
    phi = linear_transform(x, params.w_phi)
    return PairwiseMatrix(dot_pairwise(theta, phi), "nl")


def nl_forward(x, params: BlockParams) -> np.ndarray:
    """Original non-local response ``X Wt Wp^T X^T X Wg`` (dot product, unnormalized)."""
    x = as_feature_map(x)
    pair = nl_pairwise(x, params).data
    g = linear_transform(x, params.w_g)
    return ordered_matmul(pair, g)


def bilinear_pool(x) -> np.ndarray:
    """Second-order descriptor ``X^T X`` (exactly symmetric)."""
    x = as_feature_map(x)
    return ordered_matmul(x.T, x)


def group_vectors(x, params: BlockParams, spec: KernelSpec, groups: int):
    """Per-group ``(theta', phi', g')`` vec views after the shared transforms.

    Normalization of ``theta'``/``phi'`` follows ``spec.normalize_inputs``.
    """
    x = as_feature_map(x)
    n, c = x.shape
    params.check_channels(c)
    if groups < 1 or c % groups:
        raise ConfigError(f"{groups} groups do not divide C={c}")
    cg = c // groups
    mats = [linear_transform(x, w) for w in (params.w_theta, params.w_phi, params.w_g)]
    out = []
    for k in range(groups):
        cols = slice(k * cg, (k + 1) * cg)
        t, p, g = (np.ascontiguousarray(m[:, cols].T).reshape(-1) for m in mats)
        if spec.normalize_inputs:
            t, p = l2_normalize(t), l2_normalize(p)
        out.append((t, p, g))
    return out


def gnl_pairwise(x, params: BlockParams, spec: KernelSpec, use_taylor: bool = False,
                 group: int = 0, groups: int = 1) -> PairwiseMatrix:
    """The ``NC' x NC'`` pairwise matrix of one group (``NC x NC`` for G=1)."""
    t, p, g = group_vectors(x, params, spec, groups)[group]
    pair = np.empty((t.size, t.size))
    _backend.active.pairwise_forward(
        t, p, g, taylor_coefficients(spec).as_array(), FAMILY_CODE[spec.family],
        float(spec.gamma), bool(use_taylor), pair, np.empty(t.size))
    return PairwiseMatrix(pair, "gnl")


def gnl_forward_exact(x, params: BlockParams, spec: KernelSpec, use_taylor: bool = False,
                      groups: int = 1, limit: int = ORACLE_LIMIT, backend=None,
                      threads: int = 1) -> np.ndarray:
    """Generalized non-local response via the materialized pairwise matrix.

    With ``use_taylor`` the entries are the truncated series (the target the
    compact path must reproduce); otherwise the exact kernel.  With
    ``groups > 1`` each channel group gets its own block, i.e. the pairwise
    matrix is block diagonal.
    """
    x = as_feature_map(x)
    n, c = x.shape
    if n * c > limit:
        raise OracleLimitError(f"NC={n * c} exceeds the oracle limit {limit}")
    kern = _backend.get(backend)
    vecs = group_vectors(x, params, spec, groups)
    alpha_sq = taylor_coefficients(spec).as_array()
    cg = c // groups
    y = np.empty((n, c))

    def one(k):
        t, p, g = vecs[k]
        with Scratch() as ws:
            pair = ws.empty((t.size, t.size), "gnl_pairwise")
            out = np.empty(t.size)
            kern.pairwise_forward(t, p, g, alpha_sq, FAMILY_CODE[spec.family],
                                  float(spec.gamma), bool(use_taylor), pair, out)
        y[:, k * cg:(k + 1) * cg] = devectorize(out, n, cg)

    run_groups(one, groups, threads)
    return y
