"""Compact generalized non-local operation, BatchNorm and the residual block.

Per channel group the response is evaluated as ``Theta @ (Phi.T @ g)``:
the ``P+1`` vector ``z`` is formed first, so the ``NC' x NC'`` pairwise
matrix never exists.  Everything below works on a leading batch axis
internally; BatchNorm statistics pool over batch and positions.  The
public functions take a single ``(N, C)`` feature map.
"""
from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._parallel import run_groups
from ._workspace import Scratch
from .core import BlockParams, as_feature_map, linear_transform
from .errors import ConfigError, DegenerateInputError, NumericError, ShapeError
from .kernels import KernelSpec, taylor_coefficients

BN_EPS = 1e-5
MATERIALIZE_LIMIT = 256


@dataclass(frozen=True)
class GroupConfig:
    groups: int = 1

    def __post_init__(self):
        if not isinstance(self.groups, (int, np.integer)) or self.groups < 1:
            raise ConfigError(f"group count must be a positive integer, got {self.groups!r}")

    def channels_per_group(self, c: int) -> int:
        if c % self.groups:
            raise ConfigError(f"{self.groups} groups do not divide C={c}")
        return c // self.groups


@dataclass(frozen=True, eq=False)
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = BN_EPS
    mode: str = "train_batch_stats"

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError(f"BatchNorm eps must be positive, got {self.eps}")
        if self.mode != "train_batch_stats":
            raise ConfigError(f"unsupported BatchNorm mode {self.mode!r}")
        gamma = np.asarray(self.gamma, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        if gamma.ndim != 1 or gamma.shape != beta.shape:
            raise ShapeError(f"gamma/beta must be equal-length vectors, got {gamma.shape}, {beta.shape}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True, eq=False)
class CgnlGradients:
    d_input: np.ndarray
    d_w_theta: np.ndarray
    d_w_phi: np.ndarray
    d_w_g: np.ndarray
    d_w_z: np.ndarray
    d_bn_gamma: np.ndarray
    d_bn_beta: np.ndarray

    def params(self) -> dict:
        """Parameter gradients keyed like :class:`~cgnl.core.BlockParams` fields."""
        return {"w_theta": self.d_w_theta, "w_phi": self.d_w_phi, "w_g": self.d_w_g,
                "w_z": self.d_w_z, "bn_gamma": self.d_bn_gamma, "bn_beta": self.d_bn_beta}


# Test hook for the verify command: perturbs the coefficients seen by the
# compact path only, so the oracle-equivalence property must catch it.
_coeff_fault: contextvars.ContextVar = contextvars.ContextVar("cgnl_coeff_fault", default=None)


@contextlib.contextmanager
def inject_coefficient_fault(order: int = 1):
    """Flip the sign of the series coefficient of ``order`` in the compact path."""
    token = _coeff_fault.set(order)
    try:
        yield
    finally:
        _coeff_fault.reset(token)


def _lift_weights(spec: KernelSpec):
    """Per-side lift weights with ``alpha_theta * alpha_phi == alpha_sq``."""
    a = taylor_coefficients(spec).as_array()
    fault = _coeff_fault.get()
    if fault is not None and fault < a.size:
        a[fault] = -a[fault]
    mag = np.sqrt(np.abs(a))
    return np.copysign(mag, a), mag


def _check(stage, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError(stage)


def _to_groups(m, cols):
    """``(B, N, C)`` -> ``(B, N*C')`` channel-major vec views of one group."""
    B, N, _ = m.shape
    return np.ascontiguousarray(m[:, :, cols].transpose(0, 2, 1)).reshape(B, -1)


def _from_groups(v, n):
    """Inverse of :func:`_to_groups`: ``(B, N*C')`` -> ``(B, N, C')``."""
    B = v.shape[0]
    return v.reshape(B, -1, n).transpose(0, 2, 1)


@dataclass
class _GroupCache:
    t: np.ndarray        # theta' after optional normalization, (B, M)
    f: np.ndarray        # phi', same
    u: np.ndarray        # g', (B, M)
    t_norm: np.ndarray | None
    f_norm: np.ndarray | None
    tl: np.ndarray       # lifted theta', (B, M, K)
    pl: np.ndarray
    z: np.ndarray        # (B, K)


def _core(xb, params, spec, groups, backend=None, threads=1, keep=False,
          materialize=False):
    B, N, C = xb.shape
    params.check_channels(C)
    cg = GroupConfig(groups).channels_per_group(C)
    kern = _backend.get(backend)
    at, ap = _lift_weights(spec)
    K = at.size
    theta = linear_transform(xb, params.w_theta)
    phi = linear_transform(xb, params.w_phi)
    gval = linear_transform(xb, params.w_g)
    _check("transform", theta, phi, gval)
    y = np.empty((B, N, C))
    caches = [None] * groups

    def one(k):
        cols = slice(k * cg, (k + 1) * cg)
        t, f, u = _to_groups(theta, cols), _to_groups(phi, cols), _to_groups(gval, cols)
        t_norm = f_norm = None
        if spec.normalize_inputs:
            t_norm = np.linalg.norm(t, axis=1)
            f_norm = np.linalg.norm(f, axis=1)
            if np.any(t_norm == 0) or np.any(f_norm == 0):
                raise DegenerateInputError(f"group {k}: cannot l2-normalize a zero theta/phi vector")
            t = t / t_norm[:, None]
            f = f / f_norm[:, None]
        M = t.shape[1]
        with Scratch() as ws:
            tl = ws.empty((B, M, K), "theta_lift")
            pl = ws.empty((B, M, K), "phi_lift")
            z = ws.empty((B, K), "z")
            out = np.empty((B, M))
            kern.compact_forward(t, f, u, at, ap, tl, pl, z, out)
            _check("lift", tl, pl)
            _check("z", z)
            if materialize:
                if M > MATERIALIZE_LIMIT:
                    raise ConfigError(f"materialized path is limited to NC' <= {MATERIALIZE_LIMIT}")
                out = np.einsum("bij,bj->bi", np.einsum("bip,bjp->bij", tl, pl), u)
        _check("output", out)
        y[:, :, cols] = _from_groups(out, N)
        if keep:
            caches[k] = _GroupCache(t, f, u, t_norm, f_norm, tl, pl, z)

    run_groups(one, groups, threads)
    return y, (theta, phi, gval, caches, at, ap, cg)


def cgnl_forward(x, params: BlockParams, spec: KernelSpec, grp: GroupConfig = GroupConfig(),
                 *, backend=None, threads: int = 1, materialize_pairwise: bool = False):
    """Grouped compact generalized non-local response ``Y`` (``N x C``).

    ``materialize_pairwise`` is a test-only switch that evaluates
    ``(Theta Phi^T) g`` instead of ``Theta (Phi^T g)``.
    """
    x = as_feature_map(x)
    y, _ = _core(x[None], params, spec, grp.groups, backend, threads,
                 materialize=materialize_pairwise)
    return y[0]


# --- BatchNorm ---------------------------------------------------------------

def _bn_forward(h, gamma, beta, eps):
    """BatchNorm over the rows of a 2-D array; returns output and backward cache."""
    rows = h.shape[0]
    if rows < 2:
        raise DegenerateInputError("BatchNorm statistics need at least two positions")
    mean = h.mean(axis=0)
    centered = h - mean
    var = (centered * centered).mean(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma)


def _bn_backward(dout, cache):
    xhat, inv_std, gamma = cache
    rows = dout.shape[0]
    d_beta = dout.sum(axis=0)
    d_gamma = (dout * xhat).sum(axis=0)
    dxhat = dout * gamma
    dh = (inv_std / rows) * (rows * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dh, d_gamma, d_beta


def batchnorm_forward(y, bn: BatchNormState) -> np.ndarray:
    """Training-mode BatchNorm with biased per-channel statistics over positions."""
    y = as_feature_map(y)
    if bn.gamma.shape != (y.shape[1],):
        raise ShapeError(f"BatchNorm has {bn.gamma.size} channels, input has {y.shape[1]}")
    out, _ = _bn_forward(y, bn.gamma, bn.beta, bn.eps)
    return out


# --- residual block ----------------------------------------------------------

def _block_forward(xb, params, spec, groups, use_bn=True, backend=None, threads=1, keep=False):
    B, N, C = xb.shape
    y, core = _core(xb, params, spec, groups, backend, threads, keep=keep)
    cg = core[-1]
    h = np.empty_like(y)
    for k in range(groups):
        cols = slice(k * cg, (k + 1) * cg)
        h[:, :, cols] = linear_transform(y[:, :, cols], params.w_z[cols, cols])
    _check("w_z", h)
    bn_cache = None
    if use_bn:
        bflat, bn_cache = _bn_forward(h.reshape(B * N, C), params.bn_gamma, params.bn_beta, BN_EPS)
        b = bflat.reshape(B, N, C)
        _check("batchnorm", b)
    else:
        b = h
    z = b + xb
    cache = (xb, params, spec, groups, use_bn, y, core, bn_cache) if keep else None
    return z, cache


def cgnl_block(x, params: BlockParams, spec: KernelSpec, grp: GroupConfig = GroupConfig(),
               *, use_bn: bool = True, backend=None, threads: int = 1):
    """Residual block ``Z = concat_g(BN(Y'_g Wz_g)) + X``.

    ``Wz`` acts per group through its diagonal ``C' x C'`` blocks.  With
    ``use_bn=False`` BatchNorm is replaced by the identity, which is the
    only meaningful choice for ``N = 1``.
    """
    x = as_feature_map(x)
    z, _ = _block_forward(x[None], params, spec, grp.groups, use_bn, backend, threads)
    return z[0]


def _dlift(v, alpha, K):
    """Derivative of the lift columns: ``p * alpha_p * v**(p-1)``, shape ``(B, M, K)``."""
    d = np.zeros(v.shape + (K,))
    pw = np.ones_like(v)
    for p in range(1, K):
        d[..., p] = (p * alpha[p]) * pw
        pw = pw * v
    return d


def _block_backward(cache, upstream):
    xb, params, spec, groups, use_bn, y, core, bn_cache = cache
    theta, phi, gval, caches, at, ap, cg = core
    B, N, C = xb.shape
    K = at.size
    dx = upstream.copy()
    if use_bn:
        dh_flat, d_gamma, d_beta = _bn_backward(upstream.reshape(B * N, C), bn_cache)
        dh = dh_flat.reshape(B, N, C)
    else:
        dh = upstream
        d_gamma = np.zeros(C)
        d_beta = np.zeros(C)

    d_wz = np.zeros((C, C))
    d_theta = np.empty_like(theta)
    d_phi = np.empty_like(phi)
    d_g = np.empty_like(gval)
    for k in range(groups):
        cols = slice(k * cg, (k + 1) * cg)
        c = caches[k]
        wz = params.w_z[cols, cols]
        d_wz[cols, cols] = np.einsum("bni,bnj->ij", y[:, :, cols], dh[:, :, cols])
        dy = _to_groups(linear_transform(dh[:, :, cols], wz.T), slice(None))
        dz = np.einsum("bmp,bm->bp", c.tl, dy)
        dt = dy * np.einsum("bmp,bp->bm", _dlift(c.t, at, K), c.z)
        du = np.einsum("bmp,bp->bm", c.pl, dz)
        df = c.u * np.einsum("bmp,bp->bm", _dlift(c.f, ap, K), dz)
        if spec.normalize_inputs:
            dt = (dt - c.t * np.sum(c.t * dt, axis=1, keepdims=True)) / c.t_norm[:, None]
            df = (df - c.f * np.sum(c.f * df, axis=1, keepdims=True)) / c.f_norm[:, None]
        d_theta[:, :, cols] = _from_groups(dt, N)
        d_phi[:, :, cols] = _from_groups(df, N)
        d_g[:, :, cols] = _from_groups(du, N)

    grads = {}
    for name, d in (("w_theta", d_theta), ("w_phi", d_phi), ("w_g", d_g)):
        grads[name] = np.einsum("bnc,bnd->cd", xb, d)
        dx += linear_transform(d, getattr(params, name).T)
    _check("backward", dx, *grads.values(), d_wz)
    return CgnlGradients(dx, grads["w_theta"], grads["w_phi"], grads["w_g"], d_wz,
                         d_gamma, d_beta)


def cgnl_backward(x, params: BlockParams, spec: KernelSpec, grp: GroupConfig,
                  upstream, *, use_bn: bool = True, backend=None) -> CgnlGradients:
    """Gradients of ``sum(upstream * cgnl_block(x))`` w.r.t. the input and all parameters.

    Includes the chain through l2 normalization (when the kernel uses it)
    and through the BatchNorm batch statistics.
    """
    x = as_feature_map(x)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != x.shape:
        raise ShapeError(f"upstream gradient shape {upstream.shape} != input shape {x.shape}")
    _check("upstream", upstream)
    _, cache = _block_forward(x[None], params, spec, grp.groups, use_bn, backend, keep=True)
    g = _block_backward(cache, upstream[None])
    return CgnlGradients(g.d_input[0], g.d_w_theta, g.d_w_phi, g.d_w_g, g.d_w_z,
                         g.d_bn_gamma, g.d_bn_beta)
