"""Feature maps, block parameters and the shared 1x1 linear transforms.

A feature map is a plain ``(N, C)`` float64 array: ``N`` collapsed
spatial(-temporal) positions by ``C`` channels.  Vectorization is
channel-major (column stacking): element ``c * N + n`` of ``vec(X)`` is
``X[n, c]``, so a contiguous channel group maps to a contiguous slice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

FeatureMap = np.ndarray
VecView = np.ndarray

SCHEMES = ("zero_bn_default", "uniform_range")


def as_feature_map(x) -> FeatureMap:
    """Validate and coerce ``x`` to a finite float64 ``(N, C)`` array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"feature map must be 2-D (N, C), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"feature map needs N >= 1 and C >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("feature map contains NaN or Inf")
    return arr


@dataclass(frozen=True, eq=False)
class BlockParams:
    """The four ``C x C`` transforms plus the BatchNorm affine pair.

    ``bn_gamma``/``bn_beta`` are the BatchNorm scale and shift, unrelated
    to the RBF bandwidth on :class:`~cgnl.kernels.KernelSpec`.
    """

    w_theta: np.ndarray
    w_phi: np.ndarray
    w_g: np.ndarray
    w_z: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray

    def __post_init__(self):
        c = np.shape(self.w_theta)[0] if np.ndim(self.w_theta) == 2 else -1
        for name in ("w_theta", "w_phi", "w_g", "w_z"):
            w = np.array(getattr(self, name), dtype=np.float64)
            if w.shape != (c, c):
                raise ShapeError(f"{name} must be square C x C with C={c}, got {w.shape}")
            w.setflags(write=False)
            object.__setattr__(self, name, w)
        for name in ("bn_gamma", "bn_beta"):
            v = np.array(getattr(self, name), dtype=np.float64)
            if v.shape != (c,):
                raise ShapeError(f"{name} must have length C={c}, got {v.shape}")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def channels(self) -> int:
        return self.w_theta.shape[0]

    def replace(self, **changes) -> "BlockParams":
        fields = {k: getattr(self, k) for k in PARAM_NAMES}
        fields.update(changes)
        return BlockParams(**fields)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def check_channels(self, c: int) -> None:
        if self.channels != c:
            raise ShapeError(f"parameters are for C={self.channels}, feature map has C={c}")


PARAM_NAMES = ("w_theta", "w_phi", "w_g", "w_z", "bn_gamma", "bn_beta")


def linear_transform(x: FeatureMap, w: np.ndarray) -> FeatureMap:
    """Return ``X @ W``, the 1x1-convolution over channels.

    Products are accumulated over the input channel in ascending order
    with separate multiply and add, so the result is reproducible against
    a plain triple loop.  Leading batch axes on ``x`` are allowed.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"weight must be square, got {w.shape}")
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"x has {x.shape[-1]} channels, weight expects {w.shape[0]}")
    out = x[..., 0:1] * w[0]
    for k in range(1, w.shape[0]):
        out += x[..., k:k + 1] * w[k]
    return out


def vectorize(x: FeatureMap) -> VecView:
    """Channel-major ``vec``: ``[X[:, 0], X[:, 1], ...]`` concatenated."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"vectorize expects a 2-D array, got shape {x.shape}")
    return np.ascontiguousarray(x.T).reshape(-1)


def devectorize(v: VecView, n: int, c: int) -> FeatureMap:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != n * c:
        raise ShapeError(f"vector of length {v.size} cannot be folded into {n} x {c}")
    return np.ascontiguousarray(v.reshape(c, n).T)


def init_params(c: int, seed: int, scheme: str = "zero_bn_default") -> BlockParams:
    """Deterministic parameters for a ``C``-channel block.

    Weights are uniform in ``[-1/sqrt(C), 1/sqrt(C)]``.  ``zero_bn_default``
    zeroes the BatchNorm affine pair so the residual block starts as the
    identity; ``uniform_range`` draws it from the same range as the weights.
    """
    if c < 1:
        raise ShapeError(f"channel count must be >= 1, got {c}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}; expected one of {SCHEMES}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(c)
    w = [rng.uniform(-bound, bound, size=(c, c)) for _ in range(4)]
    if scheme == "zero_bn_default":
        gamma = np.zeros(c)
        beta = np.zeros(c)
    else:
        gamma = rng.uniform(-bound, bound, size=c)
        beta = rng.uniform(-bound, bound, size=c)
    return BlockParams(*w, bn_gamma=gamma, bn_beta=beta)
