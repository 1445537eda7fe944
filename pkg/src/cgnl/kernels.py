"""Pairwise kernels and their truncated Taylor factorization.

Every supported kernel is written as a power series in the scalar product
``x = theta_i * phi_j``::

    f(theta_i, phi_j) ~= sum_{p=0}^{P} alpha_p**2 * x**p

which splits into the rank-(P+1) product of two lifted matrices whose
columns are ``alpha_p * theta**p`` and ``alpha_p * phi**p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError

FAMILIES = ("dot", "embedded_gaussian", "rbf")
ALIASES = {"dot": "dot", "egauss": "embedded_gaussian", "embedded_gaussian": "embedded_gaussian",
           "rbf": "rbf"}
MAX_ORDER = 20


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and hyperparameters.

    ``normalize_inputs=None`` resolves to True for ``rbf`` and False for
    the other families.  ``gamma`` is only read by ``rbf``.
    """

    family: str = "dot"
    order: int = 1
    gamma: float = 1e-4
    normalize_inputs: bool | None = None

    def __post_init__(self):
        family = ALIASES.get(self.family)
        if family is None:
            raise ConfigError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if self.normalize_inputs is None:
            object.__setattr__(self, "normalize_inputs", family == "rbf")
        if not isinstance(self.order, (int, np.integer)) or self.order < 0:
            raise ConfigError(f"Taylor order must be a nonnegative integer, got {self.order!r}")
        if self.order > MAX_ORDER:
            raise ConfigError(f"Taylor order {self.order} exceeds the supported maximum {MAX_ORDER}")
        if family == "dot" and self.order < 1:
            raise ConfigError("dot kernel needs order >= 1 to represent the degree-1 term")
        if family == "rbf":
            if not self.gamma > 0:
                raise ConfigError(f"rbf gamma must be positive, got {self.gamma}")
            if not self.normalize_inputs:
                raise ConfigError("rbf kernel is only supported with l2-normalized inputs")


@dataclass(frozen=True)
class TaylorCoeffs:
    """Squared series coefficients ``alpha_sq[p]`` for ``p = 0..P``.

    For ``rbf`` the constant prefactor ``beta`` is already folded into
    ``alpha_sq``; it is kept separately for reporting.
    """

    alpha_sq: tuple
    beta: float = 1.0

    @property
    def order(self) -> int:
        return len(self.alpha_sq) - 1

    def as_array(self) -> np.ndarray:
        return np.array([float(a) for a in self.alpha_sq], dtype=np.float64)

    def alpha(self) -> np.ndarray:
        """Nonnegative square roots, the per-column weights of the lift."""
        return np.sqrt(self.as_array())


def taylor_coefficients(spec: KernelSpec, ctx=math) -> TaylorCoeffs:
    """Closed-form series coefficients for ``spec``.

    ``ctx`` supplies ``exp`` and ``factorial``; pass :mod:`mpmath` to get
    the same coefficients in extended precision (not cached, since the
    working precision is global to mpmath).
    """
    if ctx is math:
        return _float_coefficients(spec)
    return _coefficients(spec, ctx)


@lru_cache(maxsize=128)
def _float_coefficients(spec: KernelSpec) -> TaylorCoeffs:
    return _coefficients(spec, math)


def _coefficients(spec: KernelSpec, ctx) -> TaylorCoeffs:
    P = spec.order
    if spec.family == "dot":
        alpha_sq = tuple(ctx.exp(0) * (1 if p == 1 else 0) for p in range(P + 1))
        return TaylorCoeffs(alpha_sq, beta=1.0)
    if spec.family == "embedded_gaussian":
        return TaylorCoeffs(tuple(ctx.exp(0) / ctx.factorial(p) for p in range(P + 1)), beta=1.0)
    g2 = 2 * ctx.exp(0) * spec.gamma
    beta = ctx.exp(-g2)
    return TaylorCoeffs(tuple(beta * g2 ** p / ctx.factorial(p) for p in range(P + 1)), beta=beta)


def kernel_exact(theta_i, phi_j, spec: KernelSpec, ctx=math):
    """Exact kernel value between two scalar entries."""
    if spec.family == "dot":
        return theta_i * phi_j
    if spec.family == "embedded_gaussian":
        return ctx.exp(theta_i * phi_j)
    d = theta_i - phi_j
    return ctx.exp(-spec.gamma * (d * d))


def taylor_eval(theta_i, phi_j, coeffs: TaylorCoeffs):
    """Truncated series ``sum_p alpha_p**2 * (theta_i*phi_j)**p``.

    Powers are built by repeated multiplication and accumulated in
    ascending order; the compiled and numpy oracles use the same order.
    """
    x = theta_i * phi_j
    a = coeffs.alpha_sq
    acc = a[0]
    pw = 1
    for p in range(1, len(a)):
        pw = pw * x
        acc = acc + a[p] * pw
    return acc


def remainder_bound(x, spec: KernelSpec):
    """Lagrange bound on ``|kernel - series|`` at scalar product ``x``.

    ``embedded_gaussian``: ``e**max(x,0) |x|**(P+1) / (P+1)!``.
    ``rbf`` (normalized inputs): ``beta e**max(2 gamma x,0) (2 gamma |x|)**(P+1) / (P+1)!``.
    The dot series is exact, so its bound is zero.
    """
    x = np.asarray(x, dtype=np.float64)
    P = spec.order
    if spec.family == "dot":
        return np.zeros_like(x)
    if spec.family == "embedded_gaussian":
        return np.exp(np.maximum(x, 0.0)) * np.abs(x) ** (P + 1) / math.factorial(P + 1)
    g2 = 2.0 * spec.gamma
    return (math.exp(-g2) * np.exp(np.maximum(g2 * x, 0.0))
            * (g2 * np.abs(x)) ** (P + 1) / math.factorial(P + 1))


def lift(v, coeffs: TaylorCoeffs) -> np.ndarray:
    """Lift a vector to the ``(len(v), P+1)`` matrix ``[alpha_p * v**p]``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"lift expects a 1-D vector, got shape {v.shape}")
    alpha = coeffs.alpha()
    out = np.empty((v.size, alpha.size))
    pw = np.ones_like(v)
    for p in range(alpha.size):
        out[:, p] = alpha[p] * pw
        pw = pw * v
    return out


def l2_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise DegenerateInputError("cannot l2-normalize a zero vector")
    return v / norm


def parse_kernel(name: str, order: int | None = None, gamma: float = 1e-4,
                 normalize: bool | None = None) -> KernelSpec:
    """Build a spec from CLI-style names (``dot``, ``egauss``, ``rbf``)."""
    family = ALIASES.get(name)
    if family is None:
        raise ConfigError(f"unknown kernel {name!r}")
    if order is None:
        order = 1 if family == "dot" else 3
    return KernelSpec(family, order=order, gamma=gamma, normalize_inputs=normalize)
