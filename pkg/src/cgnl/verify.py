"""Invariant suite run by ``cgnl verify``.

Each property is a small function returning ``(ok, detail)``; the suite
runs them all and reports one line per property.  The checks are scaled
down versions of the pytest suite so the command finishes in seconds.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import mpmath
import numpy as np

from . import _backend
from .analysis import export_mask, nl_affinity, read_mask_csv, cgnl_affinity
from .compact import (BN_EPS, BatchNormState, GroupConfig, batchnorm_forward, cgnl_backward,
                      cgnl_block, cgnl_forward)
from .core import BlockParams, devectorize, init_params, linear_transform, vectorize
from .kernels import (KernelSpec, kernel_exact, lift, remainder_bound, taylor_coefficients,
                      taylor_eval)
from .oracle import bilinear_pool, dot_pairwise, gnl_forward_exact, nl_forward

PROPERTIES = []


def prop(name):
    def deco(fn):
        PROPERTIES.append((name, fn))
        return fn
    return deco


@dataclass
class PropertyResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def rel_diff(a, b) -> float:
    """``max |a - b| / (1 + |b|)`` elementwise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))


def random_params(c, rng) -> BlockParams:
    """Parameters with every entry drawn from U(-1/sqrt(C), 1/sqrt(C)), BN affine included."""
    return init_params(c, int(rng.integers(2**31)), "uniform_range")


# --- truncation error measurement --------------------------------------------

def truncation_samples(spec: KernelSpec, count: int, rng):
    """Random ``(theta, phi)`` pairs with ``|theta*phi| <= 1``.

    For ``rbf`` the pairs lie on ``theta**2 + phi**2 = 2``: the scalar form
    of unit-norm inputs, for which ``exp(-gamma (theta - phi)**2)`` equals
    ``exp(-2 gamma) exp(2 gamma theta phi)`` and the series is a pure
    truncation of the second factor.
    """
    if spec.family == "rbf":
        t = rng.uniform(0, 2 * np.pi, size=count)
        return math.sqrt(2) * np.cos(t), math.sqrt(2) * np.sin(t)
    return rng.uniform(-1, 1, size=count), rng.uniform(-1, 1, size=count)


def truncation_errors(spec: KernelSpec, theta, phi, dps: int = 40):
    """Measured ``|kernel_exact - taylor_eval|`` at 40 significant digits.

    The remainder of the rbf series at gamma=1e-4 is ~1e-16, below the
    spacing of doubles near 1, so the measurement is carried out in
    mpmath with the closed-form coefficients.
    """
    with mpmath.workdps(dps):
        coeffs = taylor_coefficients(spec, ctx=mpmath)
        out = np.empty(len(theta))
        for i, (t, p) in enumerate(zip(theta, phi)):
            t, p = mpmath.mpf(float(t)), mpmath.mpf(float(p))
            if spec.family == "rbf":
                # doubles sit ~1 ulp off the circle; put phi back on it exactly
                p = mpmath.sign(p) * mpmath.sqrt(2 - t * t)
            out[i] = float(abs(kernel_exact(t, p, spec, ctx=mpmath) - taylor_eval(t, p, coeffs)))
    return out


# --- finite differences ------------------------------------------------------

def finite_difference_grads(x, params, spec, grp, upstream, use_bn=True, h=1e-5):
    """Central differences of ``sum(upstream * cgnl_block(x))`` for the input and every parameter."""
    def loss(xx, pp):
        return float(np.sum(upstream * cgnl_block(xx, pp, spec, grp, use_bn=use_bn)))

    def fd(arr, rebuild):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            plus = arr.copy()
            minus = arr.copy()
            plus[idx] += h
            minus[idx] -= h
            g[idx] = (loss(*rebuild(plus)) - loss(*rebuild(minus))) / (2 * h)
        return g

    out = {"d_input": fd(np.asarray(x, dtype=np.float64), lambda v: (v, params))}
    for name in ("w_theta", "w_phi", "w_g", "w_z", "bn_gamma", "bn_beta"):
        out[name] = fd(np.array(getattr(params, name)), lambda v, n=name: (x, params.replace(**{n: v})))
    return out


def grad_rel_error(analytic, numeric, floor=1e-6) -> float:
    """``max |a - n| / max(|a|, |n|, floor)``; the floor keeps exact zeros from dividing by 0."""
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def gradient_check(x, params, spec, grp, upstream, use_bn=True) -> float:
    g = cgnl_backward(x, params, spec, grp, upstream, use_bn=use_bn)
    num = finite_difference_grads(x, params, spec, grp, upstream, use_bn)
    pairs = [(g.d_input, num["d_input"])]
    pairs += [(g.params()[k], num[k]) for k in g.params()]
    return max(grad_rel_error(a, n) for a, n in pairs)


# --- properties --------------------------------------------------------------

@prop("core.linear_transform_linearity")
def _linearity(rng):
    x1, x2 = rng.uniform(-1, 1, (2, 7, 5))
    w = rng.uniform(-1, 1, (5, 5))
    a, b = 0.7, -1.3
    lhs = linear_transform(a * x1 + b * x2, w)
    rhs = a * linear_transform(x1, w) + b * linear_transform(x2, w)
    err = float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1e-300))
    return err < 1e-12, f"relative error {err:.2e}"


@prop("core.vectorize_roundtrip")
def _roundtrip(rng):
    for n in range(1, 33, 7):
        for c in range(1, 33, 5):
            x = rng.standard_normal((n, c))
            if not np.array_equal(devectorize(vectorize(x), n, c), x):
                return False, f"mismatch at N={n}, C={c}"
    return True, "exact for sampled N, C in [1, 32]"


@prop("core.row_permutation_commutes")
def _row_perm(rng):
    x = rng.standard_normal((9, 4))
    w = rng.standard_normal((4, 4))
    perm = rng.permutation(9)
    ok = np.array_equal(linear_transform(x[perm], w), linear_transform(x, w)[perm])
    return ok, "bitwise" if ok else "permuted rows differ"


@prop("kernels.dot_series_exact")
def _dot_exact(rng):
    spec = KernelSpec("dot", order=3)
    coeffs = taylor_coefficients(spec)
    t, p = rng.standard_normal((2, 1000))
    ok = all(taylor_eval(float(a), float(b), coeffs) == kernel_exact(float(a), float(b), spec)
             for a, b in zip(t, p))
    return ok, "bitwise over 1000 points" if ok else "series differs from product"


@prop("kernels.truncation_bound")
def _truncation(rng):
    worst = 0.0
    for spec in (KernelSpec("embedded_gaussian", order=3), KernelSpec("rbf", order=3, gamma=1e-4)):
        t, p = truncation_samples(spec, 10_000, rng)
        err = truncation_errors(spec, t, p)
        bound = remainder_bound(t * p, spec)
        ratio = float(np.max(err / np.maximum(bound, 1e-300)))
        worst = max(worst, ratio)
    return worst <= 2.0, f"max error/bound {worst:.3f} (limit 2)"


@prop("kernels.lift_factorization")
def _lift_fact(rng):
    worst = 0.0
    for spec in (KernelSpec("embedded_gaussian", order=3), KernelSpec("dot", order=2),
                 KernelSpec("rbf", order=3, gamma=0.05)):
        coeffs = taylor_coefficients(spec)
        t, p = rng.uniform(-1, 1, (2, 24))
        prod = lift(t, coeffs) @ lift(p, coeffs).T
        ref = np.array([[taylor_eval(a, b, coeffs) for b in p] for a in t])
        worst = max(worst, rel_diff(prod, ref))
    return worst < 1e-12, f"max rel diff {worst:.2e}"


@prop("kernels.coefficients_nonnegative_decreasing")
def _coeff_mono(rng):
    for gamma in (1e-4, 0.1, 0.45):
        a = taylor_coefficients(KernelSpec("rbf", order=8, gamma=gamma)).as_array()
        if np.any(a < 0) or np.any(np.diff(a) > 0):
            return False, f"gamma={gamma}: {a}"
    return True, "rbf alpha_p^2 >= 0 and decreasing for 2*gamma < 1"


@prop("oracle.bilinear_special_case")
def _bilinear(rng):
    x = rng.standard_normal((5, 4))
    err = float(np.max(np.abs(dot_pairwise(x.T, x.T) - bilinear_pool(x))))
    return err < 1e-12, f"max abs diff {err:.2e}"


@prop("oracle.permutation_equivariance")
def _oracle_perm(rng):
    x = rng.uniform(-1, 1, (7, 3))
    params = random_params(3, rng)
    perm = rng.permutation(7)
    spec = KernelSpec("embedded_gaussian", order=3)
    e1 = np.max(np.abs(nl_forward(x[perm], params) - nl_forward(x, params)[perm]))
    e2 = np.max(np.abs(gnl_forward_exact(x[perm], params, spec)
                       - gnl_forward_exact(x, params, spec)[perm]))
    err = float(max(e1, e2))
    return err < 1e-10, f"max abs diff {err:.2e}"


@prop("oracle.gnl_single_channel_is_nl")
def _gnl_c1(rng):
    x = rng.uniform(-1, 1, (6, 1))
    params = random_params(1, rng)
    err = rel_diff(gnl_forward_exact(x, params, KernelSpec("dot")), nl_forward(x, params))
    return err < 1e-12, f"max rel diff {err:.2e}"


def _spec_grid():
    yield KernelSpec("dot", order=1)
    for P in (1, 2, 3):
        yield KernelSpec("embedded_gaussian", order=P)
    yield KernelSpec("rbf", order=3, gamma=1e-4)


@prop("cgnl.oracle_equivalence")
def _oracle_equiv(rng):
    worst = 0.0
    for spec in _spec_grid():
        for groups in (1, 2, 4):
            x = rng.uniform(-1, 1, (int(rng.integers(2, 9)), 8))
            params = random_params(8, rng)
            y = cgnl_forward(x, params, spec, GroupConfig(groups))
            ref = gnl_forward_exact(x, params, spec, use_taylor=True, groups=groups)
            worst = max(worst, rel_diff(y, ref))
    return worst < 1e-10, f"max rel diff {worst:.2e}"


@prop("cgnl.dot_kernel_exact")
def _dot_kernel(rng):
    worst = 0.0
    for groups in (1, 2, 4):
        x = rng.uniform(-1, 1, (9, 4))
        params = random_params(4, rng)
        spec = KernelSpec("dot")
        y = cgnl_forward(x, params, spec, GroupConfig(groups))
        worst = max(worst, rel_diff(y, gnl_forward_exact(x, params, spec, groups=groups)))
    return worst < 1e-12, f"max rel diff {worst:.2e}"


@prop("cgnl.identity_at_init")
def _identity(rng):
    for spec in _spec_grid():
        for groups in (1, 2, 4):
            x = rng.uniform(-1, 1, (5, 8))
            params = init_params(8, int(rng.integers(1000)), "zero_bn_default")
            if not np.array_equal(cgnl_block(x, params, spec, GroupConfig(groups)), x):
                return False, f"{spec.family}, G={groups}"
    return True, "bitwise for every kernel and group setting"


@prop("cgnl.associativity")
def _assoc(rng):
    worst = 0.0
    for spec in _spec_grid():
        x = rng.uniform(-1, 1, (16, 8))
        params = random_params(8, rng)
        a = cgnl_forward(x, params, spec)
        b = cgnl_forward(x, params, spec, materialize_pairwise=True)
        worst = max(worst, rel_diff(a, b))
    return worst < 1e-9, f"max rel diff {worst:.2e}"


@prop("cgnl.permutation_equivariance")
def _cgnl_perm(rng):
    x = rng.uniform(-1, 1, (10, 4))
    params = random_params(4, rng)
    perm = rng.permutation(10)
    spec = KernelSpec("dot")
    err = float(np.max(np.abs(cgnl_forward(x[perm], params, spec)
                              - cgnl_forward(x, params, spec)[perm])))
    return err < 1e-10, f"max abs diff {err:.2e}"


def gradient_configs(count, rng):
    """Random small instances cycling through kernels, groups in {1, 2, 4} and orders 1..3.

    rbf uses gamma=0.05: at 1e-4 the series terms beyond the first sit near
    the finite-difference noise floor and the check would not exercise them.
    """
    out = []
    for i in range(count):
        groups = (1, 2, 4)[i % 3]
        order = 1 + i % 3
        family = ("dot", "embedded_gaussian", "rbf")[(i // 3) % 3]
        normalize = True if family == "rbf" else bool(i % 2)
        spec = KernelSpec(family, order=order, gamma=0.05, normalize_inputs=normalize)
        n = int(rng.integers(3, 6))
        c = 4
        x = rng.uniform(-1, 1, (n, c))
        out.append((x, random_params(c, rng), spec, GroupConfig(groups), rng.standard_normal((n, c))))
    return out


@prop("cgnl.gradient_check")
def _grad(rng):
    worst = 0.0
    cases = gradient_configs(20, rng)
    for x, params, spec, grp, up in cases:
        worst = max(worst, gradient_check(x, params, spec, grp, up))
    return worst < 1e-4, f"max rel error {worst:.2e} over {len(cases)} configurations"


@prop("cgnl.thread_count_invariance")
def _threads(rng):
    x = rng.uniform(-1, 1, (6, 8))
    params = random_params(8, rng)
    spec = KernelSpec("embedded_gaussian", order=3)
    base = cgnl_block(x, params, spec, GroupConfig(4), threads=1)
    ok = all(np.array_equal(cgnl_block(x, params, spec, GroupConfig(4), threads=t), base)
             for t in (2, 4))
    return ok, "bitwise across thread counts up to 4" if ok else "output depends on thread count"


@prop("cgnl.group_locality")
def _locality(rng):
    from .compact import _core  # grouped core on already-transformed features
    n, c, groups = 6, 8, 4
    ident = np.eye(c)
    params = init_params(c, 0).replace(w_theta=ident, w_phi=ident, w_g=ident)
    spec = KernelSpec("embedded_gaussian", order=3)
    x = rng.uniform(-1, 1, (n, c))
    base, _ = _core(x[None], params, spec, groups)
    cg = c // groups
    for k in range(groups):
        other = (k + 1) % groups
        xp = x.copy()
        xp[:, other * cg] += 0.5
        moved, _ = _core(xp[None], params, spec, groups)
        if not np.array_equal(moved[0, :, k * cg:(k + 1) * cg], base[0, :, k * cg:(k + 1) * cg]):
            return False, f"group {k} changed when group {other} was perturbed"
    return True, "out-of-group perturbations leave each group's output unchanged"


@prop("cgnl.batchnorm_scale_erasure")
def _bn_scale(rng):
    y = rng.standard_normal((12, 5))
    gamma, beta = rng.standard_normal((2, 5))
    tiny = BatchNormState(gamma, beta, eps=1e-14)
    err = max(float(np.max(np.abs(batchnorm_forward(s * y, tiny) - batchnorm_forward(y, tiny))))
              for s in (0.1, 3.7, 100.0))
    std = BatchNormState(gamma, beta, eps=BN_EPS)
    var = y.var(axis=0)
    xhat = (y - y.mean(axis=0)) / np.sqrt(var + BN_EPS)
    slack = []
    for s in (0.1, 3.7, 100.0):
        bound = np.abs(gamma * xhat) * np.abs(np.sqrt((var + BN_EPS) / (var + BN_EPS / s**2)) - 1)
        dev = np.abs(batchnorm_forward(s * y, std) - batchnorm_forward(y, std))
        slack.append(float(np.max(dev - bound)))
    ok = err < 1e-8 and max(slack) <= 1e-12
    return ok, f"eps->0 deviation {err:.2e}; eps={BN_EPS} deviation within analytic bound"


@prop("analysis.mask_scale_invariance")
def _mask_scale(rng):
    x = rng.standard_normal((12, 3))
    params = random_params(3, rng)
    scaled = params.replace(w_theta=3.5 * params.w_theta)
    a = nl_affinity(x, params, 4)
    b = nl_affinity(x, scaled, 4)
    spec = KernelSpec("dot")
    ca = cgnl_affinity(x, params, spec, GroupConfig(1), 4, 1)
    cb = cgnl_affinity(x, scaled, spec, GroupConfig(1), 4, 1)
    ok = np.array_equal(a.mask, b.mask) and all(np.array_equal(p.mask, q.mask) for p, q in zip(ca, cb))
    return ok, "masks unchanged under positive theta scaling" if ok else "mask changed"


@prop("analysis.mask_csv_roundtrip")
def _mask_rt(rng):
    import tempfile
    from pathlib import Path
    x = rng.standard_normal((12, 3))
    m = nl_affinity(x, random_params(3, rng), 0)
    with tempfile.TemporaryDirectory() as d:
        export_mask(m, 3, 4, Path(d) / "m")
        back = read_mask_csv(Path(d) / "m.mask.csv")
    ok = np.array_equal(back, m.mask)
    return ok, "exact" if ok else "mask differs after reading back"


@prop("analysis.symmetric_weights_symmetric_scores")
def _sym(rng):
    x = rng.standard_normal((8, 3))
    p = random_params(3, rng)
    p = p.replace(w_phi=p.w_theta)
    ref = 2
    row = nl_affinity(x, p, ref).raw
    col = np.array([nl_affinity(x, p, j).raw[ref] for j in range(8)])
    err = float(np.max(np.abs(row - col)))
    return err < 1e-12, f"max abs diff {err:.2e}"


@prop("backend.compiled_matches_python")
def _backends(rng):
    if _backend.compiled is None:
        return True, "compiled kernels not built; only the numpy path is active"
    worst = 0.0
    for spec in _spec_grid():
        x = rng.uniform(-1, 1, (7, 4))
        params = random_params(4, rng)
        a = cgnl_forward(x, params, spec, GroupConfig(2), backend="compiled")
        b = cgnl_forward(x, params, spec, GroupConfig(2), backend="python")
        c = gnl_forward_exact(x, params, spec, True, groups=2, backend="compiled")
        d = gnl_forward_exact(x, params, spec, True, groups=2, backend="python")
        worst = max(worst, rel_diff(a, b), rel_diff(c, d))
    return worst < 1e-12, f"max rel diff {worst:.2e}"


@prop("cli.bench_csv_schema")
def _csv_schema(rng):
    from .bench import BenchRecord, to_csv
    header = to_csv([BenchRecord("cgnl", 8, 8, 3, 1, 1.0, 0, 5)]).splitlines()[0]
    expected = "method,n,c,p,groups,wall_time_ns,peak_aux_bytes,repeats"
    return header == expected, header


@prop("cli.seeded_runs_deterministic")
def _determinism(rng):
    from .toy import ToyTrainConfig, train_toy
    cfg = ToyTrainConfig(n_samples=16, n=6, c=4, steps=3, seed=int(rng.integers(100)))
    same = train_toy(cfg) == train_toy(cfg)
    x = rng.uniform(-1, 1, (6, 4))
    a = cgnl_affinity(x, init_params(4, 5, "uniform_range"), KernelSpec("dot"), GroupConfig(2), 1, 0)
    b = cgnl_affinity(x, init_params(4, 5, "uniform_range"), KernelSpec("dot"), GroupConfig(2), 1, 0)
    same = same and all(np.array_equal(p.scores, q.scores) for p, q in zip(a, b))
    return same, "identical outputs for a repeated seed" if same else "outputs differ between runs"


def run_all(seed: int = 0, only=None):
    results = []
    for name, fn in PROPERTIES:
        if only and name not in only:
            continue
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failed property, reported by name
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(PropertyResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results


def format_report(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'property':<{width}}  result  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.ok else 'FAIL':<6}  {r.detail}")
    failed = [r.name for r in results if not r.ok]
    lines.append(f"{len(results) - len(failed)}/{len(results)} properties passed")
    if failed:
        lines.append("failed: " + ", ".join(failed))
    return "\n".join(lines)
