import os
import subprocess
import sys

import numpy as np
import pytest

from cgnl import _backend
from cgnl.kernels import KernelSpec, taylor_coefficients
from cgnl.oracle import FAMILY_CODE

needs_compiled = pytest.mark.skipif(_backend.compiled is None, reason="compiled kernels not built")


def _probe(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("CGNL_PURE_PYTHON", None)
    else:
        env["CGNL_PURE_PYTHON"] = env_value
    r = subprocess.run([sys.executable, "-c", "import cgnl; print(cgnl.BACKEND)"],
                       capture_output=True, text=True, env=env)
    return r.stdout.strip()


def test_pure_python_override():
    assert _probe("1") == "python"


@needs_compiled
def test_compiled_selected_by_default():
    assert _probe(None) == "compiled"


def test_get_rejects_unknown():
    with pytest.raises(ValueError):
        _backend.get("fortran")
    assert _backend.get("python") is _backend.python


@needs_compiled
@pytest.mark.parametrize("family", ["dot", "embedded_gaussian", "rbf"])
@pytest.mark.parametrize("use_taylor", [False, True])
def test_pairwise_kernels_agree(family, use_taylor, rng):
    spec = KernelSpec(family, order=3 if family != "dot" else 1, gamma=0.05)
    m = 150  # spans more than one row block of the numpy twin
    t, f, g = rng.uniform(-1, 1, (3, m))
    a = taylor_coefficients(spec).as_array()
    outs = []
    for kern in (_backend.compiled, _backend.python):
        pair = np.empty((m, m))
        out = np.empty(m)
        kern.pairwise_forward(t, f, g, a, FAMILY_CODE[family], 0.05, use_taylor, pair, out)
        outs.append((pair, out))
    if use_taylor or family == "dot":
        assert np.array_equal(outs[0][0], outs[1][0])
    else:
        # C libm exp and numpy exp may differ in the last bit
        assert np.allclose(outs[0][0], outs[1][0], rtol=4e-16, atol=0)
    assert np.allclose(outs[0][1], outs[1][1], rtol=1e-13, atol=1e-13)


@needs_compiled
def test_compact_kernels_agree(rng):
    B, m, k = 2, 40, 4
    t, f, g = (np.ascontiguousarray(rng.uniform(-1, 1, (B, m))) for _ in range(3))
    at = np.sqrt(taylor_coefficients(KernelSpec("embedded_gaussian", order=3)).as_array())
    res = []
    for kern in (_backend.compiled, _backend.python):
        tl, pl, z, out = np.empty((B, m, k)), np.empty((B, m, k)), np.empty((B, k)), np.empty((B, m))
        kern.compact_forward(t, f, g, at, at, tl, pl, z, out)
        res.append((tl, pl, z, out))
    for a, b in zip(*res):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-15)


@needs_compiled
def test_timers_return_positive_ns(rng):
    t, f, g = rng.uniform(-1, 1, (3, 16))
    a = taylor_coefficients(KernelSpec("dot")).as_array()
    for kern in (_backend.compiled, _backend.python):
        ns = kern.time_pairwise(t, f, g, a, 0, 1e-4, True, np.empty((16, 16)), np.empty(16), 3)
        assert ns > 0
