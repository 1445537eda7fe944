import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgnl.analysis import (DEFAULT_THRESHOLD, cgnl_affinity, export_mask, nl_affinity,
                           normalize_scores, read_mask_csv, read_pgm)
from cgnl.compact import GroupConfig
from cgnl.core import init_params
from cgnl.errors import GeometryError
from cgnl.kernels import KernelSpec, kernel_exact, taylor_coefficients, taylor_eval

from conftest import naive_linear


def test_default_threshold():
    assert DEFAULT_THRESHOLD == 0.7
    m = nl_affinity(np.random.default_rng(0).standard_normal((6, 2)), init_params(2, 0), 0)
    assert m.threshold == 0.7


def test_nl_affinity_matches_explicit_row(rng):
    x = rng.standard_normal((9, 3))
    params = init_params(3, 4)
    theta = naive_linear(x, np.asarray(params.w_theta))
    phi = naive_linear(x, np.asarray(params.w_phi))
    raw = np.array([sum(theta[2, k] * phi[j, k] for k in range(3)) for j in range(9)])
    m = nl_affinity(x, params, 2)
    assert np.allclose(m.raw, raw, atol=1e-14)
    s = (raw - raw.min()) / (raw - raw.min()).max()
    assert np.allclose(m.scores, s, atol=1e-14)
    assert np.array_equal(m.mask, m.scores >= 0.7)
    assert m.mask.sum() >= 1 and m.scores.max() == 1.0


def test_normalize_scores_edge_cases():
    assert np.array_equal(normalize_scores([3.0, 3.0]), [1.0, 1.0])
    assert np.array_equal(normalize_scores([1.0, 2.0, 3.0]), [0.0, 0.5, 1.0])


@given(st.floats(1e-3, 1e3), st.integers(0, 10**6))
def test_masks_invariant_to_positive_theta_scale(scale, seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((10, 4))
    params = init_params(4, int(r.integers(100)), "uniform_range")
    scaled = params.replace(w_theta=scale * params.w_theta)
    assert np.array_equal(nl_affinity(x, params, 3).mask, nl_affinity(x, scaled, 3).mask)
    spec = KernelSpec("dot")
    a = cgnl_affinity(x, params, spec, GroupConfig(2), 3, 2)
    b = cgnl_affinity(x, scaled, spec, GroupConfig(2), 3, 2)
    assert all(np.array_equal(p.mask, q.mask) for p, q in zip(a, b))


@given(st.integers(0, 10**6))
def test_symmetric_weights_give_symmetric_scores(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((7, 3))
    p = init_params(3, int(r.integers(100)))
    p = p.replace(w_phi=p.w_theta)
    raw = np.array([nl_affinity(x, p, i).raw for i in range(7)])
    assert np.max(np.abs(raw - raw.T)) < 1e-12


def test_cgnl_affinity_one_mask_per_group_channel(rng):
    x = rng.standard_normal((6, 8))
    params = init_params(8, 0, "uniform_range")
    spec = KernelSpec("embedded_gaussian", order=3)
    masks = cgnl_affinity(x, params, spec, GroupConfig(4), 1, 5)
    assert [m.channel_pair for m in masks] == [(5, 4), (5, 5)]
    assert all(m.scores.shape == (6,) for m in masks)
    # raw scores are the series kernel between theta'[ref] and phi' of that channel
    theta = naive_linear(x, np.asarray(params.w_theta))
    phi = naive_linear(x, np.asarray(params.w_phi))
    ref = theta[1, 5]
    coeffs = taylor_coefficients(spec)
    series = [taylor_eval(ref, phi[j, 4], coeffs) for j in range(6)]
    assert np.allclose(masks[0].raw, series, rtol=1e-13)
    exact = [kernel_exact(ref, phi[j, 4], spec) for j in range(6)]
    assert np.allclose(masks[0].raw, exact, rtol=1e-2)


def test_cgnl_affinity_range_errors(rng):
    x = rng.standard_normal((4, 2))
    with pytest.raises(IndexError):
        cgnl_affinity(x, init_params(2, 0), KernelSpec("dot"), GroupConfig(1), 4, 0)
    with pytest.raises(IndexError):
        cgnl_affinity(x, init_params(2, 0), KernelSpec("dot"), GroupConfig(1), 0, 2)
    with pytest.raises(IndexError):
        nl_affinity(x, init_params(2, 0), -1)
    with pytest.raises(ValueError):
        nl_affinity(x, init_params(2, 0), 0, threshold=0)


def test_export_pgm_and_csv(tmp_path, rng):
    m = nl_affinity(rng.standard_normal((12, 3)), init_params(3, 1), 0)
    paths = export_mask(m, 3, 4, tmp_path / "m")
    assert [p.name for p in paths] == ["m.pgm", "m.mask.csv"]
    raw = paths[0].read_bytes()
    assert raw.startswith(b"P5\n4 3\n255\n")
    pix = read_pgm(paths[0])
    assert pix.shape == (3, 4)
    assert np.array_equal(pix.reshape(-1), np.floor(m.scores * 255).astype(np.uint8))
    assert pix.max() == 255
    assert np.array_equal(read_mask_csv(paths[1]), m.mask)
    assert len(paths[1].read_text().splitlines()) == 3


def test_export_frames(tmp_path, rng):
    m = nl_affinity(rng.standard_normal((18, 2)), init_params(2, 1), 0)
    paths = export_mask(m, 3, 3, tmp_path / "v.pgm", frames=2)
    assert [p.name for p in paths] == ["v.f000.pgm", "v.f001.pgm", "v.mask.csv"]
    both = np.concatenate([read_pgm(p).reshape(-1) for p in paths[:2]])
    assert np.array_equal(both, np.floor(m.scores * 255).astype(np.uint8))


def test_export_geometry_mismatch(tmp_path, rng):
    m = nl_affinity(rng.standard_normal((12, 2)), init_params(2, 1), 0)
    with pytest.raises(GeometryError):
        export_mask(m, 5, 5, tmp_path / "m")
