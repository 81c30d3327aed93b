"""numba and numpy kernel flavours must agree; the env flag picks the backend."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tamm import kernels

from oracles import gravity_exact, timecost_closed_form

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def _polylines(rng, n, max_vertices=4):
    ax, ay, bx, by, offs = [], [], [], [], [0]
    for _ in range(n):
        m = int(rng.integers(2, max_vertices + 1))
        pts = rng.uniform(-500, 500, size=(m, 2))
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            ax.append(x0)
            ay.append(y0)
            bx.append(x1)
            by.append(y1)
        offs.append(len(ax))
    return [np.array(v) for v in (ax, ay, bx, by)] + [np.array(offs, dtype=np.int64)]


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_segment_min_distances_backends_agree(seed):
    rng = np.random.default_rng(seed)
    ax, ay, bx, by, offs = _polylines(rng, 50)
    for px, py in rng.uniform(-600, 600, size=(20, 2)):
        a = kernels.segment_min_distances_np(px, py, ax, ay, bx, by, offs)
        b = kernels.segment_min_distances_nb(px, py, ax, ay, bx, by, offs)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-9)


def test_segment_min_distances_degenerate_subsegment():
    z = np.array([1.0])
    d = kernels.segment_min_distances_np(4.0, 5.0, z, z, z, z, np.array([0, 1]))
    assert d[0] == pytest.approx(5.0)


@needs_numba
def test_nearest_scan_backends_agree_including_ties():
    rng = np.random.default_rng(3)
    ax, ay, bx, by, offs = _polylines(rng, 40)
    # duplicate polylines force distance ties, broken by index in both flavours
    ax, ay, bx, by = (np.concatenate([v, v]) for v in (ax, ay, bx, by))
    offs = np.concatenate([offs, offs[1:] + offs[-1]])
    qx, qy = rng.uniform(-500, 500, size=(2, 30))
    i1, d1 = kernels.nearest_scan_np(qx, qy, ax, ay, bx, by, offs, 8)
    i2, d2 = kernels.nearest_scan_nb(qx, qy, ax, ay, bx, by, offs, 8)
    np.testing.assert_array_equal(i1, i2)
    np.testing.assert_allclose(d1, d2, rtol=1e-12)
    assert np.all(np.diff(d1, axis=1) >= 0)


def test_nearest_scan_k_larger_than_n():
    ax = np.array([0.0])
    idx, dist = kernels.nearest_scan_np(np.array([0.0]), np.array([1.0]), ax, ax, ax + 1, ax, np.array([0, 1]), 5)
    assert idx.shape == (1, 1)


@pytest.mark.parametrize("impl", ["np", "nb"])
def test_timecost_batch_matches_closed_form(impl):
    if impl == "nb" and not kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    fn = getattr(kernels, f"timecost_batch_{impl}")
    rng = np.random.default_rng(11)
    length = rng.uniform(1, 500, 1000)
    speed = rng.uniform(1, 30, 1000)
    alpha = rng.uniform(0, 180, 1000)
    ls = rng.uniform(0.5, 30, 1000)
    got = fn(length, length / speed, alpha, ls)
    want = np.array([timecost_closed_form(*v) for v in zip(length, speed, alpha, ls)])
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


positive = st.floats(0.0, 1000.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 10), elements=positive), st.data())
def test_gravity_weights_match_exact_arithmetic(dists, data):
    angs = data.draw(arrays(np.float64, dists.shape, elements=st.floats(0.0, 180.0)))
    w_d, w_t, gf = gravity_exact(dists.tolist(), angs.tolist())
    impls = [kernels.gravity_weights_np] + ([kernels.gravity_weights_nb] if kernels.HAVE_NUMBA else [])
    for fn in impls:
        a, b, c = fn(dists, angs)
        np.testing.assert_allclose(a, [float(v) for v in w_d], atol=1e-12)
        np.testing.assert_allclose(b, [float(v) for v in w_t], atol=1e-12)
        np.testing.assert_allclose(c, [float(v) for v in gf], atol=1e-12)
        assert np.all((c >= -1e-12) & (c <= 1 + 1e-12))


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, TAMM_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from tamm import kernels; print(kernels.BACKEND, kernels.gravity_weights is kernels.gravity_weights_np)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.split() == ["numpy", "True"]


@needs_numba
def test_default_backend_is_numba_when_available():
    if os.environ.get("TAMM_DISABLE_NUMBA"):
        pytest.skip("numba disabled in this environment")
    assert kernels.BACKEND == "numba"
