import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tamedsde import (
    ConfigurationError,
    coarsen,
    dump_lattice,
    load_lattice,
    sample_lattice,
    sample_lattices,
)


def moment_within(samples, expected, k=3.0):
    mean = samples.mean()
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(mean - expected) <= k * se, mean, se


def test_same_key_gives_identical_lattice():
    a = sample_lattice(2, 6, 1.0, True, seed=5, path=17)
    b = sample_lattice(2, 6, 1.0, True, seed=5, path=17)
    np.testing.assert_array_equal(a.dW, b.dW)
    np.testing.assert_array_equal(a.dZ, b.dZ)
    c = sample_lattice(2, 6, 1.0, True, seed=5, path=18)
    assert not np.array_equal(a.dW, c.dW)


def test_batch_matches_single_paths():
    batch = sample_lattices(3, 4, 2.0, True, seed=9, paths=[4, 0, 11])
    for i, path in enumerate([4, 0, 11]):
        single = sample_lattice(3, 4, 2.0, True, seed=9, path=path)
        np.testing.assert_array_equal(batch.dW[i], single.dW)
        np.testing.assert_array_equal(batch.dZ[i], single.dZ)


def test_without_dz_leaves_dw_unchanged():
    with_dz = sample_lattice(2, 5, 1.0, True, seed=1, path=3)
    without = sample_lattice(2, 5, 1.0, False, seed=1, path=3)
    assert without.dZ is None and not without.has_dz
    np.testing.assert_array_equal(with_dz.dW, without.dW)


def test_shape_and_step():
    lat = sample_lattice(3, 7, 0.5, True, seed=0)
    assert lat.dW.shape == (128, 3) and lat.dZ.shape == (128, 3)
    assert lat.n_steps == 128 and lat.h == 0.5 / 128


@pytest.mark.parametrize("bad", [dict(m=0), dict(level=-1), dict(t_final=0.0)])
def test_invalid_shape_rejected(bad):
    args = dict(m=1, level=2, t_final=1.0)
    args.update(bad)
    with pytest.raises(ConfigurationError):
        sample_lattice(with_dz=False, seed=0, **args)


def test_increment_covariance_at_unit_step():
    # 2**20 steps of size one from a single long path.
    lat = sample_lattice(1, 20, 2.0**20, True, seed=0)
    dW, dZ = lat.dW[:, 0], lat.dZ[:, 0]
    for samples, expected in ((dW, 0.0), (dW * dW, 1.0), (dZ * dZ, 1 / 3), (dW * dZ, 0.5)):
        ok, mean, se = moment_within(samples, expected)
        assert ok, (expected, mean, se)


def test_time_integral_against_fine_riemann_sums():
    # Oracle: W on 2**14 substeps of [0, 1], integral by the trapezoid rule.
    rng = np.random.default_rng(2024)
    n_sub, n_samples = 2**14, 4000
    dz_fine, dw_fine = [], []
    for _ in range(n_samples // 250):
        w = np.cumsum(rng.normal(scale=np.sqrt(1 / n_sub), size=(250, n_sub)), axis=1)
        w = np.concatenate([np.zeros((250, 1)), w], axis=1)
        dz_fine.append(np.sum(w[:, :-1] + w[:, 1:], axis=1) / (2 * n_sub))
        dw_fine.append(w[:, -1])
    dz_fine, dw_fine = np.concatenate(dz_fine), np.concatenate(dw_fine)

    lat = sample_lattices(1, 0, 1.0, True, seed=3, paths=np.arange(n_samples))
    dz_lat, dw_lat = lat.dZ[:, 0, 0], lat.dW[:, 0, 0]
    for a, b in ((dz_fine**2, dz_lat**2), (dz_fine * dw_fine, dz_lat * dw_lat)):
        se = np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
        assert abs(a.mean() - b.mean()) <= 3 * se


def test_coarsen_to_same_level_is_identity():
    lat = sample_lattice(2, 5, 1.0, True, seed=0)
    assert coarsen(lat, 5) is lat


def test_coarsen_above_level_rejected():
    with pytest.raises(ConfigurationError):
        coarsen(sample_lattice(1, 3, 1.0, False, seed=0), 4)


def test_two_step_composition():
    lat = sample_lattice(2, 1, 0.7, True, seed=4)
    coarse = coarsen(lat, 0)
    h = lat.h
    np.testing.assert_allclose(coarse.dW[0], lat.dW[0] + lat.dW[1], rtol=0, atol=1e-12)
    np.testing.assert_allclose(coarse.dZ[0], lat.dZ[0] + lat.dZ[1] + lat.dW[0] * h,
                               rtol=0, atol=1e-12)


def test_coarse_dz_matches_block_integral():
    lat = sample_lattice(1, 6, 1.0, True, seed=8)
    coarse = coarsen(lat, 3)
    h, stride = lat.h, 8
    for k in range(coarse.n_steps):
        block = slice(k * stride, (k + 1) * stride)
        running = np.concatenate([[0.0], np.cumsum(lat.dW[block, 0])[:-1]])
        expected = np.sum(lat.dZ[block, 0] + running * h)
        assert abs(coarse.dZ[k, 0] - expected) <= 1e-12


@given(st.integers(0, 10_000), st.integers(0, 8), st.data())
def test_coarsening_is_transitive(seed, low, data):
    top = data.draw(st.integers(low, 9))
    mid = data.draw(st.integers(low, top))
    lat = sample_lattice(2, top, 1.0, True, seed=seed)
    direct = coarsen(lat, low)
    chained = coarsen(coarsen(lat, mid), low)
    np.testing.assert_allclose(chained.dW, direct.dW, rtol=0, atol=1e-12)
    np.testing.assert_allclose(chained.dZ, direct.dZ, rtol=0, atol=1e-12)
    np.testing.assert_allclose(chained.terminal_value(), lat.terminal_value(), rtol=0, atol=1e-12)


def test_coarsened_increments_have_direct_covariance():
    lat = sample_lattice(1, 20, 2.0**17, True, seed=21)
    coarse = coarsen(lat, 17)
    assert coarse.h == 1.0
    dW, dZ = coarse.dW[:, 0], coarse.dZ[:, 0]
    for samples, expected in ((dW * dW, 1.0), (dZ * dZ, 1 / 3), (dW * dZ, 0.5)):
        ok, mean, se = moment_within(samples, expected)
        assert ok, (expected, mean, se)


def test_batched_coarsening():
    lat = sample_lattices(2, 5, 1.0, True, seed=0, paths=range(4))
    coarse = coarsen(lat, 2)
    for i in range(4):
        single = coarsen(lat.path(i), 2)
        np.testing.assert_array_equal(coarse.dW[i], single.dW)
        np.testing.assert_array_equal(coarse.dZ[i], single.dZ)


@pytest.mark.parametrize("with_dz", [True, False])
def test_dump_and_load_round_trip(with_dz):
    lat = sample_lattice(3, 4, 0.25, with_dz, seed=6, path=2)
    buf = io.BytesIO()
    dump_lattice(lat, buf)
    buf.seek(0)
    back = load_lattice(buf)
    assert (back.m, back.level, back.t_final) == (3, 4, 0.25)
    np.testing.assert_array_equal(back.dW, lat.dW)
    if with_dz:
        np.testing.assert_array_equal(back.dZ, lat.dZ)
    else:
        assert back.dZ is None


def test_load_rejects_garbage():
    with pytest.raises(ConfigurationError):
        load_lattice(io.BytesIO(b"not a lattice at all, sorry"))
