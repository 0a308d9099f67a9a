import dataclasses
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import constant_noise_model
from tamedsde import (
    ConfigurationError,
    ModelSpec,
    NoiseStructure,
    SchemeParams,
    StepError,
    StepInputs,
    UnsupportedSchemeError,
    make_model,
    phi_threshold,
    sample_lattice,
    sample_lattices,
    simulate_em_untamed,
    simulate_path,
    simulate_paths,
    step_euler,
    step_milstein,
    step_order15,
    tame,
)
from tamedsde.integrators import milstein_increment, order15_increment, scalar_iterated_integrals
from tamedsde.models import cubic, ornstein_uhlenbeck

P = SchemeParams()
STEPS = {"euler": step_euler, "milstein": step_milstein, "order15": step_order15}


def general_noise_model():
    def f(x):
        return -x

    def g(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([np.stack([x2, np.ones_like(x1)], -1),
                         np.stack([np.zeros_like(x1), x1], -1)], -2)

    return ModelSpec(name="general", d=2, m=2, f=f, g=g,
                     noise_structure=NoiseStructure.GENERAL, x0=[1.0, 1.0],
                     lg_g=lambda j2, j1, x: np.zeros_like(x))


@pytest.mark.parametrize("scheme", ["euler", "milstein", "order15"])
def test_state_above_threshold_is_returned_unchanged(scheme):
    model = make_model("exp-psych")
    h = 2.0**-5
    y = np.array([phi_threshold(h, P) * 1.0001, 0.0])
    inp = StepInputs(h, np.array([0.3]), np.array([0.01]))
    assert np.array_equal(STEPS[scheme](y, inp, model, P), y)


def test_zero_coefficients_leave_state_fixed():
    model = constant_noise_model([[0.0]], x0=[0.4])
    for scheme, step in STEPS.items():
        out = step(np.array([0.4]), StepInputs(0.1, np.array([0.5]), np.array([0.02])), model, P)
        assert np.array_equal(out, [0.4]), scheme


def test_cubic_euler_step_value():
    model = cubic(sigma=0.1)
    h = Decimal(2) ** -7
    exact = 1 - h / (1 + h**5 * h ** Decimal("-0.25"))
    out = step_euler(np.array([1.0]), StepInputs(2.0**-7, np.array([0.0])), model, P)
    assert abs(Decimal(out[0]) - exact) <= Decimal("1e-16")
    # The taming correction is positive and below 2.6e-10 in relative terms.
    assert 0 < out[0] - (1 - 0.0078125) < 0.0078125 * 2.6e-10


def test_scalar_milstein_reduces_to_euler_when_dw_squared_equals_h():
    model = make_model("exp-psych")
    h = 2.0**-6
    y = np.array([0.7, -0.3])
    inp = StepInputs(h, np.array([np.sqrt(h)]))
    np.testing.assert_allclose(step_milstein(y, inp, model, P), step_euler(y, inp, model, P),
                               rtol=0, atol=1e-16)


def test_milstein_correction_for_commutative_noise():
    model = make_model("lotka-volterra")
    y = np.array([0.6, 0.9])
    h, dW = 0.01, np.array([0.05, -0.12])
    corr = milstein_increment(y, StepInputs(h, dW), model) - (model.f(y) * h + model.g(y) @ dW)
    sigma = np.asarray(model.params["sigma"])
    expected = np.zeros(2)
    for j1 in range(2):
        for j2 in range(2):
            expected += 0.5 * (dW[j1] * dW[j2] - (h if j1 == j2 else 0.0)) \
                * y * sigma[:, j2] * sigma[:, j1]
    np.testing.assert_allclose(corr, expected, rtol=1e-14, atol=1e-17)


def test_general_noise_rejected():
    model = general_noise_model()
    lat = sample_lattices(2, 3, 1.0, True, seed=0, paths=[0])
    simulate_paths(model, "euler", lat, P)
    for scheme in ("milstein", "order15"):
        with pytest.raises(UnsupportedSchemeError):
            simulate_paths(model, scheme, lat, P)


def test_order15_needs_dz():
    model = make_model("exp-psych")
    with pytest.raises(ConfigurationError):
        order15_increment(np.array([1.0, 0.0]), StepInputs(0.1, np.array([0.1])), model)
    lat = sample_lattices(1, 3, 1.0, False, seed=0, paths=[0])
    with pytest.raises(ConfigurationError):
        simulate_paths(model, "order15", lat, P)


def test_scheme_constraint_enforced():
    model = make_model("exp-psych")
    lat = sample_lattices(1, 3, 1.0, True, seed=0, paths=[0])
    with pytest.raises(ConfigurationError):
        simulate_paths(model, "milstein", lat, SchemeParams(delta=3.0, theta=0.25))


def test_noiseless_order15_is_second_order_taylor_step():
    model = ornstein_uhlenbeck(kappa=2.0, sigma=0.0)
    y, h = np.array([0.8]), 0.05
    inp = StepInputs(h, np.array([0.3]), np.array([0.004]))
    expected = y + tame(-2.0 * y * h + 4.0 * y * h * h / 2, h, P)
    np.testing.assert_allclose(step_order15(y, inp, model, P), expected, rtol=1e-15)


def test_order15_ou_local_error_is_second_order():
    # Oracle: exact OU transition with the stochastic integral from 2**12 substeps.
    kappa, sigma, x0 = 1.0, 0.1, 1.0
    model = ornstein_uhlenbeck(kappa, sigma, x0)
    rng = np.random.default_rng(7)
    n_sub, n_samples = 2**12, 2000
    rms = []
    steps = [2.0**-3, 2.0**-4, 2.0**-5]
    for h in steps:
        dt = h / n_sub
        dw = rng.normal(scale=np.sqrt(dt), size=(n_samples, n_sub))
        w = np.concatenate([np.zeros((n_samples, 1)), np.cumsum(dw, axis=1)], axis=1)
        s = np.arange(n_sub) * dt
        exact = (np.exp(-kappa * h) * x0
                 + sigma * np.sum(np.exp(-kappa * (h - s)) * dw, axis=1))
        dW = w[:, -1:]
        dZ = np.sum(w[:, :-1] + w[:, 1:], axis=1, keepdims=True) * dt / 2
        y = np.full((n_samples, 1), x0)
        out = step_order15(y, StepInputs(h, dW, dZ), model, P)[:, 0]
        rms.append(np.sqrt(np.mean((out - exact) ** 2)))
    orders = np.diff(np.log2(rms)) / np.diff(np.log2(steps))
    assert np.all(orders > 2.0), (rms, orders)
    assert rms[-1] < 5 * steps[-1] ** 2


def test_order15_collapse_on_additive_noise():
    model = make_model("lorenz")
    zero = lambda *args: np.zeros(np.shape(args[-1]))
    stripped = dataclasses.replace(model, lg_f=zero, af=zero)
    lat = sample_lattices(3, 6, 1.0, True, seed=2, paths=range(8))
    stripped_paths = simulate_paths(stripped, "order15", lat, P)
    euler_paths = simulate_paths(model, "euler", lat, P)
    np.testing.assert_array_equal(stripped_paths.states, euler_paths.states)
    full = simulate_paths(model, "order15", lat, P)
    assert not np.array_equal(full.states, euler_paths.states)


def test_huge_threshold_never_stops():
    model = make_model("exp-psych")
    p = SchemeParams(gamma1=1e12)
    for path in range(5):
        result = simulate_path(model, "milstein", sample_lattice(1, 7, 1.0, False, 3, path), p)
        assert result.tau_index is None and not result.frozen


def test_tiny_threshold_freezes_at_start():
    model = make_model("exp-psych")
    p = SchemeParams(gamma1=1e-12)
    result = simulate_path(model, "euler", sample_lattice(1, 7, 1.0, False, 3, 0), p)
    assert result.tau_index == 0
    assert np.all(result.states == model.x0)


@given(seed=st.integers(0, 2**32), scheme=st.sampled_from(["euler", "milstein", "order15"]))
def test_frozen_paths_stay_frozen(seed, scheme):
    model = ornstein_uhlenbeck(kappa=0.5, sigma=1.0, x0=1.0)
    p = SchemeParams(gamma1=0.15)
    lat = sample_lattices(1, 6, 1.0, True, seed, range(16))
    batch = simulate_paths(model, scheme, lat, p)
    threshold = phi_threshold(lat.h, p)
    norms = np.abs(batch.states[..., 0])
    for i in range(16):
        tau = batch.tau_index[i]
        if tau < 0:
            assert np.all(norms[i] <= threshold)
            continue
        assert norms[i, tau] > threshold
        assert np.all(norms[i, :tau] <= threshold)
        assert np.all(batch.states[i, tau:] == batch.states[i, tau])


@given(seed=st.integers(0, 2**32), level=st.integers(0, 8),
       name=st.sampled_from(["exp-psych", "lorenz", "van-der-pol", "lotka-volterra", "cubic"]),
       scheme=st.sampled_from(["euler", "milstein", "order15"]))
def test_every_step_obeys_increment_bound(seed, level, name, scheme):
    model = make_model(name)
    if scheme == "order15" and model.noise_structure is NoiseStructure.COMMUTATIVE:
        scheme = "milstein"
    lat = sample_lattices(model.m, level, 1.0, True, seed, range(4))
    batch = simulate_paths(model, scheme, lat, P)
    steps = np.linalg.norm(np.diff(batch.states, axis=1), axis=-1)
    assert np.all(steps <= lat.h ** (P.theta / P.delta))


def test_results_do_not_depend_on_batching():
    model = make_model("exp-psych")
    lat = sample_lattices(1, 6, 1.0, True, 0, range(10))
    together = simulate_paths(model, "order15", lat, P)
    for i in range(10):
        alone = simulate_path(model, "order15", lat.path(i), P)
        np.testing.assert_array_equal(alone.states, together.states[i])


def test_nonfinite_model_output_raises_step_error():
    model = make_model("exp-psych")
    broken = dataclasses.replace(model, f=lambda x: np.where(np.abs(x[..., 1:]) > 0.2, np.nan, model.f(x)))
    lat = sample_lattices(1, 8, 1.0, False, 0, range(50))
    with pytest.raises(StepError) as info:
        simulate_paths(broken, "euler", lat, P)
    assert info.value.step is not None and info.value.state is not None
    assert "step" in str(info.value)


def test_untamed_euler_flags_overflow():
    model = cubic(sigma=0.1, x0=5.0)
    lat = sample_lattices(1, 3, 1.0, False, 0, range(20))
    states, overflowed = simulate_em_untamed(model, lat)
    assert overflowed.all()
    assert np.isnan(states[:, -1]).all()
    tamed = simulate_paths(model, "euler", lat, P)
    assert np.all(np.isfinite(tamed.states))


def test_lattice_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        simulate_paths(make_model("lorenz"), "euler", sample_lattices(1, 3, 1.0, False, 0, [0]), P)


def test_iterated_integral_closed_forms_pathwise():
    rng = np.random.default_rng(10)
    h, n_sub = 0.25, 2**12
    dw = rng.normal(scale=np.sqrt(h / n_sub), size=(200, n_sub))
    w = np.cumsum(dw, axis=1) - dw
    i11_nested = np.sum(w * dw, axis=1)
    i111_nested = np.sum((np.cumsum(w * dw, axis=1) - w * dw) * dw, axis=1)
    i11, i111 = scalar_iterated_integrals(dw.sum(axis=1), h)
    # The discretisation gap shrinks like h / sqrt(n_sub).
    assert np.sqrt(np.mean((i11 - i11_nested) ** 2)) < 3 * h / np.sqrt(n_sub)
    assert np.sqrt(np.mean((i111 - i111_nested) ** 2)) < 3 * h**1.5 / np.sqrt(n_sub)
