"""Acceptance criteria, one test each.

Every test records a pass/fail line that pytest prints in a summary
section at the end of the run.
"""

import numpy as np

from tamedsde import (
    GALLERY,
    SchemeParams,
    check_noise_structure,
    coarsen,
    fd_check_derivatives,
    make_model,
    run_baseline_euler,
    run_convergence,
    run_exp_moment,
    sample_lattice,
    sample_lattices,
    simulate_paths,
    tame,
    tame_hessian_apply,
    tame_jacobian_apply,
)
from tamedsde.integrators import scalar_iterated_integrals
from tamedsde.models import cubic, default_lyapunov_pair

P = SchemeParams(delta=5.0, theta=0.25, gamma1=1.0, gamma2=1.0, gamma3=0.5)
LEVELS = range(4, 10)
REF_LEVEL = 12
PATHS = 1000
SEED = 42

_RUNS = {}


def rate_run(key):
    """Convergence runs shared by the rate criteria and the increment-bound check."""
    if key not in _RUNS:
        model, scheme = {
            "milstein": ("exp-psych", "milstein"),
            "order15": ("lorenz", "order15"),
            "euler": ("exp-psych", "euler"),
        }[key]
        _RUNS[key] = run_convergence(make_model(model), scheme, LEVELS, REF_LEVEL, PATHS, P,
                                     seed=SEED)
    return _RUNS[key]


def describe(report):
    errs = " ".join(f"{e:.3e}" for e in report.errors_sup)
    return (f"{report.scheme} on {report.model}: sup slope {report.fitted_slope_sup:.4f}, "
            f"terminal slope {report.fitted_slope_terminal:.4f}, sup errors [{errs}]")


def test_criterion_01_milstein_rate(record_criterion):
    report = rate_run("milstein")
    ok = 0.85 <= report.fitted_slope_sup <= 1.15
    record_criterion(1, ok, describe(report) + "; want [0.85, 1.15]")
    assert ok


def test_criterion_02_order15_rate(record_criterion):
    report = rate_run("order15")
    ok = 1.3 <= report.fitted_slope_sup <= 1.7
    record_criterion(2, ok, describe(report) + "; want [1.3, 1.7]")
    assert ok


def test_criterion_03_euler_rate(record_criterion):
    report = rate_run("euler")
    ok = 0.35 <= report.fitted_slope_sup <= 0.65
    record_criterion(3, ok, describe(report) + "; want [0.35, 0.65]")
    assert ok


def test_criterion_04_taming_bound(record_criterion):
    rng = np.random.default_rng(4)
    n = 100_000
    h = 2.0 ** rng.uniform(-20, 0, n)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    # Half the radii are log-uniform, half sit near the maximiser of |tame|.
    peak = (h**P.theta / (P.delta - 1)) ** (1 / P.delta)
    radius = np.where(np.arange(n) % 2 == 0, 10.0 ** rng.uniform(-8, 8, n),
                      peak * rng.uniform(0.9, 1.1, n))
    x = direction * radius[:, None]
    norms = np.linalg.norm(tame(x, h, P), axis=1)
    bound = h ** (P.theta / P.delta)
    violations = int(np.count_nonzero(norms > bound))
    closest = float(np.max(norms / bound))
    record_criterion(4, violations == 0,
                     f"{violations} violations over {n} samples, max |tame|/bound {closest:.4f}")
    assert violations == 0


def test_criterion_05_increment_bound_on_rate_runs(record_criterion):
    details, total = [], 0
    for key in ("milstein", "order15", "euler"):
        report = rate_run(key)
        bad = int(np.sum(report.increment_violations))
        total += bad
        details.append(f"{key} {bad} (max ratio {np.max(report.max_increment_ratio):.3f})")
    record_criterion(5, total == 0, "violations per run: " + ", ".join(details))
    assert total == 0


def test_criterion_06_model_derivatives(record_criterion):
    failures = []
    for name, ctor in GALLERY.items():
        model = ctor()
        states = model.sample_states(100, np.random.default_rng(6))
        report = fd_check_derivatives(model, states, eps=1e-6, tol=1e-5)
        if not report.passed:
            failures.append(f"{name} {report.errors}")
        if name in ("lorenz", "brownian-dynamics", "langevin"):
            if report.errors["lg_g"] != 0.0 or report.errors["llg"] != 0.0:
                failures.append(f"{name} nonzero additive derivatives")
        if name == "lotka-volterra" and not check_noise_structure(model, states)["commutative"]:
            failures.append("lotka-volterra not exactly commutative")
    ok = not failures
    record_criterion(6, ok, f"{len(GALLERY)} models checked" + (f"; {failures}" if failures else ""))
    assert ok


def test_criterion_07_taming_derivatives(record_criterion):
    rng = np.random.default_rng(7)
    n = 1000
    x = rng.normal(size=(n, 3))
    x *= 10.0 ** rng.uniform(-1, 1, (n, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    h = 2.0 ** rng.uniform(-14, 0, n)

    eps = 1e-6
    fd1 = (tame(x + eps * u, h, P) - tame(x - eps * u, h, P)) / (2 * eps)
    jac = tame_jacobian_apply(x, u, h, P)
    err1 = np.max(np.linalg.norm(jac - fd1, axis=1) / np.linalg.norm(jac, axis=1))

    eps2 = 1e-4
    fd2 = (tame(x + eps2 * u, h, P) - 2 * tame(x, h, P) + tame(x - eps2 * u, h, P)) / eps2**2
    hess = tame_hessian_apply(x, u, h, P)
    err2 = np.max(np.linalg.norm(hess - fd2, axis=1) / np.linalg.norm(hess, axis=1))

    ok = err1 <= 1e-6 and err2 <= 1e-4
    record_criterion(7, ok, f"max relative error jacobian {err1:.2e} (want 1e-6), "
                            f"hessian {err2:.2e} (want 1e-4)")
    assert ok


def test_criterion_08_coarsening_identities(record_criterion):
    worst = {"dW sums": 0.0, "two-step dZ": 0.0, "transitivity": 0.0}
    for seed in range(20):
        lat = sample_lattice(2, 10, 1.0, True, seed=seed)
        for level in range(10):
            coarse = coarsen(lat, level)
            fine_sums = lat.dW.reshape(2**level, -1, 2).sum(axis=1)
            worst["dW sums"] = max(worst["dW sums"], np.abs(coarse.dW - fine_sums).max())
        half = coarsen(lat, 9)
        two_step = lat.dZ[0::2] + lat.dZ[1::2] + lat.dW[0::2] * lat.h
        worst["two-step dZ"] = max(worst["two-step dZ"], np.abs(half.dZ - two_step).max())
        for mid, low in ((7, 3), (5, 0), (9, 8)):
            a, b = coarsen(coarsen(lat, mid), low), coarsen(lat, low)
            gap = max(np.abs(a.dW - b.dW).max(), np.abs(a.dZ - b.dZ).max())
            worst["transitivity"] = max(worst["transitivity"], gap)
    ok = all(v <= 1e-12 for v in worst.values())
    record_criterion(8, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (want 1e-12)")
    assert ok


def test_criterion_09_iterated_integrals(record_criterion):
    # Oracle: nested left-point Ito sums over 2**12 substeps of one step.
    # The closed forms see independent increments, so this compares laws.
    rng = np.random.default_rng(9)
    h, n_sub, n_samples, batch = 0.5, 2**12, 10_000, 500
    nested = []
    for _ in range(n_samples // batch):
        dw = rng.normal(scale=np.sqrt(h / n_sub), size=(batch, n_sub))
        w = np.cumsum(dw, axis=1) - dw          # W before each substep
        i11_run = np.cumsum(w * dw, axis=1) - w * dw  # I_(1,1) before each substep
        nested.append(np.stack([np.sum(w * dw, axis=1), np.sum(i11_run * dw, axis=1)], 1))
    nested = np.concatenate(nested)
    dW = sample_lattices(1, 0, h, False, seed=9, paths=range(n_samples)).dW[:, 0, 0]
    closed = np.stack(scalar_iterated_integrals(dW, h), 1)

    worst = 0.0
    lines = []
    for k, name in enumerate(("I11", "I111")):
        for power in (1, 2, 3, 4):
            a, b = closed[:, k] ** power, nested[:, k] ** power
            se = np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
            z = abs(a.mean() - b.mean()) / se
            worst = max(worst, z)
            lines.append(f"{name}^{power} z={z:.2f}")
    ok = worst <= 3.0
    record_criterion(9, ok, f"moment gaps in standard errors: {', '.join(lines)}")
    assert ok


def test_criterion_10_additive_collapse(record_criterion):
    model = make_model("lorenz")
    lat = sample_lattices(model.m, REF_LEVEL, 1.0, False, SEED, range(PATHS))
    worst = 0.0
    for level in list(LEVELS) + [REF_LEVEL]:
        coarse = coarsen(lat, level)
        euler = simulate_paths(model, "euler", coarse, P).states
        milstein = simulate_paths(model, "milstein", coarse, P).states
        worst = max(worst, float(np.max(np.abs(euler - milstein))))
    ok = worst <= 1e-15
    record_criterion(10, ok, f"max |Euler - Milstein| over {PATHS} Lorenz paths at levels "
                             f"4..9 and {REF_LEVEL}: {worst:.1e}")
    assert ok


def test_criterion_11_exponential_moments(record_criterion):
    model = make_model("langevin")
    pair = default_lyapunov_pair(model)
    spreads, clipped = [], 0
    for scheme in ("euler", "milstein", "order15"):
        report = run_exp_moment(model, scheme, pair, range(5, 11), 2000, P, seed=7)
        spreads.append(report.estimates.max() / report.estimates.min())
        clipped += int(report.clipped.sum())
    stable = max(spreads) <= 3.0 and clipped == 0

    table = run_baseline_euler(cubic(sigma=0.1, x0=5.0), range(3, 11), 2000, seed=7)
    em_over, tamed_over = int(table.em_overflows[0]), int(np.sum(table.tamed_overflows))
    divergence_shown = em_over >= 1 and tamed_over == 0

    ok = stable and divergence_shown
    record_criterion(11, ok, f"max/min estimate per scheme {', '.join(f'{s:.4f}' for s in spreads)}"
                             f", clipped {clipped}; baseline at level {table.levels[0]}: "
                             f"untamed overflows {em_over}/2000, tamed overflows {tamed_over}")
    assert ok
