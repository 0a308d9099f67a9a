"""Numerical checks of model callbacks.

Each hand-derived callback is compared with a finite-difference composition
of ``f`` and ``g`` only, so a wrong callback cannot validate itself.
First derivatives use central differences with step ``eps``; the
second-order pieces (generator terms, ``L L g``) use a larger step
``eps2`` because a second difference at ``eps = 1e-6`` is dominated by
rounding.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .base import NoiseStructure

__all__ = [
    "DerivativeReport",
    "LyapunovReport",
    "fd_check_derivatives",
    "check_noise_structure",
    "check_lyapunov_condition",
]


def _col(model, j):
    return lambda x: model.g(x)[..., :, j]


def _along(F, x, v, eps):
    """Central difference of ``F`` at ``x`` along the (state-dependent) direction ``v``."""
    return (F(x + eps * v) - F(x - eps * v)) / (2.0 * eps)


def _second_along(F, x, v, eps):
    return (F(x + eps * v) - 2.0 * F(x) + F(x - eps * v)) / (eps * eps)


def _generator(model, F, x, eps, eps2):
    """``DF f + 1/2 sum_j D^2 F [g_j, g_j]`` by finite differences."""
    gx = model.g(x)
    out = _along(F, x, model.f(x), eps)
    for j in range(model.m):
        out = out + 0.5 * _second_along(F, x, gx[..., :, j], eps2)
    return out


def _rel_err(exact, approx):
    exact = np.asarray(exact, dtype=float)
    approx = np.asarray(approx, dtype=float)
    diff = np.linalg.norm(exact - approx, axis=-1)
    return float(np.max(diff / np.maximum(1.0, np.linalg.norm(approx, axis=-1))))


@dataclass
class DerivativeReport:
    """Maximum relative error per callback name; ``passed`` iff all are below ``tol``."""

    model: str
    errors: dict
    tol: float
    n_states: int

    @property
    def passed(self):
        return all(err <= self.tol for err in self.errors.values())

    def __str__(self):
        lines = [f"{self.model}: {'PASS' if self.passed else 'FAIL'} "
                 f"(tol {self.tol:g}, {self.n_states} states)"]
        for name, err in self.errors.items():
            lines.append(f"  {name:5s} max rel err {err:.3e}")
        return "\n".join(lines)


def fd_check_derivatives(model, states, eps=1e-6, tol=1e-5, eps2=1e-4):
    """Compare every available derivative callback of ``model`` with
    finite-difference compositions of ``f`` and ``g`` at ``states``
    (shape ``(n, d)``).

    The relative error of a vector is ``|exact - fd| / max(1, |fd|)``.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    gx = model.g(x)
    m = model.m
    errors = {}

    if model.lg_g is not None:
        errors["lg_g"] = max(
            _rel_err(model.lg_g(j2, j1, x), _along(_col(model, j1), x, gx[..., :, j2], eps))
            for j2 in range(m) for j1 in range(m)
        )
    if model.lg_f is not None:
        errors["lg_f"] = max(
            _rel_err(model.lg_f(j, x), _along(model.f, x, gx[..., :, j], eps)) for j in range(m)
        )
    if model.af is not None:
        errors["af"] = _rel_err(model.af(x), _generator(model, model.f, x, eps, eps2))
    if model.ag is not None:
        errors["ag"] = max(
            _rel_err(model.ag(j, x), _generator(model, _col(model, j), x, eps, eps2))
            for j in range(m)
        )
    if model.llg is not None:
        worst = 0.0
        for j2 in range(m):
            for j1 in range(m):
                for j in range(m):
                    inner = lambda y, j1=j1, j=j: _along(_col(model, j), y, model.g(y)[..., :, j1], eps2)
                    fd = _along(inner, x, gx[..., :, j2], eps2)
                    worst = max(worst, _rel_err(model.llg(j2, j1, j, x), fd))
        errors["llg"] = worst
    return DerivativeReport(model.name, errors, tol, len(x))


def check_noise_structure(model, states):
    """Exact (not tolerance-based) checks that the noise tag is honest.

    Returns a dict of named boolean checks.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    m = model.m
    results = {}
    structure = model.noise_structure
    if structure is NoiseStructure.ADDITIVE:
        g0 = model.g(x[:1])[0]
        results["constant_g"] = bool(np.all(model.g(x) == g0))
    if structure is NoiseStructure.NO_LEVY_AREA:
        results["lg_g_zero"] = all(
            np.all(model.lg_g(j2, j1, x) == 0) for j2 in range(m) for j1 in range(m)
        )
        results["llg_zero"] = all(
            np.all(model.llg(j2, j1, j, x) == 0)
            for j2 in range(m) for j1 in range(m) for j in range(m)
        )
    if structure in (NoiseStructure.COMMUTATIVE, NoiseStructure.SCALAR):
        results["commutative"] = all(
            np.all(model.lg_g(j2, j1, x) == model.lg_g(j1, j2, x))
            for j2 in range(m) for j1 in range(m)
        )
    return results


@dataclass
class LyapunovReport:
    """``max_violation`` is the largest ``LHS - (c + alpha U0)`` over finite samples."""

    max_violation: float
    violations: np.ndarray = field(repr=False)
    n_nonfinite: int
    tol: float

    @property
    def holds(self):
        return self.max_violation <= self.tol


def check_lyapunov_condition(model, pair, states, fd_step=1e-5, fd_step2=1e-4, tol=1e-6):
    """Evaluate ``A U0 + |g^T grad U0|^2 / 2 + U1 - (c + alpha U0)`` at ``states``.

    Exact ``grad_u0`` / ``hess_u0`` on the pair are used when present;
    otherwise directional finite differences of ``U0`` along ``f`` and the
    columns of ``g``.  Non-finite samples are excluded from the maximum and
    counted, with a warning.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    fx = model.f(x)
    gx = model.g(x)
    u0 = pair.U0(x)

    if pair.grad_u0 is not None:
        grad = pair.grad_u0(x)
        drift_term = np.sum(fx * grad, axis=-1)
        g_grad = np.einsum("...im,...i->...m", gx, grad)
    else:
        drift_term = _along(pair.U0, x, fx, fd_step)
        g_grad = np.stack([_along(pair.U0, x, gx[..., :, j], fd_step) for j in range(model.m)],
                          axis=-1)
    if pair.hess_u0 is not None:
        hess = pair.hess_u0(x)
        trace_term = 0.5 * np.einsum("...ij,...ik,...jk->...", hess, gx, gx)
    else:
        trace_term = 0.5 * sum(_second_along(pair.U0, x, gx[..., :, j], fd_step2)
                               for j in range(model.m))

    lhs = drift_term + trace_term + 0.5 * np.sum(g_grad**2, axis=-1) + pair.U1(x)
    violation = lhs - (pair.c + pair.alpha * u0)
    finite = np.isfinite(violation)
    n_bad = int(np.count_nonzero(~finite))
    if n_bad:
        warnings.warn(f"{n_bad} non-finite Lyapunov evaluations excluded", RuntimeWarning)
    worst = float(np.max(violation[finite])) if finite.any() else float("nan")
    return LyapunovReport(worst, violation, n_bad, tol)
