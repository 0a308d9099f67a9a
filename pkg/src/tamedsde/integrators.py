"""Stopped increment-tamed Euler, Milstein and order-1.5 schemes.

Every scheme advances a grid value ``y`` by

    y_next = y + 1{|y| <= phi(h)} * tame(increment(y, dW, dZ))

where ``increment`` is the scheme's stochastic Taylor expansion over one
step.  Once ``|y|`` exceeds the threshold the path is frozen for good.

One-step maps accept a batch of states ``(..., d)`` with matching
increments ``(..., m)``.  Only grid values are produced.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, StepError, UnsupportedSchemeError
from .models.base import NoiseStructure
from .taming import phi_threshold, tame

__all__ = [
    "SCHEMES",
    "StepInputs",
    "PathResult",
    "PathBatch",
    "check_compatible",
    "euler_increment",
    "milstein_increment",
    "order15_increment",
    "scalar_iterated_integrals",
    "step_euler",
    "step_milstein",
    "step_order15",
    "simulate_path",
    "simulate_paths",
    "simulate_em_untamed",
]

SCHEMES = ("euler", "milstein", "order15")

_MILSTEIN_OK = {
    NoiseStructure.ADDITIVE,
    NoiseStructure.SCALAR,
    NoiseStructure.COMMUTATIVE,
    NoiseStructure.NO_LEVY_AREA,
}
_ORDER15_OK = {NoiseStructure.ADDITIVE, NoiseStructure.SCALAR, NoiseStructure.NO_LEVY_AREA}


@dataclass(frozen=True)
class StepInputs:
    h: float
    dW: np.ndarray
    dZ: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PathResult:
    """Grid values of one path.

    ``tau_index`` is the first grid index with ``|Y| > phi(h)`` (``None``
    if the threshold is never exceeded); all later states equal that one.
    """

    states: np.ndarray
    tau_index: Optional[int]
    frozen: bool


@dataclass(frozen=True)
class PathBatch:
    """Grid values of many paths: ``states`` is ``(P, N+1, d)`` and
    ``tau_index`` holds ``-1`` where a path never stops."""

    states: np.ndarray
    tau_index: np.ndarray
    h: float

    @property
    def frozen(self):
        return self.tau_index >= 0

    def path(self, i):
        tau = int(self.tau_index[i])
        return PathResult(self.states[i], None if tau < 0 else tau, tau >= 0)


def check_compatible(model, scheme, p=None):
    """Raise unless ``scheme`` can run on ``model`` (and ``p`` meets its constraint)."""
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    structure = model.noise_structure
    if scheme == "milstein" and structure not in _MILSTEIN_OK:
        raise UnsupportedSchemeError(
            f"Milstein needs Levy areas for {structure.value} noise; not supported"
        )
    if scheme == "order15" and structure not in _ORDER15_OK:
        raise UnsupportedSchemeError(
            f"order 1.5 has no closed-form triple integrals for {structure.value} noise"
        )
    missing = model.missing_callbacks(scheme)
    if missing:
        raise ConfigurationError(f"model {model.name!r} lacks callbacks {missing} for {scheme}")
    if p is not None:
        p.check_scheme(scheme)


def euler_increment(y, inp, model):
    """``f h + g dW``."""
    return model.f(y) * inp.h + np.einsum("...ij,...j->...i", model.g(y), inp.dW)


def milstein_increment(y, inp, model):
    """Euler increment plus ``sum_{j1,j2} L^{j2} g^{(j1)} I_(j2,j1)``.

    With commutative noise the double integrals combine into
    ``(dW^{j1} dW^{j2} - [j1 == j2] h) / 2``.
    """
    z = euler_increment(y, inp, model)
    structure = model.noise_structure
    if structure in (NoiseStructure.ADDITIVE, NoiseStructure.NO_LEVY_AREA):
        return z
    if structure not in _MILSTEIN_OK:
        raise UnsupportedSchemeError(f"Milstein is not supported for {structure.value} noise")
    dW = inp.dW
    for j2 in range(model.m):
        for j1 in range(model.m):
            coeff = dW[..., j1] * dW[..., j2]
            if j1 == j2:
                coeff = coeff - inp.h
            z = z + 0.5 * coeff[..., None] * model.lg_g(j2, j1, y)
    return z


def scalar_iterated_integrals(dW, h):
    """Closed forms of the Ito integrals ``I_(1,1)`` and ``I_(1,1,1)`` of a
    scalar Brownian motion over one step."""
    return 0.5 * (dW * dW - h), dW**3 / 6.0 - 0.5 * h * dW


def order15_increment(y, inp, model):
    """Order-1.5 stochastic Taylor increment.

    Drift part ``f h + sum_j L^j f dZ_j + A f h^2/2``; diffusion part
    ``g dW + sum_j A g^{(j)} (h dW_j - dZ_j)`` plus, for scalar noise,
    ``L g I_(1,1) + L L g I_(1,1,1)``.
    """
    structure = model.noise_structure
    if structure not in _ORDER15_OK:
        raise UnsupportedSchemeError(f"order 1.5 is not supported for {structure.value} noise")
    if inp.dZ is None:
        raise ConfigurationError("order 1.5 needs the time-integral increments dZ")
    h, dW, dZ = inp.h, inp.dW, inp.dZ
    z = euler_increment(y, inp, model) + model.af(y) * (0.5 * h * h)
    for j in range(model.m):
        z = z + dZ[..., j, None] * model.lg_f(j, y)
    if structure is NoiseStructure.ADDITIVE:
        return z
    for j in range(model.m):
        z = z + (h * dW[..., j] - dZ[..., j])[..., None] * model.ag(j, y)
    if structure is NoiseStructure.SCALAR:
        i11, i111 = scalar_iterated_integrals(dW[..., 0], h)
        z = z + i11[..., None] * model.lg_g(0, 0, y) + i111[..., None] * model.llg(0, 0, 0, y)
    return z


_INCREMENTS = {
    "euler": euler_increment,
    "milstein": milstein_increment,
    "order15": order15_increment,
}


def _tamed_step(y, inp, model, p, increment):
    y = np.asarray(y, dtype=float)
    active = np.linalg.norm(y, axis=-1, keepdims=True) <= phi_threshold(inp.h, p)
    if not np.any(active):
        return y.copy()
    with np.errstate(all="ignore"):
        z = increment(y, inp, model)
    bad = ~np.isfinite(z) & active
    if np.any(bad):
        row = np.argwhere(bad.any(axis=-1))[0] if y.ndim > 1 else None
        state = y if row is None else y[tuple(row)]
        raise StepError(f"non-finite increment from model {model.name!r}", state=state)
    return np.where(active, y + tame(np.where(active, z, 0.0), inp.h, p), y)


def step_euler(y, inp, model, p):
    """One stopped increment-tamed Euler step."""
    return _tamed_step(y, inp, model, p, euler_increment)


def step_milstein(y, inp, model, p):
    """One stopped increment-tamed Milstein step."""
    return _tamed_step(y, inp, model, p, milstein_increment)


def step_order15(y, inp, model, p):
    """One stopped increment-tamed order-1.5 step."""
    return _tamed_step(y, inp, model, p, order15_increment)


def simulate_paths(model, scheme, lattice, p, x0=None):
    """Run ``scheme`` over every path of a batched lattice.

    ``lattice.dW`` has shape ``(P, N, m)``.  Returns a :class:`PathBatch`.
    """
    check_compatible(model, scheme, p)
    if lattice.m != model.m:
        raise ConfigurationError(f"lattice has m={lattice.m}, model needs m={model.m}")
    if scheme == "order15" and not lattice.has_dz:
        raise ConfigurationError("order 1.5 needs a lattice sampled with dZ")
    dW = lattice.dW
    if dW.ndim != 3:
        raise ConfigurationError("simulate_paths expects a batched lattice")
    n_paths, n_steps = dW.shape[0], lattice.n_steps
    h = lattice.h
    threshold = phi_threshold(h, p)
    increment = _INCREMENTS[scheme]
    dZ = lattice.dZ if scheme == "order15" else None

    states = np.empty((n_paths, n_steps + 1, model.d))
    y = np.broadcast_to(model.x0 if x0 is None else np.asarray(x0, dtype=float),
                        (n_paths, model.d)).copy()
    states[:, 0] = y
    tau = np.full(n_paths, -1, dtype=np.int64)
    for k in range(n_steps):
        stopped = (tau < 0) & (np.linalg.norm(y, axis=-1) > threshold)
        tau[stopped] = k
        inp = StepInputs(h, dW[:, k], None if dZ is None else dZ[:, k])
        try:
            y = _tamed_step(y, inp, model, p, increment)
        except StepError as exc:
            exc.step = k
            raise
        states[:, k + 1] = y
    stopped = (tau < 0) & (np.linalg.norm(y, axis=-1) > threshold)
    tau[stopped] = n_steps
    return PathBatch(states, tau, h)


def simulate_path(model, scheme, lattice, p, x0=None):
    """Run ``scheme`` on a single-path lattice; returns a :class:`PathResult`."""
    if lattice.dW.ndim != 2:
        raise ConfigurationError("simulate_path expects a single-path lattice")
    dz = None if lattice.dZ is None else lattice.dZ[None]
    batched = type(lattice)(lattice.m, lattice.level, lattice.t_final, lattice.dW[None], dz)
    return simulate_paths(model, scheme, batched, p, x0).path(0)


def simulate_em_untamed(model, lattice, x0=None):
    """Classical Euler-Maruyama without taming or stopping.

    Returns ``(states, overflowed)``; a path that produces a non-finite
    value is flagged and its remaining states are NaN.
    """
    dW = lattice.dW
    n_paths, n_steps = dW.shape[0], lattice.n_steps
    h = lattice.h
    states = np.empty((n_paths, n_steps + 1, model.d))
    y = np.broadcast_to(model.x0 if x0 is None else np.asarray(x0, dtype=float),
                        (n_paths, model.d)).copy()
    states[:, 0] = y
    overflowed = np.zeros(n_paths, dtype=bool)
    with np.errstate(all="ignore"):
        for k in range(n_steps):
            y = y + euler_increment(y, StepInputs(h, dW[:, k]), model)
            overflowed |= ~np.all(np.isfinite(y), axis=-1)
            y[overflowed] = np.nan
            states[:, k + 1] = y
    return states, overflowed
