"""Concrete models with hand-derived derivative callbacks.

The seven gallery models have non-globally-monotone coefficients.  Default
parameters and initial states are desk-scale choices, overridable through
keyword arguments (or :func:`make_model` with a flat dict).

Two simple extra models, ``ou`` and ``cubic``, are used by tests and the
untamed-Euler baseline.
"""

import inspect

import numpy as np

from ..errors import ConfigurationError
from .base import LyapunovPair, ModelSpec, NoiseStructure, zeros_like_state

__all__ = [
    "lorenz",
    "brownian_dynamics",
    "langevin",
    "exp_psychology",
    "van_der_pol",
    "duffing_van_der_pol",
    "lotka_volterra",
    "ornstein_uhlenbeck",
    "cubic",
    "double_well",
    "langevin_lyapunov_pair",
    "quadratic_lyapunov_pair",
    "default_lyapunov_pair",
    "GALLERY",
    "REGISTRY",
    "make_model",
    "model_parameters",
]


def _mv(mat, vec):
    return np.einsum("...ij,...j->...i", mat, vec)


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _constant_g(matrix):
    matrix = np.array(matrix, dtype=float)
    matrix.setflags(write=False)

    def g(x):
        x = np.asarray(x)
        return np.broadcast_to(matrix, x.shape[:-1] + matrix.shape)

    return g


def _noise_matrix(sigma, d, m):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 0:
        if d != m:
            raise ConfigurationError("scalar sigma needs a square noise matrix")
        return sigma * np.eye(d)
    if sigma.ndim == 1:
        if len(sigma) != min(d, m) or d != m:
            raise ConfigurationError("a sigma vector is read as a diagonal noise matrix")
        return np.diag(sigma)
    if sigma.shape != (d, m):
        raise ConfigurationError(f"noise matrix must have shape ({d}, {m}), got {sigma.shape}")
    return sigma


def lorenz(alpha1=0.5, alpha2=0.5, alpha3=0.5, sigma=0.3, x0=(0.0, 0.0, 0.0)):
    """Stochastic Lorenz system with additive noise, d = m = 3.

    ``f(x) = (a1 (x2 - x1), a2 x1 - x2 - x1 x3, x1 x2 - a3 x3)`` and
    ``g = sigma`` (a scalar times the identity, a diagonal, or a full 3x3
    matrix).

    The defaults keep paths well below the stopping threshold at coarse
    steps and keep the taming perturbation small, so the order-1.5 rate is
    visible between 2**-4 and 2**-9.  The classical chaotic parameters
    (10, 28, 8/3) leave the threshold region within ``t < 1``.
    """
    if min(alpha1, alpha2, alpha3) < 0:
        raise ConfigurationError("Lorenz coefficients must be nonnegative")
    G = _noise_matrix(sigma, 3, 3)

    def f(x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return _stack(alpha1 * (x2 - x1), alpha2 * x1 - x2 - x1 * x3, x1 * x2 - alpha3 * x3)

    def jac(x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        one = np.ones_like(x1)
        zero = np.zeros_like(x1)
        rows = [
            _stack(-alpha1 * one, alpha1 * one, zero),
            _stack(alpha2 - x3, -one, -x1),
            _stack(x2, x1, -alpha3 * one),
        ]
        return np.stack(rows, axis=-2)

    def curvature(v):
        # D^2 f [v, v]; only the two bilinear terms contribute.
        v1, v2, v3 = v[..., 0], v[..., 1], v[..., 2]
        return _stack(np.zeros_like(v1), -2.0 * v1 * v3, 2.0 * v1 * v2)

    def lg_f(j, x):
        return _mv(jac(x), np.broadcast_to(G[:, j], x.shape))

    half_trace = 0.5 * sum(curvature(G[:, j]) for j in range(3))

    def af(x):
        return _mv(jac(x), f(x)) + half_trace

    return ModelSpec(
        name="lorenz", d=3, m=3, f=f, g=_constant_g(G),
        noise_structure=NoiseStructure.ADDITIVE, x0=x0,
        lg_f=lg_f, af=af, box=(-2.0, 2.0),
        params=dict(alpha1=alpha1, alpha2=alpha2, alpha3=alpha3, sigma=G.tolist()),
    )


def double_well(d):
    """``V(x) = (|x|^2 - 1)^2 / 4`` on ``R^d`` with gradient, Hessian and
    ``grad (Laplacian V)``."""

    def V(x):
        return 0.25 * (np.sum(x * x, axis=-1) - 1.0) ** 2

    def grad(x):
        return (np.sum(x * x, axis=-1, keepdims=True) - 1.0) * x

    def hess(x):
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        return (r2 - 1.0) * np.eye(d) + 2.0 * x[..., :, None] * x[..., None, :]

    def grad_laplacian(x):
        return 2.0 * (d + 2) * x

    return V, grad, hess, grad_laplacian


def brownian_dynamics(V=None, grad_v=None, beta=0.2, hess_v=None, grad_lap_v=None,
                      d=1, x0=None):
    """Overdamped Langevin (Brownian) dynamics ``dX = -grad V dt + sqrt(beta) dW``.

    ``V`` defaults to the double well ``(|x|^2 - 1)^2 / 4``.  A custom
    potential must come with ``grad_v``, ``hess_v`` and ``grad_lap_v``
    (gradient of the Laplacian) since the order-1.5 terms need third
    derivatives.
    """
    if beta <= 0:
        raise ConfigurationError("beta must be positive")
    if V is None:
        V, grad_v, hess_v, grad_lap_v = double_well(d)
    elif grad_v is None or hess_v is None or grad_lap_v is None:
        raise ConfigurationError("a custom potential needs grad_v, hess_v and grad_lap_v")
    s = np.sqrt(beta)
    if x0 is None:
        x0 = np.full(d, 0.5)

    def f(x):
        return -grad_v(x)

    def lg_f(j, x):
        return -s * hess_v(x)[..., :, j]

    def af(x):
        return _mv(hess_v(x), grad_v(x)) - 0.5 * beta * grad_lap_v(x)

    return ModelSpec(
        name="brownian-dynamics", d=d, m=d, f=f, g=_constant_g(s * np.eye(d)),
        noise_structure=NoiseStructure.ADDITIVE, x0=x0,
        lg_f=lg_f, af=af, box=(-2.0, 2.0), params=dict(beta=beta, d=d), potential=V,
    )


def langevin(V=None, grad_v=None, gamma=1.0, beta=0.2, hess_v=None, m=1, x0=None):
    """Underdamped Langevin dynamics on ``R^{2m}``, state ``(q, p)``.

    ``f = (p, -grad V(q) - gamma p)`` and ``g u = (0, sqrt(beta) u)``.
    """
    if gamma < 0 or beta <= 0:
        raise ConfigurationError("need gamma >= 0 and beta > 0")
    if V is None:
        V, grad_v, hess_v, _ = double_well(m)
    elif grad_v is None or hess_v is None:
        raise ConfigurationError("a custom potential needs grad_v and hess_v")
    d = 2 * m
    s = np.sqrt(beta)
    G = np.vstack([np.zeros((m, m)), s * np.eye(m)])
    if x0 is None:
        x0 = np.concatenate([np.full(m, 0.5), np.zeros(m)])

    def f(x):
        q, p = x[..., :m], x[..., m:]
        return np.concatenate([p, -grad_v(q) - gamma * p], axis=-1)

    def lg_f(j, x):
        out = zeros_like_state(x, d)
        out[..., j] = s
        out[..., m + j] = -gamma * s
        return out

    def af(x):
        q, p = x[..., :m], x[..., m:]
        fp = -grad_v(q) - gamma * p
        return np.concatenate([fp, -_mv(hess_v(q), p) - gamma * fp], axis=-1)

    return ModelSpec(
        name="langevin", d=d, m=m, f=f, g=_constant_g(G),
        noise_structure=NoiseStructure.ADDITIVE, x0=x0,
        lg_f=lg_f, af=af, box=(-2.0, 2.0), params=dict(gamma=gamma, beta=beta, m=m),
        potential=V,
    )


def exp_psychology(lam=1.0, gamma=1.0, beta=0.2, x0=(1.0, 0.0)):
    """Experimental psychology model, d = 2 with scalar noise.

    ``f = (x2^2 (lam + 4 gamma x1) - beta^2 x1 / 2,
           -x1 x2 (lam + 4 gamma x1) - beta^2 x2 / 2)``,
    ``g = (-beta x2, beta x1)``.  The noise is a rotation, so ``|X_t|`` is
    conserved by the exact solution.
    """
    if lam <= 0 or gamma <= 0:
        raise ConfigurationError("lam and gamma must be positive")
    b2 = beta * beta

    def f(x):
        x1, x2 = x[..., 0], x[..., 1]
        k = lam + 4.0 * gamma * x1
        return _stack(x2 * x2 * k - 0.5 * b2 * x1, -x1 * x2 * k - 0.5 * b2 * x2)

    def gcol(x):
        return _stack(-beta * x[..., 1], beta * x[..., 0])

    def g(x):
        return gcol(x)[..., None]

    def jac(x):
        x1, x2 = x[..., 0], x[..., 1]
        k = lam + 4.0 * gamma * x1
        rows = [
            _stack(4.0 * gamma * x2 * x2 - 0.5 * b2, 2.0 * x2 * k),
            _stack(-lam * x2 - 8.0 * gamma * x1 * x2, -lam * x1 - 4.0 * gamma * x1 * x1 - 0.5 * b2),
        ]
        return np.stack(rows, axis=-2)

    def curvature(x, v):
        x1, x2 = x[..., 0], x[..., 1]
        v1, v2 = v[..., 0], v[..., 1]
        return _stack(
            16.0 * gamma * x2 * v1 * v2 + 2.0 * (lam + 4.0 * gamma * x1) * v2 * v2,
            -8.0 * gamma * x2 * v1 * v1 - 2.0 * (lam + 8.0 * gamma * x1) * v1 * v2,
        )

    def lg_g(j2, j1, x):
        return -b2 * np.asarray(x, dtype=float)

    def lg_f(j, x):
        return _mv(jac(x), gcol(x))

    def af(x):
        return _mv(jac(x), f(x)) + 0.5 * curvature(x, gcol(x))

    def ag(j, x):
        fx = f(x)
        return _stack(-beta * fx[..., 1], beta * fx[..., 0])

    def llg(j2, j1, j, x):
        return -b2 * gcol(x)

    return ModelSpec(
        name="exp-psych", d=2, m=1, f=f, g=g,
        noise_structure=NoiseStructure.SCALAR, x0=x0,
        lg_g=lg_g, lg_f=lg_f, af=af, ag=ag, llg=llg, box=(-2.0, 2.0),
        params=dict(lam=lam, gamma=gamma, beta=beta),
    )


def _sine_phi(sigma):
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))

    def phi(x1):
        return sigma * np.sin(x1)[..., None]

    def dphi(x1):
        return sigma * np.cos(x1)[..., None]

    def ddphi(x1):
        return -sigma * np.sin(x1)[..., None]

    return phi, dphi, ddphi, len(sigma)


def _oscillator(name, f, jac, lg_f_row, phi, dphi, ddphi, m, x0, params):
    """Shared pieces of the (Duffing-)van der Pol models, g u = (0, phi(x1) u).

    ``g`` depends on ``x1`` only and its first row is zero, so
    ``L^{j2} g^{(j1)} = 0`` and ``L L g = 0``.  Every second derivative of
    ``f`` involves ``x1``, so ``D^2 f [g_j, g_j] = 0`` and ``A f = Df f``.
    """

    def g(x):
        p = phi(x[..., 0])
        return np.stack([np.zeros_like(p), p], axis=-2)

    def zero2(*args):
        return zeros_like_state(args[-1], 2)

    def lg_f(j, x):
        return phi(x[..., 0])[..., j][..., None] * lg_f_row(x)

    def af(x):
        return _mv(jac(x), f(x))

    def ag(j, x):
        x1, x2 = x[..., 0], x[..., 1]
        return _stack(np.zeros_like(x1), dphi(x1)[..., j] * x2)

    return ModelSpec(
        name=name, d=2, m=m, f=f, g=g,
        noise_structure=NoiseStructure.NO_LEVY_AREA, x0=x0,
        lg_g=zero2, lg_f=lg_f, af=af, ag=ag, llg=zero2, box=(-2.0, 2.0), params=params,
    )


def van_der_pol(gamma=1.0, lam=1.0, beta=1.0, sigma=0.5, phi=None, dphi=None, ddphi=None,
                x0=(1.0, 1.0)):
    """Stochastic van der Pol oscillator.

    ``f = (x2, (gamma - lam x1^2) x2 - beta x1)``, ``g u = (0, phi(x1) u)``.
    ``phi`` defaults to ``sigma * sin(x1)`` with one noise component per
    entry of ``sigma``; a custom ``phi`` (mapping ``(...)`` to ``(..., m)``)
    needs ``dphi`` and ``ddphi``.
    """
    if lam <= 0 or gamma < 0 or beta < 0:
        raise ConfigurationError("need lam > 0 and gamma, beta >= 0")
    if phi is None:
        phi, dphi, ddphi, m = _sine_phi(sigma)
    elif dphi is None or ddphi is None:
        raise ConfigurationError("a custom phi needs dphi and ddphi")
    else:
        m = np.shape(phi(np.zeros(1)))[-1]

    def f(x):
        x1, x2 = x[..., 0], x[..., 1]
        return _stack(x2, (gamma - lam * x1 * x1) * x2 - beta * x1)

    def jac(x):
        x1, x2 = x[..., 0], x[..., 1]
        rows = [
            _stack(np.zeros_like(x1), np.ones_like(x1)),
            _stack(-2.0 * lam * x1 * x2 - beta, gamma - lam * x1 * x1),
        ]
        return np.stack(rows, axis=-2)

    def lg_f_row(x):
        x1 = x[..., 0]
        return _stack(np.ones_like(x1), gamma - lam * x1 * x1)

    return _oscillator("van-der-pol", f, jac, lg_f_row, phi, dphi, ddphi, m, x0,
                       dict(gamma=gamma, lam=lam, beta=beta, sigma=np.atleast_1d(sigma).tolist()))


def duffing_van_der_pol(alpha1=1.0, alpha2=1.0, alpha3=1.0, sigma=0.5, phi=None, dphi=None,
                        ddphi=None, x0=(1.0, 1.0)):
    """Stochastic Duffing-van der Pol oscillator.

    ``f = (x2, alpha2 x2 - alpha1 x1 - alpha3 x1^2 x2 - x1^3)``,
    ``g u = (0, phi(x1) u)`` with the same ``phi`` convention as
    :func:`van_der_pol`.
    """
    if alpha3 <= 0:
        raise ConfigurationError("alpha3 must be positive")
    if phi is None:
        phi, dphi, ddphi, m = _sine_phi(sigma)
    elif dphi is None or ddphi is None:
        raise ConfigurationError("a custom phi needs dphi and ddphi")
    else:
        m = np.shape(phi(np.zeros(1)))[-1]

    def f(x):
        x1, x2 = x[..., 0], x[..., 1]
        return _stack(x2, alpha2 * x2 - alpha1 * x1 - alpha3 * x1 * x1 * x2 - x1**3)

    def jac(x):
        x1, x2 = x[..., 0], x[..., 1]
        rows = [
            _stack(np.zeros_like(x1), np.ones_like(x1)),
            _stack(-alpha1 - 2.0 * alpha3 * x1 * x2 - 3.0 * x1 * x1, alpha2 - alpha3 * x1 * x1),
        ]
        return np.stack(rows, axis=-2)

    def lg_f_row(x):
        x1 = x[..., 0]
        return _stack(np.ones_like(x1), alpha2 - alpha3 * x1 * x1)

    return _oscillator("duffing-van-der-pol", f, jac, lg_f_row, phi, dphi, ddphi, m, x0,
                       dict(alpha1=alpha1, alpha2=alpha2, alpha3=alpha3,
                            sigma=np.atleast_1d(sigma).tolist()))


def lotka_volterra(b=(1.0, 1.0), A=((1.0, 0.5), (0.5, 1.0)), sigma=((0.2, 0.0), (0.0, 0.2)),
                   x0=(0.5, 0.5)):
    """Stochastic Lotka-Volterra competition model.

    ``f = diag(x) (b - A x)``, ``g = diag(x) sigma``.  The noise is
    commutative: ``L^{j2} g^{(j1)}_i = x_i sigma_{i j2} sigma_{i j1}``.
    """
    b = np.asarray(b, dtype=float)
    A = np.asarray(A, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    d = len(b)
    if A.shape != (d, d):
        raise ConfigurationError(f"A must have shape ({d}, {d})")
    if sigma.ndim != 2 or sigma.shape[0] != d:
        raise ConfigurationError(f"sigma must have shape ({d}, m)")
    if np.any(A < 0) or np.min(np.diag(A)) <= 0:
        raise ConfigurationError("A must be nonnegative with a positive diagonal")
    if x0.shape != (d,) or np.any(x0 <= 0):
        raise ConfigurationError("x0 must be strictly positive componentwise")
    m = sigma.shape[1]

    def f(x):
        return x * (b - _mv(A, x))

    def g(x):
        return x[..., :, None] * sigma

    def jac(x):
        return (b - _mv(A, x))[..., :, None] * np.eye(d) - x[..., :, None] * A

    def lg_g(j2, j1, x):
        # Multiply the sigmas first so the result is bitwise symmetric in j1, j2.
        return x * (sigma[:, j2] * sigma[:, j1])

    def lg_f(j, x):
        return _mv(jac(x), x * sigma[:, j])

    def af(x):
        out = _mv(jac(x), f(x))
        for j in range(m):
            gj = x * sigma[:, j]
            out = out - gj * _mv(A, gj)
        return out

    def ag(j, x):
        return sigma[:, j] * f(x)

    def llg(j2, j1, j, x):
        return x * sigma[:, j2] * sigma[:, j1] * sigma[:, j]

    return ModelSpec(
        name="lotka-volterra", d=d, m=m, f=f, g=g,
        noise_structure=NoiseStructure.COMMUTATIVE, x0=x0,
        lg_g=lg_g, lg_f=lg_f, af=af, ag=ag, llg=llg, box=(0.05, 2.0),
        params=dict(b=b.tolist(), A=A.tolist(), sigma=sigma.tolist()),
    )


def ornstein_uhlenbeck(kappa=1.0, sigma=0.1, x0=1.0):
    """Scalar Ornstein-Uhlenbeck process ``dX = -kappa X dt + sigma dW``."""

    def f(x):
        return -kappa * np.asarray(x, dtype=float)

    def lg_f(j, x):
        return np.full(np.shape(x), -kappa * sigma)

    def af(x):
        return kappa**2 * np.asarray(x, dtype=float)

    return ModelSpec(
        name="ou", d=1, m=1, f=f, g=_constant_g([[sigma]]),
        noise_structure=NoiseStructure.ADDITIVE, x0=[x0],
        lg_f=lg_f, af=af, box=(-2.0, 2.0), params=dict(kappa=kappa, sigma=sigma),
    )


def cubic(sigma=0.1, x0=5.0):
    """Scalar ``dX = -X^3 dt + sigma dW``; classical Euler diverges from large x0."""

    def f(x):
        return -np.asarray(x, dtype=float) ** 3

    def lg_f(j, x):
        return -3.0 * sigma * np.asarray(x, dtype=float) ** 2

    def af(x):
        x = np.asarray(x, dtype=float)
        return 3.0 * x**5 - 3.0 * sigma**2 * x

    return ModelSpec(
        name="cubic", d=1, m=1, f=f, g=_constant_g([[sigma]]),
        noise_structure=NoiseStructure.ADDITIVE, x0=[x0],
        lg_f=lg_f, af=af, box=(-2.0, 2.0), params=dict(sigma=sigma),
    )


def langevin_lyapunov_pair(model):
    """``U0 = V(q) + |p|^2/2 + 1``, ``U1 = 0`` for a :func:`langevin` model.

    With ``alpha = max(beta - 2 gamma, 0)`` and ``c = beta m / 2`` the
    exponential-integrability condition holds for every state.
    """
    m = model.m
    beta, gamma = model.params["beta"], model.params["gamma"]
    V = model.potential

    def U0(x):
        p = x[..., m:]
        return V(x[..., :m]) + 0.5 * np.sum(p * p, axis=-1) + 1.0

    def U1(x):
        return np.zeros(np.shape(x)[:-1])

    return LyapunovPair(U0, U1, alpha=max(beta - 2.0 * gamma, 0.0), c=0.5 * beta * m)


def quadratic_lyapunov_pair(scale=0.1, alpha=1.0, c=0.0):
    """Generic ``U0 = scale (1 + |x|^2)``, ``U1 = 0``.  No condition is
    guaranteed; use it as an exploratory diagnostic."""

    def U0(x):
        return scale * (1.0 + np.sum(np.asarray(x) ** 2, axis=-1))

    def U1(x):
        return np.zeros(np.shape(x)[:-1])

    def grad_u0(x):
        return 2.0 * scale * np.asarray(x, dtype=float)

    def hess_u0(x):
        x = np.asarray(x)
        return np.broadcast_to(2.0 * scale * np.eye(x.shape[-1]), x.shape + (x.shape[-1],))

    return LyapunovPair(U0, U1, alpha=alpha, c=c, grad_u0=grad_u0, hess_u0=hess_u0)


def default_lyapunov_pair(model):
    if model.name == "langevin" and model.potential is not None:
        return langevin_lyapunov_pair(model)
    return quadratic_lyapunov_pair()


GALLERY = {
    "lorenz": lorenz,
    "brownian-dynamics": brownian_dynamics,
    "langevin": langevin,
    "exp-psych": exp_psychology,
    "van-der-pol": van_der_pol,
    "duffing-van-der-pol": duffing_van_der_pol,
    "lotka-volterra": lotka_volterra,
}

REGISTRY = dict(GALLERY, ou=ornstein_uhlenbeck, cubic=cubic)

# Callback arguments cannot come from a JSON config.
_CODE_ONLY = {"V", "grad_v", "hess_v", "grad_lap_v", "phi", "dphi", "ddphi"}


def model_parameters(name):
    """Overridable (JSON-friendly) parameters of a registered model and their defaults."""
    if name not in REGISTRY:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(REGISTRY)}")
    sig = inspect.signature(REGISTRY[name])
    return {k: v.default for k, v in sig.parameters.items() if k not in _CODE_ONLY}


def make_model(name, overrides=None):
    """Build a registered model, applying flat ``overrides``."""
    allowed = model_parameters(name)
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(allowed))
    if unknown:
        raise ConfigurationError(
            f"unknown parameter(s) {unknown} for model {name!r}; allowed: {sorted(allowed)}"
        )
    return REGISTRY[name](**overrides)
