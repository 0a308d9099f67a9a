"""Stopping threshold and increment-taming map.

The taming map shrinks an increment ``z`` along its own direction,

    tame(z) = z / (1 + |z|**delta * h**(-theta)),

so that a single step never moves further than ``h**(theta/delta)``.  The
stopping threshold ``phi_threshold(h)`` grows slower than any negative
power of ``h``; paths whose norm exceeds it are frozen.

All functions accept either a scalar state or an array whose last axis is
the state dimension; leading axes are treated as a batch.  ``h`` may be a
scalar or an array broadcastable against the batch shape.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "SchemeParams",
    "phi_threshold",
    "tame",
    "tame_jacobian_apply",
    "tame_hessian_apply",
    "increment_bound",
    "jacobian_norm_bound",
    "jacobian_defect_bound",
    "hessian_bound",
    "phi_power_bound_applies",
    "sweep_taming_bounds",
]

# Minimum value of delta - 2*theta for each scheme.  Euler only needs the
# strict inequality for its exponential-moment guarantee.
_ORDER_CONSTRAINTS = {
    "euler": (1.0, True),
    "milstein": (3.0, False),
    "order15": (4.0, False),
}

# Below this norm the analytic limit at x = 0 is used.
_ZERO_NORM = 1e-300
# log(|x|**delta * h**-theta) above which 1 + p == p in double precision.
_SATURATION_LOG = 40.0
# Relative slack for bound checks that are tight up to rounding.
_ROUNDING_SLACK = 1e-12


@dataclass(frozen=True)
class SchemeParams:
    """Taming exponent ``delta``, step exponent ``theta`` and the three
    threshold constants ``gamma1``, ``gamma2``, ``gamma3``.

    Defaults are the values used in the reference experiments.
    """

    delta: float = 5.0
    theta: float = 0.25
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 0.5

    def __post_init__(self):
        for name in ("delta", "theta", "gamma1", "gamma2", "gamma3"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ConfigurationError(f"{name} must be finite, got {value}")
        if self.delta <= 0 or self.theta <= 0:
            raise ConfigurationError("delta and theta must be positive")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ConfigurationError("gamma1 and gamma2 must be positive")
        if not 0 < self.gamma3 < 1:
            raise ConfigurationError("gamma3 must lie in (0, 1)")

    @property
    def margin(self):
        """``delta - 2*theta``, the quantity the order constraints bound."""
        return self.delta - 2.0 * self.theta

    def satisfies(self, scheme):
        """True if these parameters meet the constraint for ``scheme``.

        Schemes without a constraint (e.g. the untamed baseline) always pass.
        """
        if scheme not in _ORDER_CONSTRAINTS:
            return True
        bound, strict = _ORDER_CONSTRAINTS[scheme]
        return self.margin > bound if strict else self.margin >= bound

    def check_scheme(self, scheme):
        if not self.satisfies(scheme):
            bound, strict = _ORDER_CONSTRAINTS[scheme]
            op = ">" if strict else ">="
            raise ConfigurationError(
                f"scheme {scheme!r} requires delta - 2*theta {op} {bound:g}, "
                f"got {self.margin:g}"
            )
        return self


def _check_h(h):
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ConfigurationError(f"step size must be positive and finite, got {h}")
    return h


def phi_threshold(h, p):
    """Stopping threshold ``gamma1 * exp(gamma2 * |ln h|**gamma3)``."""
    h = _check_h(h)
    out = p.gamma1 * np.exp(p.gamma2 * np.abs(np.log(h)) ** p.gamma3)
    return float(out) if out.ndim == 0 else out


def _prepare(x, h):
    """Return (x, r, h) with r = |x| and h shaped to broadcast against x."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.ndim == 0:
        r = np.abs(x)
    else:
        with np.errstate(over="ignore"):
            r = np.linalg.norm(x, axis=-1, keepdims=True)
        if h.ndim > 0:
            h = h[..., None]
    return x, r, h


def _log_power(r, h, p):
    """log(|x|**delta * h**-theta); -inf at r = 0."""
    with np.errstate(divide="ignore"):
        return p.delta * np.log(r) - p.theta * np.log(h)


def tame(x, h, p):
    """Tamed increment ``x / (1 + |x|**delta * h**-theta)``.

    The result always has norm at most ``h**(theta/delta)`` and points in
    the direction of ``x``.  For very large ``|x|`` the denominator is
    dropped and the value is computed as ``(x/|x|) |x|**(1-delta) h**theta``
    to avoid overflow.
    """
    x, r, h = _prepare(x, h)
    logp = _log_power(r, h, p)
    saturated = logp > _SATURATION_LOG
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        shrink = 1.0 / (1.0 + np.exp(np.minimum(logp, _SATURATION_LOG)))
        tail = (x / r) * (r ** (1.0 - p.delta) * h**p.theta)
    return np.where(saturated, tail, x * shrink)


def tame_jacobian_apply(x, u, h, p):
    """Directional derivative of :func:`tame` at ``x`` applied to ``u``.

    Equals ``u`` at ``x = 0``.
    """
    x, r, h = _prepare(x, h)
    u = np.asarray(u, dtype=float)
    a = h ** (-p.theta)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        denom = 1.0 + r**p.delta * a
        xu = x * u if x.ndim == 0 else np.sum(x * u, axis=-1, keepdims=True)
        out = u / denom - p.delta * a * r ** (p.delta - 2) * xu * x / denom**2
    return np.where(r < _ZERO_NORM, u, out)


def _jacobian_defect_apply(x, u, h, p):
    """``(J(x) - I) u`` without the cancellation of forming ``J u - u``."""
    x, r, h = _prepare(x, h)
    u = np.asarray(u, dtype=float)
    a = h ** (-p.theta)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        power = r**p.delta * a
        denom = 1.0 + power
        xu = x * u if x.ndim == 0 else np.sum(x * u, axis=-1, keepdims=True)
        out = -power / denom * u - p.delta * a * r ** (p.delta - 2) * xu * x / denom**2
    return np.where(r < _ZERO_NORM, 0.0 * u, out)


def tame_hessian_apply(x, u, h, p):
    """Second derivative of :func:`tame` at ``x`` in direction ``(u, u)``.

    Zero at ``x = 0``.
    """
    x, r, h = _prepare(x, h)
    u = np.asarray(u, dtype=float)
    delta = p.delta
    a = h ** (-p.theta)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        denom = 1.0 + r**delta * a
        if x.ndim == 0:
            xu, uu = x * u, u * u
        else:
            xu = np.sum(x * u, axis=-1, keepdims=True)
            uu = np.sum(u * u, axis=-1, keepdims=True)
        out = (
            2 * delta**2 * a**2 * denom**-3 * r ** (2 * delta - 4) * xu**2 * x
            - delta * (delta - 2) * a * denom**-2 * r ** (delta - 4) * xu**2 * x
            - delta * a * denom**-2 * r ** (delta - 2) * (uu * x + 2 * xu * u)
        )
    zero = np.zeros(np.broadcast(x, u).shape)
    return np.where(r < _ZERO_NORM, zero, out)


def increment_bound(h, p):
    """Upper bound ``h**(theta/delta)`` on ``|tame(x)|`` for every ``x``."""
    return np.asarray(h, dtype=float) ** (p.theta / p.delta)


def jacobian_norm_bound(x, h, p):
    """Bound ``delta |x|**delta h**-theta + 1`` on the operator norm of the
    taming Jacobian at ``x``."""
    _, r, h = _prepare(x, h)
    return p.delta * r**p.delta * h ** (-p.theta) + 1.0


def jacobian_defect_bound(x, h, p):
    """Bound ``(delta+1) |x|**delta h**-theta`` on ``||J(x) - I||``."""
    _, r, h = _prepare(x, h)
    return (p.delta + 1.0) * r**p.delta * h ** (-p.theta)


def hessian_bound(x, h, p):
    """Bound on ``|tame''(x)(u, u)|`` over unit-norm ``u``."""
    _, r, h = _prepare(x, h)
    delta = p.delta
    a = h ** (-p.theta)
    return (
        2 * delta**2 * r ** (2 * delta - 1) * a**2
        + (delta**2 + 5 * delta) * r ** (delta - 1) * a
    )


def phi_power_bound_applies(h, v, p):
    """True when ``h`` is small enough that ``phi_threshold(h) <= gamma1 / h**v``
    is guaranteed, i.e. ``h <= exp(-(gamma2/v)**(1/(1-gamma3)))``."""
    return np.asarray(h) <= np.exp(-((p.gamma2 / v) ** (1.0 / (1.0 - p.gamma3))))


def sweep_taming_bounds(p, n_samples=10_000, d=3, seed=0):
    """Count violations of the taming bounds over random ``(x, u, h)``.

    ``|x|`` is log-uniform on ``[1e-6, 1e3]``, ``h`` log-uniform on
    ``[2**-14, 1]`` and ``u`` uniform on the unit sphere.  The Jacobian
    bounds are checked against the exact operator norm; the Hessian bound
    against the sampled direction.  Returns a dict of counts.
    """
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((n_samples, d))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    x = direction * 10.0 ** rng.uniform(-6, 3, (n_samples, 1))
    h = 2.0 ** rng.uniform(-14, 0, n_samples)
    u = rng.standard_normal((n_samples, d))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)

    def matrix(apply):
        basis = np.eye(d)
        cols = [apply(x, np.broadcast_to(basis[i], x.shape), h, p) for i in range(d)]
        return np.stack(cols, axis=-1)

    def exceeds(value, bound):
        return int(np.count_nonzero(value > bound * (1.0 + _ROUNDING_SLACK)))

    value = np.linalg.norm(tame(x, h, p), axis=-1)
    jac_norm = np.linalg.norm(matrix(tame_jacobian_apply), ord=2, axis=(-2, -1))
    defect_norm = np.linalg.norm(matrix(_jacobian_defect_apply), ord=2, axis=(-2, -1))
    hess = np.linalg.norm(tame_hessian_apply(x, u, h, p), axis=-1)
    return {
        "tame": exceeds(value, increment_bound(h, p)),
        "jacobian": exceeds(jac_norm, jacobian_norm_bound(x, h, p)[:, 0]),
        "jacobian_defect": exceeds(defect_norm, jacobian_defect_bound(x, h, p)[:, 0]),
        "hessian": exceeds(hess, hessian_bound(x, h, p)[:, 0]),
    }
