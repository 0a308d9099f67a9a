"""SDE model description ``dX = f(X) dt + g(X) dW`` and its derivative callbacks.

All callbacks are vectorised: a state argument has shape ``(..., d)`` and
leading axes are carried through unchanged.

* ``f(x)`` -> ``(..., d)``
* ``g(x)`` -> ``(..., d, m)``
* ``lg_g(j2, j1, x)``: ``L^{j2} g^{(j1)}``, derivative of column ``j1`` of
  ``g`` along column ``j2``.
* ``lg_f(j, x)``: ``L^{j} f``.
* ``af(x)``: generator applied to ``f``,
  ``Df f + 1/2 sum_j D^2 f [g_j, g_j]``.
* ``ag(j, x)``: generator applied to column ``j`` of ``g``.
* ``llg(j2, j1, j, x)``: ``L^{j2} L^{j1} g^{(j)}``.

Column indices are zero-based.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigurationError

__all__ = ["NoiseStructure", "ModelSpec", "LyapunovPair", "zeros_like_state"]


class NoiseStructure(str, Enum):
    ADDITIVE = "additive"
    SCALAR = "scalar"
    COMMUTATIVE = "commutative"
    NO_LEVY_AREA = "no-levy-area"
    GENERAL = "general"


def zeros_like_state(x, d):
    x = np.asarray(x, dtype=float)
    return np.zeros(x.shape[:-1] + (d,))


@dataclass(frozen=True)
class ModelSpec:
    name: str
    d: int
    m: int
    f: Callable
    g: Callable
    noise_structure: NoiseStructure
    x0: np.ndarray
    lg_g: Optional[Callable] = None
    lg_f: Optional[Callable] = None
    af: Optional[Callable] = None
    ag: Optional[Callable] = None
    llg: Optional[Callable] = None
    # Box [low, high]^d (or per-component arrays) used for derivative checks.
    box: tuple = (-2.0, 2.0)
    params: dict = field(default_factory=dict)
    # Potential function for gradient-type models, used by Lyapunov pairs.
    potential: Optional[Callable] = None

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ConfigurationError("state and noise dimensions must be >= 1")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape != (self.d,):
            raise ConfigurationError(f"x0 must have length {self.d}, got {x0.shape}")
        object.__setattr__(self, "x0", x0)
        structure = NoiseStructure(self.noise_structure)
        object.__setattr__(self, "noise_structure", structure)
        if structure is NoiseStructure.SCALAR and self.m != 1:
            raise ConfigurationError("scalar noise requires m = 1")

        d = self.d
        if structure is NoiseStructure.ADDITIVE:
            # Constant g: every derivative of g vanishes.
            for name, zero in (
                ("lg_g", lambda j2, j1, x: zeros_like_state(x, d)),
                ("ag", lambda j, x: zeros_like_state(x, d)),
                ("llg", lambda j2, j1, j, x: zeros_like_state(x, d)),
            ):
                if getattr(self, name) is None:
                    object.__setattr__(self, name, zero)

    def callbacks_for(self, scheme):
        """Names of the callbacks ``scheme`` needs."""
        if scheme == "milstein":
            return ("lg_g",)
        if scheme == "order15":
            return ("lg_g", "lg_f", "af", "ag", "llg")
        return ()

    def missing_callbacks(self, scheme):
        return [name for name in self.callbacks_for(scheme) if getattr(self, name) is None]

    def sample_states(self, n, rng):
        """``n`` states drawn uniformly from the model's check box."""
        low, high = (np.broadcast_to(np.asarray(b, dtype=float), (self.d,)) for b in self.box)
        return low + (high - low) * rng.random((n, self.d))


@dataclass(frozen=True)
class LyapunovPair:
    """Control functions for the exponential-integrability condition.

    ``U0`` and ``U1`` map ``(..., d)`` states to ``(...)`` values.  Exact
    ``grad_u0`` (``(..., d)``) and ``hess_u0`` (``(..., d, d)``) callbacks are
    optional; finite differences are used when they are absent.
    """

    U0: Callable
    U1: Callable
    alpha: float = 0.0
    c: float = 0.0
    grad_u0: Optional[Callable] = None
    hess_u0: Optional[Callable] = None

    def __post_init__(self):
        if self.alpha < 0 or self.c < 0:
            raise ConfigurationError("alpha and c must be nonnegative")
