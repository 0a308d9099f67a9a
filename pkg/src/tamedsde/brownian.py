"""Wiener increments on dyadic meshes, with exact coarsening.

Each step of size ``h`` carries the Wiener increment ``dW`` and the time
integral ``dZ = int_{t_k}^{t_k+h} (W_s - W_{t_k}) ds``.  Per component the
pair is Gaussian with covariance ``[[h, h**2/2], [h**2/2, h**3/3]]``.

Random numbers come from a Philox counter-based generator keyed by
``(seed, path)``, so a path's increments do not depend on which other paths
are generated, in what order, or on how many threads are used.  Sampling
happens once at the finest level; coarser levels are obtained with
:func:`coarsen`, which is exact for both ``dW`` and ``dZ``.
"""

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "BrownianLattice",
    "path_generator",
    "sample_lattice",
    "sample_lattices",
    "coarsen",
    "dump_lattice",
    "load_lattice",
]

_MAGIC = b"BLAT"
_HEADER = struct.Struct("<4sIIdB")


@dataclass(frozen=True)
class BrownianLattice:
    """Per-step increments over ``[0, t_final]`` split into ``2**level`` steps.

    ``dW`` (and ``dZ`` when present) has shape ``(..., 2**level, m)``; any
    leading axes index independent paths.
    """

    m: int
    level: int
    t_final: float
    dW: np.ndarray
    dZ: Optional[np.ndarray] = None

    def __post_init__(self):
        expected = (2**self.level, self.m)
        if self.dW.shape[-2:] != expected:
            raise ConfigurationError(
                f"dW has shape {self.dW.shape}, expected (..., {expected[0]}, {expected[1]})"
            )
        if self.dZ is not None and self.dZ.shape != self.dW.shape:
            raise ConfigurationError("dZ must have the same shape as dW")

    @property
    def n_steps(self):
        return 2**self.level

    @property
    def h(self):
        return self.t_final / self.n_steps

    @property
    def has_dz(self):
        return self.dZ is not None

    def path(self, i):
        """Lattice of the ``i``-th path of a batched lattice."""
        dz = None if self.dZ is None else self.dZ[i]
        return BrownianLattice(self.m, self.level, self.t_final, self.dW[i], dz)

    def terminal_value(self):
        """``W_T - W_0`` per path."""
        return self.dW.sum(axis=-2)


def path_generator(seed, path):
    """Philox generator whose key is ``(seed, path)``."""
    if seed < 0 or path < 0 or seed >= 2**64 or path >= 2**64:
        raise ConfigurationError("seed and path index must lie in [0, 2**64)")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(path)))


def _check_shape(m, level, t_final):
    if m < 1:
        raise ConfigurationError(f"noise dimension must be >= 1, got {m}")
    if level < 0:
        raise ConfigurationError(f"level must be >= 0, got {level}")
    if not (np.isfinite(t_final) and t_final > 0):
        raise ConfigurationError(f"t_final must be positive, got {t_final}")


def _normals_to_increments(xi, h, with_dz):
    # Cholesky factor of [[h, h^2/2], [h^2/2, h^3/3]].
    dW = np.sqrt(h) * xi[..., 0]
    if not with_dz:
        return dW, None
    dZ = h**1.5 * (0.5 * xi[..., 0] + xi[..., 1] / (2.0 * np.sqrt(3.0)))
    return dW, dZ


def sample_lattice(m, level, t_final, with_dz, seed, path=0):
    """Sample the increments of one path.

    Two standard normals are drawn per step and component whether or not
    ``dZ`` is requested, so ``dW`` is identical in both cases.
    """
    _check_shape(m, level, t_final)
    n = 2**level
    xi = path_generator(seed, path).standard_normal((n, m, 2))
    dW, dZ = _normals_to_increments(xi, t_final / n, with_dz)
    return BrownianLattice(m, level, float(t_final), dW, dZ)


def sample_lattices(m, level, t_final, with_dz, seed, paths):
    """Sample a batch of paths; entry ``i`` equals ``sample_lattice(..., paths[i])``."""
    _check_shape(m, level, t_final)
    paths = np.atleast_1d(np.asarray(paths, dtype=np.int64))
    n = 2**level
    xi = np.empty((len(paths), n, m, 2))
    for i, path in enumerate(paths):
        xi[i] = path_generator(seed, int(path)).standard_normal((n, m, 2))
    dW, dZ = _normals_to_increments(xi, t_final / n, with_dz)
    return BrownianLattice(m, level, float(t_final), dW, dZ)


def coarsen(lat, target_level):
    """Aggregate ``lat`` onto the mesh with ``2**target_level`` steps.

    Coarse ``dW`` is the block sum of fine increments.  Coarse ``dZ`` over a
    block starting at ``t_k`` is ``sum_i (dZ_i + (W_{s_i} - W_{t_k}) h_fine)``
    where ``s_i`` is the left end of the ``i``-th fine step.
    """
    if target_level > lat.level:
        raise ConfigurationError(
            f"cannot coarsen level {lat.level} lattice to finer level {target_level}"
        )
    if target_level < 0:
        raise ConfigurationError(f"target level must be >= 0, got {target_level}")
    if target_level == lat.level:
        return lat
    ratio = 2 ** (lat.level - target_level)
    batch = lat.dW.shape[:-2]
    blocks = batch + (2**target_level, ratio, lat.m)
    fine_dw = lat.dW.reshape(blocks)
    dW = fine_dw.sum(axis=-2)
    dZ = None
    if lat.dZ is not None:
        offset = np.cumsum(fine_dw, axis=-2) - fine_dw
        dZ = (lat.dZ.reshape(blocks) + offset * lat.h).sum(axis=-2)
    return BrownianLattice(lat.m, target_level, lat.t_final, dW, dZ)


def dump_lattice(lat, fh):
    """Write a single-path lattice to a binary file object.

    Layout: header ``<4sIIdB`` (magic ``BLAT``, m, level, t_final, dz flag)
    followed by ``dW`` and then ``dZ`` as little-endian float64, step-major.
    """
    if lat.dW.ndim != 2:
        raise ConfigurationError("only single-path lattices can be dumped")
    fh.write(_HEADER.pack(_MAGIC, lat.m, lat.level, lat.t_final, int(lat.has_dz)))
    fh.write(np.ascontiguousarray(lat.dW, dtype="<f8").tobytes())
    if lat.has_dz:
        fh.write(np.ascontiguousarray(lat.dZ, dtype="<f8").tobytes())


def load_lattice(fh):
    """Inverse of :func:`dump_lattice`."""
    header = fh.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise ConfigurationError("truncated lattice header")
    magic, m, level, t_final, has_dz = _HEADER.unpack(header)
    if magic != _MAGIC:
        raise ConfigurationError(f"bad magic {magic!r}")
    count = (2**level) * m
    shape = (2**level, m)

    def read_block():
        raw = fh.read(8 * count)
        if len(raw) != 8 * count:
            raise ConfigurationError("truncated lattice data")
        return np.frombuffer(raw, dtype="<f8").astype(float).reshape(shape)

    dW = read_block()
    dZ = read_block() if has_dz else None
    return BrownianLattice(m, level, t_final, dW, dZ)
