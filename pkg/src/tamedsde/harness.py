"""Monte-Carlo studies: strong convergence rates, exponential moments and
the untamed Euler-Maruyama baseline.

Paths are processed in fixed-size chunks, optionally on a thread pool.
Per-path quantities are written into preallocated arrays by path index and
reduced only at the end, so results do not depend on the chunking or on the
number of threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .brownian import coarsen, sample_lattices
from .errors import ConfigurationError, StepError
from .integrators import check_compatible, simulate_em_untamed, simulate_paths
from .taming import SchemeParams, increment_bound

__all__ = [
    "ConvergenceReport",
    "ExpMomentReport",
    "BaselineTable",
    "fit_rate",
    "run_convergence",
    "run_exp_moment",
    "run_baseline_euler",
]

DEFAULT_CHUNK = 250
# exp(709) is close to the largest finite double.
_EXP_CLIP = 700.0


@dataclass(frozen=True)
class ConvergenceReport:
    scheme: str
    model: str
    levels: tuple
    errors_sup: np.ndarray
    errors_terminal: np.ndarray
    fitted_slope_sup: float
    fitted_slope_terminal: float
    paths: int
    ref_level: int
    seed: int
    t_final: float = 1.0
    # Largest |Y_{k+1} - Y_k| / h**(theta/delta) seen at each level, and the
    # number of steps where the ratio exceeded one.
    max_increment_ratio: np.ndarray = field(default=None, repr=False)
    increment_violations: np.ndarray = field(default=None, repr=False)
    # Paths stopped by the threshold, per level.
    stopped_paths: np.ndarray = field(default=None, repr=False)

    @property
    def step_sizes(self):
        return np.array([self.t_final / 2**level for level in self.levels])


@dataclass(frozen=True)
class ExpMomentReport:
    levels: tuple
    estimates: np.ndarray
    max_exponent: np.ndarray
    clipped: np.ndarray
    paths: int
    seed: int
    alpha: float


@dataclass(frozen=True)
class BaselineTable:
    """Per-level ``E|Y_T|^2`` and overflow counts for untamed and tamed Euler
    on identical Brownian increments.  Second moments average over the
    paths that did not overflow."""

    levels: tuple
    em_second_moment: np.ndarray
    em_overflows: np.ndarray
    tamed_second_moment: np.ndarray
    tamed_overflows: np.ndarray
    paths: int
    seed: int


def fit_rate(levels, errors):
    """Least-squares slope of ``log2(error)`` against ``-level``.

    A positive slope ``r`` means ``error ~ h**r``.  Returns
    ``(slope, intercept, residual_sum_of_squares)``.
    """
    levels = np.asarray(levels, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(levels) < 2 or len(levels) != len(errors):
        raise ConfigurationError("need at least two (level, error) pairs")
    if np.any(~(errors > 0)) or not np.all(np.isfinite(errors)):
        raise ConfigurationError("errors must be positive and finite to fit a rate")
    x = -levels
    y = np.log2(errors)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sum((A @ [slope, intercept] - y) ** 2))
    return float(slope), float(intercept), resid


def _chunks(n_paths, chunk_size):
    return [np.arange(start, min(start + chunk_size, n_paths))
            for start in range(0, n_paths, chunk_size)]


def _map_chunks(fn, chunks, threads):
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _check_paths(n_paths):
    if int(n_paths) != n_paths or n_paths < 1:
        raise ConfigurationError(f"number of paths must be a positive integer, got {n_paths}")


def _increment_stats(states, h, p):
    steps = np.linalg.norm(np.diff(states, axis=1), axis=-1)
    ratio = steps / increment_bound(h, p)
    return float(ratio.max(initial=0.0)), int(np.count_nonzero(ratio > 1.0))


def _annotate(exc, chunk, level):
    exc.args = (f"{exc.args[0]} at level {level}, paths {chunk[0]}..{chunk[-1]}",)
    return exc


def run_convergence(model, scheme, levels, ref_level, n_paths, p=None, seed=0,
                    t_final=1.0, threads=None, chunk_size=DEFAULT_CHUNK):
    """Strong errors of ``scheme`` at each level against the same scheme at
    ``ref_level``, driven by one shared Brownian path per sample.

    Per path, the sup error is the maximum over coarse grid times of
    ``|Y_ref - Y_level|`` and the terminal error is the value at ``T``;
    both are aggregated as root-mean-square over paths.
    """
    p = p or SchemeParams()
    check_compatible(model, scheme, p)
    _check_paths(n_paths)
    levels = tuple(int(level) for level in levels)
    if not levels:
        raise ConfigurationError("no levels requested")
    if min(levels) < 0 or max(levels) > ref_level:
        raise ConfigurationError("levels must lie in [0, ref_level]")
    n_levels = len(levels)
    sup_err = np.zeros((n_paths, n_levels))
    term_err = np.zeros((n_paths, n_levels))
    inc_ratio = np.zeros((n_paths // max(chunk_size, 1) + 1, n_levels))
    inc_bad = np.zeros_like(inc_ratio, dtype=np.int64)
    stopped = np.zeros((n_paths, n_levels), dtype=bool)
    needs_dz = scheme == "order15"

    def work(chunk):
        lat = sample_lattices(model.m, ref_level, t_final, needs_dz, seed, chunk)
        try:
            ref = simulate_paths(model, scheme, lat, p)
        except StepError as exc:
            raise _annotate(exc, chunk, ref_level)
        results = []
        for level in levels:
            if level == ref_level:
                coarse = ref
            else:
                try:
                    coarse = simulate_paths(model, scheme, coarsen(lat, level), p)
                except StepError as exc:
                    raise _annotate(exc, chunk, level)
            stride = 2 ** (ref_level - level)
            diff = np.linalg.norm(ref.states[:, ::stride] - coarse.states, axis=-1)
            results.append((diff.max(axis=1), diff[:, -1], coarse.frozen,
                            _increment_stats(coarse.states, coarse.h, p)))
        return chunk, results, _increment_stats(ref.states, ref.h, p)

    ref_ratio, ref_bad = 0.0, 0
    for ci, (chunk, results, ref_stats) in enumerate(
            _map_chunks(work, _chunks(n_paths, chunk_size), threads)):
        for li, (sup, term, frozen, (ratio, bad)) in enumerate(results):
            sup_err[chunk, li] = sup
            term_err[chunk, li] = term
            stopped[chunk, li] = frozen
            inc_ratio[ci, li] = ratio
            inc_bad[ci, li] = bad
        ref_ratio = max(ref_ratio, ref_stats[0])
        ref_bad += ref_stats[1]

    errors_sup = np.sqrt(np.mean(sup_err**2, axis=0))
    errors_terminal = np.sqrt(np.mean(term_err**2, axis=0))
    slope_sup = slope_term = float("nan")
    if n_levels >= 2 and np.all(errors_sup > 0) and np.all(errors_terminal > 0):
        slope_sup = fit_rate(levels, errors_sup)[0]
        slope_term = fit_rate(levels, errors_terminal)[0]
    max_ratio = np.maximum(inc_ratio.max(axis=0), ref_ratio)
    violations = inc_bad.sum(axis=0) + ref_bad
    return ConvergenceReport(
        scheme=scheme, model=model.name, levels=levels,
        errors_sup=errors_sup, errors_terminal=errors_terminal,
        fitted_slope_sup=slope_sup, fitted_slope_terminal=slope_term,
        paths=int(n_paths), ref_level=int(ref_level), seed=int(seed), t_final=float(t_final),
        max_increment_ratio=max_ratio, increment_violations=violations,
        stopped_paths=stopped.sum(axis=0),
    )


def _weighted_trapezoid(values, h, alpha, tau):
    """``int_0^{T ^ tau} e^{-alpha r} U1(Y_r) dr`` on the grid, per path.

    ``values`` is ``(P, N+1)``; steps at or after ``tau`` are dropped.
    """
    n_steps = values.shape[1] - 1
    weights = np.exp(-alpha * h * np.arange(n_steps + 1))
    wv = weights * values
    pieces = 0.5 * h * (wv[:, :-1] + wv[:, 1:])
    limit = np.where(tau < 0, n_steps, tau)
    keep = np.arange(n_steps)[None, :] < limit[:, None]
    return np.sum(np.where(keep, pieces, 0.0), axis=1)


def run_exp_moment(model, scheme, pair, levels, n_paths, p=None, seed=0, t_final=1.0,
                   threads=None, chunk_size=DEFAULT_CHUNK):
    """Estimate ``E exp(e^{-alpha T} U0(Y_T) + int_0^{T ^ tau} e^{-alpha r} U1(Y_r) dr)``
    at each level.

    Exponents above 700 are clipped and counted in ``clipped``.
    """
    p = p or SchemeParams()
    check_compatible(model, scheme, p)
    _check_paths(n_paths)
    levels = tuple(int(level) for level in levels)
    top = max(levels)
    alpha = pair.alpha
    exponents = np.zeros((n_paths, len(levels)))

    def work(chunk):
        lat = sample_lattices(model.m, top, t_final, scheme == "order15", seed, chunk)
        out = []
        for level in levels:
            batch = simulate_paths(model, scheme, coarsen(lat, level), p)
            states = batch.states
            terminal = np.exp(-alpha * t_final) * pair.U0(states[:, -1])
            integral = _weighted_trapezoid(pair.U1(states), batch.h, alpha, batch.tau_index)
            out.append(terminal + integral)
        return chunk, out

    for chunk, out in _map_chunks(work, _chunks(n_paths, chunk_size), threads):
        for li, values in enumerate(out):
            exponents[chunk, li] = values

    clipped = np.count_nonzero(~(exponents <= _EXP_CLIP), axis=0)
    safe = np.where(np.isfinite(exponents), exponents, _EXP_CLIP)
    estimates = np.mean(np.exp(np.minimum(safe, _EXP_CLIP)), axis=0)
    return ExpMomentReport(
        levels=levels, estimates=estimates, max_exponent=np.max(exponents, axis=0),
        clipped=clipped, paths=int(n_paths), seed=int(seed), alpha=float(alpha),
    )


def run_baseline_euler(model, levels, n_paths, seed=0, p=None, t_final=1.0, x0=None,
                       threads=None, chunk_size=DEFAULT_CHUNK):
    """Classical Euler-Maruyama next to stopped increment-tamed Euler on the
    same increments."""
    p = p or SchemeParams()
    _check_paths(n_paths)
    levels = tuple(int(level) for level in levels)
    top = max(levels)
    em_sq = np.full((n_paths, len(levels)), np.nan)
    em_over = np.zeros((n_paths, len(levels)), dtype=bool)
    tm_sq = np.full((n_paths, len(levels)), np.nan)
    tm_over = np.zeros((n_paths, len(levels)), dtype=bool)

    def work(chunk):
        lat = sample_lattices(model.m, top, t_final, False, seed, chunk)
        out = []
        for level in levels:
            coarse = coarsen(lat, level)
            em_states, em_bad = simulate_em_untamed(model, coarse, x0)
            tamed = simulate_paths(model, "euler", coarse, p, x0)
            tm_final = tamed.states[:, -1]
            tm_bad = ~np.all(np.isfinite(tamed.states), axis=(1, 2))
            with np.errstate(over="ignore", invalid="ignore"):
                out.append((np.sum(em_states[:, -1] ** 2, axis=-1), em_bad,
                            np.sum(tm_final**2, axis=-1), tm_bad))
        return chunk, out

    for chunk, out in _map_chunks(work, _chunks(n_paths, chunk_size), threads):
        for li, (esq, ebad, tsq, tbad) in enumerate(out):
            em_sq[chunk, li] = esq
            em_over[chunk, li] = ebad
            tm_sq[chunk, li] = tsq
            tm_over[chunk, li] = tbad

    def masked_mean(values, bad):
        good = ~bad & np.isfinite(values)
        total = np.where(good, values, 0.0).sum(axis=0)
        count = good.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(count > 0, total / np.maximum(count, 1), np.nan)

    return BaselineTable(
        levels=levels,
        em_second_moment=masked_mean(em_sq, em_over), em_overflows=em_over.sum(axis=0),
        tamed_second_moment=masked_mean(tm_sq, tm_over), tamed_overflows=tm_over.sum(axis=0),
        paths=int(n_paths), seed=int(seed),
    )
