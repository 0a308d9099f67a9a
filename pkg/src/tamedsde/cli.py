"""Command-line front end.

Subcommands::

    converge   strong-error table and fitted rates for one scheme
    simulate   one path on one level, dumped as CSV
    expmoment  exponential-moment estimates per level
    check      derivative, noise-structure, Lyapunov and taming-bound checks
    models     list registered models and their parameters

Settings come from built-in defaults, then an optional flat JSON file given
by ``--config``, then command-line flags; later sources win.  Any key a
model accepts may appear in the JSON file or as ``--param key=value``.
"""

import argparse
import json
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .brownian import sample_lattices
from .errors import Error
from .harness import run_baseline_euler, run_convergence, run_exp_moment
from .integrators import (
    SCHEMES,
    PathResult,
    check_compatible,
    simulate_em_untamed,
    simulate_paths,
)
from .models import (
    REGISTRY,
    check_lyapunov_condition,
    check_noise_structure,
    default_lyapunov_pair,
    fd_check_derivatives,
    make_model,
    model_parameters,
)
from .output import (
    convergence_svg,
    write_baseline_csv,
    write_convergence_csv,
    write_exp_moment_csv,
    write_path_csv,
)
from .taming import SchemeParams, sweep_taming_bounds

BASELINE = "baseline-em"
SUBCOMMANDS = ("converge", "simulate", "expmoment", "check", "models")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class RunConfig:
    """Fully resolved settings for one invocation.

    Defaults reproduce the published experiment setup: ``T = 1``, levels
    7..12, reference level 14, 5000 paths and the taming constants of
    :class:`SchemeParams`.
    """

    subcommand: str = "converge"
    model: str = "exp-psych"
    scheme: str = "milstein"
    t_final: float = 1.0
    levels: tuple = (7, 12)
    ref_level: int = 14
    level: int = 10
    paths: int = 5000
    seed: int = 0
    path_index: int = 0
    samples: int = 100
    sweep: int = 10_000
    delta: float = 5.0
    theta: float = 0.25
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 0.5
    threads: int = None
    out: str = None
    svg: str = None
    model_params: dict = field(default_factory=dict)

    @property
    def scheme_params(self):
        return SchemeParams(self.delta, self.theta, self.gamma1, self.gamma2, self.gamma3)

    @property
    def level_range(self):
        lo, hi = self.levels
        return tuple(range(lo, hi + 1))

    def metadata(self):
        """Header comment lines recording every setting that shaped the run."""
        meta = dict(
            tool=f"tamedsde {__version__}", subcommand=self.subcommand, model=self.model,
            scheme=self.scheme, t_final=self.t_final, delta=self.delta, theta=self.theta,
            gamma1=self.gamma1, gamma2=self.gamma2, gamma3=self.gamma3, seed=self.seed,
        )
        if self.subcommand == "converge":
            meta.update(levels=f"{self.levels[0]}:{self.levels[1]}", ref_level=self.ref_level)
        elif self.subcommand == "expmoment":
            meta.update(levels=f"{self.levels[0]}:{self.levels[1]}")
        elif self.subcommand == "simulate":
            meta.update(level=self.level, path_index=self.path_index)
        if self.model_params:
            meta["model_params"] = json.dumps(self.model_params, sort_keys=True)
        return meta


_CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"subcommand", "model_params"}
_INT_KEYS = {"ref_level", "level", "paths", "seed", "path_index", "samples", "sweep", "threads"}
_FLOAT_KEYS = {"t_final", "delta", "theta", "gamma1", "gamma2", "gamma3"}


class UsageError(Error):
    """Malformed command line or configuration file."""


def parse_levels(text):
    """``"a:b"`` (inclusive) or a two-element list into ``(a, b)``."""
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(":")
    try:
        if len(parts) != 2 or any(isinstance(v, float) and not v.is_integer() for v in parts):
            raise ValueError
        lo, hi = (int(v) for v in parts)
    except (TypeError, ValueError):
        raise UsageError(f"levels must look like a:b, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise UsageError(f"levels {lo}:{hi} must satisfy 0 <= a <= b")
    return lo, hi


def _parse_param(text):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise UsageError(f"--param expects key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _coerce(key, value):
    try:
        if key == "levels":
            return parse_levels(value)
        if key in _INT_KEYS:
            if value is None and key == "threads":
                return None
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if key in _FLOAT_KEYS:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {key}: {value!r}") from None
    return value


def load_config(path):
    """Read a flat JSON object from ``path``."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise UsageError(f"config must be flat; nested keys {nested}")
    return data


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tamedsde",
        description="Stopped increment-tamed SDE schemes and their Monte-Carlo harness.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    S = argparse.SUPPRESS

    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", metavar="FILE", help="flat JSON settings file")
    common.add_argument("--model", help=f"model name ({', '.join(sorted(REGISTRY))})")
    common.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="model parameter override; VALUE is parsed as JSON")
    common.add_argument("--seed", type=int)
    common.add_argument("--t-final", dest="t_final", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--gamma1", type=float)
    common.add_argument("--gamma2", type=float)
    common.add_argument("--gamma3", type=float)
    common.add_argument("--out", metavar="FILE", help="output file (default: stdout)")

    runs = argparse.ArgumentParser(add_help=False, argument_default=S)
    runs.add_argument("--paths", type=int, help="Monte-Carlo sample size")
    runs.add_argument("--levels", help="inclusive level range a:b, h = T / 2**level")
    runs.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")

    p = sub.add_parser("converge", parents=[common, runs], argument_default=S,
                       help="strong-error table and fitted rates")
    p.add_argument("--scheme", help=f"one of {', '.join(SCHEMES + (BASELINE,))}")
    p.add_argument("--ref-level", dest="ref_level", type=int)
    p.add_argument("--svg", metavar="FILE", help="also write a log-log plot")

    p = sub.add_parser("simulate", parents=[common], argument_default=S,
                       help="one path on one level as CSV")
    p.add_argument("--scheme", help=f"one of {', '.join(SCHEMES + (BASELINE,))}")
    p.add_argument("--level", type=int)
    p.add_argument("--path-index", dest="path_index", type=int)

    p = sub.add_parser("expmoment", parents=[common, runs], argument_default=S,
                       help="exponential-moment estimates per level")
    p.add_argument("--scheme", help=f"one of {', '.join(SCHEMES)}")

    p = sub.add_parser("check", parents=[common], argument_default=S,
                       help="derivative, structure, Lyapunov and taming-bound checks")
    p.add_argument("--samples", type=int, help="random states per model check")
    p.add_argument("--sweep", type=int, help="random samples for the taming-bound sweep")

    sub.add_parser("models", help="list models and their parameters")
    return parser


def resolve_config(ns):
    """Merge defaults, the JSON file and flags into a :class:`RunConfig`."""
    flags = vars(ns).copy()
    subcommand = flags.pop("subcommand")
    config_path = flags.pop("config", None)
    params = flags.pop("param", None) or []

    settings = {}
    model_params = {}
    if config_path is not None:
        for key, value in load_config(config_path).items():
            key = key.replace("-", "_")
            if key in _CONFIG_KEYS:
                settings[key] = _coerce(key, value)
            else:
                model_params[key] = value
    settings.update(flags)
    model_params.update(_parse_param(text) for text in params)

    settings = {k: _coerce(k, v) for k, v in settings.items()}
    if subcommand == "expmoment" and "scheme" not in settings:
        settings["scheme"] = "euler"
    if subcommand == "expmoment" and "model" not in settings:
        settings["model"] = "langevin"
    if subcommand == "expmoment" and "levels" not in settings:
        settings["levels"] = (5, 10)
    return RunConfig(subcommand=subcommand, model_params=model_params, **settings)


def validate(cfg):
    """Fail before any computation if the settings cannot run; returns the model."""
    if cfg.model not in REGISTRY:
        raise UsageError(f"unknown model {cfg.model!r}; choose from {', '.join(sorted(REGISTRY))}")
    allowed = model_parameters(cfg.model)
    unknown = sorted(set(cfg.model_params) - set(allowed))
    if unknown:
        raise UsageError(f"unknown setting(s) {unknown}; model {cfg.model!r} accepts "
                         f"{sorted(allowed)}")
    schemes = SCHEMES if cfg.subcommand == "expmoment" else SCHEMES + (BASELINE,)
    if cfg.subcommand in ("converge", "simulate", "expmoment") and cfg.scheme not in schemes:
        raise UsageError(f"unknown scheme {cfg.scheme!r}; choose from {', '.join(schemes)}")
    for key in ("paths", "samples", "sweep"):
        if getattr(cfg, key) < 1:
            raise UsageError(f"{key} must be at least 1, got {getattr(cfg, key)}")
    if cfg.threads is not None and cfg.threads < 1:
        raise UsageError(f"threads must be at least 1, got {cfg.threads}")
    if cfg.seed < 0 or cfg.path_index < 0 or cfg.level < 0:
        raise UsageError("seed, path index and level must be nonnegative")
    if not (np.isfinite(cfg.t_final) and cfg.t_final > 0):
        raise UsageError(f"t_final must be positive, got {cfg.t_final}")
    if cfg.subcommand == "converge":
        if cfg.ref_level < cfg.levels[1]:
            raise UsageError(f"ref level {cfg.ref_level} is below the finest level {cfg.levels[1]}")
        if cfg.scheme == BASELINE and cfg.svg:
            raise UsageError("--svg needs a tamed scheme, not the baseline")
    p = cfg.scheme_params
    model = make_model(cfg.model, cfg.model_params)
    if cfg.subcommand in ("converge", "simulate", "expmoment") and cfg.scheme != BASELINE:
        check_compatible(model, cfg.scheme, p)
    return model


class _Output:
    """Opens the destination up front so an unwritable path fails before compute."""

    def __init__(self, path):
        self.path = path
        if path is None or path == "-":
            self.fh, self.owned = sys.stdout, False
        else:
            try:
                self.fh = open(path, "w", encoding="utf-8", newline="")
            except OSError as exc:
                raise UsageError(f"cannot write {path}: {exc.strerror}") from None
            self.owned = True

    def close(self):
        if self.owned:
            self.fh.close()


def _run_converge(cfg, model, out):
    svg = _Output(cfg.svg) if cfg.svg else None
    p = cfg.scheme_params
    meta = cfg.metadata()
    if cfg.scheme == BASELINE:
        table = run_baseline_euler(model, cfg.level_range, cfg.paths, seed=cfg.seed, p=p,
                                   t_final=cfg.t_final, threads=cfg.threads)
        write_baseline_csv(table, out.fh, cfg.t_final, meta)
        return EXIT_OK
    report = run_convergence(model, cfg.scheme, cfg.level_range, cfg.ref_level, cfg.paths, p,
                             seed=cfg.seed, t_final=cfg.t_final, threads=cfg.threads)
    meta["stopped_paths"] = " ".join(str(int(v)) for v in report.stopped_paths)
    meta["increment_bound_violations"] = int(np.sum(report.increment_violations))
    write_convergence_csv(report, out.fh, meta)
    if svg:
        svg.fh.write(convergence_svg(report))
        svg.close()
    return EXIT_OK


def _run_simulate(cfg, model, out):
    lat = sample_lattices(model.m, cfg.level, cfg.t_final, cfg.scheme == "order15", cfg.seed,
                          [cfg.path_index])
    if cfg.scheme == BASELINE:
        states, overflowed = simulate_em_untamed(model, lat)
        result = PathResult(states[0], None, False)
        meta = dict(cfg.metadata(), overflowed=bool(overflowed[0]))
    else:
        result = simulate_paths(model, cfg.scheme, lat, cfg.scheme_params).path(0)
        meta = cfg.metadata()
    write_path_csv(result, out.fh, lat.h, meta)
    return EXIT_OK


def _run_expmoment(cfg, model, out):
    pair = default_lyapunov_pair(model)
    report = run_exp_moment(model, cfg.scheme, pair, cfg.level_range, cfg.paths,
                            cfg.scheme_params, seed=cfg.seed, t_final=cfg.t_final,
                            threads=cfg.threads)
    meta = dict(cfg.metadata(), alpha=pair.alpha, c=pair.c)
    write_exp_moment_csv(report, out.fh, cfg.t_final, meta)
    return EXIT_OK


def _run_check(cfg, model, out):
    rng = np.random.default_rng(cfg.seed)
    states = model.sample_states(cfg.samples, rng)
    deriv = fd_check_derivatives(model, states)
    structure = check_noise_structure(model, states)
    lyap = check_lyapunov_condition(model, default_lyapunov_pair(model), states)
    sweep = sweep_taming_bounds(cfg.scheme_params, cfg.sweep, seed=cfg.seed)
    w = out.fh.write
    w(f"{deriv}\n")
    w(f"noise structure ({model.noise_structure.value}):\n")
    for name, ok in structure.items():
        w(f"  {name:<12} {'PASS' if ok else 'FAIL'}\n")
    pair_name = "energy pair" if model.name == "langevin" else "exploratory quadratic pair"
    w(f"lyapunov condition, {pair_name}: {'PASS' if lyap.holds else 'FAIL'} "
      f"(max violation {lyap.max_violation:.3e}, tol {lyap.tol:g}, "
      f"{lyap.n_nonfinite} non-finite samples)\n")
    w(f"taming bounds over {cfg.sweep} samples:\n")
    for name, count in sweep.items():
        w(f"  {name:<16} {count} violations\n")
    ok = deriv.passed and all(structure.values()) and not any(sweep.values())
    # An exploratory Lyapunov pair failing is reported but not an error.
    return EXIT_OK if ok else EXIT_FAIL


def _run_models(out):
    for name in sorted(REGISTRY):
        params = ", ".join(f"{k}={v!r}" for k, v in model_parameters(name).items())
        out.fh.write(f"{name}: {params}\n")
    return EXIT_OK


_RUNNERS = {
    "converge": _run_converge,
    "simulate": _run_simulate,
    "expmoment": _run_expmoment,
    "check": _run_check,
}


def parse_and_dispatch(argv=None):
    """Run the command line ``argv``; returns the process exit status."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if ns.subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    out = None
    try:
        if ns.subcommand == "models":
            return _run_models(_Output(None))
        cfg = resolve_config(ns)
        model = validate(cfg)
        out = _Output(cfg.out)
        status = _RUNNERS[cfg.subcommand](cfg, model, out)
        out.fh.flush()
        return status
    except (Error, ValueError, TypeError, FloatingPointError) as exc:
        message = " ".join(str(exc).split())
        print(f"tamedsde: error: {message}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        if out is not None:
            out.close()


def main():
    sys.exit(parse_and_dispatch())
