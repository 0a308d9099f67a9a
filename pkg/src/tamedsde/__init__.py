"""Stopped increment-tamed Euler, Milstein and order-1.5 schemes for SDEs
with non-globally monotone coefficients, with a Monte-Carlo harness for
measuring strong convergence rates."""

__version__ = "0.1.0"

from .brownian import (
    BrownianLattice,
    coarsen,
    dump_lattice,
    load_lattice,
    sample_lattice,
    sample_lattices,
)
from .errors import ConfigurationError, Error, StepError, UnsupportedSchemeError
from .harness import (
    BaselineTable,
    ConvergenceReport,
    ExpMomentReport,
    fit_rate,
    run_baseline_euler,
    run_convergence,
    run_exp_moment,
)
from .integrators import (
    SCHEMES,
    PathBatch,
    PathResult,
    StepInputs,
    check_compatible,
    simulate_em_untamed,
    simulate_path,
    simulate_paths,
    step_euler,
    step_milstein,
    step_order15,
)
from .models import (
    GALLERY,
    REGISTRY,
    LyapunovPair,
    ModelSpec,
    NoiseStructure,
    check_lyapunov_condition,
    check_noise_structure,
    default_lyapunov_pair,
    fd_check_derivatives,
    make_model,
)
from .taming import (
    SchemeParams,
    phi_threshold,
    sweep_taming_bounds,
    tame,
    tame_hessian_apply,
    tame_jacobian_apply,
)
