from .base import LyapunovPair, ModelSpec, NoiseStructure
from .checks import (
    DerivativeReport,
    LyapunovReport,
    check_lyapunov_condition,
    check_noise_structure,
    fd_check_derivatives,
)
from .gallery import (
    GALLERY,
    REGISTRY,
    brownian_dynamics,
    cubic,
    default_lyapunov_pair,
    double_well,
    duffing_van_der_pol,
    exp_psychology,
    langevin,
    langevin_lyapunov_pair,
    lorenz,
    lotka_volterra,
    make_model,
    model_parameters,
    ornstein_uhlenbeck,
    quadratic_lyapunov_pair,
    van_der_pol,
)
