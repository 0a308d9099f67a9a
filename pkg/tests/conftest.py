import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tamedsde import ModelSpec, NoiseStructure

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# Lines recorded by the acceptance tests, echoed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def constant_noise_model(sigma, d=1, drift=None, x0=None, name="constant-noise"):
    """``dX = drift(X) dt + sigma dW`` with ``drift`` defaulting to zero.

    Derivative callbacks are only exact for the zero drift.
    """
    G = np.atleast_2d(np.asarray(sigma, dtype=float))
    if drift is None:
        def drift(x):
            return np.zeros(np.shape(x)[:-1] + (d,))

    def g(x):
        return np.broadcast_to(G, np.shape(x)[:-1] + G.shape)

    def zero(j, x):
        return np.zeros(np.shape(x)[:-1] + (d,))

    return ModelSpec(
        name=name, d=d, m=G.shape[1], f=drift, g=g,
        noise_structure=NoiseStructure.ADDITIVE,
        x0=np.zeros(d) if x0 is None else x0,
        lg_f=zero, af=lambda x: zero(0, x),
    )
