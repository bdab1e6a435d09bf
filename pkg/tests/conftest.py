import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_ss(rng, n, m, p, radius=0.8):
    """Random system with spectral radius ``radius``."""
    from accelsynth.sysops import StateSpace

    a = rng.standard_normal((n, n))
    if n:
        a *= radius / max(np.abs(np.linalg.eigvals(a)).max(), 1e-12)
    return StateSpace(a, rng.standard_normal((n, m)), rng.standard_normal((p, n)), rng.standard_normal((p, m)))


def stein_instance(rng, n=None):
    """Random Stein problem ``{X > 0, A^T X A - X < 0}`` whose spectral radius avoids ``[0.9, 1.1]``."""
    from accelsynth import lmi

    n = int(rng.integers(1, 5)) if n is None else n
    a = rng.standard_normal((n, n))
    a /= max(np.abs(np.linalg.eigvals(a)).max(), 1e-12)
    radius = rng.uniform(0.1, 0.9) if rng.random() < 0.5 else rng.uniform(1.1, 2.0)
    a *= radius
    prob = lmi.Problem(name="stein")
    x = prob.sym("X", n)
    prob.add(x.expr, ">", "X > 0")
    prob.add(a.T @ x.expr @ a - x.expr, "<", "Stein")
    truth = bool(np.abs(np.linalg.eigvals(a)).max() < 1)
    return prob, a, truth


def witness_ok(a, x) -> bool:
    """Direct eigenvalue check of a Stein witness."""
    x = 0.5 * (x + x.T)
    return np.linalg.eigvalsh(x).min() > 0 and np.linalg.eigvalsh(a.T @ x @ a - x).max() < 0
