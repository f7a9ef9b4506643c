import numpy as np
import pytest

from vbma import SimDesign, simulate


def make_design(family, n, p, seed, beta=None, **kw):
    defaults = dict(rho=0.25, alpha_true=0.0)
    if family == "tobit":
        defaults.update(sigma2_true=1.0, y_L=0.0, alpha_true=0.5)
    elif family == "star":
        defaults.update(sigma2_true=1.0, alpha_true=1.0)
    elif family == "pln":
        defaults.update(sigma2_true=0.1, alpha_true=1.0)
    defaults.update(kw)
    if beta is not None:
        defaults["beta_true"] = tuple(beta)
    elif p < 4:
        defaults["beta_true"] = (0.5, -0.5, 0.25)[:p]
    return SimDesign(family=family, n=n, p=p, seed=seed, **defaults)


def make_dataset(family, n, p, seed, beta=None, **kw):
    return simulate(make_design(family, n, p, seed, beta, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
