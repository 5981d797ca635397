import functools

import numpy as np
import pytest

from weyl_lattice import free_spec, perturbed_spec
from weyl_lattice.pipeline import data_report

SPECS = {
    "free": free_spec(),
    "a0": perturbed_spec(a={0: 0.3}),
    "am1": perturbed_spec(a={-1: 0.4}),
    "b0": perturbed_spec(b={0: 1.5}),
    "b2": perturbed_spec(b={0: 2.0}),
    "a5": perturbed_spec(a={0: 5.0}),
}


@functools.lru_cache(maxsize=None)
def pipeline(name: str, M: int = 512):
    """(R, data) for a named instance, built once per session."""
    return data_report(SPECS[name], M)


@pytest.fixture(scope="session")
def specs():
    return SPECS


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)
