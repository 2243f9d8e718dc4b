import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from unmix import MeasurementProblem, ProblemSpec, generate_problem
from unmix.linalg import DenseOperator


def make_problem(seed=0, m=20, n=40, sparsity=3, noise_norm=0.2):
    return generate_problem(ProblemSpec(m=m, n=n, sparsity=sparsity,
                                        noise_norm=noise_norm, seed=seed))


def identity_problem(y):
    y = np.asarray(y, dtype=np.float64)
    return MeasurementProblem(op=DenseOperator.from_matrix(np.eye(len(y))), y=y)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_problem():
    return make_problem(seed=5)
