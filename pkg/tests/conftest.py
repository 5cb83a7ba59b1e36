import math

import numpy as np
import pytest

from delaylyap.lifted_bvp import SystemSpec


def example_spec():
    return SystemSpec(
        A0=[[-1.0, 0.0], [0.0, -1.0]],
        A1=[[0.0, 1.0], [-1.0, 0.0]],
        B0=[[0.3, 0.0], [0.0, 0.3]],
        B1=[[0.0, 0.3], [-0.3, 0.0]],
        W=np.eye(2),
    )


def scalar_spec(a0=-1.0, w=1.0):
    return SystemSpec(A0=[[a0]], A1=[[0.0]], B0=[[0.0]], B1=[[0.0]], W=[[w]])


def delay_free_spec(A0, W=None):
    A0 = np.asarray(A0, dtype=float)
    n = A0.shape[0]
    Z = np.zeros((n, n))
    return SystemSpec(A0=A0, A1=Z, B0=Z, B1=Z, W=np.eye(n) if W is None else W)


def random_spec(rng, n):
    M = rng.standard_normal((n, n))
    return SystemSpec(
        A0=rng.standard_normal((n, n)),
        A1=rng.standard_normal((n, n)),
        B0=rng.standard_normal((n, n)),
        B1=rng.standard_normal((n, n)),
        W=M + M.T,
        h=1.0,
        omega=math.pi,
    )


def random_specs(count, seed):
    rng = np.random.default_rng(seed)
    return [random_spec(rng, n) for n in (1, 2, 3) for _ in range(count)]


@pytest.fixture
def example():
    return example_spec()


@pytest.fixture
def toy():
    return scalar_spec()
