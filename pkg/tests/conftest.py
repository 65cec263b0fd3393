"""Shared oracles for the test suite.

Everything here is deliberately independent of the library's production code
paths: finite differences instead of closed-form derivatives, configuration
enumeration instead of composition enumeration, mpmath instead of float64.
"""

import itertools
import math

import mpmath
import numpy as np
import pytest

from tensorpotts import ModelSpec


def central_difference(fn, x: float, step: float) -> float:
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def brute_force_log_partition(spec: ModelSpec, N: int) -> float:
    """log sum over all q^N configurations of exp(N(beta sum xbar^p + h xbar1))."""
    logs = []
    for cfg in itertools.product(range(spec.q), repeat=N):
        x = np.bincount(cfg, minlength=spec.q) / N
        logs.append(N * (spec.beta * float(np.sum(x ** spec.p)) + spec.h * float(x[0])))
    top = max(logs)
    return top + math.log(sum(math.exp(v - top) for v in logs))


def mp_free_energy(spec: ModelSpec, v, dps: int = 60) -> float:
    """Arbitrary-precision evaluation of beta sum v^p + h v1 - sum v log v."""
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for i, x in enumerate(v):
            x = mpmath.mpf(repr(float(x)))
            total += mpmath.mpf(repr(float(spec.beta))) * x ** spec.p
            if x > 0:
                total -= x * mpmath.log(x)
        total += mpmath.mpf(repr(float(spec.h))) * mpmath.mpf(repr(float(v[0])))
        return float(total)


def grid_argmax_f(spec: ModelSpec, n_points: int = 1_000_001):
    """Dense-grid maximizer of f, as an independent check on the root scan."""
    from tensorpotts import f_deriv

    s = np.linspace(0.0, 1.0 - 1e-9, n_points)
    vals = f_deriv(spec, s, 0)
    i = int(np.argmax(vals))
    return float(s[i]), float(vals[i])


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture(scope="session")
def fig_regular_spec() -> ModelSpec:
    """The regular benchmark point for (p, q) = (4, 3)."""
    return ModelSpec(4, 3, 0.616, 0.67)
