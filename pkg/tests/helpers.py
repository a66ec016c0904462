"""Shared fixtures for the solver tests."""
import numpy as np

from fracadi.cn_reference import kron_direction_matrices
from fracadi.core_model import AxisSpec, Problem, TimeSpec
from fracadi.splitting import build_operators


def random_problem(rng, dims, q_range=(3, 7), riesz=False, constant=True, tau=None):
    """Random small problem with zero initial data and a random smooth forcing."""
    axes = []
    for _ in range(dims):
        n = int(rng.integers(q_range[0], q_range[1] + 1)) + 1
        mu = float(rng.uniform(1.05, 1.95))
        if riesz:
            d = float(rng.uniform(0.2, 2.0))
            axes.append(AxisSpec(0.0, 1.0, n, mu, d, d, 0.0))
        elif constant:
            axes.append(AxisSpec(0.0, 1.0, n, mu, float(rng.uniform(0.0, 2.0)),
                                 float(rng.uniform(0.0, 2.0)), float(rng.uniform(-2.0, 2.0))))
        else:
            c = rng.uniform(0.5, 2.0, 3)
            axes.append(AxisSpec(0.0, 1.0, n, mu, lambda x, c=c: c[0] * (1 + x),
                                 lambda x, c=c: c[1] * (2 - x), lambda x, c=c: c[2] * np.sin(3 * x)))
    tau = float(rng.uniform(0.05, 0.5)) if tau is None else tau
    freq = rng.uniform(1, 4, dims)

    def forcing(*args):
        *coords, t = args
        out = np.cos(t)
        for f, x in zip(freq, coords):
            out = out * np.sin(f * x + 0.3)
        return out

    zero = lambda *c: np.zeros(np.broadcast(*c).shape)
    return Problem(axes, TimeSpec(3 * tau, 3), forcing, zero)


def kron_ops(problem):
    ops = build_operators(problem)
    return ops, kron_direction_matrices(ops)
