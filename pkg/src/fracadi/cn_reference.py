"""Unsplit Crank-Nicolson stepping.

The 1D step is the production solver.  In 2D/3D the full operator
``sum_k I (x) ... (x) M_k (x) ... (x) I`` is materialised densely, so this
path is capped at ``KRON_CAP`` unknowns and serves as an oracle for the
split schemes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_model import Field, Problem
from .errors import OracleSizeError
from .frac_ops import DirectionOperator, apply_along, build_direction_operator, solve_along
from .line_solver import LuFactors, lu_factor, lu_solve

KRON_CAP = 1000


def kron_direction_matrices(ops: Sequence[DirectionOperator], cap: int = KRON_CAP) -> list:
    """Full matrices of the per-axis operators in x-fastest vector ordering.

    For axes ``(x, y, z)`` the x-operator is ``I_z (x) I_y (x) M_x``, the
    y-operator ``I_z (x) M_y (x) I_x`` and so on.
    """
    sizes = [op.q for op in ops]
    total = int(np.prod(sizes))
    if total > cap:
        raise OracleSizeError(f"{total} unknowns exceed the dense oracle cap of {cap}")
    mats = []
    for k, op in enumerate(ops):
        m = np.ones((1, 1))
        for j in reversed(range(len(ops))):
            m = np.kron(m, op.matrix if j == k else np.eye(sizes[j]))
        mats.append(m)
    return mats


@dataclass(frozen=True)
class CnSystem:
    """Dense Kronecker-sum operator and the LU factors of ``I - matrix``."""

    dims: int
    extents: tuple
    tau: float
    matrix: np.ndarray
    factors: LuFactors
    ops: tuple


def step_cn_1d(op: DirectionOperator, u: Field, f_half: Field) -> Field:
    """Solve ``(I - M) u' = (I + M) u + tau f`` on a single line."""
    if u.dims != 1 or f_half.values.shape != u.values.shape or u.extents[0] != op.q:
        raise ValueError("step_cn_1d needs matching 1D fields of the operator's size")
    rhs = u.values + op.matrix @ u.values + op.tau * f_half.values
    return Field(lu_solve(op.factors, rhs), u.step + 1).check_finite()


def assemble_cn_from_operators(ops: Sequence[DirectionOperator], cap: int = KRON_CAP) -> CnSystem:
    ops = tuple(ops)
    taus = {op.tau for op in ops}
    if len(taus) != 1:
        raise ValueError("direction operators were built with different time steps")
    total = kron_direction_matrices(ops, cap)
    m = sum(total)
    extents = tuple(op.q for op in ops)
    # cross-check the dense sum against line-by-line application
    rng = np.random.default_rng(0)
    probe = rng.standard_normal(extents[::-1])
    lines = sum(apply_along(op.matrix, probe, k) for k, op in enumerate(ops))
    gap = np.max(np.abs(m @ probe.reshape(-1) - lines.reshape(-1)))
    if gap > 1e-13 * max(1.0, np.max(np.abs(lines))):
        raise AssertionError(f"Kronecker assembly disagrees with line application by {gap:.3e}")
    return CnSystem(len(ops), extents, taus.pop(), m, lu_factor(np.eye(m.shape[0]) - m), ops)


def assemble_cn(problem: Problem, tau: float | None = None, cap: int = KRON_CAP) -> CnSystem:
    """Dense unsplit system for ``problem`` (total interior unknowns <= ``cap``)."""
    tau = problem.time.tau if tau is None else tau
    total = int(np.prod(problem.extents))
    if total > cap:
        raise OracleSizeError(f"{total} unknowns exceed the dense oracle cap of {cap}")
    ops = [build_direction_operator(ax, tau, k) for k, ax in enumerate(problem.axes)]
    return assemble_cn_from_operators(ops, cap)


def step_cn_full(system: CnSystem, u: Field, f_half: Field) -> Field:
    """Solve ``(I - M) u' = (I + M) u + tau f`` with the dense Kronecker sum."""
    if u.extents != system.extents or f_half.extents != system.extents:
        raise ValueError(f"fields must have extents {system.extents}")
    v = u.flat
    rhs = v + system.matrix @ v + system.tau * f_half.flat
    return Field.from_flat(lu_solve(system.factors, rhs), system.extents, u.step + 1).check_finite()


def unsplit_residual(system: CnSystem, u_new: Field, u_old: Field, f_half: Field) -> np.ndarray:
    """``(I + M) u_old + tau f - (I - M) u_new`` as a flat vector."""
    m = system.matrix
    a, b = u_new.flat, u_old.flat
    return b + m @ b + system.tau * f_half.flat - (a - m @ a)


def solve_unsplit_lines(ops: Sequence[DirectionOperator], rhs: np.ndarray) -> np.ndarray:
    """Apply ``prod_k (I - M_k)^{-1}`` by sweeping lines; used by diagnostics."""
    out = rhs
    for k, op in enumerate(ops):
        out = solve_along(op.factors, out, k)
    return out
