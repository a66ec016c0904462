"""ADI-type time steppers built from per-axis line sweeps.

Every step function takes a :class:`SteppingState` holding ``u^n`` (and
``u^{n-1}`` for the two-step corrected schemes) plus the forcing sampled at
``t_{n+1/2}`` and returns ``u^{n+1}``.  ``B_x``, ``B_y`` (``A_x``, ``A_y``,
``A_z`` in 3D) denote the direction operators ``M`` of each axis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .cn_reference import assemble_cn_from_operators, step_cn_1d, step_cn_full
from .core_model import Field, Problem, sample_field, sample_forcing
from .errors import FracAdiError, InadmissibleSchemeError, StepFailure
from .frac_ops import DirectionOperator, apply_along, build_direction_operator, solve_along

BOOTSTRAPS = ("d_adi", "exact")


class SchemeKind(enum.Enum):
    CN_FULL = "cn"
    PR_ADI = "pr-adi"
    D_ADI = "d-adi"
    D_ADI_II = "d-adi-ii"
    FS = "fs"
    FS_II = "fs-ii"

    @classmethod
    def parse(cls, name) -> "SchemeKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {"cn-full": "cn", "crank-nicolson": "cn", "pr": "pr-adi", "dadi": "d-adi",
                   "d-adi2": "d-adi-ii", "dadi-ii": "d-adi-ii", "fs2": "fs-ii"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown scheme {name!r}; choose from {[k.value for k in cls]}")

    @property
    def two_step(self) -> bool:
        return self in (SchemeKind.D_ADI_II, SchemeKind.FS_II)

    @property
    def label(self) -> str:
        return {"cn": "CN", "pr-adi": "PR-ADI", "d-adi": "D-ADI", "d-adi-ii": "D-ADI-II",
                "fs": "FS", "fs-ii": "FS-II"}[self.value]


_ALLOWED_DIMS = {
    SchemeKind.CN_FULL: (1, 2, 3),
    SchemeKind.PR_ADI: (2,),
    SchemeKind.D_ADI: (2, 3),
    SchemeKind.D_ADI_II: (2,),
    SchemeKind.FS: (2,),
    SchemeKind.FS_II: (2,),
}


def check_admissible(problem: Problem, scheme) -> SchemeKind:
    """Raise InadmissibleSchemeError unless ``scheme`` can solve ``problem``."""
    scheme = SchemeKind.parse(scheme)
    if problem.dims not in _ALLOWED_DIMS[scheme]:
        raise InadmissibleSchemeError(
            f"{scheme.label} needs a {' or '.join(map(str, _ALLOWED_DIMS[scheme]))}D problem, "
            f"got {problem.dims}D")
    if scheme.two_step and not problem.is_riesz():
        raise InadmissibleSchemeError(
            f"{scheme.label} requires the Riesz form (d1 == d2 and kappa == 0 on every axis)")
    return scheme


@dataclass
class SteppingState:
    current: Field
    previous: Optional[Field]
    n: int
    ops: tuple
    tau: float

    def advance(self, new: Field) -> None:
        self.previous, self.current = self.current, new
        self.n += 1


def _check_dims(state: SteppingState, f_half: Field, dims: int, name: str):
    if state.current.dims != dims or len(state.ops) != dims:
        raise InadmissibleSchemeError(f"{name} is a {dims}D scheme, state is {state.current.dims}D")
    if f_half.values.shape != state.current.values.shape:
        raise ValueError("forcing and field shapes differ")


def _finish(values: np.ndarray, state: SteppingState) -> Field:
    return Field(values, state.n + 1).check_finite()


def step_pr_adi(state: SteppingState, f_half: Field) -> Field:
    """Peaceman-Rachford: x-implicit/y-explicit, then y-implicit/x-explicit."""
    _check_dims(state, f_half, 2, "PR-ADI")
    bx, by = state.ops
    u, half_f = state.current.values, 0.5 * state.tau * f_half.values
    star = solve_along(bx.factors, u + apply_along(by.matrix, u, 1) + half_f, 0)
    new = solve_along(by.factors, star + apply_along(bx.matrix, star, 0) + half_f, 1)
    return _finish(new, state)


def _d_adi_2d(state: SteppingState, f_half: Field, extra: Optional[np.ndarray]) -> Field:
    bx, by = state.ops
    u = state.current.values
    by_u = apply_along(by.matrix, u, 1)
    rhs = u + apply_along(bx.matrix, u, 0) + 2.0 * by_u + state.tau * f_half.values
    if extra is not None:
        rhs = rhs + extra
    star = solve_along(bx.factors, rhs, 0)
    return _finish(solve_along(by.factors, star - by_u, 1), state)


def step_d_adi_2d(state: SteppingState, f_half: Field) -> Field:
    """Douglas ADI in 2D."""
    _check_dims(state, f_half, 2, "D-ADI")
    return _d_adi_2d(state, f_half, None)


def step_d_adi_3d(state: SteppingState, f_half: Field) -> Field:
    """Douglas ADI in 3D: one x, one y and one z sweep."""
    _check_dims(state, f_half, 3, "D-ADI")
    ax, ay, az = state.ops
    u = state.current.values
    ay_u = apply_along(ay.matrix, u, 1)
    az_u = apply_along(az.matrix, u, 2)
    rhs = u + apply_along(ax.matrix, u, 0) + 2.0 * (ay_u + az_u) + state.tau * f_half.values
    u1 = solve_along(ax.factors, rhs, 0)
    u2 = solve_along(ay.factors, u1 - ay_u, 1)
    return _finish(solve_along(az.factors, u2 - az_u, 2), state)


def _cross(state: SteppingState, v: np.ndarray) -> np.ndarray:
    bx, by = state.ops
    return apply_along(bx.matrix, apply_along(by.matrix, v, 1), 0)


def _need_previous(state: SteppingState, name: str) -> np.ndarray:
    if state.previous is None:
        raise FracAdiError(f"{name} needs the previous time level; bootstrap the first step")
    return state.previous.values


def step_d_adi2_2d(state: SteppingState, f_half: Field) -> Field:
    """D-ADI with the lagged correction ``B_x B_y (u^n - u^{n-1})`` in sweep 1."""
    _check_dims(state, f_half, 2, "D-ADI-II")
    prev = _need_previous(state, "D-ADI-II")
    return _d_adi_2d(state, f_half, _cross(state, state.current.values - prev))


def _fs_2d(state: SteppingState, f_half: Field, extra: Optional[np.ndarray]) -> Field:
    bx, by = state.ops
    u = state.current.values
    rhs = u + apply_along(bx.matrix, u, 0) + state.tau * f_half.values
    if extra is not None:
        rhs = rhs + extra
    u1 = solve_along(bx.factors, rhs, 0)
    return _finish(solve_along(by.factors, u1 + apply_along(by.matrix, u, 1), 1), state)


def step_fs_2d(state: SteppingState, f_half: Field) -> Field:
    """Fractional-step scheme: x-CN half, then y-CN half."""
    _check_dims(state, f_half, 2, "FS")
    return _fs_2d(state, f_half, None)


def step_fs2_2d(state: SteppingState, f_half: Field) -> Field:
    """FS with the lagged correction ``B_x B_y (3u^n - u^{n-1})`` in sweep 1."""
    _check_dims(state, f_half, 2, "FS-II")
    prev = _need_previous(state, "FS-II")
    return _fs_2d(state, f_half, _cross(state, 3.0 * state.current.values - prev))


def build_operators(problem: Problem, tau: Optional[float] = None) -> tuple:
    tau = problem.time.tau if tau is None else tau
    return tuple(build_direction_operator(ax, tau, k) for k, ax in enumerate(problem.axes))


def _stepper(problem: Problem, scheme: SchemeKind, ops: tuple):
    if scheme is SchemeKind.CN_FULL:
        if problem.dims == 1:
            return lambda s, f: step_cn_1d(s.ops[0], s.current, f)
        system = assemble_cn_from_operators(ops)
        return lambda s, f: step_cn_full(system, s.current, f)
    if scheme is SchemeKind.D_ADI:
        return step_d_adi_2d if problem.dims == 2 else step_d_adi_3d
    return {
        SchemeKind.PR_ADI: step_pr_adi,
        SchemeKind.D_ADI_II: step_d_adi2_2d,
        SchemeKind.FS: step_fs_2d,
        SchemeKind.FS_II: step_fs2_2d,
    }[scheme]


def iterate(problem: Problem, scheme, bootstrap: str = "d_adi",
            initial: Optional[Field] = None) -> Iterator[Field]:
    """Yield ``u^1, ..., u^{N_t}`` for ``problem`` advanced by ``scheme``.

    The two-step schemes compute ``u^1`` with plain D-ADI (``bootstrap="d_adi"``)
    or take it from the exact solution (``bootstrap="exact"``).  Any failure
    is re-raised as StepFailure carrying the index of the step being computed.
    """
    scheme = check_admissible(problem, scheme)
    if bootstrap not in BOOTSTRAPS:
        raise ValueError(f"bootstrap must be one of {BOOTSTRAPS}")
    if scheme.two_step and bootstrap == "exact" and problem.exact is None:
        raise FracAdiError("exact bootstrap needs a problem with an exact solution")
    tau = problem.time.tau
    ops = build_operators(problem, tau)
    step = _stepper(problem, scheme, ops)
    u0 = sample_field(problem, "initial") if initial is None else Field(initial.values.copy())
    state = SteppingState(u0, None, 0, ops, tau)
    for n in range(problem.time.n_steps):
        try:
            f_half = sample_forcing(problem, (n + 0.5) * tau)
            if scheme.two_step and n == 0:
                if bootstrap == "exact":
                    new = sample_field(problem, "exact", tau)
                    new.step = 1
                else:
                    new = step_d_adi_2d(state, f_half)
            else:
                new = step(state, f_half)
        except StepFailure:
            raise
        except Exception as exc:
            raise StepFailure(n, exc) from exc
        state.advance(new)
        yield new


def run(problem: Problem, scheme, bootstrap: str = "d_adi", initial: Optional[Field] = None):
    """Advance to the final time; returns ``(u^{N_t}, N_t)``."""
    u = sample_field(problem, "initial") if initial is None else Field(initial.values.copy())
    steps = 0
    for u in iterate(problem, scheme, bootstrap, initial):
        steps += 1
    return u, steps
