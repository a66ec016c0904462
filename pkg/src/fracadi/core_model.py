"""Domain types: fractional orders, axes, time grids, fields and problems.

Grid functions live on interior nodes only (homogeneous Dirichlet data is
implicit).  A field over axes ``(x, y, z)`` is stored as a numpy array of
shape ``(n_z - 1, n_y - 1, n_x - 1)`` so that C-order flattening is
x-fastest, i.e. the vector ordering used by the Kronecker forms of the
discrete operators.  Axis ``k`` of the problem therefore maps to array axis
``ndim - 1 - k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import FracAdiError, NonFiniteFieldError

AXIS_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class FracOrder:
    """Fractional exponent strictly inside (1, 2)."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not 1.0 < v < 2.0:
            raise ValueError(f"fractional order must lie in (1, 2), got {v}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value


def as_order(mu) -> FracOrder:
    return mu if isinstance(mu, FracOrder) else FracOrder(mu)


class Constant:
    """Vectorised constant coefficient function."""

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, x):
        return np.full(np.shape(x), self.value)

    def __repr__(self):
        return f"Constant({self.value!r})"


def _as_coefficient(c) -> Callable:
    return c if callable(c) else Constant(c)


@dataclass(frozen=True)
class AxisSpec:
    """One spatial axis: interval, node count, order and coefficient functions.

    ``d1``, ``d2`` and ``kappa`` may be numbers or vectorised functions of the
    axis coordinate.  They multiply the left fractional derivative, the right
    fractional derivative and the first-order advection term respectively.
    """

    lo: float
    hi: float
    n: int
    order: FracOrder
    d1: Callable = 1.0
    d2: Callable = 1.0
    kappa: Callable = 0.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"axis needs hi > lo, got [{self.lo}, {self.hi}]")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"axis needs at least 2 intervals, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "order", as_order(self.order))
        for name in ("d1", "d2", "kappa"):
            object.__setattr__(self, name, _as_coefficient(getattr(self, name)))
        x = self.interior
        for name in ("d1", "d2"):
            vals = np.asarray(getattr(self, name)(x), dtype=float)
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError(f"coefficient {name} must be finite and non-negative at interior nodes")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def q(self) -> int:
        """Number of interior unknowns."""
        return self.n - 1

    @property
    def nodes(self) -> np.ndarray:
        return build_mesh(self)

    @property
    def interior(self) -> np.ndarray:
        return self.lo + self.h * np.arange(1, self.n)

    def coefficient_values(self):
        """Node-wise ``(d1, d2, kappa)`` on interior nodes."""
        x = self.interior
        return tuple(np.broadcast_to(np.asarray(c(x), dtype=float), x.shape).copy()
                     for c in (self.d1, self.d2, self.kappa))

    def is_riesz(self) -> bool:
        d1, d2, kappa = self.coefficient_values()
        return bool(np.array_equal(d1, d2) and not np.any(kappa))

    def has_constant_coefficients(self) -> bool:
        return all(np.ptp(v) == 0 for v in self.coefficient_values())


@dataclass(frozen=True)
class TimeSpec:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValueError("n_steps must be a non-negative integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def tau(self) -> float:
        if self.n_steps == 0:
            return self.t_end
        return self.t_end / self.n_steps

    def t(self, n: float) -> float:
        return n * self.tau


def build_mesh(axis: AxisSpec) -> np.ndarray:
    """All ``n + 1`` node coordinates of ``axis``, endpoints included."""
    return axis.lo + axis.h * np.arange(axis.n + 1)


@dataclass
class Field:
    """Grid function on interior nodes, stored with x as the fastest axis."""

    values: np.ndarray
    step: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not 1 <= self.values.ndim <= 3:
            raise ValueError("fields are 1-, 2- or 3-dimensional")

    @property
    def dims(self) -> int:
        return self.values.ndim

    @property
    def extents(self) -> tuple:
        """Interior counts in axis order ``(x, y, z)``."""
        return self.values.shape[::-1]

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @classmethod
    def from_flat(cls, vec, extents: Sequence[int], step: int = 0) -> "Field":
        vec = np.asarray(vec, dtype=float)
        if vec.size != int(np.prod(extents)):
            raise ValueError(f"vector of length {vec.size} does not match extents {tuple(extents)}")
        return cls(vec.reshape(tuple(extents)[::-1]), step)

    @classmethod
    def zeros(cls, extents: Sequence[int]) -> "Field":
        return cls(np.zeros(tuple(extents)[::-1]))

    def linear_index(self, *idx: int) -> int:
        """Flat position of the 1-based interior index ``(i[, j[, m]])``."""
        if len(idx) != self.dims:
            raise ValueError("index arity must match field dimension")
        pos, stride = 0, 1
        for i, ext in zip(idx, self.extents):
            if not 1 <= i <= ext:
                raise IndexError(f"interior index {i} out of range 1..{ext}")
            pos += (i - 1) * stride
            stride *= ext
        return pos

    def check_finite(self) -> "Field":
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteFieldError(f"field at step {self.step} contains NaN/Inf")
        return self

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.step)


def interior_coords(axes: Sequence[AxisSpec]) -> list:
    """Broadcastable interior coordinate arrays, one per axis."""
    d = len(axes)
    out = []
    for k, ax in enumerate(axes):
        shape = [1] * d
        shape[d - 1 - k] = ax.q
        out.append(ax.interior.reshape(shape))
    return out


def grid_shape(axes: Sequence[AxisSpec]) -> tuple:
    return tuple(ax.q for ax in reversed(axes))


class SeparableForcing:
    """Forcing of the form ``temporal(t) * spatial(x[, y[, z]])``.

    Behaves like an ordinary ``f(*coords, t)`` callable; solvers that detect
    it evaluate the spatial factor once per grid.
    """

    def __init__(self, spatial: Callable, temporal: Callable[[float], float]):
        self.spatial = spatial
        self.temporal = temporal
        self._cache = {}

    def __call__(self, *args):
        *coords, t = args
        return self.temporal(t) * self.spatial(*coords)

    def spatial_grid(self, axes: Sequence[AxisSpec]) -> np.ndarray:
        key = tuple((ax.lo, ax.hi, ax.n) for ax in axes)
        if key not in self._cache:
            vals = self.spatial(*interior_coords(axes))
            self._cache[key] = np.broadcast_to(np.asarray(vals, dtype=float), grid_shape(axes)).copy()
        return self._cache[key]


@dataclass
class Problem:
    """Initial-boundary value problem with homogeneous Dirichlet data.

    ``forcing(*coords, t)``, ``initial(*coords)`` and ``exact(*coords, t)``
    receive broadcastable coordinate arrays.
    """

    axes: tuple
    time: TimeSpec
    forcing: Callable
    initial: Callable
    exact: Optional[Callable] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = tuple(self.axes)
        if not 1 <= len(self.axes) <= 3:
            raise ValueError("problems have 1 to 3 spatial axes")
        self._check_boundary()
        if self.exact is not None:
            u0 = sample_field(self, "initial").values
            ue = sample_field(self, "exact", 0.0).values
            gap = float(np.max(np.abs(u0 - ue))) if u0.size else 0.0
            if gap > 1e-12:
                raise FracAdiError(f"exact solution at t=0 differs from the initial condition by {gap:.3e}")

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def extents(self) -> tuple:
        return tuple(ax.q for ax in self.axes)

    def is_riesz(self) -> bool:
        return all(ax.is_riesz() for ax in self.axes)

    def has_constant_coefficients(self) -> bool:
        return all(ax.has_constant_coefficients() for ax in self.axes)

    def _check_boundary(self):
        d = self.dims
        nodes = [ax.nodes for ax in self.axes]
        for k, ax in enumerate(self.axes):
            for end in (ax.lo, ax.hi):
                coords = []
                for j in range(d):
                    shape = [1] * d
                    shape[d - 1 - j] = -1
                    c = np.array([end]) if j == k else nodes[j]
                    coords.append(c.reshape(shape))
                vals = np.asarray(self.initial(*coords), dtype=float)
                if np.max(np.abs(vals)) > 1e-12:
                    raise FracAdiError(
                        f"initial condition does not vanish on the {AXIS_NAMES[k]}={end} boundary")


def sample_field(problem: Problem, which: str = "initial", t: float = 0.0) -> Field:
    """Evaluate the initial condition or exact solution on interior nodes."""
    coords = interior_coords(problem.axes)
    if which == "initial":
        vals = problem.initial(*coords)
    elif which == "exact":
        if problem.exact is None:
            raise FracAdiError("problem has no exact solution")
        vals = problem.exact(*coords, t)
    else:
        raise ValueError(f"unknown field kind {which!r}")
    shape = grid_shape(problem.axes)
    return Field(np.broadcast_to(np.asarray(vals, dtype=float), shape).copy())


def sample_forcing(problem: Problem, t: float) -> Field:
    f = problem.forcing
    if isinstance(f, SeparableForcing):
        return Field(f.temporal(t) * f.spatial_grid(problem.axes))
    vals = f(*interior_coords(problem.axes), t)
    return Field(np.broadcast_to(np.asarray(vals, dtype=float), grid_shape(problem.axes)).copy())
