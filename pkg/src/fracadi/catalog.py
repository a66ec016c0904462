"""Benchmark problems and their forcing functions.

All four problems have separable exact solutions ``amp * exp(-t) * prod_k S_k``
and the equation ``u_t = sum_k (d1 D_L + d2 D_R + kappa d/dx_k) u + f``, so
``f = -amp * exp(-t) * (prod_k S_k + sum_k (L_k S_k) prod_{j != k} S_j)``.

Forcings come from three independent routes:

* closed forms (``p1d``, ``p2d``, ``p3d``),
* the Riemann-Liouville power rule applied to polynomial factors
  (``power_rule_forcing``),
* numerical evaluation for non-polynomial factors: weighted quadrature of
  the Caputo form (``riesz_line_quadrature``) and a refined-grid discrete
  operator with Richardson extrapolation (``forcing_oracle``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .core_model import AxisSpec, Problem, SeparableForcing, TimeSpec, as_order
from .errors import RichardsonError
from .frac_ops import apply_left_frac, apply_right_frac, frac_coeffs, frac_gamma

PROBLEM_IDS = ("p1d", "p2d", "p3d", "riesz2d")


@dataclass(frozen=True)
class SeparableSolution:
    """``amplitude * exp(-t) * prod_k factors[k](x_k)``."""

    factors: tuple
    amplitude: float = 1.0

    def spatial(self, *coords):
        out = self.amplitude
        for s, x in zip(self.factors, coords):
            out = out * s(x)
        return out

    def initial(self, *coords):
        return self.spatial(*coords)

    def exact(self, *args):
        *coords, t = args
        return math.exp(-t) * self.spatial(*coords)


def separable_forcing(solution: SeparableSolution, line_ops: Sequence[Callable]) -> SeparableForcing:
    """Forcing for a separable solution given ``x -> (L_k S_k)(x)`` per axis."""
    factors = solution.factors

    def spatial(*coords):
        total = 1.0
        for s, x in zip(factors, coords):
            total = total * s(x)
        for k, lk in enumerate(line_ops):
            term = lk(coords[k])
            for j, (s, x) in enumerate(zip(factors, coords)):
                if j != k:
                    term = term * s(x)
            total = total + term
        return -solution.amplitude * total

    return SeparableForcing(spatial, lambda t: math.exp(-t))


# -- polynomial factors and the power rule ----------------------------------

def bubble(lo: float, hi: float) -> Polynomial:
    """``(x - lo)^2 (hi - x)^2``."""
    return Polynomial([-lo, 1.0]) ** 2 * Polynomial([hi, -1.0]) ** 2


def _power_terms(poly: Polynomial, shift: float, sign: float, mu: float):
    """Coefficients ``c_j Gamma(j+1)/Gamma(j+1-mu)`` of ``poly`` in ``sign*(x - shift)``."""
    q = poly(Polynomial([shift, sign]))
    return [(j, c * math.gamma(j + 1) / math.gamma(j + 1 - mu))
            for j, c in enumerate(q.coef) if c != 0.0]


def rl_left(poly: Polynomial, lo: float, mu: float) -> Callable:
    """Left Riemann-Liouville derivative of ``poly`` on ``[lo, .)`` via the power rule."""
    terms = _power_terms(poly, lo, 1.0, mu)
    return lambda x: sum(c * (np.asarray(x, float) - lo) ** (j - mu) for j, c in terms)


def rl_right(poly: Polynomial, hi: float, mu: float) -> Callable:
    """Right Riemann-Liouville derivative of ``poly`` on ``(., hi]``."""
    terms = _power_terms(poly, hi, -1.0, mu)
    return lambda x: sum(c * (hi - np.asarray(x, float)) ** (j - mu) for j, c in terms)


def power_rule_line(poly: Polynomial, axis: AxisSpec) -> Callable:
    """``x -> d1 D_L p + d2 D_R p + kappa p'`` for a polynomial factor."""
    mu = float(axis.order)
    left, right, dp = rl_left(poly, axis.lo, mu), rl_right(poly, axis.hi, mu), poly.deriv()
    return lambda x: axis.d1(x) * left(x) + axis.d2(x) * right(x) + axis.kappa(x) * dp(x)


def power_rule_forcing(solution: SeparableSolution, axes: Sequence[AxisSpec]) -> SeparableForcing:
    """Forcing from the power rule; every factor must be a Polynomial."""
    return separable_forcing(solution, [power_rule_line(p, ax) for p, ax in zip(solution.factors, axes)])


# -- closed forms ----------------------------------------------------------

def forcing_p1d(alpha) -> Callable:
    a = float(alpha)
    g3, g4, g5 = (math.gamma(k) / math.gamma(k - a) for k in (3, 4, 5))

    def f(x, t):
        y = 1.0 - x
        return -math.exp(-t) * (x ** 2 * y ** 2 + (4 * x ** 3 - 6 * x ** 2 + 2 * x)
                                + g3 * (x ** (2 - a) + y ** (2 - a))
                                - 2 * g4 * (x ** (3 - a) + y ** (3 - a))
                                + g5 * (x ** (4 - a) + y ** (4 - a)))
    return f


def _bracket(s, mu):
    w = 2.0 - s
    return (s ** 2 + w ** 2 - 3 * (s ** 3 + w ** 3) / (3 - mu)
            + 3 * (s ** 4 + w ** 4) / ((3 - mu) * (4 - mu)))


def forcing_p2d(alpha, beta) -> Callable:
    a, b = float(alpha), float(beta)

    def f(x, y, t):
        e = math.exp(-t)
        return (-4 * e * x ** 2 * y ** 2 * (x - 2) * (y - 2) * (3 * x * y - 5 * x - 5 * y + 8)
                - 32 * e * y ** 2 * (2 - y) ** 2 * _bracket(x, a)
                - 32 * e * x ** 2 * (2 - x) ** 2 * _bracket(y, b))
    return f


def _line_3d(s, mu):
    # d1 D_L X + d2 D_R X + kappa X' for X = s^2 (2-s)^2 and the 3D coefficients
    return 8 * _bracket(s, mu) + s / 4 * (8 * s - 12 * s ** 2 + 4 * s ** 3)


def build_forcing_3d(alpha, beta, gamma) -> Callable:
    """Closed-form forcing for the 3D benchmark with variable coefficients."""
    a, b, c = (float(as_order(m)) for m in (alpha, beta, gamma))

    def f(x, y, z, t):
        X, Y, Z = (s ** 2 * (2 - s) ** 2 for s in (x, y, z))
        lin = _line_3d(x, a) * Y * Z + X * _line_3d(y, b) * Z + X * Y * _line_3d(z, c)
        return -4 * math.exp(-t) * (X * Y * Z + lin)
    return f


# -- the Riesz benchmark ---------------------------------------------------

def riesz_profile(s):
    """``sin((2s)^4) sin((2 - 2s)^4)``."""
    s = np.asarray(s, dtype=float)
    return np.sin(16 * s ** 4) * np.sin(16 * (1 - s) ** 4)


def riesz_profile_dd(s):
    """Second derivative of :func:`riesz_profile`."""
    s = np.asarray(s, dtype=float)
    a, b = 16 * s ** 4, 16 * (1 - s) ** 4
    da, db = 64 * s ** 3, -64 * (1 - s) ** 3
    dda, ddb = 192 * s ** 2, 192 * (1 - s) ** 2
    sa, ca, sb, cb = np.sin(a), np.cos(a), np.sin(b), np.cos(b)
    return (-(da ** 2 + db ** 2) * sa * sb + dda * ca * sb + ddb * sa * cb
            + 2 * da * db * ca * cb)


_QUAD_OPTS = dict(limit=500, epsabs=1e-13, epsrel=1e-13)


def riesz_line_quadrature(x, mu, dd=riesz_profile_dd, lo=0.0, hi=1.0) -> np.ndarray:
    """``D_L^mu S + D_R^mu S`` at points ``x`` for a profile vanishing with its
    first derivative at both ends.

    Under that condition the Riemann-Liouville and Caputo derivatives
    coincide, ``D_L^mu S(x) = int_lo^x (x - s)^(1-mu) S''(s) ds / Gamma(2-mu)``,
    and the algebraic end-point weight is integrated exactly by QUADPACK.
    """
    mu = float(mu)
    out = []
    with warnings.catch_warnings():
        # the 1e-13 request sits at the roundoff floor; QUADPACK says so but converges
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for xi in np.atleast_1d(np.asarray(x, dtype=float)):
            left = integrate.quad(dd, lo, xi, weight="alg", wvar=(0.0, 1.0 - mu), **_QUAD_OPTS)[0]
            right = integrate.quad(dd, xi, hi, weight="alg", wvar=(1.0 - mu, 0.0), **_QUAD_OPTS)[0]
            out.append((left + right) / frac_gamma(2.0 - mu))
    return np.array(out)


@lru_cache(maxsize=32)
def _riesz_nodes_cached(mu: float, n: int) -> np.ndarray:
    x = np.arange(1, n) / n
    v = riesz_line_quadrature(x, mu)
    v.setflags(write=False)
    return v


class _NodeLookup:
    """Callable returning precomputed values at the interior nodes of ``[0, 1]``."""

    def __init__(self, mu: float, n: int):
        self.mu, self.n = mu, n

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.rint(x * self.n).astype(int)
        if np.any(np.abs(idx - x * self.n) > 1e-9) or np.any((idx < 1) | (idx >= self.n)):
            return riesz_line_quadrature(x.reshape(-1), self.mu).reshape(x.shape)
        return _riesz_nodes_cached(self.mu, self.n)[idx - 1]


# -- refined-grid oracle ---------------------------------------------------

def refined_line_operator(func: Callable, axis: AxisSpec, r: int, method: str = "fft") -> np.ndarray:
    """``d1 D_L + d2 D_R + kappa d/dx`` applied to ``func`` with the discrete
    second-order operator on an ``r``-times refined grid, read at the interior
    nodes of ``axis``."""
    fine = AxisSpec(axis.lo, axis.hi, axis.n * r, axis.order)
    x = fine.interior
    u = np.asarray(func(x), dtype=float)
    c = frac_coeffs(axis.order, fine.q + 2)
    left = apply_left_frac(u, c, fine.h, method)
    right = apply_right_frac(u, c, fine.h, method)
    padded = np.concatenate(([0.0], u, [0.0]))
    du = (padded[2:] - padded[:-2]) / (2 * fine.h)
    fine_vals = axis.d1(x) * left + axis.d2(x) * right + axis.kappa(x) * du
    return fine_vals[r - 1::r]


def richardson_line(func: Callable, axis: AxisSpec, r: int, tol: float = 1e-7, method: str = "fft"):
    """Extrapolated line operator from refinements ``r`` and ``2r``.

    The extrapolant is compared with the one from ``2r`` and ``4r``; their
    gap, relative to ``max(1, max|value|)``, must not exceed ``tol``.
    Returns ``(values, discrepancy)``.
    """
    if r not in (4, 8, 16):
        raise ValueError("refinement factor must be 4, 8 or 16")
    v1, v2, v4 = (refined_line_operator(func, axis, k, method) for k in (r, 2 * r, 4 * r))
    e1, e2 = (4 * v2 - v1) / 3, (4 * v4 - v2) / 3
    scale = max(1.0, float(np.max(np.abs(e1)))) if e1.size else 1.0
    gap = float(np.max(np.abs(e2 - e1))) / scale if e1.size else 0.0
    if gap > tol:
        raise RichardsonError(gap, tol)
    return e1, gap


def forcing_oracle(solution: SeparableSolution, axes: Sequence[AxisSpec], r: int = 16,
                   tol: float = 1e-7) -> SeparableForcing:
    """Forcing whose spatial operator terms come from :func:`richardson_line`.

    The result only knows the coarse interior nodes of ``axes``.
    """
    tables = []
    for s, ax in zip(solution.factors, axes):
        vals, _ = richardson_line(s, ax, r, tol)
        tables.append((ax, vals))

    def lookup(ax, vals):
        def f(x):
            x = np.asarray(x, dtype=float)
            idx = np.rint((x - ax.lo) / ax.h).astype(int)
            if np.any(np.abs(idx * ax.h + ax.lo - x) > 1e-9 * ax.h) or np.any((idx < 1) | (idx > ax.q)):
                raise ValueError("oracle forcing is only defined at coarse interior nodes")
            return vals[idx - 1]
        return f

    return separable_forcing(solution, [lookup(ax, v) for ax, v in tables])


# -- problem constructors ----------------------------------------------------

def _variable_axis(n: int, mu, lo=0.0, hi=2.0) -> AxisSpec:
    m = float(as_order(mu))
    gm = math.gamma(3 - m)
    return AxisSpec(lo, hi, n, m,
                    d1=lambda x: gm * np.asarray(x, float) ** m,
                    d2=lambda x: gm * (hi - np.asarray(x, float)) ** m,
                    kappa=lambda x: np.asarray(x, float) / 4.0)


def _time(t_end: float, h: float, nt_ratio: float) -> TimeSpec:
    steps = t_end / (nt_ratio * h)
    nt = int(round(steps))
    if nt < 1 or abs(steps - nt) > 1e-8 * max(1.0, steps):
        raise ValueError(f"t_end={t_end} is not an integer number of steps tau={nt_ratio}*h")
    return TimeSpec(t_end, nt)


def make_problem(problem_id: str, alpha=1.5, beta=None, gamma=None, n: int = 10,
                 nt_ratio: float = 1.0, t_end: float | None = None,
                 forcing: str = "closed", oracle_tol: float = 1e-7) -> Problem:
    """Build a catalog problem with ``n`` intervals per axis and ``tau = nt_ratio * h``.

    ``forcing`` selects the route: ``"closed"`` (closed form, or quadrature
    for ``riesz2d``), ``"power"`` (power rule, polynomial problems only) or
    ``"oracle"`` (refined-grid Richardson values).
    """
    pid = problem_id.strip().lower()
    beta = alpha if beta is None else beta
    gamma = alpha if gamma is None else gamma
    if forcing not in ("closed", "power", "oracle"):
        raise ValueError(f"unknown forcing route {forcing!r}")
    if pid == "p1d":
        axes = (AxisSpec(0.0, 1.0, n, alpha, 1.0, 1.0, 1.0),)
        sol = SeparableSolution((bubble(0.0, 1.0),))
        closed = forcing_p1d(alpha)
        meta = {"orders": (float(alpha),)}
        t_end = 1.0 if t_end is None else t_end
    elif pid == "p2d":
        axes = (_variable_axis(n, alpha), _variable_axis(n, beta))
        sol = SeparableSolution((bubble(0.0, 2.0), bubble(0.0, 2.0)), 4.0)
        closed = forcing_p2d(alpha, beta)
        meta = {"orders": (float(alpha), float(beta))}
        t_end = 2.0 if t_end is None else t_end
    elif pid == "p3d":
        axes = tuple(_variable_axis(n, m) for m in (alpha, beta, gamma))
        sol = SeparableSolution((bubble(0.0, 2.0),) * 3, 4.0)
        closed = build_forcing_3d(alpha, beta, gamma)
        meta = {"orders": (float(alpha), float(beta), float(gamma))}
        t_end = 2.0 if t_end is None else t_end
    elif pid == "riesz2d":
        axes = (AxisSpec(0.0, 1.0, n, alpha), AxisSpec(0.0, 1.0, n, beta))
        sol = SeparableSolution((riesz_profile, riesz_profile))
        if forcing == "power":
            raise ValueError("riesz2d has no polynomial factors; use 'closed' or 'oracle'")
        closed = separable_forcing(sol, [_NodeLookup(float(alpha), n), _NodeLookup(float(beta), n)])
        meta = {"orders": (float(alpha), float(beta))}
        t_end = 1.0 if t_end is None else t_end
    else:
        raise ValueError(f"unknown problem {problem_id!r}; choose from {PROBLEM_IDS}")

    if forcing == "power":
        f = power_rule_forcing(sol, axes)
    elif forcing == "oracle":
        f = forcing_oracle(sol, axes, tol=oracle_tol)
    elif isinstance(closed, SeparableForcing):
        f = closed
    else:
        # every closed form is exp(-t) times a spatial profile
        f = SeparableForcing(lambda *c, _f=closed: _f(*c, 0.0), lambda t: math.exp(-t))
    h = axes[0].h
    return Problem(axes, _time(t_end, h, nt_ratio), f, sol.initial, sol.exact,
                   name=pid, meta={**meta, "n": n, "h": h, "nt_ratio": nt_ratio, "forcing": forcing})


def constant_problem(orders: Sequence, n: int, nt_ratio: float = 1.0, n_steps: int = 1,
                     riesz: bool = True, kappa: float = 1.0) -> Problem:
    """Unforced constant-coefficient problem on the unit cube.

    ``d1 = d2 = 1`` on every axis, ``kappa = 0`` in the Riesz form and the
    given constant otherwise.  The initial condition is zero; callers pass
    their own starting field to the steppers.
    """
    k = 0.0 if riesz else kappa
    axes = tuple(AxisSpec(0.0, 1.0, n, m, 1.0, 1.0, k) for m in orders)
    tau = nt_ratio / n
    zero_space = lambda *c: np.zeros(np.broadcast(*c).shape)
    return Problem(axes, TimeSpec(n_steps * tau, n_steps),
                   forcing=lambda *a: np.zeros(np.broadcast(*a[:-1]).shape),
                   initial=zero_space, name="constant",
                   meta={"orders": tuple(float(m) for m in orders), "n": n, "nt_ratio": nt_ratio})
