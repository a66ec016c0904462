"""Error norms, convergence rates and numerical stability checks.

The stability checks sample a finite grid of sizes and orders; each returns a
:class:`SpectralReport` that records the measured quantities and a pass flag
per check instead of raising.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cn_reference import kron_direction_matrices
from .core_model import Field, Problem
from .frac_ops import DirectionOperator, frac_coeffs, left_matrix
from .line_solver import sym_eigs, two_norm
from .splitting import SchemeKind, SteppingState, _stepper, build_operators, check_admissible

NORM_TOL = 1e-10
RADIUS_TOL = 1e-8
ITERATION_CAP = 500


def max_error(numeric: Field, exact: Field) -> float:
    """Maximum-norm difference over interior nodes."""
    if numeric.values.shape != exact.values.shape:
        raise ValueError(f"extents differ: {numeric.extents} vs {exact.extents}")
    if numeric.values.size == 0:
        return 0.0
    return float(np.max(np.abs(numeric.values - exact.values)))


def observed_rate(e_coarse: float, e_fine: float) -> float:
    """``log2(e_coarse / e_fine)`` for a mesh-halving pair."""
    if not (e_coarse > 0 and e_fine > 0):
        raise ValueError("observed_rate needs two positive errors")
    return math.log2(e_coarse / e_fine)


def hermitian_part(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("hermitian_part needs a square matrix")
    return 0.5 * (a + a.T)


@dataclass
class SpectralReport:
    """Measured quantities plus a pass flag per named check."""

    label: str
    q: int
    mu: Optional[float] = None
    values: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def merge(self, other: "SpectralReport") -> "SpectralReport":
        self.values.update(other.values)
        self.checks.update(other.checks)
        self.notes.extend(other.notes)
        return self

    def to_text(self) -> str:
        """Flat ``key = value`` block, one entry per line."""
        lines = [f"label = {self.label}", f"q = {self.q}"]
        if self.mu is not None:
            lines.append(f"mu = {self.mu:g}")
        for k, v in self.values.items():
            lines.append(f"{k} = {v:.12e}" if isinstance(v, float) else f"{k} = {v}")
        for k, ok in self.checks.items():
            lines.append(f"check.{k} = {'pass' if ok else 'FAIL'}")
        for i, note in enumerate(self.notes):
            lines.append(f"note.{i} = {note}")
        lines.append(f"passed = {str(self.passed).lower()}")
        return "\n".join(lines)


def verify_definiteness(mu, q: int, d1: float = 1.0, d2: float = 1.0) -> SpectralReport:
    """Negative definiteness of the symmetric part of ``d1 A + d2 A^T``.

    Also checks the Gerschgorin bound: every off-diagonal row sum of
    ``(A + A^T)/2`` stays below ``-g_1``.
    """
    if not 1 <= q <= 256:
        raise ValueError("verify_definiteness supports 1 <= q <= 256")
    a = left_matrix(mu, q)
    h = hermitian_part(d1 * a + d2 * a.T)
    lam = sym_eigs(h)
    h0 = hermitian_part(a)
    radii = np.sum(np.abs(h0), axis=1) - np.abs(np.diag(h0))
    g1 = frac_coeffs(mu, max(q + 2, 4)).g[1]
    rep = SpectralReport(f"definiteness mu={float(mu):g}", q, float(mu))
    rep.values.update(lambda_max_h=float(lam[-1]), gerschgorin_radius=float(radii.max()),
                      minus_g1=float(-g1))
    rep.checks.update(negative_definite=bool(lam[-1] < 0),
                      gerschgorin=bool(np.all(radii < -g1)))
    return rep


def verify_norm_bounds(op: DirectionOperator) -> SpectralReport:
    """2-norms of ``(I - M)^{-1}`` and ``(I - M)^{-1}(I + M)``; both must be <= 1."""
    if op.q > 128:
        raise ValueError("verify_norm_bounds supports q <= 128")
    if not all(np.ptp(v) == 0 for v in (op.d1, op.d2, op.kappa)):
        raise ValueError("norm bounds are only guaranteed for constant coefficients")
    eye = np.eye(op.q)
    inv = np.linalg.solve(eye - op.matrix, eye)
    n_inv, n_amp = two_norm(inv), two_norm(inv @ (eye + op.matrix))
    rep = SpectralReport(f"norm bounds axis={op.name}", op.q, op.mu)
    rep.values.update(norm_inv=n_inv, norm_amplification=n_amp)
    rep.checks.update(norm_inv=bool(n_inv <= 1 + NORM_TOL), norm_amplification=bool(n_amp <= 1 + NORM_TOL))
    return rep


def spectral_radius(matrix, tol: float = RADIUS_TOL, max_iter: int = 10000, block: int = 8,
                    squarings: int = 10, seed: int = 0):
    """Spectral radius by orthogonal subspace (block power) iteration.

    The iteration runs on ``H = G^(2^squarings)``, rescaled after each
    squaring, so eigenvalue clusters of nearly equal modulus separate by a
    factor ``2^squarings`` in the exponent; ``rho(G) = rho(H)^(2^-squarings)``.
    Ritz values of the projected block handle complex-conjugate pairs.  The
    loop stops once the dominant Ritz pair has relative residual <= ``tol``.
    Returns ``(radius, converged, iterations)``.
    """
    g = np.asarray(matrix, dtype=float)
    n = g.shape[0]
    if n == 0:
        return 0.0, True, 0
    h, log_scale = g.copy(), 0.0
    for _ in range(squarings):
        h = h @ h
        s = float(np.max(np.abs(h)))
        if s == 0.0 or not math.isfinite(s):
            return 0.0, True, 0
        h /= s
        log_scale = 2.0 * log_scale + math.log(s)
    power = 2.0 ** squarings
    k = min(block, n)
    x, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, k)))
    theta = 0.0
    for it in range(1, max_iter + 1):
        y = h @ x
        small = x.T @ y
        vals, vecs = np.linalg.eig(small)
        top = int(np.argmax(np.abs(vals)))
        theta = abs(vals[top])
        if theta == 0.0:
            return 0.0, True, it
        v = x @ vecs[:, top]
        resid = np.linalg.norm(h @ v - vals[top] * v) / (theta * np.linalg.norm(v))
        if resid <= tol:
            return math.exp((math.log(theta) + log_scale) / power), True, it
        x, _ = np.linalg.qr(y)
    return math.exp((math.log(theta) + log_scale) / power), False, max_iter


def iteration_matrix(problem: Problem, scheme) -> np.ndarray:
    """Dense one-step map of an unforced scheme, column by column.

    For the two-step schemes this is the companion map acting on the stacked
    state ``[u^n; u^{n-1}]``.
    """
    scheme = check_admissible(problem, scheme)
    size = int(np.prod(problem.extents))
    ops = build_operators(problem)
    step = _stepper(problem, scheme, ops)
    zero = Field.zeros(problem.extents)
    cols = []
    if scheme.two_step:
        for which in (0, 1):
            for i in range(size):
                e = np.zeros(size)
                e[i] = 1.0
                cur = Field.from_flat(e if which == 0 else np.zeros(size), problem.extents)
                prev = Field.from_flat(np.zeros(size) if which == 0 else e, problem.extents)
                out = step(SteppingState(cur, prev, 1, ops, problem.time.tau), zero)
                cols.append(np.concatenate([out.flat, cur.flat]))
    else:
        for i in range(size):
            e = np.zeros(size)
            e[i] = 1.0
            out = step(SteppingState(Field.from_flat(e, problem.extents), None, 0, ops, problem.time.tau), zero)
            cols.append(out.flat)
    return np.array(cols).T


def companion_pairs(problem: Problem):
    """Per-mode ``(b_k, c_k) = (lambda_k(P + Q), lambda_k(Q))`` for 2D Riesz problems.

    ``P + Q = S((I + B_x)(I + B_y) + B_x B_y)`` and ``Q = S B_x B_y`` with
    ``S = ((I - B_x)(I - B_y))^{-1}`` share the eigenvectors ``V_y (x) V_x`` of
    the symmetric direction operators, so both are diagonalised jointly.
    Returns ``(b, c, offdiag)`` where ``offdiag`` measures how far the joint
    basis is from diagonalising them.
    """
    if problem.dims != 2 or not problem.is_riesz():
        raise ValueError("companion pairs need a 2D Riesz problem")
    ops = build_operators(problem)
    bx, by = kron_direction_matrices(ops, ITERATION_CAP)
    eye = np.eye(bx.shape[0])
    s = np.linalg.inv((eye - bx) @ (eye - by))
    pq = s @ ((eye + bx) @ (eye + by) + bx @ by)
    qm = s @ bx @ by
    _, vx = sym_eigs(ops[0].matrix, vectors=True)
    _, vy = sym_eigs(ops[1].matrix, vectors=True)
    v = np.kron(vy, vx)
    dpq, dq = v.T @ pq @ v, v.T @ qm @ v
    off = max(np.max(np.abs(dpq - np.diag(np.diag(dpq)))), np.max(np.abs(dq - np.diag(np.diag(dq)))))
    return np.diag(dpq).copy(), np.diag(dq).copy(), float(off)


def verify_iteration_spectrum(problem: Problem, scheme) -> SpectralReport:
    """Spectral radius of the one-step (or companion) iteration matrix.

    The radius is measured twice: by subspace iteration and by a dense
    eigensolve.  Both must stay below ``1 + 1e-8``.  For D-ADI-II/FS-II the
    per-mode root condition ``|b| < 1 + c < 2`` is checked as well.
    """
    scheme = check_admissible(problem, scheme)
    size = int(np.prod(problem.extents))
    if size > ITERATION_CAP:
        raise ValueError(f"iteration spectra are limited to {ITERATION_CAP} unknowns, got {size}")
    g = iteration_matrix(problem, scheme)
    radius, converged, iters = spectral_radius(g)
    eig = np.linalg.eigvals(g)
    dense = float(np.max(np.abs(eig)))
    orders = problem.meta.get("orders", tuple(float(ax.order) for ax in problem.axes))
    rep = SpectralReport(f"iteration {scheme.label} {problem.dims}D", size, float(orders[0]))
    rep.values.update(spectral_radius=float(radius), spectral_radius_dense=dense,
                      power_iterations=iters, max_abs_imag=float(np.max(np.abs(eig.imag))))
    rep.checks.update(radius_power=bool(radius < 1 + RADIUS_TOL), radius_dense=bool(dense < 1 + RADIUS_TOL))
    if not converged:
        rep.notes.append(f"subspace iteration hit the cap of {iters} iterations")
        rep.checks["power_converged"] = False
    if dense >= 1 - 1e-12:
        rep.notes.append("neutral iteration: spectral radius is 1 (identity-like operator)")
    if not problem.has_constant_coefficients():
        rep.notes.append("variable coefficients: outside the constant-coefficient theory")
    if scheme.two_step:
        b, c, off = companion_pairs(problem)
        ok = (np.abs(b) < 1 + c) & (1 + c < 2)
        rep.values.update(root_condition_min_margin=float(np.min(np.minimum(1 + c - np.abs(b), 1 - c))),
                          joint_basis_offdiag=off)
        rep.checks.update(root_condition=bool(np.all(ok)), joint_basis=bool(off < 1e-10))
    return rep


def commutator_norm(ops) -> float:
    """Entrywise max of ``B_x B_y - B_y B_x`` for assembled 2D operators."""
    bx, by = kron_direction_matrices(ops[:2])
    return float(np.max(np.abs(bx @ by - by @ bx)))


def stability_suite(mus, sizes) -> list:
    """Definiteness, Gerschgorin and norm-bound reports over a ``(mu, q)`` grid,
    plus iteration spectra where the assembled system fits the size cap."""
    from .catalog import constant_problem
    from .frac_ops import build_direction_operator
    from .core_model import AxisSpec

    reports = []
    for mu in mus:
        for q in sizes:
            n = q + 1
            rep = verify_definiteness(mu, q)
            op = build_direction_operator(AxisSpec(0.0, 1.0, n, mu, 1.0, 1.0, 1.0), 1.0 / n)
            rep.merge(verify_norm_bounds(op))
            rep.label = f"mu={float(mu):g} q={q}"
            rep.merge(_spectrum_values(constant_problem([mu], n, riesz=False), SchemeKind.CN_FULL, "cn1d"))
            if q * q <= ITERATION_CAP:
                rep.merge(_spectrum_values(constant_problem([mu, mu], n, riesz=False), SchemeKind.D_ADI, "dadi2d"))
                rep.merge(_spectrum_values(constant_problem([mu, mu], n), SchemeKind.D_ADI_II, "dadi2_2d"))
            else:
                rep.notes.append(f"2D iteration spectra skipped: {q * q} unknowns exceed {ITERATION_CAP}")
            reports.append(rep)
    return reports


def _spectrum_values(problem: Problem, scheme: SchemeKind, prefix: str) -> SpectralReport:
    sub = verify_iteration_spectrum(problem, scheme)
    out = SpectralReport(sub.label, sub.q, sub.mu)
    out.values = {f"{prefix}.{k}": v for k, v in sub.values.items()}
    out.checks = {f"{prefix}.{k}": v for k, v in sub.checks.items()}
    out.notes = [f"{prefix}: {n}" for n in sub.notes]
    return out
