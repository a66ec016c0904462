import math

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from fracadi.catalog import (PROBLEM_IDS, SeparableSolution, bubble, build_forcing_3d, forcing_oracle,
                             make_problem, power_rule_forcing, power_rule_line, refined_line_operator,
                             richardson_line, riesz_line_quadrature, riesz_profile, riesz_profile_dd,
                             rl_left, rl_right)
from fracadi.core_model import AxisSpec, interior_coords, sample_field
from fracadi.errors import RichardsonError
from fracadi.frac_ops import apply_along, build_direction_operator

# D_L^1.9 S + D_R^1.9 S for the Riesz profile, from the Riemann-Liouville form
# (substitution t = w^10, 60-digit quadrature, central second difference)
RIESZ_19 = {0.5: -128.52973934686722, 0.23: -17.389243231360447}
# second derivative of the Riesz profile at 0.23 (60-digit numerical differentiation)
PROFILE_DD_023 = -14.723783381713807


@pytest.mark.parametrize("pid,orders", [("p1d", (1.1,)), ("p1d", (1.9,)), ("p2d", (1.5, 1.4)),
                                        ("p2d", (1.1, 1.9)), ("p3d", (1.2, 1.2, 1.2)),
                                        ("p3d", (1.4, 1.5, 1.6))])
def test_closed_form_matches_power_rule(pid, orders):
    closed = make_problem(pid, *orders, n=8)
    power = make_problem(pid, *orders, n=8, forcing="power")
    c = interior_coords(closed.axes)
    for t in (0.0, 0.7):
        a, b = closed.forcing(*c, t), power.forcing(*c, t)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_power_rule_integer_orders_are_classical_derivatives():
    p = bubble(0.0, 2.0)
    x = np.linspace(0.1, 1.9, 7)
    np.testing.assert_allclose(rl_left(p, 0.0, 1.0)(x), p.deriv()(x), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(rl_left(p, 0.0, 2.0)(x), p.deriv(2)(x), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(rl_right(p, 2.0, 1.0)(x), -p.deriv()(x), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(rl_right(p, 2.0, 2.0)(x), p.deriv(2)(x), rtol=1e-13, atol=1e-13)


def test_power_rule_monomial():
    mu = 1.5
    x = np.array([0.2, 0.5, 0.9])
    np.testing.assert_allclose(rl_left(Polynomial([0, 0, 1]), 0.0, mu)(x),
                               math.gamma(3) / math.gamma(3 - mu) * x ** (2 - mu), rtol=1e-14)
    np.testing.assert_allclose(rl_right(Polynomial([1, -2, 1]), 1.0, mu)(x),
                               math.gamma(3) / math.gamma(3 - mu) * (1 - x) ** (2 - mu), rtol=1e-13)


def test_zero_coefficients_leave_time_derivative():
    axes = tuple(AxisSpec(0.0, 2.0, 8, m, 0.0, 0.0, 0.0) for m in (1.3, 1.6, 1.9))
    sol = SeparableSolution((bubble(0.0, 2.0),) * 3, 4.0)
    c = interior_coords(axes)
    f = power_rule_forcing(sol, axes)
    # with L = 0 the forcing is u_t = -u
    np.testing.assert_allclose(f(*c, 0.7), -sol.exact(*c, 0.7), rtol=0, atol=1e-15)


def _fixed_node_residual(problem, points):
    """``u_t - L_h u - f`` at t=0 on the nodes nearest ``points`` in every axis."""
    ops = [build_direction_operator(ax, 2.0, k) for k, ax in enumerate(problem.axes)]  # M = L_h
    u = sample_field(problem).values
    lu = sum(apply_along(op.matrix, u, k) for k, op in enumerate(ops))
    r = -u - lu - problem.forcing(*interior_coords(problem.axes), 0.0)
    ax = problem.axes[0]
    idx = [int(round((x - ax.lo) / ax.h)) - 1 for x in points]
    return float(np.max(np.abs(r[np.ix_(*[idx] * problem.dims)])))


@pytest.mark.parametrize("pid,orders,ns", [("p1d", (1.5,), (32, 64, 128, 256)),
                                           ("p1d", (1.9,), (32, 64, 128, 256)),
                                           ("p2d", (1.5, 1.7), (16, 32, 64, 128)),
                                           ("p3d", (1.2, 1.5, 1.8), (8, 16, 32))])
def test_closed_form_consistency_second_order(pid, orders, ns):
    hi = 1.0 if pid == "p1d" else 2.0
    pts = (hi / 4, hi / 2, 3 * hi / 4)
    errs = np.array([_fixed_node_residual(make_problem(pid, *orders, n=n), pts) for n in ns])
    rates = np.log2(errs[:-1] / errs[1:])
    assert np.all(np.abs(rates - 2.0) <= 0.1), rates


def test_3d_forcing_center_against_refined_grid():
    alpha = 1.5
    f = build_forcing_3d(alpha, alpha, alpha)(1.0, 1.0, 1.0, 0.0)
    ax = make_problem("p3d", alpha, n=2).axes[0]  # single interior node at x = 1
    s = bubble(0.0, 2.0)
    v256, v512 = (refined_line_operator(s, ax, r)[0] for r in (256, 512))  # h = 1/256, 1/512
    line = (4 * v512 - v256) / 3
    x = s(1.0)
    assert abs(f - (-4 * (x ** 3 + 3 * line * x ** 2))) <= 1e-6


def test_oracle_reproduces_1d_closed_form():
    closed = make_problem("p1d", 1.1, n=10)
    oracle = make_problem("p1d", 1.1, n=10, forcing="oracle")
    c = interior_coords(closed.axes)
    assert np.max(np.abs(closed.forcing(*c, 0.0) - oracle.forcing(*c, 0.0))) <= 1e-7


@pytest.mark.parametrize("alpha", [1.5, 1.9])
def test_oracle_refuses_when_extrapolants_disagree(alpha):
    with pytest.raises(RichardsonError) as exc:
        make_problem("p1d", alpha, n=10, forcing="oracle")
    assert exc.value.discrepancy > 1e-7
    # with the gate relaxed the reported discrepancy bounds the actual error
    closed = make_problem("p1d", alpha, n=10)
    loose = make_problem("p1d", alpha, n=10, forcing="oracle", oracle_tol=1e-5)
    c = interior_coords(closed.axes)
    err = np.max(np.abs(closed.forcing(*c, 0.0) - loose.forcing(*c, 0.0)))
    assert err <= 2 * exc.value.discrepancy * max(1.0, np.max(np.abs(closed.forcing(*c, 0.0))))


def test_oracle_zero_solution_gives_zero_forcing():
    axes = (AxisSpec(0.0, 1.0, 10, 1.5, 1.0, 1.0, 1.0),)
    zero = SeparableSolution((lambda x: np.zeros_like(np.asarray(x, float)),))
    f = forcing_oracle(zero, axes)
    assert not np.any(f(*interior_coords(axes), 0.3))


def test_oracle_only_defined_on_coarse_nodes():
    axes = (AxisSpec(0.0, 1.0, 10, 1.5, 1.0, 1.0, 1.0),)
    f = forcing_oracle(SeparableSolution((bubble(0.0, 1.0),)), axes, r=4, tol=1e-3)
    with pytest.raises(ValueError):
        f(np.array([0.15]), 0.0)


def test_richardson_rejects_unsupported_factor():
    with pytest.raises(ValueError):
        richardson_line(riesz_profile, AxisSpec(0.0, 1.0, 10, 1.5), 2)


def test_refined_operator_converges_at_second_order():
    ax = AxisSpec(0.0, 1.0, 10, 1.3, 1.0, 1.0, 1.0)
    s = bubble(0.0, 1.0)
    exact = power_rule_line(s, ax)(ax.interior)
    errs = np.array([np.max(np.abs(refined_line_operator(s, ax, r) - exact)) for r in (4, 8, 16, 32)])
    assert np.all(np.abs(np.log2(errs[:-1] / errs[1:]) - 2) <= 0.05)


def test_refined_operator_dense_and_fft_paths_agree():
    ax = AxisSpec(0.0, 1.0, 10, 1.7, 1.0, 0.5, 0.3)
    a = refined_line_operator(riesz_profile, ax, 8, method="dense")
    b = refined_line_operator(riesz_profile, ax, 8, method="fft")
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


def test_riesz_profile_second_derivative():
    assert riesz_profile_dd(0.23) == pytest.approx(PROFILE_DD_023, rel=1e-13)
    s = np.linspace(0.05, 0.95, 19)
    h = 1e-3
    p = riesz_profile
    fd = (-p(s + 2 * h) + 16 * p(s + h) - 30 * p(s) + 16 * p(s - h) - p(s - 2 * h)) / (12 * h ** 2)
    np.testing.assert_allclose(riesz_profile_dd(s), fd, rtol=1e-6, atol=1e-6)


def test_riesz_quadrature_against_independent_route():
    x = np.array(sorted(RIESZ_19))
    np.testing.assert_allclose(riesz_line_quadrature(x, 1.9), [RIESZ_19[k] for k in x], rtol=1e-12)


def test_riesz_quadrature_integer_order_limit():
    # at mu = 2 both one-sided derivatives reduce to S''
    x = np.array([0.2, 0.5, 0.8])
    np.testing.assert_allclose(riesz_line_quadrature(x, 1.999999), 2 * riesz_profile_dd(x), rtol=1e-4)


def test_riesz_quadrature_against_refined_grid_oracle():
    ax = AxisSpec(0.0, 1.0, 100, 1.9)
    quad = riesz_line_quadrature(ax.interior, 1.9)
    vals, gap = richardson_line(riesz_profile, ax, 16, tol=1e-6)
    assert np.max(np.abs(vals - quad)) / max(1.0, np.max(np.abs(quad))) <= 5e-7
    assert gap <= 1e-6


def test_riesz_oracle_gate_at_table_grid():
    # the refined-grid oracle cannot certify 1e-7 on the 1/100 grid
    with pytest.raises(RichardsonError):
        make_problem("riesz2d", 1.9, n=100, forcing="oracle")


def test_riesz_problem_shape():
    p = make_problem("riesz2d", 1.9, n=20, nt_ratio=2.5)
    assert p.is_riesz() and p.dims == 2
    assert p.time.n_steps == 8
    x, y = interior_coords(p.axes)
    np.testing.assert_array_equal(sample_field(p).values, riesz_profile(x) * riesz_profile(y))
    np.testing.assert_allclose(sample_field(p, "exact", 0.5).values,
                               math.exp(-0.5) * riesz_profile(x) * riesz_profile(y), rtol=1e-15)
    # node lookup and off-node evaluation use the same quadrature
    line = p.forcing.spatial(np.array([0.3]), np.array([0.3]))
    off = p.forcing.spatial(np.array([0.3 + 1e-3]), np.array([0.3]))
    assert abs(line[0] - off[0]) < 0.05 * abs(line[0])


def test_make_problem_errors():
    with pytest.raises(ValueError):
        make_problem("p4d")
    with pytest.raises(ValueError):
        make_problem("p1d", forcing="magic")
    with pytest.raises(ValueError):
        make_problem("riesz2d", forcing="power")
    with pytest.raises(ValueError):
        make_problem("p1d", n=10, nt_ratio=3.0)  # T=1 is not a whole number of steps
    assert PROBLEM_IDS == ("p1d", "p2d", "p3d", "riesz2d")


def test_problem_metadata_and_steps():
    p = make_problem("p2d", 1.5, 1.4, n=40)
    assert p.meta["orders"] == (1.5, 1.4)
    assert p.time.n_steps == 40 and p.time.tau == pytest.approx(1 / 20)
    assert p.axes[0].hi == 2.0
    assert make_problem("p1d", n=10, nt_ratio=0.5).time.n_steps == 20
