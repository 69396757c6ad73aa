"""Exact differential-polynomial ring, the flow tower, and operator flow terms.

Oracles: field/ring axioms as exact identities (hypothesis), the Leibniz
rule, hand-computed antiderivatives, closed-form stencil-exact samples, and
a hand value plus structural recursion for the alternating conjugation sums.
"""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vesselpde as v
from vesselpde import GridError, StructureError
from vesselpde.evolution import state_derivatives
from vesselpde.hierarchy import (
    BETA_X,
    DiffPoly,
    GRat,
    b0,
    bn,
    build_Y,
    build_flow_term,
    dp_add,
    dp_dx,
    dp_eval,
    dp_eval_grid,
    dp_integrate,
    dp_max_order,
    dp_mul,
    dp_neg,
    dp_scale,
    dp_sub,
    flow_polynomial,
    flowterm_symmetry_report,
    hierarchy_flow_X_rhs,
    hierarchy_residual,
    next_b,
    render,
)

fractions = st.builds(
    Fraction, st.integers(-40, 40), st.integers(1, 8)
)
grats = st.builds(GRat, fractions, fractions)
keys = st.lists(st.integers(1, 4), min_size=1, max_size=3).map(tuple)
polys = st.dictionaries(keys, grats, min_size=0, max_size=3).map(DiffPoly)


# ---------------------------------------------------------------------------
# exact scalars


@settings(max_examples=60, deadline=None)
@given(grats, grats, grats)
def test_grat_field_laws(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a - a == GRat.ZERO
    if not b.is_zero:
        assert (a / b) * b == a


def test_grat_coercions():
    assert GRat.of(3) == GRat(Fraction(3))
    assert GRat.of(Fraction(2, 7)) == GRat(Fraction(2, 7))
    assert GRat.of(0.5) == GRat(Fraction(1, 2))  # dyadic floats are exact
    assert GRat.of(1 - 2j) == GRat(Fraction(1), Fraction(-2))
    assert GRat.of(GRat.I) is GRat.I
    with pytest.raises(StructureError):
        GRat.of("1/2")
    with pytest.raises(ZeroDivisionError):
        GRat.ONE / GRat.ZERO
    assert GRat(Fraction(1, 3), Fraction(-2)).as_complex() == complex(1 / 3, -2)


# ---------------------------------------------------------------------------
# ring structure


def test_diffpoly_canonical_keys():
    assert DiffPoly({(1, 2): 1}) == DiffPoly({(2, 1): 1})
    assert DiffPoly({(3,): 0}).is_zero
    assert dp_sub(BETA_X, BETA_X).is_zero
    with pytest.raises(StructureError):
        DiffPoly({(0,): 1})
    assert DiffPoly({(2, 1): 1}).monomials() == ((2, 1),)


def test_ring_samples():
    p = DiffPoly({(1,): 2, (2,): Fraction(1, 3)})
    q = DiffPoly({(1,): -2})
    assert dp_add(p, q) == DiffPoly({(2,): Fraction(1, 3)})
    assert dp_neg(q) == DiffPoly({(1,): 2})
    assert dp_scale(p, 3) == DiffPoly({(1,): 6, (2,): 1})
    assert dp_scale(p, 0).is_zero
    assert dp_mul(BETA_X, BETA_X) == DiffPoly({(1, 1): 1})
    assert dp_mul(p, q) == DiffPoly({(1, 1): -4, (2, 1): Fraction(-2, 3)})


@settings(max_examples=40, deadline=None)
@given(polys, polys)
def test_leibniz_rule(a, b):
    lhs = dp_dx(dp_mul(a, b))
    rhs = dp_add(dp_mul(dp_dx(a), b), dp_mul(a, dp_dx(b)))
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(polys, polys)
def test_dx_is_linear(a, b):
    assert dp_dx(dp_add(a, b)) == dp_add(dp_dx(a), dp_dx(b))
    assert dp_dx(dp_scale(a, GRat(Fraction(2, 3), Fraction(1)))) == dp_scale(
        dp_dx(a), GRat(Fraction(2, 3), Fraction(1))
    )


def test_dx_power_rule():
    cube = DiffPoly({(1, 1, 1): 1})
    assert dp_dx(cube) == DiffPoly({(2, 1, 1): 3})


# ---------------------------------------------------------------------------
# the tower


def test_b0_coefficients():
    assert b0().terms == {
        (3,): GRat(Fraction(-1, 4)),
        (1, 1): GRat(Fraction(3, 2)),
    }


def test_b1_coefficients():
    assert bn(1).terms == {
        (5,): GRat(Fraction(0), Fraction(1, 16)),
        (2, 2): GRat(Fraction(0), Fraction(-3, 4)),
        (3, 1): GRat(Fraction(0), Fraction(-1)),
        (1, 1, 1): GRat(Fraction(0), Fraction(3, 2)),
    }
    assert bn(0) == b0()
    with pytest.raises(StructureError):
        bn(-1)


@settings(max_examples=25, deadline=None)
@given(polys)
def test_recursion_derivative_identity(b):
    """d/dx next_b(b) == (1/4)(-i b''' + 4 i (beta_x b)') exactly."""
    lhs = dp_dx(next_b(b))
    rhs = dp_scale(
        dp_add(
            dp_scale(dp_dx(dp_dx(dp_dx(b))), -GRat.I),
            dp_scale(dp_dx(dp_mul(BETA_X, b)), GRat.I * 4),
        ),
        Fraction(1, 4),
    )
    assert lhs == rhs


def test_flow_polynomials():
    r0 = flow_polynomial(0)
    assert r0.terms == {(3,): GRat(Fraction(1, 4)), (1, 1): GRat(Fraction(3, 2))}
    r1 = flow_polynomial(1)
    assert r1.terms == {
        (5,): GRat(Fraction(1, 16)),
        (2, 2): GRat(Fraction(5, 8)),
        (3, 1): GRat(Fraction(5, 4)),
        (1, 1, 1): GRat(Fraction(5, 2)),
    }
    with pytest.raises(StructureError):
        flow_polynomial(-1)


@settings(max_examples=30, deadline=None)
@given(polys)
def test_integrate_round_trip(p):
    assert dp_integrate(dp_dx(p)) == p


def test_integrate_samples_and_failure():
    assert dp_integrate(DiffPoly({(2,): 1})) == BETA_X
    # beta_x * beta_xx = (1/2) (beta_x^2)'
    assert dp_integrate(DiffPoly({(2, 1): 1})) == DiffPoly({(1, 1): Fraction(1, 2)})
    with pytest.raises(StructureError):
        dp_integrate(DiffPoly({(1, 1): 1}))  # beta_x^2 is not a total derivative


# ---------------------------------------------------------------------------
# evaluation


def test_dp_eval_exact_on_cubic():
    """beta = x^3 sampled: 4th-order stencils are exact on cubics, so the
    monomial beta_x * beta_xx evaluates to 18 x^4 to rounding."""
    h = 0.1
    xs = np.arange(-10, 11) * h
    beta = xs**3
    poly = DiffPoly({(2, 1): 1})
    assert dp_max_order(poly) == 2
    for idx in (5, 10, 15):
        got = dp_eval(poly, beta, h, idx)
        want = 3 * xs[idx] ** 2 * 6 * xs[idx]
        assert abs(got - want) < 1e-10
    grid = dp_eval_grid(poly, beta, h)
    for idx in (5, 10, 15):
        assert abs(grid[idx] - dp_eval(poly, beta, h, idx)) < 1e-12
    with pytest.raises(GridError):
        dp_eval(poly, beta.reshape(3, 7), h, 1)


def test_dp_eval_grid_axis():
    h = 0.05
    xs = np.arange(30) * h
    beta = np.stack([xs**2, 2 * xs**2])
    out = dp_eval_grid(BETA_X, beta, h, axis=1)
    assert np.allclose(out[0, 5:-5], 2 * xs[5:-5], atol=1e-10)
    assert np.allclose(out[1, 5:-5], 4 * xs[5:-5], atol=1e-10)


# ---------------------------------------------------------------------------
# rendering


def test_render_exact_strings():
    assert render(DiffPoly()) == "0"
    assert render(b0()) == "(−1/4)·βxxx + (+3/2)·βx²"
    assert render(b0(), name="b0") == "b0 = (−1/4)·βxxx + (+3/2)·βx²"
    assert render(bn(1)) == "(+1/16·i)·β5x + (−3/4·i)·βxx² + (−i)·βxβxxx + (+3/2·i)·βx³"
    assert render(flow_polynomial(0), name="r0") == "r0 = (+1/4)·βxxx + (+3/2)·βx²"
    assert (
        render(flow_polynomial(1))
        == "(+1/16)·β5x + (+5/8)·βxx² + (+5/4)·βxβxxx + (+5/2)·βx³"
    )
    mixed = DiffPoly({(4,): GRat(Fraction(1), Fraction(-2, 3))})
    assert render(mixed) == "(+1−2/3·i)·β4x"


# ---------------------------------------------------------------------------
# operator flow terms


def test_build_Y_hand_value():
    # A = 2i, B = 1 + i, m = 3, k = 2:
    # core = 6, Y = 6 (A^2 - A A* + A*^2) = 6 (-4 - 4 - 4) = -72
    Y = build_Y([[2j]], [[1 + 1j]], [[3.0]], 2)
    assert Y.shape == (1, 1)
    assert abs(Y[0, 0] - (-72)) < 1e-12
    with pytest.raises(StructureError):
        build_Y([[2j]], [[1.0]], [[1.0]], -1)


def test_build_Y_recursion():
    """Y_k = A Y_{k-1} + (-1)^k core A*^k ties every index to the previous."""
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    B = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    m = np.array([[0.3, 1j], [-1j, -0.8]])
    core = B @ m @ B.conj().T
    Ah = A.conj().T
    for k in range(1, 5):
        Yk = build_Y(A, B, m, k)
        rec = A @ build_Y(A, B, m, k - 1) + (-1) ** k * core @ np.linalg.matrix_power(Ah, k)
        assert np.linalg.norm(Yk - rec) <= 1e-12 * np.linalg.norm(Yk)


@pytest.mark.parametrize("kind", ("SL", "NLS"))
def test_flow_X_rhs_matches_state_derivative(kind):
    """-(Y_0(-i gamma) + Y_1(-i sigma2)) reproduces X_t of the basic flow."""
    P = v.preset_params(kind)
    R = v.random_realization(3, 2, P, seed=5)
    G = v.build_generators(P, R.A, 1)
    for x, t in ((0.6, 0.2), (-0.9, -0.3)):
        d = state_derivatives(P, R, G, x, t)
        B = d["B"]
        flow = [
            build_flow_term(R.A, B, -1j * P.gamma, 0),
            build_flow_term(R.A, B, -1j * P.sigma2, 1),
        ]
        rhs = hierarchy_flow_X_rhs(flow)
        assert np.linalg.norm(rhs - d["X_t"]) <= 1e-12 * (np.linalg.norm(d["X_t"]) + 1)
    with pytest.raises(StructureError):
        hierarchy_flow_X_rhs([])


def test_flowterm_symmetry(sl_params):
    R = v.random_realization(3, 2, sl_params, seed=6)
    B = R.B0
    for k, m in ((0, -1j * sl_params.gamma), (1, -1j * sl_params.sigma2)):
        rep = flowterm_symmetry_report(build_flow_term(R.A, B, m, k))
        assert rep.ok
        assert rep.residuals["hermitian_defect"] <= 1e-12
        assert rep.details["coeff_parity_defect"] <= 1e-12
    # wrong parity at k = 1 (Hermitian coefficient): Y is skew, not Hermitian
    bad = flowterm_symmetry_report(build_flow_term(R.A, B, np.eye(2), 1))
    assert not bad.ok
    assert bad.details["coeff_parity_defect"] > 0.5


# ---------------------------------------------------------------------------
# frame residual of the n = 0 flow


def test_hierarchy_residual_converges(sl_params, three_soliton):
    R, _ = three_soliton
    reps = []
    for h in (0.1, 0.05):
        nx = round(16 / h) + 1
        nt = round(1 / h) + 1
        rep = hierarchy_residual(
            sl_params, R, 0,
            np.linspace(-8, 8, nx), np.linspace(-0.5, 0.5, nt),
        )
        assert rep.details["flow_order"] == 1
        assert rep.details["polynomial"] == "r0 = (+1/4)·βxxx + (+3/2)·βx²"
        reps.append(rep)
    r_coarse = reps[0].residuals["flow_residual"]
    r_fine = reps[1].residuals["flow_residual"]
    order = np.log2(r_coarse / r_fine)
    assert order >= 3.0, (r_coarse, r_fine)
    # the literal tower member differentiated once is NOT the flow right side
    assert reps[1].details["literal_residual"] > 100 * r_fine
