"""Flow generators, closed-form evolution, states, frames and field extraction.

Oracles: hand-written modal solutions (exponential columns), adaptive RK
integration (via the verify module's checker), sech^2 closed forms, and
finite differences of ln tau.
"""

import numpy as np
import pytest

import vesselpde as v
from vesselpde import GridError, StructureError, TauZeroError
from vesselpde.evolution import TAU_GUARD
from vesselpde.verify import (
    differentiate,
    evolve_B_oracle_check,
    hybrid_X_check,
    lyapunov_grid_check,
    mixed_partial_check,
    path_independence_check,
)

PRESETS = ("SL", "NLS", "CanSys")


def _setup(kind, seed=0, n=3, order=None):
    P = v.preset_params(kind)
    if order is None:
        order = 2 if kind == "NLS" else 1
    R = v.random_realization(n, P.p, P, seed)
    G = v.build_generators(P, R.A, order=order)
    return P, R, G


# ---------------------------------------------------------------------------
# generators


@pytest.mark.parametrize("kind", PRESETS)
def test_generators_commute(kind):
    P, R, G = _setup(kind)
    rep = v.generator_commutation(G)
    assert rep.ok
    scale = np.linalg.norm(G.M) * np.linalg.norm(G.N)
    assert rep.residuals["commutator"] <= 1e-12 * max(scale, 1.0)


def test_generator_order_guard(sl_params):
    R = v.random_realization(2, 2, sl_params, 0)
    with pytest.raises(StructureError):
        v.build_generators(sl_params, R.A, order=0)


# ---------------------------------------------------------------------------
# closed-form evolution


def test_evolve_B_identity_at_origin(sl_params):
    R = v.random_realization(3, 2, sl_params, 4)
    G = v.build_generators(sl_params, R.A, 1)
    assert np.array_equal(v.evolve_B(G, R.B0, 0.0, 0.0), R.B0.astype(complex))


def test_evolve_B_zero_stays_zero(sl_params):
    G = v.build_generators(sl_params, np.diag([-1.0 + 0j, -2.0]), 1)
    B = v.evolve_B(G, np.zeros((2, 2)), 1.3, -0.7)
    assert np.all(B == 0)


def test_evolve_B_soliton_modal_oracle(sl_params, soliton):
    """Single mode: b1(x,t) = e^{x + t}, b2 = i b1 exactly (hand solution).

    The x-flow gives b1' = -i b2, b2' = -i A b1 = -b1 with A = -i, so the
    row [1, i] rides the pure growing mode e^{x}; the order-1 t-flow adds
    the factor e^{t} (speed kappa^2 = 1).
    """
    R, G = soliton
    for x, t in ((0.0, 0.0), (1.2, -0.4), (-2.0, 0.9), (3.5, 0.5)):
        B = v.evolve_B(G, R.B0, x, t)
        ref = np.exp(x + t)
        assert abs(B[0, 0] - ref) < 1e-12 * abs(ref)
        assert abs(B[0, 1] - 1j * ref) < 1e-12 * abs(ref)


@pytest.mark.parametrize("kind", PRESETS)
def test_evolve_B_vs_adaptive_rk(kind):
    P, R, G = _setup(kind, seed=1)
    rep = evolve_B_oracle_check(G, R.B0, [(0.8, 0.0), (0.5, 0.4), (-0.6, -0.3)])
    assert rep.ok
    assert max(rep.residuals.values()) <= 1e-10


@pytest.mark.parametrize("kind", PRESETS)
def test_hybrid_X_matches_integrated(kind):
    P, R, G = _setup(kind, seed=2)
    rep = hybrid_X_check(G, R, [(0.7, 0.2), (-0.5, -0.4)])
    assert rep.ok
    assert max(rep.residuals.values()) <= 1e-9


@pytest.mark.parametrize("kind", PRESETS)
def test_path_independence(kind):
    P, R, G = _setup(kind, seed=3)
    rep = path_independence_check(G, R, [(0.9, 0.3), (-0.8, -0.2)])
    assert rep.ok


def test_evolve_X_paths_agree(sl_params):
    R = v.random_realization(3, 2, sl_params, 5)
    G = v.build_generators(sl_params, R.A, 1)
    X1 = v.evolve_X(G, R, 0.8, -0.3, path="xt")
    X2 = v.evolve_X(G, R, 0.8, -0.3, path="tx")
    assert np.linalg.norm(X1 - X2) <= 1e-9 * (np.linalg.norm(X1) + 1.0)


@pytest.mark.parametrize("kind", PRESETS)
def test_mixed_partials(kind):
    P, R, G = _setup(kind, seed=6)
    rep = mixed_partial_check(P, R, G, [(0.4, 0.1), (-0.7, 0.3)])
    assert rep.ok


# ---------------------------------------------------------------------------
# states


def test_tau_at_origin_is_one(three_soliton, sl_params):
    R, G = three_soliton
    st = v.state_at(sl_params, R, G, 0.0, 0.0)
    assert abs(st.tau - 1.0) < 1e-12


def test_gamma_star_skew_hermitian(three_soliton, sl_params):
    R, G = three_soliton
    for x, t in ((0.5, 0.2), (-1.5, -0.4), (3.0, 0.45)):
        gs = v.state_at(sl_params, R, G, x, t).gamma_star
        assert np.linalg.norm(gs + gs.conj().T) <= 1e-12 * (np.linalg.norm(gs) + 1.0)


def test_moments_scalar_A(sl_params, soliton):
    R, G = soliton
    st = v.state_at(sl_params, R, G, 0.7, -0.2)
    a = complex(R.A[0, 0])
    H = v.moments(st, 3)
    for k in range(4):
        assert np.allclose(H[k], a**k * H[0], rtol=1e-12, atol=1e-14)
    with pytest.raises(StructureError):
        v.moments(st, -1)


def test_lyapunov_preserved_on_grid(sl_params, three_soliton):
    R, G = three_soliton
    rep = lyapunov_grid_check(
        sl_params, R, G, np.linspace(-4, 4, 33), np.linspace(-0.5, 0.5, 9)
    )
    assert rep.ok
    assert max(rep.residuals.values()) <= 1e-12


# ---------------------------------------------------------------------------
# SL field: q = -2 (ln tau)_xx


def test_q_soliton_sech_oracle(sl_params, soliton):
    """q(x,t) = -2 sech^2(x + t) for c = d = kappa = 1.

    Hand derivation: X(x,t) = (1 + e^{2(x+t)})/2, so tau = X / X0 gives
    -2 (ln tau)_xx = -2 sech^2(x + t) with zero phase offset.
    """
    R, G = soliton
    for x in (-2.0, 0.0, 1.5):
        for t in (-0.3, 0.4):
            q = v.q_SL(sl_params, R, G, x, t)
            ref = -2.0 / np.cosh(x + t) ** 2
            assert abs(q - ref) < 1e-12
            assert abs(q.imag) < 1e-12


def test_q_matches_fd_of_log_tau(sl_params, three_soliton):
    """Independent oracle: second difference of ln tau on a fine row."""
    R, G = three_soliton
    h = 1e-3
    t = 0.1
    for x0 in (-1.0, 0.5, 2.0):
        xs = x0 + h * np.arange(-2, 3)
        taus = np.array([v.state_at(sl_params, R, G, x, t).tau for x in xs])
        ln = np.log(taus)
        d2 = (-ln[0] + 16 * ln[1] - 30 * ln[2] + 16 * ln[3] - ln[4]) / (12 * h * h)
        q = v.q_SL(sl_params, R, G, x0, t)
        assert abs(q - (-2.0) * d2) < 1e-6


def test_q_soliton_peak_moves_left(sl_params, soliton):
    """The sech^2 bump travels with velocity -kappa^2 = -1."""
    R, G = soliton
    xs = np.linspace(-6, 6, 241)
    G1 = G

    def peak(t):
        qs = [v.q_SL(sl_params, R, G1, float(x), t).real for x in xs]
        return xs[int(np.argmin(qs))]

    p0, p1 = peak(0.0), peak(0.5)
    assert abs((p1 - p0) / 0.5 - (-1.0)) < 0.1


def test_beta_NLS_entry_convention(nls_params, nls_random):
    R, G = nls_random
    st = v.state_at(nls_params, R, G, 0.4, 0.1)
    gs = st.gamma_star
    # frames store the (1,2) entry; beta_NLS returns (2,1) = -conj((1,2))
    assert abs(v.beta_NLS(st) - gs[1, 0]) == 0.0
    assert abs(gs[0, 1] + np.conj(gs[1, 0])) <= 1e-12 * (np.linalg.norm(gs) + 1)


# ---------------------------------------------------------------------------
# canonical-system structure


def test_cansys_structure_and_fields(cansys_params, cansys_drift):
    R, G = cansys_drift
    st = v.state_at(cansys_params, R, G, 1.5, -0.8)
    rep = v.cansys_structure_report(st)
    assert rep.ok
    assert max(rep.residuals.values()) <= 1e-9
    K = 12.0 / 1.25 - 2 * 0.16 * (-0.8)  # d / (f^2+g^2) - 2 k^2 t
    beta, h = v.cansys_fields(st, K=K)
    assert abs(h * h + 4 * beta * beta - 1.0 / (st.x + K) ** 2) < 1e-9


def test_cansys_fields_reject_wrong_family(sl_params, three_soliton):
    R, G = three_soliton
    st = v.state_at(sl_params, R, G, 0.5, 0.1)
    with pytest.raises(StructureError):
        v.cansys_fields(st)


def test_fit_K_drift_law(cansys_params, cansys_drift):
    """K(t) = d/(f^2+g^2) - 2 k^2 t on the resonant model class."""
    R, G = cansys_drift
    xs = np.linspace(-8, 8, 161)
    fr = v.sample_frame(cansys_params, R, G, xs, np.linspace(-1, 1, 9))
    for i, t in enumerate(fr.t_grid):
        K = v.fit_K(xs, fr.fields["beta"][i].real, fr.fields["h"][i].real)
        assert abs(K - (9.6 - 0.32 * t)) < 1e-9


def test_fit_K_rejects_vanishing_row():
    xs = np.linspace(0, 1, 11)
    with pytest.raises(StructureError):
        v.fit_K(xs, np.zeros(11), np.zeros(11))


# ---------------------------------------------------------------------------
# frames


def _pole_on_grid_realization(P):
    """Single mode with norming d = (1 - e^{-2})/2: the state determinant
    X(x,t) = d + (e^{2(x+t)} - 1)/2 vanishes exactly on the line x + t = -1,
    which passes through grid nodes of any dyadic grid containing -1."""
    d = (1.0 - np.exp(-2.0)) / 2.0
    return v.realization_from_discrete_spectrum(P, [1j], [[1.0, 1.0j]], [d])


def test_frame_fields_and_mask_bookkeeping(sl_params):
    # indefinite sigma1 allows tau zeros; the guard must mask, not interpolate
    R = _pole_on_grid_realization(sl_params)
    G = v.build_generators(sl_params, R.A, 1)
    fr = v.sample_frame(
        sl_params, R, G, np.linspace(-8, 8, 129), np.linspace(-0.5, 0.5, 17)
    )
    assert fr.field_order[0] == "q"
    # 9 nodes sit exactly on x + t = -1 (t must be a multiple of 0.125)
    assert fr.masked_count() == 9
    for it, ix in np.argwhere(fr.mask):
        assert fr.x_grid[ix] + fr.t_grid[it] == -1.0
    for name in ("q", "beta", "tau"):
        vals = fr.fields[name]
        assert np.all(np.isnan(vals.real[fr.mask]))
        assert np.all(np.isfinite(vals[~fr.mask]))
    # off the singular line the guard is far from triggering
    assert np.nanmin(np.abs(fr.fields["tau"])) > 1e3 * TAU_GUARD
    rep = fr.report()
    assert rep["masked_nodes"] == 9
    assert rep["max_lyapunov_residual"] <= 1e-9


def test_state_at_pole_raises(sl_params):
    R = _pole_on_grid_realization(sl_params)
    G = v.build_generators(sl_params, R.A, 1)
    with pytest.raises(TauZeroError):
        v.state_at(sl_params, R, G, -1.0, 0.0)
    # same realization is perfectly regular off the line
    st = v.state_at(sl_params, R, G, -1.5, 0.0)
    assert np.isfinite(st.tau)


def test_frame_grid_validation(sl_params, soliton):
    R, G = soliton
    with pytest.raises(GridError):
        v.sample_frame(sl_params, R, G, np.array([]), np.array([0.0, 1.0]))
    with pytest.raises(GridError):
        v.sample_frame(sl_params, R, G, np.array([1.0, 0.5]), np.array([0.0, 1.0]))


def test_frame_csv_round_trip_and_determinism(tmp_path, sl_params, three_soliton):
    R, G = three_soliton
    fr = v.sample_frame(
        sl_params, R, G, np.linspace(-3, 3, 13), np.linspace(-0.2, 0.2, 5)
    )
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    fr.to_csv(p1)
    fr.to_csv(p2)
    b1, b2 = p1.read_bytes(), p2.read_bytes()
    assert b1 == b2
    text = b1.decode()
    assert text.endswith("\n")
    header, first = text.splitlines()[:2]
    assert header == "x,t,q_re,q_im,beta_re,beta_im,tau_re,tau_im,lyap_res,mask"
    row = first.split(",")
    assert float(row[0]) == -3.0 and float(row[1]) == -0.2
    # values rehydrate to the stored field (t-major rows)
    assert abs(complex(float(row[2]), float(row[3])) - fr.fields["q"][0, 0]) == 0.0
    assert len(text.splitlines()) == 1 + 13 * 5


def test_nls_frame_field_set(nls_params, nls_random):
    R, G = nls_random
    fr = v.sample_frame(
        nls_params, R, G, np.linspace(-2, 2, 9), np.linspace(-0.1, 0.1, 3)
    )
    assert fr.field_order == ("beta", "tau")
    assert "q" not in fr.fields
