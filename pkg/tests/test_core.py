"""Parameter validation, Lyapunov solving and realization constructors.

Oracles: hand-computed scalar Lyapunov solutions, scipy's independent
Sylvester/Lyapunov solver, and closed-form entries of the discrete-spectrum
state matrix.
"""

import numpy as np
import pytest
import scipy.linalg as sla

import vesselpde as v
from vesselpde import (
    CompatibilityError,
    ConditioningError,
    ResonanceError,
    StructureError,
)

PRESETS = ("SL", "NLS", "CanSys")


# ---------------------------------------------------------------------------
# parameter families


def test_presets_bit_for_bit():
    P = v.preset_params("SL")
    assert np.array_equal(P.sigma1, np.array([[0, 1], [1, 0]], dtype=complex))
    assert np.array_equal(P.sigma2, np.array([[1, 0], [0, 0]], dtype=complex))
    assert np.array_equal(P.gamma, np.array([[0, 0], [0, 1j]], dtype=complex))

    P = v.preset_params("NLS")
    assert np.array_equal(P.sigma1, np.eye(2, dtype=complex))
    assert np.array_equal(P.sigma2, np.diag([0.5, -0.5]).astype(complex))
    assert np.array_equal(P.gamma, np.zeros((2, 2), dtype=complex))

    P = v.preset_params("CanSys")
    assert np.array_equal(P.sigma1, np.array([[0, 1j], [-1j, 0]]))
    assert np.array_equal(P.sigma2, np.eye(2, dtype=complex))
    assert np.array_equal(P.gamma, np.zeros((2, 2), dtype=complex))


def test_preset_rejects_unknown():
    with pytest.raises(StructureError):
        v.preset_params("KP")


@pytest.mark.parametrize("kind", PRESETS)
def test_validate_params_passes_presets(kind):
    rep = v.validate_params(v.preset_params(kind))
    assert rep.ok
    assert rep.residuals["sigma1_hermitian"] == 0.0
    assert rep.residuals["sigma2_hermitian"] == 0.0
    assert rep.residuals["gamma_skew_hermitian"] == 0.0


def test_validate_params_flags_violations():
    bad = v.VesselParams(
        p=2,
        sigma1=np.array([[0, 1], [2, 0]], dtype=complex),  # not Hermitian
        sigma2=np.array([[1, 1j], [1j, 0]], dtype=complex),  # not Hermitian
        gamma=np.array([[1, 0], [0, 1]], dtype=complex),  # not skew
    )
    rep = v.validate_params(bad)
    assert not rep.ok
    assert {"sigma1_hermitian", "sigma2_hermitian", "gamma_skew_hermitian"} <= set(
        rep.failing
    )


def test_singular_sigma1_fails_condition_check():
    bad = v.VesselParams(
        p=2,
        sigma1=np.array([[1, 1], [1, 1]], dtype=complex),
        sigma2=np.eye(2, dtype=complex),
        gamma=np.zeros((2, 2), dtype=complex),
    )
    rep = v.validate_params(bad)
    assert not rep.ok and "sigma1_condition" in rep.failing


# ---------------------------------------------------------------------------
# Lyapunov solver


def test_scalar_lyapunov_hand_value(sl_params):
    # A = -1, B = [1, 1]: B sigma1 B* = 2, so -2X + 2 = 0 and X = 1
    X = v.solve_lyapunov(np.array([[-1.0]]), np.array([[1.0, 1.0]]), sl_params.sigma1)
    assert X.shape == (1, 1)
    assert abs(X[0, 0] - 1.0) < 1e-14


@pytest.mark.parametrize("kind", PRESETS)
@pytest.mark.parametrize("seed", range(4))
def test_lyapunov_matches_scipy_oracle(kind, seed):
    P = v.preset_params(kind)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    A = np.diag(-(1.0 + np.arange(1, n + 1) / n) + 0.1j * rng.standard_normal(n))
    Q = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    W, _ = np.linalg.qr(Q)
    A = W @ A @ W.conj().T
    B = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))

    X = v.solve_lyapunov(A, B, P.sigma1)
    X_ref = sla.solve_sylvester(A, A.conj().T, -B @ P.sigma1 @ B.conj().T)
    assert np.linalg.norm(X - X_ref) <= 1e-10 * (np.linalg.norm(X_ref) + 1.0)


def test_lyapunov_defective_A_raises():
    A = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)  # Jordan block
    B = np.ones((2, 2), dtype=complex)
    with pytest.raises(ConditioningError):
        v.solve_lyapunov(A, B, np.eye(2, dtype=complex))


def test_lyapunov_resonant_needs_fixed_diagonal():
    # purely imaginary eigenvalue => a + conj(a) = 0: the diagonal entry is free
    A = np.array([[2j]])
    B = np.array([[1.0, 1.0j]])  # row chosen so B sigma1 B* = 0 (SL pairing)
    s1 = v.preset_params("SL").sigma1
    X_free = v.solve_lyapunov(A, B, s1)
    assert X_free[0, 0] == 0.0  # free entry defaults to zero
    X_fixed = v.solve_lyapunov(A, B, s1, fixed_diagonal={0: 3.5})
    assert abs(X_fixed[0, 0] - 3.5) < 1e-14


def test_lyapunov_resonant_incompatible_raises():
    A = np.array([[2j]])
    B = np.array([[1.0, 1.0]])  # B sigma1 B* = 2 != 0 where the operator vanishes
    s1 = v.preset_params("SL").sigma1
    with pytest.raises(ResonanceError):
        v.solve_lyapunov(A, B, s1)
    with pytest.raises(CompatibilityError):
        v.solve_lyapunov(A, B, s1, fixed_diagonal={0: 1.0})


@pytest.mark.parametrize("kind", PRESETS)
def test_random_realizations_property(kind):
    """20 instances, n <= 8: Lyapunov residual at machine scale, X0 Hermitian."""
    P = v.preset_params(kind)
    for seed in range(20):
        n = seed % 8 + 1
        R = v.random_realization(n, P.p, P, seed)
        res = v.lyapunov_residual(R.A, R.X0, R.B0, P.sigma1)
        assert res.relative <= 1e-11
        assert np.array_equal(R.X0, R.X0.conj().T)  # symmetrized storage is exact


def test_random_realization_deterministic(sl_params):
    R1 = v.random_realization(4, 2, sl_params, seed=11)
    R2 = v.random_realization(4, 2, sl_params, seed=11)
    assert np.array_equal(R1.A, R2.A)
    assert np.array_equal(R1.B0, R2.B0)
    assert np.array_equal(R1.X0, R2.X0)
    R3 = v.random_realization(4, 2, sl_params, seed=12)
    assert not np.array_equal(R1.B0, R3.B0)


def test_random_realization_shape_mismatch(sl_params):
    with pytest.raises(StructureError):
        v.random_realization(3, 3, sl_params, seed=0)


# ---------------------------------------------------------------------------
# discrete-spectrum constructor


def test_discrete_spectrum_single_mode(sl_params):
    # k = i: A = i k^2 = -i; row [1, i] satisfies the resonance compatibility
    R = v.realization_from_discrete_spectrum(sl_params, [1j], [[1.0, 1.0j]], [2.0])
    assert np.allclose(R.A, [[-1j]])
    assert abs(R.X0[0, 0] - 2.0) < 1e-14  # free diagonal passes through
    assert (0, 0) in R.resonance_flags


def test_discrete_spectrum_default_diagonal(sl_params):
    R = v.realization_from_discrete_spectrum(sl_params, [1j], [[1.0, 1.0j]])
    assert abs(R.X0[0, 0] - 1.0) < 1e-14


def test_discrete_spectrum_offdiagonal_closed_form(sl_params):
    # two modes: the (j,k) entry solves a_j X + X conj(a_k) = -Q_jk entrywise
    kap = np.array([0.6, 1.1])
    rows = [[1.0, 1j * kap[0]], [0.5 - 0.25j, 1j * kap[1] * (0.5 - 0.25j)]]
    R = v.realization_from_discrete_spectrum(
        sl_params, list(1j * kap), rows, [1.0, 1.0]
    )
    a = np.diag(R.A)
    Q = R.B0 @ sl_params.sigma1 @ R.B0.conj().T
    for j, k in ((0, 1), (1, 0)):
        expect = -Q[j, k] / (a[j] + np.conj(a[k]))
        assert abs(R.X0[j, k] - expect) < 1e-12


def test_discrete_spectrum_rejects_zero(sl_params):
    with pytest.raises(StructureError):
        v.realization_from_discrete_spectrum(sl_params, [0.0], [[1.0, 1.0]])


def test_discrete_spectrum_incompatible_row(sl_params):
    # row [1, 1] gives B sigma1 B* = 2 on a resonant diagonal entry; the
    # constructor pins that entry, so the system is over-determined
    with pytest.raises(CompatibilityError):
        v.realization_from_discrete_spectrum(sl_params, [1j], [[1.0, 1.0]])


def test_discrete_spectrum_row_shape(sl_params):
    with pytest.raises(StructureError):
        v.realization_from_discrete_spectrum(sl_params, [1j], [[1.0, 1.0j, 0.0]])


# ---------------------------------------------------------------------------
# soliton draw


def test_random_soliton_positive_definite(sl_params):
    for seed in range(6):
        R = v.random_soliton_realization(sl_params, n=3, seed=seed)
        eig = np.linalg.eigvalsh(R.X0)
        assert np.all(eig > 0)
        res = v.lyapunov_residual(R.A, R.X0, R.B0, sl_params.sigma1)
        assert res.relative <= 1e-12
        # spectrum is purely imaginary: A = -i kappa^2 on the diagonal
        assert np.allclose(np.diag(R.A).real, 0.0)


def test_random_soliton_deterministic(sl_params):
    R1 = v.random_soliton_realization(sl_params, n=3, seed=5)
    R2 = v.random_soliton_realization(sl_params, n=3, seed=5)
    assert np.array_equal(R1.B0, R2.B0) and np.array_equal(R1.X0, R2.X0)


def test_random_soliton_guards(sl_params, nls_params):
    with pytest.raises(StructureError):
        v.random_soliton_realization(sl_params, n=3, kappa_range=(0.9, 0.2))
    with pytest.raises(StructureError):
        v.random_soliton_realization(sl_params, n=5, kappa_range=(0.5, 1.0), min_gap=0.25)


# ---------------------------------------------------------------------------
# resonance bookkeeping and serialization


def test_resonant_pairs_detection():
    A = np.diag([1j, 1.0 + 0j, -1.0 + 0j])
    flags = v.resonant_pairs(A)
    assert (0, 0) in flags  # i + conj(i) = 0
    assert (1, 2) in flags and (2, 1) in flags  # 1 + conj(-1) = 0 cross pair
    assert (1, 1) not in flags and (2, 2) not in flags


def test_params_json_round_trip(tmp_path):
    for kind in PRESETS:
        P = v.preset_params(kind)
        d = v.params_to_dict(P)
        Q = v.params_from_dict(d)
        assert np.array_equal(P.sigma1, Q.sigma1)
        assert np.array_equal(P.sigma2, Q.sigma2)
        assert np.array_equal(P.gamma, Q.gamma)
        path = tmp_path / f"{kind}.json"
        v.save_json(path, d)
        Q2 = v.params_from_dict(v.load_json(path))
        assert np.array_equal(P.sigma1, Q2.sigma1)


def test_realization_json_round_trip(tmp_path, sl_params):
    R = v.random_soliton_realization(sl_params, n=3, seed=2)
    d = v.realization_to_dict(R)
    S = v.realization_from_dict(d)
    assert np.array_equal(R.A, S.A)
    assert np.array_equal(R.B0, S.B0)
    assert np.array_equal(R.X0, S.X0)
    assert R.resonance_flags == S.resonance_flags
    path = tmp_path / "r.json"
    v.save_json(path, d)
    S2 = v.realization_from_dict(v.load_json(path))
    assert np.array_equal(R.X0, S2.X0)


def test_check_realization_rejects_corrupt_X0(sl_params):
    # Hurwitz A: a diagonal shift of X0 lands outside the Lyapunov kernel
    R = v.random_realization(3, 2, sl_params, seed=0)
    bad = v.Realization(
        n=R.n, A=R.A, B0=R.B0, X0=R.X0 + 0.1 * np.eye(R.n),
        resonance_flags=R.resonance_flags,
    )
    rep = v.check_realization(sl_params, bad)
    assert not rep.ok


def test_soliton_free_diagonal_shift_stays_valid(sl_params):
    # A is skew-diagonal for the soliton class, so the X0 diagonal is the
    # free resonant data: shifting it must NOT break the Lyapunov identity
    R = v.random_soliton_realization(sl_params, n=3, seed=0)
    shifted = v.Realization(
        n=R.n, A=R.A, B0=R.B0, X0=R.X0 + 0.1 * np.eye(R.n),
        resonance_flags=R.resonance_flags,
    )
    assert v.check_realization(sl_params, shifted).ok
