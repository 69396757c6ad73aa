"""Vessel parameters, realizations, and Lyapunov-equation machinery.

A *vessel* couples a parameter triple (sigma1, sigma2, gamma) of p x p
matrices with a state-space triple (A, B0, X0) tied together by the Lyapunov
equation

    A @ X0 + X0 @ A* + B0 @ sigma1 @ B0* = 0.

Everything downstream (evolution in x and t, transfer functions, solution
fields of KdV/NLS/canonical-system type) is computed from these five
matrices, so this module is strict about the structural invariants:
sigma1 Hermitian invertible, sigma2 Hermitian, gamma skew-Hermitian,
X0 Hermitian, and the Lyapunov residual at machine scale.

The Lyapunov solver works in an eigenbasis of A.  Eigenvalue pairs with
a_j + conj(a_k) = 0 make the Lyapunov operator singular ("resonant" pairs);
the corresponding entries of X are free parameters that the caller supplies,
and the solver verifies the compatibility condition (the right-hand side must
vanish there).  The discrete-spectrum soliton models live entirely on this
resonant set, which is why the solver cannot simply defer to a generic
Sylvester routine.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .exceptions import (
    CompatibilityError,
    ConditioningError,
    ResonanceError,
    StructureError,
)

__all__ = [
    "CheckReport",
    "VesselParams",
    "Realization",
    "LyapunovResidual",
    "preset_params",
    "validate_params",
    "lyapunov_residual",
    "solve_lyapunov",
    "resonant_pairs",
    "realization_from_discrete_spectrum",
    "random_realization",
    "random_soliton_realization",
    "check_realization",
    "params_to_dict",
    "params_from_dict",
    "realization_to_dict",
    "realization_from_dict",
    "save_json",
    "load_json",
]

#: condition-number ceiling above which sigma1 (or an eigenvector basis)
#: is treated as numerically singular
COND_LIMIT = 1e12

#: relative Lyapunov residual allowed for a constructed Realization
REALIZATION_LYAP_TOL = 1e-10

_PRESETS = ("SL", "NLS", "CanSys")


def _as_matrix(M, shape=None, name="matrix") -> np.ndarray:
    out = np.array(M, dtype=complex)
    if out.ndim != 2:
        raise StructureError(f"{name} must be 2-dimensional, got ndim={out.ndim}")
    if shape is not None and out.shape != shape:
        raise StructureError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out.view(float))):
        raise StructureError(f"{name} contains non-finite entries")
    out.flags.writeable = False
    return out


def _fro(M) -> float:
    return float(np.linalg.norm(M, "fro"))


def _herm_defect(M) -> float:
    """Relative deviation of M from its own adjoint."""
    return _fro(M - M.conj().T) / (_fro(M) + 1.0)


def _skew_defect(M) -> float:
    return _fro(M + M.conj().T) / (_fro(M) + 1.0)


# ---------------------------------------------------------------------------
# check reports


@dataclass(frozen=True)
class CheckReport:
    """Named residuals of one verification step, with their tolerances.

    A check passes when every residual is finite and at or below its
    tolerance.  Residuals without an explicit tolerance default to 0.0,
    i.e. they must vanish exactly.
    """

    name: str
    residuals: dict[str, float]
    tolerances: dict[str, float]
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {k: float(v) for k, v in self.residuals.items()}
        for k, v in clean.items():
            if math.isnan(v):
                clean[k] = math.inf  # NaN is an unconditional failure
        object.__setattr__(self, "residuals", clean)
        object.__setattr__(
            self, "tolerances", {k: float(v) for k, v in self.tolerances.items()}
        )

    def passed(self, key: str) -> bool:
        r = self.residuals[key]
        return math.isfinite(r) and r <= self.tolerances.get(key, 0.0)

    @property
    def ok(self) -> bool:
        return all(self.passed(k) for k in self.residuals)

    @property
    def failing(self) -> list[str]:
        return [k for k in self.residuals if not self.passed(k)]

    def summary(self) -> str:
        worst = max(
            self.residuals,
            key=lambda k: self.residuals[k] / max(self.tolerances.get(k, 0.0), 1e-300),
            default=None,
        )
        status = "pass" if self.ok else "FAIL"
        if worst is None:
            return f"{self.name}: {status} (no residuals)"
        return (
            f"{self.name}: {status} "
            f"(worst {worst} = {self.residuals[worst]:.3e}, "
            f"tol {self.tolerances.get(worst, 0.0):.1e})"
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residuals": dict(self.residuals),
            "tolerances": dict(self.tolerances),
            "pass": {k: self.passed(k) for k in self.residuals},
            "ok": self.ok,
            "details": _jsonable(self.details),
        }


# ---------------------------------------------------------------------------
# vessel parameters


@dataclass(frozen=True, eq=False)
class VesselParams:
    """The triple (sigma1, sigma2, gamma) of p x p matrices selecting the
    PDE family.  Structural requirements (sigma1 Hermitian invertible,
    sigma2 Hermitian, gamma skew-Hermitian) are *reported* by
    validate_params rather than enforced here, so that deliberately broken
    inputs can still be constructed and diagnosed."""

    p: int
    sigma1: np.ndarray
    sigma2: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        p = int(self.p)
        if p < 1:
            raise StructureError(f"p must be >= 1, got {p}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "sigma1", _as_matrix(self.sigma1, (p, p), "sigma1"))
        object.__setattr__(self, "sigma2", _as_matrix(self.sigma2, (p, p), "sigma2"))
        object.__setattr__(self, "gamma", _as_matrix(self.gamma, (p, p), "gamma"))

    @cached_property
    def sigma1_inv(self) -> np.ndarray:
        c = np.linalg.cond(self.sigma1)
        if not np.isfinite(c) or c > COND_LIMIT:
            raise ConditioningError(
                f"sigma1 is numerically singular (cond = {c:.3e} > {COND_LIMIT:.1e})"
            )
        inv = np.linalg.inv(self.sigma1)
        inv.flags.writeable = False
        return inv


def preset_params(kind: str) -> VesselParams:
    """Return one of the built-in p = 2 parameter triples.

    SL     — Sturm-Liouville / KdV family
    NLS    — evolutionary nonlinear Schrodinger family
    CanSys — canonical-system family
    """
    if kind == "SL":
        return VesselParams(
            p=2,
            sigma1=[[0, 1], [1, 0]],
            sigma2=[[1, 0], [0, 0]],
            gamma=[[0, 0], [0, 1j]],
        )
    if kind == "NLS":
        return VesselParams(
            p=2,
            sigma1=[[1, 0], [0, 1]],
            sigma2=[[0.5, 0], [0, -0.5]],
            gamma=[[0, 0], [0, 0]],
        )
    if kind == "CanSys":
        return VesselParams(
            p=2,
            sigma1=[[0, 1j], [-1j, 0]],
            sigma2=[[1, 0], [0, 1]],
            gamma=[[0, 0], [0, 0]],
        )
    raise StructureError(
        f"unknown preset {kind!r}; supported presets: {', '.join(_PRESETS)}"
    )


def validate_params(P: VesselParams) -> CheckReport:
    """Report the structural residuals of a parameter triple.

    Residuals: Hermiticity defects of sigma1 and sigma2, skew-Hermiticity
    defect of gamma (all relative Frobenius), and the condition number of
    sigma1 against the singularity ceiling.
    """
    for name in ("sigma1", "sigma2", "gamma"):
        M = getattr(P, name)
        if M.shape != (P.p, P.p):
            raise StructureError(f"{name} has shape {M.shape}, expected {(P.p, P.p)}")
    cond = float(np.linalg.cond(P.sigma1))
    if not math.isfinite(cond):
        cond = float(np.finfo(float).max)  # exactly singular
    return CheckReport(
        name="params",
        residuals={
            "sigma1_hermitian": _herm_defect(P.sigma1),
            "sigma2_hermitian": _herm_defect(P.sigma2),
            "gamma_skew_hermitian": _skew_defect(P.gamma),
            "sigma1_condition": cond,
        },
        tolerances={
            "sigma1_hermitian": 1e-13,
            "sigma2_hermitian": 1e-13,
            "gamma_skew_hermitian": 1e-13,
            "sigma1_condition": COND_LIMIT,
        },
    )


# ---------------------------------------------------------------------------
# Lyapunov equation


class LyapunovResidual(NamedTuple):
    absolute: float
    relative: float


def lyapunov_residual(A, X, B, sigma1) -> LyapunovResidual:
    """Frobenius norm of A X + X A* + B sigma1 B*, absolute and relative.

    The relative form divides by scale = |A| |X| + |B|^2 |sigma1| so that
    rescaling the realization leaves it invariant.
    """
    A = np.asarray(A, dtype=complex)
    X = np.asarray(X, dtype=complex)
    B = np.asarray(B, dtype=complex)
    sigma1 = np.asarray(sigma1, dtype=complex)
    res = A @ X + X @ A.conj().T + B @ sigma1 @ B.conj().T
    absolute = _fro(res)
    scale = _fro(A) * _fro(X) + _fro(B) ** 2 * _fro(sigma1)
    relative = absolute / scale if scale > 0 else absolute
    return LyapunovResidual(absolute, relative)


def _eigenbasis(A: np.ndarray):
    """Eigen-decomposition of A with a conditioning guard.

    Exactly diagonal A short-circuits to the identity basis so that the
    resonant soliton models are handled without any numerical eigensolve.
    """
    n = A.shape[0]
    if np.count_nonzero(A - np.diag(np.diagonal(A))) == 0:
        return np.diagonal(A).astype(complex), np.eye(n, dtype=complex), np.eye(n, dtype=complex)
    w, V = np.linalg.eig(A)
    c = np.linalg.cond(V)
    if not np.isfinite(c) or c > 1e10:
        raise ConditioningError(
            f"eigenvector basis of A too ill-conditioned (cond = {c:.3e})"
        )
    return w, V, np.linalg.inv(V)


def resonance_threshold(A) -> float:
    A = np.asarray(A, dtype=complex)
    return 1e-12 * (float(np.linalg.norm(A, 2)) + 1.0)


def resonant_pairs(A, eps_res: float | None = None) -> frozenset[tuple[int, int]]:
    """Index pairs (j, k) with a_j + conj(a_k) = 0 in the eigenbasis of A."""
    A = np.asarray(A, dtype=complex)
    if eps_res is None:
        eps_res = resonance_threshold(A)
    w, _, _ = _eigenbasis(A)
    s = np.abs(w[:, None] + w[None, :].conj())
    j, k = np.nonzero(s <= eps_res)
    return frozenset(zip(j.tolist(), k.tolist()))


def _normalize_fixed(fixed_diagonal, n) -> dict[tuple[int, int], complex]:
    """Accept {index: value} (diagonal) or {(j, k): value} maps."""
    out: dict[tuple[int, int], complex] = {}
    if fixed_diagonal is None:
        return out
    if isinstance(fixed_diagonal, Mapping):
        items = fixed_diagonal.items()
    else:  # sequence interpreted as the full diagonal
        items = enumerate(fixed_diagonal)
    for key, val in items:
        if isinstance(key, tuple):
            j, k = int(key[0]), int(key[1])
        else:
            j = k = int(key)
        if not (0 <= j < n and 0 <= k < n):
            raise StructureError(f"fixed entry index {key!r} out of range for n={n}")
        out[(j, k)] = complex(val)
    return out


def solve_lyapunov(A, B, sigma1, fixed_diagonal=None, *, eps_res=None) -> np.ndarray:
    """Solve A X + X A* = -B sigma1 B* for Hermitian X.

    Works entry-wise in an eigenbasis of A: with Q~ the transformed
    right-hand side, the nonresonant entries are X~_jk = -Q~_jk / (a_j +
    conj(a_k)).  Resonant entries (denominator at zero within eps_res) are
    free parameters: they are taken from ``fixed_diagonal`` — a map from
    index (diagonal) or index pair to value — after verifying that the
    corresponding Q~ entry vanishes.  A resonant entry with nonvanishing
    right-hand side and no supplied value raises ResonanceError; with a
    supplied value it raises CompatibilityError (the equation is
    unsolvable there, a free value cannot repair it).

    The result is exactly Hermitian as stored.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    sigma1 = np.asarray(sigma1, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise StructureError(f"A must be square, got {A.shape}")
    if B.shape[0] != n:
        raise StructureError(f"B has {B.shape[0]} rows, expected {n}")
    if eps_res is None:
        eps_res = resonance_threshold(A)

    w, V, Vi = _eigenbasis(A)
    Q = B @ sigma1 @ B.conj().T
    Qt = Vi @ Q @ Vi.conj().T
    denom = w[:, None] + w[None, :].conj()
    resonant = np.abs(denom) <= eps_res

    Xt = np.zeros((n, n), dtype=complex)
    nonres = ~resonant
    Xt[nonres] = -Qt[nonres] / denom[nonres]

    fixed = _normalize_fixed(fixed_diagonal, n)
    compat_tol = 1e-10 * (_fro(Q) + 1.0)
    for j, k in zip(*np.nonzero(resonant)):
        j, k = int(j), int(k)
        val = fixed.get((j, k))
        if val is None and (k, j) in fixed:
            val = complex(np.conj(fixed[(k, j)]))
        rhs = abs(Qt[j, k])
        if rhs > compat_tol:
            if val is None:
                raise ResonanceError(
                    f"resonant pair ({j}, {k}): a_j + conj(a_k) = 0 but the "
                    f"right-hand side entry has magnitude {rhs:.3e}; no free "
                    "value can solve this entry",
                    pairs=[(j, k)],
                )
            raise CompatibilityError(
                f"resonant entry ({j}, {k}) is over-determined: right-hand "
                f"side magnitude {rhs:.3e} where the Lyapunov operator "
                "vanishes",
                index=(j, k),
            )
        Xt[j, k] = 0.0 if val is None else val

    X = V @ Xt @ V.conj().T
    X = (X + X.conj().T) / 2  # exact Hermitian storage
    return X


# ---------------------------------------------------------------------------
# realizations


@dataclass(frozen=True, eq=False)
class Realization:
    """State-space triple (A, B0, X0) with X0 Hermitian.

    ``resonance_flags`` records the eigenvalue index pairs of A at which
    the Lyapunov operator is singular and the corresponding X entries were
    supplied as free parameters (or defaulted).
    """

    n: int
    A: np.ndarray
    B0: np.ndarray
    X0: np.ndarray
    resonance_flags: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise StructureError(f"n must be >= 1, got {n}")
        object.__setattr__(self, "n", n)
        A = _as_matrix(self.A, (n, n), "A")
        B0 = np.array(self.B0, dtype=complex)
        if B0.ndim != 2 or B0.shape[0] != n:
            raise StructureError(f"B0 must be n x p with n={n}, got {B0.shape}")
        if not np.all(np.isfinite(B0.view(float))):
            raise StructureError("B0 contains non-finite entries")
        B0.flags.writeable = False
        X0 = np.array(self.X0, dtype=complex)
        if X0.shape != (n, n):
            raise StructureError(f"X0 must have shape {(n, n)}, got {X0.shape}")
        if _herm_defect(X0) > 1e-12:
            raise StructureError(
                f"X0 is not Hermitian (relative defect {_herm_defect(X0):.3e})"
            )
        X0 = (X0 + X0.conj().T) / 2
        X0.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B0", B0)
        object.__setattr__(self, "X0", X0)
        object.__setattr__(self, "resonance_flags", frozenset(
            (int(j), int(k)) for j, k in self.resonance_flags
        ))

    @property
    def p(self) -> int:
        return self.B0.shape[1]


def check_realization(P: VesselParams, R: Realization) -> CheckReport:
    """Structural residuals of a realization against its parameters."""
    if R.p != P.p:
        raise StructureError(f"realization has p={R.p}, params have p={P.p}")
    lyap = lyapunov_residual(R.A, R.X0, R.B0, P.sigma1)
    return CheckReport(
        name="realization",
        residuals={
            "lyapunov_relative": lyap.relative,
            "X0_hermitian": _herm_defect(R.X0),
        },
        tolerances={
            "lyapunov_relative": REALIZATION_LYAP_TOL,
            "X0_hermitian": 1e-13,
        },
        details={"lyapunov_absolute": lyap.absolute, "n": R.n},
    )


def _require_valid(P: VesselParams, R: Realization) -> Realization:
    rep = check_realization(P, R)
    if not rep.ok:
        raise StructureError(f"constructed realization fails checks: {rep.summary()}")
    return R


def realization_from_discrete_spectrum(
    P: VesselParams,
    k: Sequence[complex],
    rows: Sequence[Sequence[complex]],
    diag: Sequence[float] | None = None,
) -> Realization:
    """Build the discrete-spectrum model A = diag(i k_j^2).

    Each spectral point k_j contributes one state dimension with B0 row
    ``rows[j]`` and free Lyapunov diagonal value ``diag[j]`` (1 when diag
    is omitted, a scale an unmasked tau can absorb).  Purely
    imaginary eigenvalues i k_j^2 (k_j real or purely imaginary) put the
    whole diagonal on the resonant set, so each row must satisfy the
    compatibility condition (B sigma1 B*)_jj = 0; decaying soliton fields
    need purely imaginary k_j = i kappa (real k_j gives oscillatory,
    periodically singular fields — both are accepted).

    Raises ResonanceError for coincident eigenvalues and CompatibilityError
    (with the offending index) for an incompatible row.
    """
    kv = np.asarray(list(k), dtype=complex)
    if kv.size == 0:
        raise StructureError("at least one spectral point is required (n >= 1)")
    if np.any(kv == 0):
        raise StructureError("spectral points must be nonzero")
    n = kv.size
    a = 1j * kv**2
    for j in range(n):
        for m in range(j + 1, n):
            if abs(a[j] - a[m]) <= resonance_threshold(np.diag(a)):
                raise ResonanceError(
                    f"spectral points {j} and {m} give coincident eigenvalues "
                    f"i k^2 = {a[j]:.6g}",
                    pairs=[(j, m)],
                )
    B0 = np.array([list(r) for r in rows], dtype=complex)
    if B0.shape != (n, P.p):
        raise StructureError(f"rows must form an {n} x {P.p} array, got {B0.shape}")
    dv = [complex(d) for d in diag] if diag is not None else [1.0 + 0j] * n
    if len(dv) != n:
        raise StructureError(f"diag must supply {n} values, got {len(dv)}")
    A = np.diag(a)
    flags = resonant_pairs(A)
    fixed = {j: dv[j] for j in range(n) if (j, j) in flags}
    X0 = solve_lyapunov(A, B0, P.sigma1, fixed_diagonal=fixed)
    R = Realization(n=n, A=A, B0=B0, X0=X0, resonance_flags=flags)
    return _require_valid(P, R)


def random_realization(n: int, p: int, P: VesselParams, seed: int) -> Realization:
    """Seeded random nonresonant realization with a dense complex Gaussian B0.

    Eigenvalues of A sit at -(1 + j/n) plus a small random imaginary part:
    distinct negative real parts keep every Lyapunov denominator away from
    zero and the resolvent regular on the imaginary axis.

    Note for the SL family: sigma1 is indefinite there, so a generic draw
    gives an indefinite state matrix whose determinant has isolated
    near-real zeros — the solution fields have poles scattered over the
    plane (masked by the tau guard when sampling frames).  For a random SL
    realization that is smooth on the whole plane use
    random_soliton_realization instead.
    """
    if n < 1:
        raise StructureError(f"n must be >= 1, got {n}")
    if p != P.p:
        raise StructureError(f"p={p} does not match params.p={P.p}")
    rng = np.random.default_rng(seed)
    eigs = -(1.0 + np.arange(1, n + 1) / n) + 0.1j * rng.standard_normal(n)
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, _ = np.linalg.qr(G)
    A = Q @ np.diag(eigs) @ Q.conj().T
    B0 = (rng.standard_normal((n, p)) + 1j * rng.standard_normal((n, p))) / np.sqrt(2)
    X0 = solve_lyapunov(A, B0, P.sigma1)
    R = Realization(n=n, A=A, B0=B0, X0=X0)
    return _require_valid(P, R)


def random_soliton_realization(P: VesselParams, n: int = 3, seed: int = 0,
                               kappa_range: tuple[float, float] = (0.5, 1.25),
                               min_gap: float = 0.25,
                               slack_range: tuple[float, float] = (0.2, 1.0)) -> Realization:
    """Seeded random pole-free SL realization (an n-soliton configuration).

    Draws distinct decay rates kappa_j in kappa_range (rejection-sampled to
    at least min_gap apart), random complex amplitudes c_j, and builds the
    discrete-spectrum realization with rows [c_j, i kappa_j c_j].  That row
    ratio makes each input column a pure growing mode of the x-flow, so the
    state matrix is X(-inf) plus a Gram integral; choosing the diagonal
    d_j = |c_j|^2 / (2 kappa_j) + slack keeps X(-inf), hence X everywhere,
    positive definite.  tau is then zero-free on the whole plane and the
    SL potential is real, bounded and smooth — unlike generic random SL
    draws, which generically have poles.
    """
    if P.p != 2:
        raise StructureError(f"soliton draw needs a p = 2 parameter family, got p = {P.p}")
    if n < 1:
        raise StructureError(f"n must be >= 1, got {n}")
    lo, hi = float(kappa_range[0]), float(kappa_range[1])
    if not (0 < lo < hi):
        raise StructureError(f"kappa_range must satisfy 0 < lo < hi, got {kappa_range}")
    if (n - 1) * min_gap >= hi - lo:
        raise StructureError(
            f"cannot fit {n} rates with gap {min_gap} inside [{lo}, {hi}]"
        )
    rng = np.random.default_rng(seed)
    kap = np.sort(rng.uniform(lo, hi, n))
    while n > 1 and np.min(np.diff(kap)) < min_gap:
        kap = np.sort(rng.uniform(lo, hi, n))
    c = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    rows = [[c[j], 1j * kap[j] * c[j]] for j in range(n)]
    d = np.abs(c) ** 2 / (2 * kap) + rng.uniform(slack_range[0], slack_range[1], n)
    return realization_from_discrete_spectrum(P, list(1j * kap), rows, list(d))


# ---------------------------------------------------------------------------
# serialization: complex scalars as [re, im], matrices row-major nested


def _mat_to_json(M: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(M, dtype=complex)]


def _mat_from_json(obj, name="matrix") -> np.ndarray:
    try:
        arr = np.array(
            [[complex(c[0], c[1]) for c in row] for row in obj], dtype=complex
        )
    except (TypeError, IndexError) as exc:
        raise StructureError(f"malformed {name}: expected [[re, im], ...] rows") from exc
    return arr


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _mat_to_json(obj) if obj.ndim == 2 else [_jsonable(v) for v in obj]
    if isinstance(obj, complex) or isinstance(obj, np.complexfloating):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def params_to_dict(P: VesselParams) -> dict:
    return {
        "p": P.p,
        "sigma1": _mat_to_json(P.sigma1),
        "sigma2": _mat_to_json(P.sigma2),
        "gamma": _mat_to_json(P.gamma),
    }


def params_from_dict(d: Mapping) -> VesselParams:
    try:
        p = int(d["p"])
    except KeyError as exc:
        raise StructureError("params document missing field 'p'") from exc
    return VesselParams(
        p=p,
        sigma1=_mat_from_json(d["sigma1"], "sigma1"),
        sigma2=_mat_from_json(d["sigma2"], "sigma2"),
        gamma=_mat_from_json(d["gamma"], "gamma"),
    )


def realization_to_dict(R: Realization) -> dict:
    return {
        "n": R.n,
        "A": _mat_to_json(R.A),
        "B0": _mat_to_json(R.B0),
        "X0": _mat_to_json(R.X0),
        "resonance_flags": sorted([j, k] for j, k in R.resonance_flags),
    }


def realization_from_dict(d: Mapping) -> Realization:
    try:
        n = int(d["n"])
    except KeyError as exc:
        raise StructureError("realization document missing field 'n'") from exc
    flags = frozenset((int(j), int(k)) for j, k in d.get("resonance_flags", []))
    return Realization(
        n=n,
        A=_mat_from_json(d["A"], "A"),
        B0=_mat_from_json(d["B0"], "B0"),
        X0=_mat_from_json(d["X0"], "X0"),
        resonance_flags=flags,
    )


def save_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
