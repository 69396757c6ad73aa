"""Differential polynomials in a potential field and the KdV-type hierarchy.

Works over exact Gaussian-rational coefficients so recursions, products,
and antiderivatives carry no rounding.  A monomial is a multiset of
positive derivative orders of a scalar potential: ``(3, 1)`` stands for
``b_xxx * b_x``; the potential itself never appears underived.

Two related towers are built:

* :func:`b0` / :func:`next_b` — the literal recursion
  ``b_{k+1} = (1/4) (-i b_k'' + 4 i b_x b_k)``; its members are first
  integrals, not flow right-hand sides.
* :func:`flow_polynomial` — the polynomial ``r_n`` with ``b_t = r_n(b)``
  under the order-(n+1) time flow, generated by the Lenard-style
  recursion ``4 r_{n+1}' = r_n''' + 8 b_x r_n' + 4 b_xx r_n`` whose right
  side is integrated exactly (:func:`dp_integrate`).

On the operator side, :func:`build_Y` forms the alternating sums
``Y = sum_l (-1)^l A^{k-l} B m B* (A*)^l`` whose negated total gives the
time derivative of the state matrix for a stacked flow
(:func:`hierarchy_flow_X_rhs`), and :func:`hierarchy_residual` certifies
``b_t = r_n`` on sampled frames by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import CheckReport, Realization, VesselParams, _fro
from .evolution import build_generators, sample_frame
from .exceptions import GridError, StructureError
from .verify import Stencil, differentiate, _interior_valid, _uniform_spacing

__all__ = [
    "GRat",
    "DiffPoly",
    "BETA_X",
    "dp_add",
    "dp_sub",
    "dp_neg",
    "dp_scale",
    "dp_mul",
    "dp_dx",
    "dp_integrate",
    "dp_eval",
    "dp_eval_grid",
    "dp_max_order",
    "render",
    "b0",
    "next_b",
    "bn",
    "flow_polynomial",
    "FlowTerm",
    "build_Y",
    "build_flow_term",
    "hierarchy_flow_X_rhs",
    "flowterm_symmetry_report",
    "hierarchy_residual",
]


# ---------------------------------------------------------------------------
# exact scalars


@dataclass(frozen=True)
class GRat:
    """Gaussian rational re + im*i with Fraction parts (a field, so exact
    Gaussian elimination and division work)."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(value) -> "GRat":
        if isinstance(value, GRat):
            return value
        if isinstance(value, (int, Fraction)):
            return GRat(Fraction(value))
        if isinstance(value, float):
            return GRat(Fraction(value))
        if isinstance(value, complex):
            return GRat(Fraction(value.real), Fraction(value.imag))
        raise StructureError(f"cannot coerce {type(value).__name__} to an exact scalar")

    def __add__(self, other):
        o = GRat.of(other)
        return GRat(self.re + o.re, self.im + o.im)

    def __sub__(self, other):
        o = GRat.of(other)
        return GRat(self.re - o.re, self.im - o.im)

    def __mul__(self, other):
        o = GRat.of(other)
        return GRat(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    def __truediv__(self, other):
        o = GRat.of(other)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return GRat((self.re * o.re + self.im * o.im) / d,
                    (self.im * o.re - self.re * o.im) / d)

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other):
        return GRat.of(other) - self

    def __neg__(self):
        return GRat(-self.re, -self.im)

    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def as_complex(self) -> complex:
        return complex(self.re, self.im)

    def __str__(self) -> str:
        return _format_grat(self, signed=False)


GRat.ZERO = GRat()
GRat.ONE = GRat(Fraction(1))
GRat.I = GRat(Fraction(0), Fraction(1))


# ---------------------------------------------------------------------------
# the polynomial ring


def _canon_key(key: Iterable[int]) -> tuple[int, ...]:
    k = tuple(sorted((int(o) for o in key), reverse=True))
    if any(o < 1 for o in k):
        raise StructureError(f"derivative orders must be >= 1, got {k}")
    return k


class DiffPoly:
    """Immutable polynomial: mapping {derivative-order multiset: GRat}.

    Keys are non-increasing tuples of positive ints; zero coefficients are
    dropped, so equality and hashing are canonical.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping | None = None):
        canon: dict[tuple[int, ...], GRat] = {}
        for key, val in (terms or {}).items():
            k = _canon_key(key)
            c = canon.get(k, GRat.ZERO) + GRat.of(val)
            if c.is_zero:
                canon.pop(k, None)
            else:
                canon[k] = c
        object.__setattr__(self, "_terms", canon)

    @property
    def terms(self) -> dict[tuple[int, ...], GRat]:
        return dict(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def monomials(self) -> tuple[tuple[int, ...], ...]:
        return tuple(sorted(self._terms, key=_render_sort_key))

    def __eq__(self, other):
        return isinstance(other, DiffPoly) and self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self):
        return f"DiffPoly({render(self)})"


BETA_X = DiffPoly({(1,): GRat.ONE})


def dp_add(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    t = a.terms
    for k, v in b._terms.items():
        t[k] = t.get(k, GRat.ZERO) + v
    return DiffPoly(t)


def dp_neg(a: DiffPoly) -> DiffPoly:
    return DiffPoly({k: -v for k, v in a._terms.items()})


def dp_sub(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    return dp_add(a, dp_neg(b))


def dp_scale(a: DiffPoly, c) -> DiffPoly:
    c = GRat.of(c)
    if c.is_zero:
        return DiffPoly()
    return DiffPoly({k: v * c for k, v in a._terms.items()})


def dp_mul(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    t: dict[tuple[int, ...], GRat] = {}
    for ka, va in a._terms.items():
        for kb, vb in b._terms.items():
            k = _canon_key(ka + kb)
            t[k] = t.get(k, GRat.ZERO) + va * vb
    return DiffPoly(t)


def dp_dx(a: DiffPoly) -> DiffPoly:
    """Total x-derivative (Leibniz over each monomial's factors)."""
    t: dict[tuple[int, ...], GRat] = {}
    for key, c in a._terms.items():
        for i in range(len(key)):
            k = _canon_key(key[:i] + (key[i] + 1,) + key[i + 1:])
            t[k] = t.get(k, GRat.ZERO) + c
    return DiffPoly(t)


def _partitions(total: int, parts: int, cap: int | None = None):
    """Non-increasing tuples of `parts` positive ints summing to `total`."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    hi = min(total - (parts - 1), cap if cap is not None else total)
    for first in range(hi, 0, -1):
        for rest in _partitions(total - first, parts - 1, first):
            yield (first,) + rest


def dp_integrate(g: DiffPoly) -> DiffPoly:
    """Exact antiderivative G with dp_dx(G) == g.

    Total differentiation preserves the factor count and raises the order
    sum by one, so candidates for each (degree, order-sum) block of g are
    the partitions of (order-sum - 1) into `degree` positive parts; their
    coefficients solve an exact linear system.  Raises if g is not a total
    derivative.
    """
    if g.is_zero:
        return DiffPoly()
    result: dict[tuple[int, ...], GRat] = {}
    blocks: dict[tuple[int, int], dict] = {}
    for key, val in g._terms.items():
        blocks.setdefault((len(key), sum(key)), {})[key] = val
    for (deg, wsum), block in blocks.items():
        cands = list(_partitions(wsum - 1, deg)) if wsum > deg else []
        # the derivative can't lower any order below 1, so all-ones
        # with nothing to come from means g isn't a total derivative
        if not cands:
            raise StructureError(
                f"monomials {sorted(block)} admit no antiderivative candidates"
            )
        images = [dp_dx(DiffPoly({k: GRat.ONE})) for k in cands]
        rows = sorted(set(block) | {m for im in images for m in im._terms})
        A = [[im._terms.get(r, GRat.ZERO) for im in images] for r in rows]
        rhs = [block.get(r, GRat.ZERO) for r in rows]
        sol = _solve_grat(A, rhs)
        for k, c in zip(cands, sol):
            if not c.is_zero:
                result[k] = result.get(k, GRat.ZERO) + c
    G = DiffPoly(result)
    if dp_dx(G) != g:
        raise StructureError("input is not an exact total x-derivative")
    return G


def _solve_grat(A: Sequence[Sequence[GRat]], b: Sequence[GRat]) -> list[GRat]:
    """Exact solve of a rectangular consistent system; raises if inconsistent."""
    m, n = len(A), len(A[0]) if A else 0
    aug = [list(A[i]) + [b[i]] for i in range(m)]
    pivots: list[int] = []
    row = 0
    for col in range(n):
        piv = next((r for r in range(row, m) if not aug[r][col].is_zero), None)
        if piv is None:
            continue
        aug[row], aug[piv] = aug[piv], aug[row]
        inv = aug[row][col]
        aug[row] = [v / inv for v in aug[row]]
        for r in range(m):
            if r != row and not aug[r][col].is_zero:
                f = aug[r][col]
                aug[r] = [a - f * p for a, p in zip(aug[r], aug[row])]
        pivots.append(col)
        row += 1
        if row == m:
            break
    for r in range(row, m):
        if not aug[r][n].is_zero:
            raise StructureError("linear system is inconsistent (not a total derivative)")
    x = [GRat.ZERO] * n
    for r, col in enumerate(pivots):
        x[col] = aug[r][n]
    return x


# ---------------------------------------------------------------------------
# the two towers


def b0() -> DiffPoly:
    """Seed of the literal recursion: -(1/4) b_xxx + (3/2) b_x^2."""
    return DiffPoly({(3,): GRat(Fraction(-1, 4)), (1, 1): GRat(Fraction(3, 2))})


def next_b(b: DiffPoly) -> DiffPoly:
    """One step of the literal recursion: (1/4)(-i b'' + 4 i b_x b)."""
    step = dp_add(dp_scale(dp_dx(dp_dx(b)), -GRat.I),
                  dp_scale(dp_mul(BETA_X, b), GRat.I * 4))
    return dp_scale(step, Fraction(1, 4))


def bn(n: int) -> DiffPoly:
    """n-th member of the literal tower (b0 at n = 0)."""
    if n < 0:
        raise StructureError("index must be >= 0")
    return reduce(lambda b, _: next_b(b), range(n), b0())


_FLOW_CACHE: list[DiffPoly] = []


def flow_polynomial(n: int) -> DiffPoly:
    """r_n with b_t = r_n under the order-(n+1) time flow.

    r_0 = (1/4) b_xxx + (3/2) b_x^2 (so the n = 0 flow is KdV for
    q = -2 b_x), and 4 r_{n+1}' = r_n''' + 8 b_x r_n' + 4 b_xx r_n with the
    antiderivative taken exactly.
    """
    if n < 0:
        raise StructureError("flow index must be >= 0")
    if not _FLOW_CACHE:
        _FLOW_CACHE.append(
            DiffPoly({(3,): GRat(Fraction(1, 4)), (1, 1): GRat(Fraction(3, 2))})
        )
    while len(_FLOW_CACHE) <= n:
        r = _FLOW_CACHE[-1]
        rhs = dp_add(
            dp_dx(dp_dx(dp_dx(r))),
            dp_add(dp_scale(dp_mul(BETA_X, dp_dx(r)), 8),
                   dp_scale(dp_mul(DiffPoly({(2,): GRat.ONE}), r), 4)),
        )
        _FLOW_CACHE.append(dp_integrate(dp_scale(rhs, Fraction(1, 4))))
    return _FLOW_CACHE[n]


# ---------------------------------------------------------------------------
# evaluation on samples


def dp_max_order(poly: DiffPoly) -> int:
    return max((k[0] for k in poly._terms), default=0)


def dp_eval(poly: DiffPoly, beta_samples, h: float, x_index: int) -> complex:
    """Evaluate at one grid node, derivatives by validated central stencils."""
    samples = np.asarray(beta_samples, dtype=complex)
    if samples.ndim != 1:
        raise GridError("dp_eval expects a 1-d sample array in x")
    cache: dict[int, complex] = {}
    out = 0j
    for key, c in poly._terms.items():
        prod = 1.0 + 0j
        for o in key:
            if o not in cache:
                cache[o] = Stencil.central(o, 4).apply_at(samples, h, x_index)
            prod *= cache[o]
        out += c.as_complex() * prod
    return out


def dp_eval_grid(poly: DiffPoly, beta, h: float, axis: int = -1) -> np.ndarray:
    """Vectorized evaluation over an array of samples along `axis`."""
    beta = np.asarray(beta, dtype=complex)
    orders = sorted({o for k in poly._terms for o in k})
    derivs = {o: differentiate(beta, o, h, axis=axis, order=4) for o in orders}
    out = np.zeros(beta.shape, dtype=complex)
    for key, c in poly._terms.items():
        prod = np.ones(beta.shape, dtype=complex)
        for o in key:
            prod = prod * derivs[o]
        out += c.as_complex() * prod
    return out


# ---------------------------------------------------------------------------
# rendering


_SUP = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


def _monomial_str(key: tuple[int, ...]) -> str:
    parts = []
    for o in sorted(key):
        base = "β" + ("x" * o if o <= 3 else f"{o}x")
        parts.append(base)
    out = []
    i = 0
    while i < len(parts):
        j = i
        while j < len(parts) and parts[j] == parts[i]:
            j += 1
        power = j - i
        out.append(parts[i] + (str(power).translate(_SUP) if power > 1 else ""))
        i = j
    return "".join(out)


def _format_frac(f: Fraction) -> str:
    s = f"{abs(f.numerator)}"
    if f.denominator != 1:
        s += f"/{f.denominator}"
    return s


def _format_grat(c: GRat, signed: bool = True) -> str:
    sign = lambda v: "−" if v < 0 else "+"
    if c.im == 0:
        body = _format_frac(c.re)
        return (sign(c.re) if signed else ("−" if c.re < 0 else "")) + body
    if c.re == 0:
        mag = _format_frac(c.im)
        body = "i" if mag == "1" else f"{mag}·i"
        return (sign(c.im) if signed else ("−" if c.im < 0 else "")) + body
    re = (sign(c.re) if signed else ("−" if c.re < 0 else "")) + _format_frac(c.re)
    mag = _format_frac(c.im)
    return f"{re}{sign(c.im)}{'i' if mag == '1' else f'{mag}·i'}"


def _render_sort_key(key: tuple[int, ...]):
    return (-sum(key), key)


def render(poly: DiffPoly, name: str | None = None) -> str:
    """Stable text form, highest order sum first: ``(−1/4)·βxxx + (+3/2)·βx²``."""
    if poly.is_zero:
        body = "0"
    else:
        pieces = [
            f"({_format_grat(poly._terms[k])})·{_monomial_str(k)}"
            for k in sorted(poly._terms, key=_render_sort_key)
        ]
        body = " + ".join(pieces)
    return f"{name} = {body}" if name else body


# ---------------------------------------------------------------------------
# operator-side flow terms


def build_Y(A, B, m, k: int) -> np.ndarray:
    """Alternating conjugation sum sum_{l=0}^{k} (-1)^l A^{k-l} B m B* (A*)^l."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    m = np.asarray(m, dtype=complex)
    if k < 0:
        raise StructureError("term index must be >= 0")
    core = B @ m @ B.conj().T
    Ah = A.conj().T
    out = np.zeros_like(core)
    for l in range(k + 1):
        out += (-1) ** l * (
            np.linalg.matrix_power(A, k - l) @ core @ np.linalg.matrix_power(Ah, l)
        )
    return out


@dataclass(frozen=True, eq=False)
class FlowTerm:
    """One stacked-flow term: index k, its p x p coefficient, and the realized
    alternating sum Y."""

    index: int
    coeff: np.ndarray
    Y: np.ndarray


def build_flow_term(A, B, coeff, index: int) -> FlowTerm:
    coeff = np.asarray(coeff, dtype=complex)
    return FlowTerm(index=index, coeff=coeff, Y=build_Y(A, B, coeff, index))


def hierarchy_flow_X_rhs(flow: Sequence[FlowTerm]) -> np.ndarray:
    """Time derivative of the state matrix for a stacked flow: -(sum of Y)."""
    if not flow:
        raise StructureError("flow must contain at least one term")
    return -sum(term.Y for term in flow)


def flowterm_symmetry_report(term: FlowTerm) -> CheckReport:
    """Hermiticity of Y under the coefficient parity m* = (-1)^k m.

    Y* equals (-1)^k Y with m replaced by m*, so coefficient parity makes
    Y Hermitian at every index; the two fixed-sign readings
    Y* = +/-(-1)^k Y are reported as diagnostics (each fails on half the
    indices).
    """
    Y, k, m = term.Y, term.index, term.coeff
    scale = _fro(Y) + 1.0
    parity_defect = _fro(m.conj().T - (-1) ** k * m) / (_fro(m) + 1.0)
    herm = _fro(Y.conj().T - Y) / scale
    return CheckReport(
        name="flow_term_symmetry",
        residuals={"hermitian_defect": herm},
        tolerances={"hermitian_defect": 1e-12},
        details={
            "index": k,
            "coeff_parity_defect": parity_defect,
            "same_parity_defect": _fro(Y.conj().T - (-1) ** k * Y) / scale,
            "flipped_parity_defect": _fro(Y.conj().T - (-1) ** (k + 1) * Y) / scale,
        },
    )


# ---------------------------------------------------------------------------
# frame residual


def hierarchy_residual(P: VesselParams, R: Realization, order_n: int,
                       x_grid, t_grid, flow_order: int | None = None,
                       tol: float = 1e-4) -> CheckReport:
    """max |b_t - r_n(b)| for b = (gamma_star)_{12} under the matching flow.

    The order-n polynomial pairs with the order-(n+1) time flow (the n = 0
    row is KdV under the first nontrivial flow).  The literal tower member
    differentiated once, max |b_t - (b_n)_x|, is reported as a diagnostic:
    it is *not* the flow right side and generically does not vanish.
    """
    m = (order_n + 1) if flow_order is None else flow_order
    G = build_generators(P, R.A, order=m)
    frame = sample_frame(P, R, G, x_grid, t_grid, preset="SL")
    dx = _uniform_spacing(frame.x_grid, "x")
    dt = _uniform_spacing(frame.t_grid, "t")
    beta = frame.fields["beta"]
    beta_t = differentiate(beta, 1, dt, axis=0, order=4)

    r_n = flow_polynomial(order_n)
    rhs = dp_eval_grid(r_n, beta, dx, axis=1)
    rx = Stencil.central(max(dp_max_order(r_n), 1), 4).margin
    rt = Stencil.central(1, 4).margin
    valid = _interior_valid(frame, rx, rt)
    if not np.any(valid):
        raise GridError("no valid interior nodes for the hierarchy residual")
    res = np.abs(beta_t - rhs)
    flow_res = float(np.max(res[valid]))

    lit = dp_dx(bn(order_n))
    lit_rhs = dp_eval_grid(lit, beta, dx, axis=1)
    lx = Stencil.central(max(dp_max_order(lit), 1), 4).margin
    lit_valid = _interior_valid(frame, lx, rt)
    lit_res = (
        float(np.max(np.abs(beta_t - lit_rhs)[lit_valid]))
        if np.any(lit_valid) else float("nan")
    )

    return CheckReport(
        name=f"hierarchy_flow_{order_n}",
        residuals={"flow_residual": flow_res},
        tolerances={"flow_residual": tol},
        details={
            "flow_order": m,
            "polynomial": render(r_n, name=f"r{order_n}"),
            "literal_residual": lit_res,
            "valid_nodes": int(np.count_nonzero(valid)),
        },
    )
