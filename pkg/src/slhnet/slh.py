"""SLH triples and the algebra of network products.

A triple ``(S, L, H)`` describes an open system with ``n`` field channels:
``S`` is an n x n scattering matrix with operator entries, ``L`` an n x 1
coupling vector and ``H`` the Hamiltonian.  ``n = 0`` is allowed and stands
for a system with no field channels (only ``H``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hilbert import (
    DEFAULT_TOL,
    HilbertSpaceError,
    Operator,
    OperatorMatrix,
    SpaceFactor,
    as_operator,
    normalize_signature,
    unify,
    unitarity_error,
)


class SLHError(ValueError):
    """Invalid triple or incompatible operands."""


class ChannelMismatchError(SLHError):
    pass


def op_imag(x: Operator) -> Operator:
    """Operator imaginary part ``(X - X^dag) / 2i``."""
    return (x - x.adjoint()) * (1 / 2j)


class SLH:
    """Immutable ``(S, L, H)`` triple on a single signature.

    Construction checks that ``S`` is unitary and ``H`` self-adjoint to
    ``tol`` unless ``validate=False``.
    """

    __slots__ = ("S", "L", "H")

    def __init__(self, S, L, H=0.0, *, validate: bool = True, tol: float = DEFAULT_TOL):
        S = S if isinstance(S, OperatorMatrix) else OperatorMatrix.from_entries(S)
        L = L if isinstance(L, OperatorMatrix) else OperatorMatrix.column(L)
        H = as_operator(H)
        if S.rows != S.cols:
            raise SLHError(f"scattering matrix must be square, got {S.shape}")
        if L.cols != 1 or L.rows != S.rows:
            raise SLHError(f"coupling vector shape {L.shape} does not match S {S.shape}")
        sig = unify(S.signature, L.signature, H.signature)
        S, L, H = S.embed(sig), L.embed(sig), H.embed(sig)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "H", H)
        if validate:
            self.validate(tol)

    def __setattr__(self, name, value):
        raise AttributeError("SLH is immutable")

    @property
    def n(self) -> int:
        return self.S.rows

    @property
    def signature(self) -> tuple[SpaceFactor, ...]:
        return self.H.signature

    @property
    def dim(self) -> int:
        return self.H.dim

    def unitarity_error(self) -> float:
        return unitarity_error(self.S)

    def hermiticity_error(self) -> float:
        h = self.H.data
        return float(np.abs(h - h.conj().T).max(initial=0.0))

    def validate(self, tol: float = DEFAULT_TOL) -> "SLH":
        err = self.unitarity_error()
        if err > tol:
            raise SLHError(f"scattering matrix is not unitary (error {err:.3e} > {tol:g})")
        err = self.hermiticity_error()
        if err > tol:
            raise SLHError(f"Hamiltonian is not self-adjoint (error {err:.3e} > {tol:g})")
        return self

    def is_valid(self, tol: float = DEFAULT_TOL) -> bool:
        return self.unitarity_error() <= tol and self.hermiticity_error() <= tol

    def embed(self, target: Sequence[SpaceFactor]) -> "SLH":
        target = normalize_signature(target)
        return _raw(self.S.embed(target), self.L.embed(target), self.H.embed(target))

    @classmethod
    def identity(cls, n: int, signature: Sequence[SpaceFactor] = ()) -> "SLH":
        return _raw(OperatorMatrix.identity(n, signature), OperatorMatrix.zeros(n, 1, signature),
                    Operator.zero(signature))

    @classmethod
    def hamiltonian_only(cls, H) -> "SLH":
        H = as_operator(H)
        return cls(OperatorMatrix.zeros(0, 0, H.signature), OperatorMatrix.zeros(0, 1, H.signature), H)

    def allclose(self, other: "SLH", atol: float = DEFAULT_TOL) -> bool:
        return self.n == other.n and self.max_abs_diff(other) <= atol

    def max_abs_diff(self, other: "SLH") -> float:
        if self.n != other.n:
            raise ChannelMismatchError(f"{self.n} vs {other.n} channels")
        a, b = _common(self, other)
        return max(a.S.max_abs_diff(b.S), a.L.max_abs_diff(b.L),
                   float(np.abs(a.H.data - b.H.data).max(initial=0.0)))

    def __lshift__(self, other: "SLH") -> "SLH":
        """``G2 << G1`` is the series product: G1's output feeds G2."""
        return series(self, other)

    def __add__(self, other: "SLH") -> "SLH":
        """``G1 + G2`` is the concatenation product."""
        if not isinstance(other, SLH):
            return NotImplemented
        return concatenate(self, other)

    def __repr__(self) -> str:
        labels = ",".join(f.label for f in self.signature)
        return f"SLH(n={self.n}, signature=<{labels}>)"


def _raw(S: OperatorMatrix, L: OperatorMatrix, H: Operator) -> SLH:
    return SLH(S, L, H, validate=False)


def _common(*gs: SLH) -> list[SLH]:
    sig = unify(*(g.signature for g in gs))
    return [g if g.signature == sig else g.embed(sig) for g in gs]


def _require_same_n(g1: SLH, g2: SLH, what: str):
    if g1.n != g2.n:
        raise ChannelMismatchError(
            f"{what} needs equal channel counts, got {g1.n} and {g2.n}; pad or permute explicitly")


def _block_diag(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    r1, c1, d, _ = a.data.shape
    r2, c2 = b.shape
    out = np.zeros((r1 + r2, c1 + c2, d, d), dtype=complex)
    out[:r1, :c1] = a.data
    out[r1:, c1:] = b.data
    return OperatorMatrix(out, a.signature)


def concatenate(g1: SLH, g2: SLH) -> SLH:
    g1, g2 = _common(g1, g2)
    L = OperatorMatrix(np.concatenate([g1.L.data, g2.L.data], axis=0), g1.signature)
    return _raw(_block_diag(g1.S, g2.S), L, g1.H + g2.H)


def concatenate_all(gs: Sequence[SLH], signature: Sequence[SpaceFactor] = ()) -> SLH:
    gs = list(gs)
    sig = unify(signature, *(g.signature for g in gs))
    out = SLH.identity(0, sig)
    for g in gs:
        out = concatenate(out, g)
    return out


def series(g2: SLH, g1: SLH) -> SLH:
    """Feed the output of ``g1`` into the input of ``g2``."""
    _require_same_n(g1, g2, "series product")
    g1, g2 = _common(g1, g2)
    S2, L1, L2 = g2.S, g1.L, g2.L
    S = S2 @ g1.S
    L = L2 + S2 @ L1
    cross = (L2.dagger() @ S2 @ L1).to_operator() if g1.n else Operator.zero(g1.signature)
    H = g1.H + g2.H + op_imag(cross)
    return _raw(S, L, H)


def series_chain(*gs: SLH) -> SLH:
    """``series_chain(Gk, ..., G2, G1)`` = Gk <| ... <| G2 <| G1 (G1 is upstream)."""
    if not gs:
        raise SLHError("empty chain")
    out = gs[-1]
    for g in reversed(gs[:-1]):
        out = series(g, out)
    return out


def exchange_right(g1: SLH, g2: SLH) -> SLH:
    """Return ``G2'`` such that ``series(g2, g1) == series(g1, G2')``."""
    _require_same_n(g1, g2, "exchange")
    g1, g2 = _common(g1, g2)
    n = g1.n
    eye = OperatorMatrix.identity(n, g1.signature)
    S1d = g1.S.dagger()
    S2p = S1d @ g2.S @ g1.S
    L2p = S1d @ (g2.S - eye) @ g1.L + S1d @ g2.L
    if n:
        x = (g2.L.dagger() @ (g2.S + eye) @ g1.L - g1.L.dagger() @ g2.S @ g1.L).to_operator()
        H2p = g2.H + op_imag(x)
    else:
        H2p = g2.H
    return _raw(S2p, L2p, H2p)


def move_scattering(g: SLH) -> tuple[SLH, SLH]:
    """Split ``(S, L, H)`` as ``(S, 0, 0) <| (I, S^dag L, H)``."""
    n, sig = g.n, g.signature
    head = _raw(g.S, OperatorMatrix.zeros(n, 1, sig), Operator.zero(sig))
    tail = _raw(OperatorMatrix.identity(n, sig), g.S.dagger() @ g.L, g.H)
    return head, tail


def pad(g: SLH, k: int) -> SLH:
    if k < 0:
        raise SLHError("pad count must be non-negative")
    return concatenate(g, SLH.identity(k, g.signature))


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """0/1 matrix routing input channel ``j`` to output ``perm[j]``."""
    perm = list(perm)
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise SLHError(f"{perm} is not a permutation of range({n})")
    P = np.zeros((n, n))
    for j, pj in enumerate(perm):
        P[pj, j] = 1.0
    return P


def permutation_slh(perm: Sequence[int], signature: Sequence[SpaceFactor] = ()) -> SLH:
    P = permutation_matrix(perm)
    n = len(P)
    S = OperatorMatrix.from_entries(P.tolist(), signature)
    return _raw(S, OperatorMatrix.zeros(n, 1, S.signature), Operator.zero(S.signature))


def permute_channels(g: SLH, perm: Sequence[int]) -> SLH:
    """Reroute outputs: output channel ``j`` of ``g`` becomes channel ``perm[j]``."""
    if len(perm) != g.n:
        raise SLHError(f"permutation of length {len(perm)} for {g.n} channels")
    permutation_matrix(perm)  # validates
    inv = np.argsort(perm)
    S = OperatorMatrix(g.S.data[inv], g.signature)
    L = OperatorMatrix(g.L.data[inv], g.signature)
    return _raw(S, L, g.H)


# Ito coefficients -------------------------------------------------------------

@dataclass(frozen=True)
class ItoCoefficients:
    """Generator blocks of the unitary QSDE.

    ``G00`` multiplies dt, ``G10`` the creation increments dA^dag,
    ``G01`` the annihilation increments dA and ``G11`` the gauge increments.
    """

    G00: Operator
    G10: OperatorMatrix
    G01: OperatorMatrix
    G11: OperatorMatrix

    @property
    def n(self) -> int:
        return self.G11.rows

    @property
    def signature(self):
        return self.G00.signature


def ito_coefficients(g: SLH) -> ItoCoefficients:
    eye = OperatorMatrix.identity(g.n, g.signature)
    LdL = (g.L.dagger() @ g.L).to_operator() if g.n else Operator.zero(g.signature)
    return ItoCoefficients(
        G00=g.H * (-1j) - LdL * 0.5,
        G10=g.L,
        G01=-(g.L.dagger() @ g.S),
        G11=g.S - eye,
    )


def coefficients_to_slh(c: ItoCoefficients, tol: float = DEFAULT_TOL) -> SLH:
    """Recover ``(S, L, H)`` from generator blocks, checking consistency."""
    n, sig = c.n, c.signature
    S = c.G11 + OperatorMatrix.identity(n, sig)
    L = c.G10
    LdL = (L.dagger() @ L).to_operator() if n else Operator.zero(sig)
    H = (c.G00 + LdL * 0.5) * 1j
    g = SLH(S, L, H, validate=False)
    if g.unitarity_error() > tol:
        raise SLHError("G11 + I is not unitary")
    if g.hermiticity_error() > tol:
        raise SLHError("recovered Hamiltonian is not self-adjoint")
    expected_G01 = -(L.dagger() @ S)
    if n and c.G01.max_abs_diff(expected_G01) > tol * max(1.0, float(np.abs(expected_G01.data).max())):
        raise SLHError("G01 is inconsistent with -L^dag S")
    return g


def ito_compose(c2: ItoCoefficients, c1: ItoCoefficients) -> ItoCoefficients:
    """Compose generators via the Ito table: dG = dG1 + dG2 + dG2 dG1.

    Only products through the channel index survive, so the ``ab`` block of
    the product is ``G2^{a,k} G1^{k,b}`` summed over channels ``k``.
    """
    if c1.n != c2.n:
        raise ChannelMismatchError(f"{c2.n} vs {c1.n} channels")
    sig = unify(c1.signature, c2.signature)

    def e(x):
        return x.embed(sig)

    a00, a10, a01, a11 = e(c2.G00), e(c2.G10), e(c2.G01), e(c2.G11)
    b00, b10, b01, b11 = e(c1.G00), e(c1.G10), e(c1.G01), e(c1.G11)
    if c1.n:
        g00 = a00 + b00 + (a01 @ b10).to_operator()
    else:
        g00 = a00 + b00
    return ItoCoefficients(
        G00=g00,
        G10=a10 + b10 + a11 @ b10,
        G01=a01 + b01 + a01 @ b11,
        G11=a11 + b11 + a11 @ b11,
    )


def scalar_slh(S, L, H=0.0, signature: Sequence[SpaceFactor] = (), **kw) -> SLH:
    """Convenience constructor from nested scalars/operators."""
    try:
        Sm = OperatorMatrix.from_entries(S, signature)
        Lm = OperatorMatrix.column(L, signature)
    except HilbertSpaceError as exc:
        raise SLHError(str(exc)) from exc
    return SLH(Sm, Lm, as_operator(H, signature), **kw)
