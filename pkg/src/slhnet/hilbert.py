"""Finite-dimensional Hilbert spaces and dense operator algebra.

Every :class:`Operator` carries a *signature*: the ordered tuple of
:class:`SpaceFactor` objects it acts on.  Factors are ordered globally by
registration, so embedding an operator into a larger signature is
unambiguous.  An operator with an empty signature is a complex scalar
(a 1x1 matrix) and embeds as a multiple of the identity.

Truncated Fock spaces keep levels ``0 .. cutoff-1``.  The canonical
commutation relation ``[a, a^dag] = 1`` therefore only holds below the top
level.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from numbers import Number
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-10

_order_counter = itertools.count()
_order_lock = threading.Lock()


class HilbertSpaceError(ValueError):
    """Raised for invalid space registrations or incompatible signatures."""


@dataclass(frozen=True)
class SpaceFactor:
    label: str
    dim: int
    kind: str = "generic"
    order: int = 0

    @property
    def cutoff(self) -> int | None:
        return self.dim if self.kind == "fock" else None

    def __repr__(self) -> str:
        return f"SpaceFactor({self.label!r}, {self.kind}, dim={self.dim})"


class Registry:
    """Append-only collection of uniquely labelled space factors."""

    def __init__(self):
        self._factors: dict[str, SpaceFactor] = {}
        self._lock = threading.Lock()

    def register(self, label: str, kind: str = "generic", dim: int = 2) -> SpaceFactor:
        if kind not in ("fock", "generic"):
            raise HilbertSpaceError(f"unknown space kind {kind!r}")
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise HilbertSpaceError(f"space {label!r}: dimension must be a positive integer, got {dim!r}")
        with self._lock:
            if label in self._factors:
                raise HilbertSpaceError(f"space label {label!r} already registered")
            with _order_lock:
                order = next(_order_counter)
            factor = SpaceFactor(label, int(dim), kind, order)
            self._factors[label] = factor
        return factor

    def __getitem__(self, label: str) -> SpaceFactor:
        return self._factors[label]

    def __contains__(self, label: str) -> bool:
        return label in self._factors

    def __iter__(self):
        return iter(self._factors.values())

    def __len__(self) -> int:
        return len(self._factors)


default_registry = Registry()


def register_space(label: str, kind: str = "generic", dim: int = 2,
                   registry: Registry | None = None) -> SpaceFactor:
    """Register a new space factor (in the default registry unless given)."""
    return (default_registry if registry is None else registry).register(label, kind, dim)


def normalize_signature(factors: Iterable[SpaceFactor]) -> tuple[SpaceFactor, ...]:
    unique = {}
    for f in factors:
        prev = unique.get(f.order)
        if prev is not None and prev != f:
            raise HilbertSpaceError(f"conflicting factors {prev!r} and {f!r}")
        unique[f.order] = f
    return tuple(unique[k] for k in sorted(unique))


def signature_dim(signature: Sequence[SpaceFactor]) -> int:
    return int(np.prod([f.dim for f in signature], dtype=int)) if signature else 1


def unify(*signatures: Sequence[SpaceFactor]) -> tuple[SpaceFactor, ...]:
    return normalize_signature(itertools.chain.from_iterable(signatures))


def embed_array(data: np.ndarray, signature: Sequence[SpaceFactor],
                target: Sequence[SpaceFactor]) -> np.ndarray:
    """Embed the trailing two axes of ``data`` from ``signature`` into ``target``.

    Leading axes (e.g. operator-matrix row/column indices) are carried along.
    """
    signature = tuple(signature)
    target = tuple(target)
    if signature == target:
        return data
    missing = [f for f in signature if f not in target]
    if missing:
        raise HilbertSpaceError(
            f"target signature {[f.label for f in target]} lacks factors {[f.label for f in missing]}")
    lead = data.shape[:-2]
    if not signature:
        eye = np.eye(signature_dim(target), dtype=complex)
        return data[..., 0:1, 0:1] * eye
    # Kron with identities in the order of the target, then permute axes.
    ident_factors = [f for f in target if f not in signature]
    d_id = signature_dim(ident_factors)
    full = np.einsum("...ab,cd->...acbd", data, np.eye(d_id, dtype=complex))
    current = list(signature) + ident_factors
    dims = [f.dim for f in current]
    k = len(current)
    nl = len(lead)
    full = full.reshape(lead + tuple(dims) + tuple(dims))
    perm = [current.index(f) for f in target]
    axes = list(range(nl)) + [nl + p for p in perm] + [nl + k + p for p in perm]
    full = full.transpose(axes)
    d = signature_dim(target)
    return np.ascontiguousarray(full.reshape(lead + (d, d)))


def _as_complex(x) -> complex:
    return complex(x)


class Operator:
    """Dense operator on a tensor product of registered factors."""

    __array_priority__ = 1000
    __slots__ = ("signature", "data")

    def __init__(self, data, signature: Sequence[SpaceFactor] = ()):
        signature = normalize_signature(signature)
        arr = np.array(data, dtype=complex)
        d = signature_dim(signature)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1) * np.eye(d) if d > 1 else arr.reshape(1, 1)
        if arr.shape != (d, d):
            raise HilbertSpaceError(
                f"operator data has shape {arr.shape}, signature {[f.label for f in signature]} needs {(d, d)}")
        arr.setflags(write=False)
        object.__setattr__(self, "signature", signature)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @classmethod
    def scalar(cls, value) -> "Operator":
        return cls(np.array([[complex(value)]]), ())

    @classmethod
    def identity(cls, signature: Sequence[SpaceFactor] = ()) -> "Operator":
        signature = normalize_signature(signature)
        return cls(np.eye(signature_dim(signature), dtype=complex), signature)

    @classmethod
    def zero(cls, signature: Sequence[SpaceFactor] = ()) -> "Operator":
        signature = normalize_signature(signature)
        d = signature_dim(signature)
        return cls(np.zeros((d, d), dtype=complex), signature)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_scalar(self) -> bool:
        return not self.signature

    def embed(self, target: Sequence[SpaceFactor]) -> "Operator":
        target = normalize_signature(target)
        return Operator(embed_array(self.data, self.signature, target), target)

    def adjoint(self) -> "Operator":
        return Operator(self.data.conj().T, self.signature)

    dag = adjoint

    def conjugate(self) -> "Operator":
        """Entrywise complex conjugate in the product basis."""
        return Operator(self.data.conj(), self.signature)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def norm(self) -> float:
        """Max-row-sum (infinity) norm."""
        return float(np.abs(self.data).sum(axis=1).max()) if self.data.size else 0.0

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return float(np.abs(self.data - self.data.conj().T).max(initial=0.0)) <= tol

    def allclose(self, other, atol: float = DEFAULT_TOL) -> bool:
        a, b = _coerce_pair(self, other)
        return bool(np.allclose(a.data, b.data, atol=atol, rtol=0.0))

    def to_scalar(self) -> complex:
        """Return the scalar if this operator is a multiple of the identity."""
        d = self.data
        c = d[0, 0]
        if not np.allclose(d, c * np.eye(d.shape[0]), atol=1e-14, rtol=1e-12):
            raise HilbertSpaceError("operator is not a multiple of the identity")
        return complex(c)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Number):
            other = Operator.scalar(other)
        if not isinstance(other, Operator):
            return NotImplemented
        a, b = _coerce_pair(self, other)
        return Operator(a.data + b.data, a.signature)

    __radd__ = __add__

    def __neg__(self):
        return Operator(-self.data, self.signature)

    def __sub__(self, other):
        if isinstance(other, Number):
            other = Operator.scalar(other)
        if not isinstance(other, Operator):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return Operator(self.data * complex(other), self.signature)
        if isinstance(other, Operator):
            a, b = _coerce_pair(self, other)
            return Operator(a.data @ b.data, a.signature)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, Number):
            return Operator(self.data * complex(other), self.signature)
        return NotImplemented

    __matmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            return Operator(self.data / complex(other), self.signature)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            return NotImplemented
        return Operator(np.linalg.matrix_power(self.data, int(k)), self.signature)

    def __repr__(self) -> str:
        labels = ",".join(f.label for f in self.signature)
        return f"Operator<{labels or 'scalar'}>({self.data!r})"


def _coerce_pair(a: Operator, b) -> tuple[Operator, Operator]:
    if isinstance(b, Number):
        b = Operator.scalar(b)
    if a.signature == b.signature:
        return a, b
    target = unify(a.signature, b.signature)
    return a.embed(target), b.embed(target)


def as_operator(x, signature: Sequence[SpaceFactor] | None = None) -> Operator:
    op = x if isinstance(x, Operator) else Operator.scalar(_as_complex(x))
    if signature is not None:
        op = op.embed(unify(op.signature, signature))
    return op


def embed(op: Operator, target: Sequence[SpaceFactor]) -> Operator:
    return as_operator(op).embed(target)


def commutator(a: Operator, b: Operator) -> Operator:
    a, b = _coerce_pair(as_operator(a), b)
    return Operator(a.data @ b.data - b.data @ a.data, a.signature)


# elementary operators -------------------------------------------------------

def _require_fock(space: SpaceFactor):
    if space.kind != "fock":
        raise HilbertSpaceError(f"space {space.label!r} is not a Fock space")


def annihilation(space: SpaceFactor) -> Operator:
    _require_fock(space)
    n = np.arange(1, space.dim)
    return Operator(np.diag(np.sqrt(n).astype(complex), k=1), (space,))


def creation(space: SpaceFactor) -> Operator:
    return annihilation(space).adjoint()


def number(space: SpaceFactor) -> Operator:
    _require_fock(space)
    return Operator(np.diag(np.arange(space.dim).astype(complex)), (space,))


def identity(space: SpaceFactor | Sequence[SpaceFactor] = ()) -> Operator:
    if isinstance(space, SpaceFactor):
        space = (space,)
    return Operator.identity(space)


# operator matrices -----------------------------------------------------------

class OperatorMatrix:
    """Rectangular array of operators sharing one signature.

    Stored as a complex array of shape ``(rows, cols, d, d)``.  Products
    follow ordinary matrix rules with operator-valued entries, so entries
    need not commute.
    """

    __array_priority__ = 1000
    __slots__ = ("signature", "data")

    def __init__(self, data, signature: Sequence[SpaceFactor] = ()):
        signature = normalize_signature(signature)
        arr = np.array(data, dtype=complex)
        d = signature_dim(signature)
        if arr.ndim != 4 or arr.shape[2:] != (d, d):
            raise HilbertSpaceError(f"operator matrix data has shape {arr.shape}, need (r, c, {d}, {d})")
        arr.setflags(write=False)
        object.__setattr__(self, "signature", signature)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("OperatorMatrix is immutable")

    @classmethod
    def from_entries(cls, rows: Sequence[Sequence], signature: Sequence[SpaceFactor] = ()) -> "OperatorMatrix":
        """Build from nested lists of operators and/or scalars."""
        ops = [[as_operator(x) for x in row] for row in rows]
        ncols = {len(r) for r in ops}
        if len(ncols) > 1:
            raise HilbertSpaceError("ragged operator matrix")
        sig = unify(signature, *(op.signature for row in ops for op in row))
        d = signature_dim(sig)
        nr, nc = len(ops), (ncols.pop() if ops else 0)
        data = np.zeros((nr, nc, d, d), dtype=complex)
        for i, row in enumerate(ops):
            for j, op in enumerate(row):
                data[i, j] = op.embed(sig).data
        return cls(data, sig)

    @classmethod
    def column(cls, entries: Sequence, signature: Sequence[SpaceFactor] = ()) -> "OperatorMatrix":
        return cls.from_entries([[e] for e in entries], signature)

    @classmethod
    def identity(cls, n: int, signature: Sequence[SpaceFactor] = ()) -> "OperatorMatrix":
        signature = normalize_signature(signature)
        d = signature_dim(signature)
        return cls(np.einsum("ij,ab->ijab", np.eye(n), np.eye(d)).astype(complex), signature)

    @classmethod
    def zeros(cls, rows: int, cols: int, signature: Sequence[SpaceFactor] = ()) -> "OperatorMatrix":
        signature = normalize_signature(signature)
        d = signature_dim(signature)
        return cls(np.zeros((rows, cols, d, d), dtype=complex), signature)

    @classmethod
    def from_block(cls, block: np.ndarray, rows: int, cols: int,
                   signature: Sequence[SpaceFactor] = ()) -> "OperatorMatrix":
        """Inverse of :meth:`block`: split an (rows*d, cols*d) matrix into entries."""
        d = signature_dim(normalize_signature(signature))
        arr = np.asarray(block, dtype=complex).reshape(rows, d, cols, d).transpose(0, 2, 1, 3)
        return cls(arr, signature)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, idx) -> Operator:
        i, j = idx
        return Operator(self.data[i, j], self.signature)

    def entries(self) -> list[list[Operator]]:
        return [[self[i, j] for j in range(self.cols)] for i in range(self.rows)]

    def block(self) -> np.ndarray:
        """The (rows*d) x (cols*d) matrix with each entry as a d x d block."""
        r, c, d, _ = self.data.shape
        return self.data.transpose(0, 2, 1, 3).reshape(r * d, c * d)

    def embed(self, target: Sequence[SpaceFactor]) -> "OperatorMatrix":
        target = normalize_signature(target)
        return OperatorMatrix(embed_array(self.data, self.signature, target), target)

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.data.transpose(1, 0, 3, 2).conj(), self.signature)

    def sharp(self) -> "OperatorMatrix":
        return OperatorMatrix(self.data.transpose(0, 1, 3, 2).conj(), self.signature)

    def transpose(self) -> "OperatorMatrix":
        return OperatorMatrix(self.data.transpose(1, 0, 2, 3), self.signature)

    @property
    def T(self) -> "OperatorMatrix":
        return self.transpose()

    def allclose(self, other: "OperatorMatrix", atol: float = DEFAULT_TOL) -> bool:
        if self.shape != other.shape:
            return False
        a, b = _coerce_matrices(self, other)
        return bool(np.allclose(a.data, b.data, atol=atol, rtol=0.0))

    def max_abs_diff(self, other: "OperatorMatrix") -> float:
        a, b = _coerce_matrices(self, other)
        return float(np.abs(a.data - b.data).max(initial=0.0))

    def to_operator(self) -> Operator:
        if self.shape != (1, 1):
            raise HilbertSpaceError(f"expected a 1x1 operator matrix, got {self.shape}")
        return self[0, 0]

    def __add__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        if self.shape != other.shape:
            raise HilbertSpaceError(f"shape mismatch {self.shape} vs {other.shape}")
        a, b = _coerce_matrices(self, other)
        return OperatorMatrix(a.data + b.data, a.signature)

    def __neg__(self):
        return OperatorMatrix(-self.data, self.signature)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Number):
            return OperatorMatrix(self.data * complex(other), self.signature)
        if isinstance(other, Operator):
            sig = unify(self.signature, other.signature)
            m = self.embed(sig).data
            return OperatorMatrix(np.einsum("ijab,bc->ijac", m, other.embed(sig).data), sig)
        if isinstance(other, OperatorMatrix):
            return self @ other
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, Number):
            return OperatorMatrix(self.data * complex(other), self.signature)
        if isinstance(other, Operator):
            sig = unify(self.signature, other.signature)
            m = self.embed(sig).data
            return OperatorMatrix(np.einsum("ab,ijbc->ijac", other.embed(sig).data, m), sig)
        return NotImplemented

    def __matmul__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        if self.cols != other.rows:
            raise HilbertSpaceError(f"cannot multiply {self.shape} by {other.shape}")
        a, b = _coerce_matrices(self, other)
        return OperatorMatrix(np.einsum("ikab,kjbc->ijac", a.data, b.data), a.signature)

    def __repr__(self) -> str:
        labels = ",".join(f.label for f in self.signature)
        return f"OperatorMatrix<{labels or 'scalar'}>{self.shape}"


def _coerce_matrices(a: OperatorMatrix, b: OperatorMatrix):
    if a.signature == b.signature:
        return a, b
    target = unify(a.signature, b.signature)
    return a.embed(target), b.embed(target)


def matrix_conjugations(m: OperatorMatrix) -> dict[str, OperatorMatrix]:
    """Return the adjoint, entrywise conjugate and transpose of ``m``."""
    return {"dagger": m.dagger(), "sharp": m.sharp(), "transpose": m.transpose()}


def unitarity_error(m: OperatorMatrix) -> float:
    if m.rows != m.cols:
        raise HilbertSpaceError(f"unitarity needs a square matrix, got {m.shape}")
    b = m.block()
    eye = np.eye(b.shape[0])
    if b.size == 0:
        return 0.0
    return float(max(np.abs(b.conj().T @ b - eye).sum(axis=1).max(),
                     np.abs(b @ b.conj().T - eye).sum(axis=1).max()))


def check_unitary(m: OperatorMatrix, tol: float = DEFAULT_TOL) -> bool:
    """True iff both S^dag S and S S^dag are within ``tol`` of the identity."""
    return unitarity_error(m) <= tol
