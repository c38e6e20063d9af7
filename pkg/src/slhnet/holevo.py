"""Holevo time-ordered-exponential generators and direct measurement feedback.

Single field channel only.  Given self-adjoint ``H11`` the conversion to a
triple is

    S = exp(-i H11)
    L = phi1(H11) H10,            phi1(x) = (exp(-ix) - 1) / x
    H = H00 - H01 phi2(H11) H10,  phi2(x) = (x - sin x) / x**2

with the removable singularities phi1(0) = -i and phi2(0) = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import DEFAULT_TOL, Operator, OperatorMatrix, as_operator, unify
from .slh import SLH, SLHError

_SMALL = 1e-4


class HolevoError(SLHError):
    pass


@dataclass(frozen=True)
class HolevoGenerator:
    H00: Operator
    H01: Operator
    H10: Operator
    H11: Operator

    def __post_init__(self):
        ops = [as_operator(x) for x in (self.H00, self.H01, self.H10, self.H11)]
        sig = unify(*(o.signature for o in ops))
        for name, op in zip(("H00", "H01", "H10", "H11"), ops):
            object.__setattr__(self, name, op.embed(sig))

    @property
    def signature(self):
        return self.H00.signature

    def check(self, tol: float = DEFAULT_TOL):
        if not self.H00.is_hermitian(tol):
            raise HolevoError("H00 must be self-adjoint")
        if not self.H11.is_hermitian(tol):
            raise HolevoError("H11 must be self-adjoint")
        if not self.H01.allclose(self.H10.adjoint(), tol):
            raise HolevoError("H01 must equal H10^dag")


def _phi1_scalar(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=complex)
    small = np.abs(x) < _SMALL
    xs = x[~small]
    out[~small] = np.expm1(-1j * xs) / xs
    z = x[small]
    # -i - x/2 + i x^2/6 + x^3/24
    out[small] = -1j - z / 2 + 1j * z**2 / 6 + z**3 / 24
    return out


def _phi2_scalar(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    small = np.abs(x) < _SMALL
    xs = x[~small]
    out[~small] = (xs - np.sin(xs)) / xs**2
    z = x[small]
    out[small] = z / 6 - z**3 / 120
    return out


def phi_functions_spectral(h11: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return exp(-iH11), phi1(H11), phi2(H11) via Hermitian eigendecomposition."""
    h = 0.5 * (h11 + h11.conj().T)
    w, V = np.linalg.eigh(h)
    Vd = V.conj().T
    expo = (V * np.exp(-1j * w)) @ Vd
    p1 = (V * _phi1_scalar(w)) @ Vd
    p2 = (V * _phi2_scalar(w)) @ Vd
    return expo, p1, p2


def phi_functions_series(h11: np.ndarray, terms: int = 30) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scaled Taylor evaluation of the same three matrix functions.

    The argument is halved until its norm is below 1/2, each function is
    summed as a power series there, and doubling identities restore the
    original scale:

        c(2x)    = 2 c(x)^2 - 1                     (c = cos)
        s(2x)    = s(x) c(x)                        (s = sin x / x)
        v(2x)    = s(x)^2 / 2                       (v = (1 - cos x)/x^2)
        phi2(2x) = (x v(x) + c(x) phi2(x)) / 2
        e(2x)    = e(x)^2                           (e = exp(-ix))
        phi1(2x) = phi1(x) (e(x) + 1) / 2
    """
    x = np.array(h11, dtype=complex)
    d = x.shape[0]
    eye = np.eye(d, dtype=complex)
    nrm = np.linalg.norm(x, 2) if d else 0.0
    k = max(0, int(np.ceil(np.log2(nrm / 0.5)))) if nrm > 0.5 else 0
    xs = x / 2**k

    powers = [eye]
    for _ in range(2 * terms + 2):
        powers.append(powers[-1] @ xs)
    fact = np.cumprod([1.0] + list(range(1, 2 * terms + 4)))

    e = sum((-1j) ** m * powers[m] / fact[m] for m in range(2 * terms))
    p1 = sum((-1j) ** m * powers[m - 1] / fact[m] for m in range(1, 2 * terms))
    c = sum((-1) ** m * powers[2 * m] / fact[2 * m] for m in range(terms))
    s = sum((-1) ** m * powers[2 * m] / fact[2 * m + 1] for m in range(terms))
    v = sum((-1) ** m * powers[2 * m] / fact[2 * m + 2] for m in range(terms))
    p2 = sum((-1) ** (m + 1) * powers[2 * m - 1] / fact[2 * m + 1] for m in range(1, terms))

    for _ in range(k):
        p1 = 0.5 * p1 @ (e + eye)
        e = e @ e
        p2 = 0.5 * (xs @ v + c @ p2)
        v = 0.5 * s @ s
        s = s @ c
        c = 2 * c @ c - eye
        xs = 2 * xs
    return e, p1, p2


def holevo_to_slh(K: HolevoGenerator, tol: float = DEFAULT_TOL, method: str = "spectral") -> SLH:
    K.check(tol)
    if method == "spectral":
        expo, p1, p2 = phi_functions_spectral(K.H11.data)
    elif method == "series":
        expo, p1, p2 = phi_functions_series(K.H11.data)
    else:
        raise ValueError(f"unknown method {method!r}")
    sig = K.signature
    S = OperatorMatrix(expo[None, None], sig)
    L = OperatorMatrix((p1 @ K.H10.data)[None, None], sig)
    H = K.H00.data - K.H01.data @ p2 @ K.H10.data
    H = 0.5 * (H + H.conj().T)
    return SLH(S, L, Operator(H, sig), tol=max(tol, 1e-9))


def _check_self_adjoint(F: Operator, tol: float) -> Operator:
    F = as_operator(F)
    if not F.is_hermitian(tol):
        raise HolevoError("feedback operator F must be self-adjoint")
    return F


def photon_feedback(F, tol: float = DEFAULT_TOL) -> SLH:
    """Feedback of the photocount: Holevo generator ``F Lambda(t)``."""
    F = _check_self_adjoint(F, tol)
    z = Operator.zero(F.signature)
    return holevo_to_slh(HolevoGenerator(z, z, z, F), tol)


def quadrature_feedback(F, tol: float = DEFAULT_TOL) -> SLH:
    """Feedback of the homodyne current: Holevo generator ``F (A(t) + A^dag(t))``."""
    F = _check_self_adjoint(F, tol)
    z = Operator.zero(F.signature)
    return holevo_to_slh(HolevoGenerator(z, F, F, z), tol)
