"""Random instances shared by the test modules."""
from __future__ import annotations

import numpy as np

from slhnet import SLH, OperatorMatrix, Registry, Operator


def spaces(dims, kind="generic"):
    reg = Registry()
    return tuple(reg.register(f"s{k}", kind, d) for k, d in enumerate(dims))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (z + z.conj().T)


def random_matrix(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))


def random_slh(n: int, sig, rng: np.random.Generator, scale: float = 1.0) -> SLH:
    """Random triple on ``sig`` with a unitary of the whole block space as S."""
    d = int(np.prod([f.dim for f in sig])) if sig else 1
    S = OperatorMatrix.from_block(random_unitary(n * d, rng), n, n, sig)
    L = OperatorMatrix(np.stack([random_matrix(d, rng, scale) for _ in range(n)])[:, None], sig)
    H = Operator(random_hermitian(d, rng, scale), sig)
    return SLH(S, L, H)


def random_instance(rng: np.random.Generator, max_dim: int = 4, max_channels: int = 3):
    d = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(1, max_channels + 1))
    return n, spaces([d])


# acceptance criteria log, printed by conftest.pytest_terminal_summary
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str, seconds: float):
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE[number] = f"criterion {number:2d} [{status}] {title} ({seconds:.2f} s) {detail}".rstrip()
