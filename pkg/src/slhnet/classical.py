"""Classical linear systems and classical diffusions as commutative subsystems.

The second half embeds a scalar SDE

    dx = f~(x) dt + g(x) dw,    dY = h(x) dt + dv

on a uniform grid: ``q`` is the diagonal position operator and
``p = -i D`` with ``D`` the central-difference derivative (one-sided at the
two end points).  The embedded system is ``(1, L_c1, H_c) [+] (1, L_c2, 0)``
with

    L_c1 = -i g p - g'/2,   L_c2 = h/2,   H_c = (f p + p f)/2,
    f = f~ - g g'/2  (Stratonovich drift).

``D`` is not antisymmetric in its boundary rows, so ``H_c`` is Hermitian
only up to those rows; :attr:`GridEmbedding.hermiticity_defect` reports it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .hilbert import Operator, Registry, SpaceFactor, register_space
from .slh import SLH, concatenate


class ClassicalSystemError(ValueError):
    pass


@dataclass(frozen=True)
class ClassicalLinearSystem:
    """``dx = A x dt + B du``, ``dy = C x dt + D du``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=complex))
        ny, nu = D.shape
        A = np.asarray(self.A, dtype=complex)
        nx = A.shape[0] if A.size else 0
        A = A.reshape(nx, nx)
        B = np.asarray(self.B, dtype=complex).reshape(nx, nu)
        C = np.asarray(self.C, dtype=complex).reshape(ny, nx)
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def transfer(self, s: complex) -> np.ndarray:
        """``C (sI - A)^{-1} B + D``."""
        if self.n_states == 0:
            return self.D.copy()
        resolvent = np.linalg.solve(s * np.eye(self.n_states) - self.A, self.B)
        return self.C @ resolvent + self.D

    @classmethod
    def gain(cls, D) -> "ClassicalLinearSystem":
        """Static (memoryless) system."""
        D = np.atleast_2d(np.asarray(D, dtype=complex))
        return cls(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D)


def c_concatenate(g1: ClassicalLinearSystem, g2: ClassicalLinearSystem) -> ClassicalLinearSystem:
    def blk(a, b):
        out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]), dtype=complex)
        out[:a.shape[0], :a.shape[1]] = a
        out[a.shape[0]:, a.shape[1]:] = b
        return out
    return ClassicalLinearSystem(blk(g1.A, g2.A), blk(g1.B, g2.B), blk(g1.C, g2.C), blk(g1.D, g2.D))


def c_series(g2: ClassicalLinearSystem, g1: ClassicalLinearSystem) -> ClassicalLinearSystem:
    """Feed the output of ``g1`` into ``g2``; transfer function G2(s) G1(s)."""
    if g2.n_inputs != g1.n_outputs:
        raise ClassicalSystemError(
            f"series connection needs dim u2 == dim y1, got {g2.n_inputs} and {g1.n_outputs}")
    n1, n2 = g1.n_states, g2.n_states
    A = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    A[:n1, :n1] = g1.A
    A[n1:, :n1] = g2.B @ g1.C
    A[n1:, n1:] = g2.A
    B = np.vstack([g1.B, g2.B @ g1.D])
    C = np.hstack([g2.D @ g1.C, g2.C])
    return ClassicalLinearSystem(A, B, C, g2.D @ g1.D)


# grid embedding -------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    xmin: float
    xmax: float
    points: int

    def __post_init__(self):
        if self.points < 3:
            raise ClassicalSystemError("grid needs at least 3 points")
        if not self.xmax > self.xmin:
            raise ClassicalSystemError("grid needs xmax > xmin")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.xmin, self.xmax, self.points)

    @property
    def spacing(self) -> float:
        return (self.xmax - self.xmin) / (self.points - 1)


def derivative_matrix(grid: Grid) -> np.ndarray:
    """Central differences inside, first-order one-sided at the ends."""
    n, h = grid.points, grid.spacing
    D = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    D[idx, idx + 1] = 0.5 / h
    D[idx, idx - 1] = -0.5 / h
    D[0, 0], D[0, 1] = -1 / h, 1 / h
    D[-1, -2], D[-1, -1] = -1 / h, 1 / h
    return D


def second_derivative_matrix(grid: Grid) -> np.ndarray:
    """Compact three-point second difference (rows 0 and n-1 left zero)."""
    n, h = grid.points, grid.spacing
    D2 = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    D2[idx, idx - 1] = 1 / h**2
    D2[idx, idx] = -2 / h**2
    D2[idx, idx + 1] = 1 / h**2
    return D2


def _sample(fn, x: np.ndarray) -> np.ndarray:
    vals = fn(x) if callable(fn) else fn
    return np.broadcast_to(np.asarray(vals, dtype=float), x.shape).astype(float)


@dataclass(frozen=True)
class GridEmbedding:
    grid: Grid
    space: SpaceFactor
    q: Operator
    p: Operator
    L_c1: Operator
    L_c2: Operator
    H_c: Operator
    f_strat: np.ndarray
    g: np.ndarray
    h: np.ndarray

    @property
    def G_c1(self) -> SLH:
        return SLH([[1.0]], [self.L_c1], self.H_c, validate=False)

    @property
    def G_c2(self) -> SLH:
        return SLH([[1.0]], [self.L_c2], Operator.zero((self.space,)), validate=False)

    @property
    def triple(self) -> SLH:
        """``G_c1 [+] G_c2``: channel 0 drives the diffusion, channel 1 is the readout."""
        return concatenate(self.G_c1, self.G_c2)

    @property
    def hermiticity_defect(self) -> float:
        Hd = self.H_c.data
        return float(np.abs(Hd - Hd.conj().T).max())

    def function(self, phi) -> Operator:
        """Multiplication operator for a grid function (callable or samples)."""
        return Operator(np.diag(_sample(phi, self.grid.x)).astype(complex), (self.space,))

    def interior(self, margin: int = 3) -> np.ndarray:
        return np.arange(margin, self.grid.points - margin)


def embed_sde_grid(grid: Grid, f_tilde, g, h, label: str = "x",
                   registry: Registry | None = None, space: SpaceFactor | None = None) -> GridEmbedding:
    """Build the commutative-subsystem model of a scalar SDE on ``grid``."""
    x = grid.x
    if space is None:
        space = register_space(label, "generic", grid.points, registry)
    elif space.dim != grid.points:
        raise ClassicalSystemError("space dimension does not match grid size")
    D = derivative_matrix(grid)
    ft, gv, hv = _sample(f_tilde, x), _sample(g, x), _sample(h, x)
    dg = D @ gv
    f = ft - 0.5 * dg * gv
    p = -1j * D
    sig = (space,)
    q = Operator(np.diag(x).astype(complex), sig)
    P = Operator(p, sig)
    L1 = -1j * np.diag(gv) @ p - 0.5 * np.diag(dg)
    L2 = 0.5 * np.diag(hv).astype(complex)
    Hc = 0.5 * (np.diag(f) @ p + p @ np.diag(f))
    return GridEmbedding(grid, space, q, P, Operator(L1, sig), Operator(L2, sig), Operator(Hc, sig),
                         f, gv, hv)


def classical_generator(f_tilde, g, grid: Grid) -> Callable[[np.ndarray], np.ndarray]:
    """Finite-difference generator ``f~ phi' + g^2 phi'' / 2`` (Ito form).

    Uses the compact three-point second difference, so it shares no stencil
    with the embedded quantum generator.
    """
    x = grid.x
    ft, gv = _sample(f_tilde, x), _sample(g, x)
    D, D2 = derivative_matrix(grid), second_derivative_matrix(grid)

    def apply(phi) -> np.ndarray:
        v = _sample(phi, x)
        return ft * (D @ v) + 0.5 * gv**2 * (D2 @ v)

    return apply


def embedded_generator(emb: GridEmbedding, phi) -> np.ndarray:
    """Heisenberg drift of the multiplication operator ``phi(q)`` read as a function.

    The drift operator is applied to the constant function; for an exact
    multiplication operator that returns its symbol.
    """
    from .dynamics import heisenberg_generator
    drift = heisenberg_generator(emb.triple, emb.function(phi))
    return (drift.data @ np.ones(emb.grid.points)).real


def fokker_planck_matrix(f_tilde, g, grid: Grid) -> np.ndarray:
    """Central-difference ``-(f~ p)' + (g^2 p)''/2`` acting on grid probabilities."""
    x = grid.x
    ft, gv = _sample(f_tilde, x), _sample(g, x)
    D, D2 = derivative_matrix(grid), second_derivative_matrix(grid)
    return -D @ np.diag(ft) + 0.5 * D2 @ np.diag(gv**2)


def dmz_filter(f_tilde, g, h, grid: Grid, p0: np.ndarray, dy: np.ndarray, dt: float) -> np.ndarray:
    """Classical Duncan-Mortensen-Zakai filter on the grid.

    ``dp = FP(p) dt + h p dy`` with an RK4 drift step and Ito increment.
    Returns unnormalized grid weights for every time step (shape (steps+1, n)).
    """
    A = fokker_planck_matrix(f_tilde, g, grid)
    hv = _sample(h, grid.x)
    p = np.asarray(p0, dtype=float).copy()
    out = np.empty((len(dy) + 1, len(p)))
    out[0] = p
    for k, inc in enumerate(dy):
        k1 = A @ p
        k2 = A @ (p + 0.5 * dt * k1)
        k3 = A @ (p + 0.5 * dt * k2)
        k4 = A @ (p + dt * k3)
        p = p + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4) + hv * p * inc
        out[k + 1] = p
    return out


def euler_maruyama(f_tilde, g, x0: float, dt: float, steps: int, paths: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Terminal values of ``paths`` Euler-Maruyama samples of the scalar SDE."""
    x = np.full(paths, float(x0))
    for _ in range(steps):
        dw = rng.normal(0.0, np.sqrt(dt), size=paths)
        x = x + _sample(f_tilde, x) * dt + _sample(g, x) * dw
    return x
