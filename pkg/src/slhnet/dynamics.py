"""Reduced dynamics of an SLH system.

Heisenberg-picture generators, the master equation, output-field moments
and the unnormalized (Zakai) quantum filter for homodyne detection of one
output channel.  Integration is fixed-step classical RK4; a practical
stability rule of thumb is ``dt * ||generator|| < 0.1``.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .hilbert import Operator, OperatorMatrix, SpaceFactor, as_operator, commutator, unify
from .slh import SLH


class NumericalError(RuntimeError):
    """Integration left its validity range (trace drift, divergence)."""


# Heisenberg picture -----------------------------------------------------------

def _on(g: SLH, X) -> tuple[SLH, Operator]:
    X = as_operator(X)
    sig = unify(g.signature, X.signature)
    if g.signature != sig:
        g = g.embed(sig)
    return g, X.embed(sig)


def lindblad_heisenberg(g: SLH, X) -> Operator:
    """``sum_j (L_j^dag [X, L_j] + [L_j^dag, X] L_j) / 2``."""
    g, X = _on(g, X)
    x = X.data
    out = np.zeros_like(x)
    for L in g.L.data[:, 0]:
        Ld = L.conj().T
        out += 0.5 * (Ld @ (x @ L - L @ x) + (Ld @ x - x @ Ld) @ L)
    return Operator(out, X.signature)


def heisenberg_generator(g: SLH, X) -> Operator:
    """Drift of dX: ``L_L(X) - i[X, H]``."""
    g, X = _on(g, X)
    return lindblad_heisenberg(g, X) - 1j * commutator(X, g.H)


@dataclass(frozen=True)
class HeisenbergCoefficients:
    """Coefficients of dX = drift dt + dA^dag . c_dag + c . dA + tr(gauge dLambda)."""

    drift: Operator
    dA_dagger_coeff: OperatorMatrix  # n x 1, S^dag [X, L]
    dA_coeff: OperatorMatrix         # 1 x n, [L^dag, X] S
    gauge_coeff: OperatorMatrix      # n x n, S^dag X S - X


def heisenberg_coefficients(g: SLH, X) -> HeisenbergCoefficients:
    g, X = _on(g, X)
    sig, n = X.signature, g.n
    Xd = X.data
    XI = OperatorMatrix(np.einsum("ij,ab->ijab", np.eye(n), Xd), sig)
    comm_XL = OperatorMatrix(np.einsum("ab,ijbc->ijac", Xd, g.L.data)
                             - np.einsum("ijab,bc->ijac", g.L.data, Xd), sig)
    Ld = g.L.dagger()
    comm_LdX = OperatorMatrix(np.einsum("ijab,bc->ijac", Ld.data, Xd)
                              - np.einsum("ab,ijbc->ijac", Xd, Ld.data), sig)
    return HeisenbergCoefficients(
        drift=heisenberg_generator(g, X),
        dA_dagger_coeff=g.S.dagger() @ comm_XL,
        dA_coeff=comm_LdX @ g.S,
        gauge_coeff=g.S.dagger() @ XI @ g.S - XI,
    )


# Schrodinger picture -----------------------------------------------------------

def _density(rho, dim: int) -> np.ndarray:
    r = rho.data if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    if r.shape != (dim, dim):
        raise ValueError(f"density has shape {r.shape}, system dimension is {dim}")
    return r


def _master_terms(g: SLH):
    H = g.H.data
    Ls = [L for L in g.L.data[:, 0]]
    LdL = sum((L.conj().T @ L for L in Ls), np.zeros_like(H))
    return H, Ls, LdL


def _master_apply(rho: np.ndarray, H, Ls, LdL) -> np.ndarray:
    out = 1j * (rho @ H - H @ rho)
    for L in Ls:
        out += L @ rho @ L.conj().T
    out -= 0.5 * (LdL @ rho + rho @ LdL)
    return out


def master_rhs(g: SLH, rho) -> np.ndarray:
    """``i[rho, H] + sum_j (L_j rho L_j^dag - {L_j^dag L_j, rho}/2)``.

    ``S`` does not enter.
    """
    return _master_apply(_density(rho, g.dim), *_master_terms(g))


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray | None = None
    expectations: dict[str, np.ndarray] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def to_csv(self, fh=None) -> str:
        """Columns: t, extra columns, then ``re[name], im[name]`` per observable."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.expectations)
        extras = list(self.extra)
        w.writerow(["t", *extras, *[f"{p}[{n}]" for n in names for p in ("re", "im")]])
        for k, t in enumerate(self.times):
            row = [repr(float(t))]
            row += [repr(float(np.real(self.extra[e][k]))) for e in extras]
            for n in names:
                v = complex(self.expectations[n][k])
                row += [repr(v.real), repr(v.imag)]
            w.writerow(row)
        return buf.getvalue() if fh is None else ""


def _time_grid(dt: float, T: float) -> np.ndarray:
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    steps = int(round(T / dt))
    return np.arange(steps + 1) * dt


def _observables(g: SLH, observables: Mapping[str, Operator] | None) -> dict[str, np.ndarray]:
    out = {}
    for name, op in (observables or {}).items():
        op = as_operator(op)
        if op.signature != g.signature:
            op = op.embed(unify(g.signature, op.signature))
            if op.signature != g.signature:
                raise ValueError(f"observable {name!r} acts outside the system")
        out[name] = op.data
    return out


def evolve_master(g: SLH, rho0, dt: float, T: float,
                  observables: Mapping[str, Operator] | None = None,
                  store_states: bool = True, trace_tol: float = 1e-6) -> Trajectory:
    times = _time_grid(dt, T)
    terms = _master_terms(g)
    obs = _observables(g, observables)
    rho = _density(rho0, g.dim).copy()
    tr0 = np.trace(rho).real
    states = np.empty((len(times),) + rho.shape, dtype=complex) if store_states else None
    exps = {k: np.empty(len(times), dtype=complex) for k in obs}

    def rhs(r):
        return _master_apply(r, *terms)

    for k in range(len(times)):
        if k:
            rho = _rk4_step(rhs, rho, dt)
            drift = abs(np.trace(rho).real - tr0)
            if drift > trace_tol or not np.all(np.isfinite(rho)):
                raise NumericalError(
                    f"trace drift {drift:.3e} at t={times[k]:.6g}; reduce dt (dt*||generator|| < 0.1)")
        if states is not None:
            states[k] = rho
        for name, X in obs.items():
            exps[name][k] = np.trace(rho @ X)
    return Trajectory(times, states, exps)


def output_moments(g: SLH, rho) -> list[dict[str, float]]:
    """Per channel: homodyne rate <L_j + L_j^dag> and photon flux <L_j^dag L_j>."""
    r = _density(rho, g.dim)
    out = []
    for L in g.L.data[:, 0]:
        quad = np.trace(r @ (L + L.conj().T)).real
        flux = np.trace(r @ (L.conj().T @ L)).real
        out.append({"quadrature_rate": float(quad), "photon_flux": float(flux)})
    return out


# states -----------------------------------------------------------------------

def basis_state(space: SpaceFactor, n: int) -> np.ndarray:
    if not 0 <= n < space.dim:
        raise ValueError(f"level {n} outside space {space.label!r} of dim {space.dim}")
    v = np.zeros(space.dim, dtype=complex)
    v[n] = 1
    return v


def coherent_state(space: SpaceFactor, alpha: complex) -> np.ndarray:
    """Truncated displacement of the vacuum, renormalized."""
    from .hilbert import annihilation
    a = annihilation(space).data
    D = expm(alpha * a.conj().T - np.conj(alpha) * a)
    v = D[:, 0]
    return v / np.linalg.norm(v)


def product_state(signature: Sequence[SpaceFactor], vectors: Mapping[str, np.ndarray]) -> np.ndarray:
    """Density operator of a product of pure states (ground state where unspecified)."""
    psi = np.ones(1, dtype=complex)
    for f in signature:
        v = vectors.get(f.label)
        if v is None:
            v = basis_state(f, 0)
        psi = np.kron(psi, v)
    return np.outer(psi, psi.conj())


# filtering ------------------------------------------------------------------

def _channel_op(g: SLH, channel: int) -> np.ndarray:
    if not 0 <= channel < g.n:
        raise ValueError(f"channel {channel} outside 0..{g.n - 1}")
    return g.L.data[channel, 0]


def evolve_zakai(g: SLH, channel: int, rho0, dy: np.ndarray, dt: float,
                 observables: Mapping[str, Operator] | None = None,
                 store_states: bool = False) -> Trajectory:
    """Unnormalized filter for homodyne detection of ``channel``.

    d rho = (i[rho, H] + L'(rho)) dt + (L_m rho + rho L_m^dag) dy,

    integrated with an RK4 step for the drift and an Ito (left-point)
    increment for the record.  Expectations in ``expectations`` are the
    unnormalized ``sigma_t(X)``; ``extra['norm']`` holds ``sigma_t(1)`` and
    the normalized estimate is their ratio.
    """
    dy = np.asarray(dy, dtype=float)
    Lm = _channel_op(g, channel)
    Lmd = Lm.conj().T
    terms = _master_terms(g)
    obs = _observables(g, observables)
    rho = _density(rho0, g.dim).copy()
    nsteps = len(dy)
    times = np.arange(nsteps + 1) * dt
    states = np.empty((nsteps + 1,) + rho.shape, dtype=complex) if store_states else None
    exps = {k: np.empty(nsteps + 1, dtype=complex) for k in obs}
    norm = np.empty(nsteps + 1)

    def rhs(r):
        return _master_apply(r, *terms)

    for k in range(nsteps + 1):
        if k:
            innov = Lm @ rho + rho @ Lmd
            rho = _rk4_step(rhs, rho, dt) + innov * dy[k - 1]
            if not np.all(np.isfinite(rho)):
                raise NumericalError(f"filter diverged at t={times[k]:.6g}")
        if states is not None:
            states[k] = rho
        norm[k] = np.trace(rho).real
        for name, X in obs.items():
            exps[name][k] = np.trace(rho @ X)
    return Trajectory(times, states, exps, {"norm": norm})


def normalized(traj: Trajectory) -> dict[str, np.ndarray]:
    """``pi_t(X) = sigma_t(X) / sigma_t(1)`` for every recorded observable."""
    return {k: v / traj.extra["norm"] for k, v in traj.expectations.items()}


def task_rng(seed: int, task: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(task)])


def simulate_record(g: SLH, channel: int, rho0, dt: float, T: float, seed: int,
                    task: int = 0) -> np.ndarray:
    """Sample homodyne increments ``dy = <L_m + L_m^dag> dt + dW`` from the model.

    The conditional state follows the normalized diffusive stochastic master
    equation (Euler-Maruyama, RK4 for the deterministic part).
    """
    nsteps = len(_time_grid(dt, T)) - 1
    rng = task_rng(seed, task)
    dW = rng.normal(0.0, np.sqrt(dt), size=nsteps)
    Lm = _channel_op(g, channel)
    Lmd = Lm.conj().T
    terms = _master_terms(g)
    rho = _density(rho0, g.dim).copy()
    dy = np.empty(nsteps)

    def rhs(r):
        return _master_apply(r, *terms)

    for k in range(nsteps):
        mean = np.trace(rho @ (Lm + Lmd)).real
        dy[k] = mean * dt + dW[k]
        innov = Lm @ rho + rho @ Lmd - mean * rho
        rho = _rk4_step(rhs, rho, dt) + innov * dW[k]
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
        if not np.all(np.isfinite(rho)):
            raise NumericalError(f"record simulation diverged at step {k}")
    return dy


def reference_record(dt: float, T: float, seed: int, task: int = 0) -> np.ndarray:
    """Pure Wiener increments (the record under the reference measure)."""
    nsteps = len(_time_grid(dt, T)) - 1
    return task_rng(seed, task).normal(0.0, np.sqrt(dt), size=nsteps)


def worker_count() -> int:
    env = os.environ.get("SLHNET_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def run_tasks(fn: Callable[[int], object], n: int) -> list:
    """Run ``fn(0..n-1)`` on a thread pool; results keep task order."""
    workers = min(worker_count(), max(n, 1))
    if workers == 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))
