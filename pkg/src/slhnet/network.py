"""Reducible networks: components, series connections and direct couplings."""
from __future__ import annotations

from dataclasses import dataclass, field

from .hilbert import Operator, as_operator, unify
from .slh import SLH, concatenate_all, series_chain


class NetworkError(ValueError):
    pass


@dataclass
class NetworkSpec:
    """Named components plus whole-component series connections.

    Each component output feeds at most one input and each input receives
    at most one output; connections must not close a loop.
    """

    components: dict[str, SLH] = field(default_factory=dict)
    connections: list[tuple[str, str]] = field(default_factory=list)
    couplings: list[tuple[Operator, Operator]] = field(default_factory=list)

    def add_component(self, name: str, g: SLH) -> "NetworkSpec":
        if name in self.components:
            raise NetworkError(f"duplicate component name {name!r}")
        self.components[name] = g
        return self

    def _downstream(self) -> dict[str, str]:
        return dict(self.connections)

    def _upstream(self) -> dict[str, str]:
        return {dst: src for src, dst in self.connections}

    def add_connection(self, src: str, dst: str) -> "NetworkSpec":
        """Feed every output channel of ``src`` into ``dst``."""
        for name in (src, dst):
            if name not in self.components:
                raise NetworkError(f"unknown component {name!r}")
        if src == dst:
            raise NetworkError(
                f"self-loop {src!r} -> {dst!r}: algebraic loops make the network non-reducible")
        n_src, n_dst = self.components[src].n, self.components[dst].n
        if n_src != n_dst:
            raise NetworkError(f"channel mismatch: {src!r} has {n_src} outputs, {dst!r} has {n_dst} inputs")
        down, up = self._downstream(), self._upstream()
        if src in down:
            raise NetworkError(f"output of {src!r} is already connected to {down[src]!r}")
        if dst in up:
            raise NetworkError(f"input of {dst!r} is already fed by {up[dst]!r}")
        # walking downstream from dst must not reach src
        node = dst
        while node in down:
            node = down[node]
            if node == src:
                raise NetworkError(
                    f"connecting {src!r} -> {dst!r} closes a loop; the network would not be reducible")
        self.connections.append((src, dst))
        return self

    def add_direct_coupling(self, M, N) -> "NetworkSpec":
        self.couplings.append((as_operator(M), as_operator(N)))
        return self

    def coupling_hamiltonian(self) -> Operator:
        """``K = i sum_k (N_k^dag M_k - M_k^dag N_k)``; self-adjoint by construction."""
        sig = unify(*(g.signature for g in self.components.values()),
                    *(op.signature for pair in self.couplings for op in pair))
        K = Operator.zero(sig)
        for M, N in self.couplings:
            K = K + 1j * (N.adjoint() * M - M.adjoint() * N)
        return K

    def chains(self) -> list[list[str]]:
        """Maximal series chains, upstream first, ordered by their head's registration."""
        down, up = self._downstream(), self._upstream()
        out = []
        for name in self.components:
            if name in down and name not in up:
                chain = [name]
                while chain[-1] in down:
                    chain.append(down[chain[-1]])
                out.append(chain)
        return out

    def unconnected(self) -> list[str]:
        linked = {n for pair in self.connections for n in pair}
        return [n for n in self.components if n not in linked]


@dataclass(frozen=True)
class ReducedNetwork:
    triple: SLH
    chain_report: dict

    @property
    def n(self) -> int:
        return self.triple.n


def reduce(spec: NetworkSpec) -> ReducedNetwork:
    """Collapse a reducible network into one triple.

    Channel order: unconnected components (registration order), then maximal
    chains (by the registration order of their most upstream member), then
    the zero-channel coupling Hamiltonian.
    """
    if not spec.components and not spec.couplings:
        return ReducedNetwork(SLH.identity(0), {"unconnected": [], "chains": [], "channels": []})
    sig = unify(*(g.signature for g in spec.components.values()),
                *(op.signature for pair in spec.couplings for op in pair))
    unconnected = spec.unconnected()
    chains = spec.chains()
    parts, channel_map = [], []
    for name in unconnected:
        g = spec.components[name]
        parts.append(g)
        channel_map += [[name, k] for k in range(g.n)]
    for chain in chains:
        g = series_chain(*(spec.components[n] for n in reversed(chain)))
        parts.append(g)
        channel_map += [[" -> ".join(chain), k] for k in range(g.n)]
    K = spec.coupling_hamiltonian().embed(sig)
    parts.append(SLH.hamiltonian_only(K))
    triple = concatenate_all(parts, sig)
    report = {
        "unconnected": unconnected,
        "chains": chains,
        "channels": channel_map,
        "order": "unconnected components in registration order, then maximal chains "
                 "ordered by their most upstream component",
    }
    return ReducedNetwork(triple, report)
