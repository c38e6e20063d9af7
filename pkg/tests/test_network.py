import numpy as np
import numpy.testing as npt
import pytest

from slhnet import SLH, NetworkError, NetworkSpec, Registry, annihilation, number, reduce, series
from slhnet.slh import concatenate, concatenate_all

from helpers import random_slh, spaces


@pytest.fixture
def two_cavities():
    reg = Registry()
    c1, c2 = reg.register("c1", "fock", 3), reg.register("c2", "fock", 3)
    a1, a2 = annihilation(c1), annihilation(c2)
    return (SLH([[1]], [a1], 0.5 * number(c1)), SLH([[1]], [0.7 * a2], number(c2)), a1, a2)


def test_cascade_of_two_cavities(two_cavities):
    C1, C2, a1, a2 = two_cavities
    spec = NetworkSpec().add_component("C1", C1).add_component("C2", C2)
    spec.add_connection("C1", "C2")
    red = reduce(spec)
    assert red.chain_report["chains"] == [["C1", "C2"]]
    assert red.triple.allclose(series(C2, C1))
    L = red.triple.L.data[0, 0]
    npt.assert_allclose(L, a1.embed(red.triple.signature).data + 0.7 * a2.embed(red.triple.signature).data)


def test_unconnected_before_chains(two_cavities):
    C1, C2, *_ = two_cavities
    spec = NetworkSpec()
    spec.add_component("A", C1).add_component("B", SLH.identity(1)).add_component("C", C2)
    spec.add_connection("B", "C")
    red = reduce(spec)
    assert red.chain_report["unconnected"] == ["A"]
    assert red.chain_report["channels"] == [["A", 0], ["B -> C", 0]]
    assert red.triple.allclose(concatenate(C1, series(C2, SLH.identity(1))))


def test_connection_errors(two_cavities):
    C1, C2, *_ = two_cavities
    spec = NetworkSpec().add_component("A", C1).add_component("B", C2)
    with pytest.raises(NetworkError):
        spec.add_component("A", C2)
    with pytest.raises(NetworkError, match="unknown"):
        spec.add_connection("A", "Z")
    with pytest.raises(NetworkError, match="non-reducible"):
        spec.add_connection("A", "A")
    spec.add_connection("A", "B")
    with pytest.raises(NetworkError, match="loop"):
        spec.add_connection("B", "A")
    spec.add_component("D", SLH.identity(2))
    with pytest.raises(NetworkError, match="mismatch"):
        spec.add_connection("B", "D")
    spec.add_component("E", SLH.identity(1))
    with pytest.raises(NetworkError, match="already"):
        spec.add_connection("A", "E")


def test_direct_coupling_hamiltonian(two_cavities):
    C1, C2, a1, a2 = two_cavities
    spec = NetworkSpec().add_component("A", C1).add_component("B", C2)
    spec.add_direct_coupling(0.3 * a1, a2)
    red = reduce(spec)
    K = 1j * 0.3 * (a2.dag() * a1 - a1.dag() * a2)
    sig = red.triple.signature
    expected_H = C1.H.embed(sig) + C2.H.embed(sig) + K.embed(sig)
    npt.assert_allclose(red.triple.H.data, expected_H.data, atol=1e-14)
    assert red.triple.hermiticity_error() < 1e-14


def test_random_network_matches_manual_assembly():
    rng = np.random.default_rng(11)
    sig = spaces([2, 2])
    G = {k: random_slh(2, sig[:1] if k in "AB" else sig[1:], rng) for k in "ABCD"}
    spec = NetworkSpec()
    for k, g in G.items():
        spec.add_component(k, g)
    spec.add_connection("B", "D")
    spec.add_connection("D", "A")
    red = reduce(spec)
    manual = concatenate_all([G["C"], series(G["A"], series(G["D"], G["B"]))])
    assert red.triple.max_abs_diff(manual) < 1e-12
    assert red.chain_report["chains"] == [["B", "D", "A"]]


def test_empty_network():
    red = reduce(NetworkSpec())
    assert red.n == 0
