import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from slhnet import SLH, HolevoError, HolevoGenerator, Operator, holevo_to_slh, photon_feedback, quadrature_feedback, series
from slhnet.holevo import phi_functions_series, phi_functions_spectral

from helpers import random_hermitian, random_matrix, spaces


def test_scalar_generator_closed_form():
    """Scalar H11 = h: S = e^{-ih}, L = (e^{-ih} - 1) H10 / h, H = H00 - |H10|^2 (h - sin h)/h^2."""
    h, h10, h00 = 0.9, 0.3 - 0.2j, 0.4
    K = HolevoGenerator(Operator.scalar(h00), Operator.scalar(np.conj(h10)),
                        Operator.scalar(h10), Operator.scalar(h))
    g = holevo_to_slh(K)
    assert g.S.data[0, 0, 0, 0] == pytest.approx(np.exp(-1j * h))
    assert g.L.data[0, 0, 0, 0] == pytest.approx((np.exp(-1j * h) - 1) / h * h10)
    assert g.H.data[0, 0].real == pytest.approx(h00 - abs(h10) ** 2 * (h - np.sin(h)) / h**2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.floats(1e-3, 40.0), st.integers(0, 2**32 - 1))
def test_two_evaluation_routes_agree(d, scale, seed):
    rng = np.random.default_rng(seed)
    A = random_hermitian(d, rng)
    A *= scale / max(np.linalg.norm(A, 2), 1e-12)
    for x, y in zip(phi_functions_spectral(A), phi_functions_series(A)):
        npt.assert_allclose(x, y, atol=1e-9)
    npt.assert_allclose(phi_functions_spectral(A)[0], expm(-1j * A), atol=1e-12)


def test_continuity_at_removable_singularity():
    rng = np.random.default_rng(2)
    (s,) = spaces([3])
    B = random_matrix(3, rng)
    eps = 1e-6
    at_zero = holevo_to_slh(HolevoGenerator(Operator.zero((s,)), Operator(B.conj().T, (s,)),
                                            Operator(B, (s,)), Operator.zero((s,))))
    near = holevo_to_slh(HolevoGenerator(Operator.zero((s,)), Operator(B.conj().T, (s,)),
                                         Operator(B, (s,)), Operator(eps * np.eye(3), (s,))))
    assert near.max_abs_diff(at_zero) < 10 * eps * np.abs(B).max() ** 2
    npt.assert_allclose(at_zero.L.data[0, 0], -1j * B, atol=1e-15)


def test_generator_checks():
    (s,) = spaces([2])
    z = Operator.zero((s,))
    nonherm = Operator(np.array([[0, 1], [0, 0]], complex), (s,))
    with pytest.raises(HolevoError):
        holevo_to_slh(HolevoGenerator(nonherm, z, z, z))
    with pytest.raises(HolevoError):
        holevo_to_slh(HolevoGenerator(z, nonherm, nonherm, z))  # H01 != H10^dag
    with pytest.raises(HolevoError):
        photon_feedback(nonherm)


def test_feedback_forms():
    rng = np.random.default_rng(4)
    (s,) = spaces([4])
    F = Operator(random_hermitian(4, rng), (s,))
    g = photon_feedback(F)
    npt.assert_allclose(g.S.data[0, 0], expm(-1j * F.data), atol=1e-12)
    npt.assert_allclose(g.L.data, 0, atol=1e-15)
    npt.assert_allclose(g.H.data, 0, atol=1e-15)
    q = quadrature_feedback(F)
    npt.assert_allclose(q.S.data[0, 0], np.eye(4), atol=1e-15)
    npt.assert_allclose(q.L.data[0, 0], -1j * F.data, atol=1e-15)
    npt.assert_allclose(q.H.data, 0, atol=1e-15)


def test_series_route_gives_same_triple():
    rng = np.random.default_rng(8)
    (s,) = spaces([3])
    B = Operator(random_matrix(3, rng), (s,))
    K = HolevoGenerator(Operator(random_hermitian(3, rng), (s,)), B.dag(), B,
                        Operator(random_hermitian(3, rng, 3.0), (s,)))
    assert holevo_to_slh(K).max_abs_diff(holevo_to_slh(K, method="series")) < 1e-9
