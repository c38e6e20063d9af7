import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from slhnet import (
    HilbertSpaceError,
    Operator,
    OperatorMatrix,
    Registry,
    annihilation,
    commutator,
    creation,
    identity,
    number,
)
from slhnet.hilbert import check_unitary, unify

from helpers import random_matrix, spaces


@pytest.fixture
def reg():
    return Registry()


def test_registration_order_defines_tensor_order(reg):
    b = reg.register("b", "fock", 3)
    a = reg.register("a", "fock", 2)
    assert unify((a,), (b,)) == (b, a)
    op = annihilation(a) * annihilation(b)
    expected = np.kron(annihilation(b).data, annihilation(a).data)
    npt.assert_allclose(op.data, expected)
    assert op.signature == (b, a)


def test_duplicate_label_rejected(reg):
    reg.register("c", "fock", 4)
    with pytest.raises(HilbertSpaceError):
        reg.register("c", "fock", 5)


def test_truncated_ccr(reg):
    c = reg.register("c", "fock", 6)
    comm = commutator(annihilation(c), creation(c)).data
    expected = np.eye(6)
    expected[-1, -1] = 1 - 6
    npt.assert_allclose(comm, expected, atol=1e-14)
    npt.assert_allclose(number(c).data, np.diag(np.arange(6)), atol=1e-14)


def test_scalars_embed_as_multiples_of_identity(reg):
    c = reg.register("c", "fock", 3)
    op = 2.0 + annihilation(c)
    npt.assert_allclose(op.data, 2 * np.eye(3) + annihilation(c).data)
    assert (identity(c) * 0.5).allclose(Operator.scalar(0.5).embed((c,)))


def test_adjoint_and_hermiticity(reg):
    c = reg.register("c", "fock", 4)
    a = annihilation(c)
    assert a.adjoint().allclose(creation(c))
    assert (a.dag() * a).is_hermitian()
    assert not a.is_hermitian()


def test_non_fock_ladder_rejected(reg):
    g = reg.register("g", "generic", 3)
    with pytest.raises(HilbertSpaceError):
        annihilation(g)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_embedding_is_an_algebra_homomorphism(d1, d2, seed):
    rng = np.random.default_rng(seed)
    s1, s2 = spaces([d1, d2])
    x = Operator(random_matrix(d1, rng), (s1,))
    y = Operator(random_matrix(d1, rng), (s1,))
    z = Operator(random_matrix(d2, rng), (s2,))
    big = (s1, s2)
    npt.assert_allclose((x * y).embed(big).data, (x.embed(big) * y.embed(big)).data, atol=1e-12)
    # operators on different factors commute
    npt.assert_allclose(commutator(x, z).data, 0, atol=1e-12)
    assert (x + z).signature == big


def test_operator_matrix_block_roundtrip():
    rng = np.random.default_rng(3)
    (s,) = spaces([3])
    block = random_matrix(6, rng)
    m = OperatorMatrix.from_block(block, 2, 2, (s,))
    npt.assert_array_equal(m.block(), block)
    npt.assert_allclose(m.dagger().block(), block.conj().T)


def test_check_unitary_flags_non_unitary():
    assert not check_unitary(OperatorMatrix.from_entries([[1, 0.5], [0, 1]]))
    assert check_unitary(OperatorMatrix.identity(3))
