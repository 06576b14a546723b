"""Sparse vector engine: inner products, Gram matrices, reduced density."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haltlab.hilbert import (
    DensityMatrix,
    HilbertError,
    SparseState,
    gram,
    inner_product,
    reduced_density,
)

INV_SQRT2 = 2**-0.5


def test_inner_product_of_normalized_state_is_one():
    x = SparseState({"a": INV_SQRT2, "b": INV_SQRT2 * 1j})
    val = inner_product(x, x)
    assert val.imag == 0.0
    assert val.real == pytest.approx(1.0, abs=1e-15)


def test_inner_product_disjoint_support_is_zero():
    x = SparseState({"a": 1.0})
    y = SparseState({"b": 1.0})
    assert inner_product(x, y) == 0j


def test_inner_product_hadamard_pair_is_zero():
    x = SparseState({"a": INV_SQRT2, "b": INV_SQRT2})
    y = SparseState({"a": INV_SQRT2, "b": -INV_SQRT2})
    assert abs(inner_product(x, y)) < 1e-16


def test_inner_product_sesquilinear():
    x = SparseState({1: 0.3 + 0.4j, 2: -0.5j})
    y = SparseState({1: 1.0, 2: 0.2 - 0.1j})
    a, b = 0.7 - 0.2j, -1.1 + 0.4j
    lhs = inner_product(x.scaled(a), y.scaled(b))
    rhs = a.conjugate() * b * inner_product(x, y)
    assert abs(lhs - rhs) < 1e-14


def test_sparse_state_accumulates_and_prunes():
    s = SparseState([("a", 0.5), ("a", -0.5), ("b", 1e-16), ("c", 2.0)])
    assert s.labels() == ["c"]
    assert s.amplitude("a") == 0j


def test_sparse_state_rejects_non_finite():
    with pytest.raises(HilbertError):
        SparseState({"a": complex("nan")})
    with pytest.raises(HilbertError):
        SparseState({"a": complex("inf")})


def test_normalize_zero_state_fails():
    with pytest.raises(HilbertError):
        SparseState().normalized()


def test_gram_of_orthonormal_basis_is_identity():
    basis = [SparseState.basis(i) for i in range(3)]
    g = gram(basis)
    assert np.max(np.abs(g - np.eye(3))) == 0.0


def test_gram_of_repeated_unit_vector_is_all_ones():
    v = SparseState({"x": INV_SQRT2, "y": INV_SQRT2})
    g = gram([v, v])
    assert np.max(np.abs(g - np.ones((2, 2)))) < 1e-15


def test_gram_requires_nonempty_list():
    with pytest.raises(HilbertError):
        gram([])


def _split_pair(label):
    return label[0], label[1]


def test_reduced_density_product_state_is_pure():
    state = SparseState({("c", "e"): 1.0})
    rho = reduced_density(state, _split_pair)
    assert rho.labels == ("c",)
    assert rho.matrix[0, 0] == pytest.approx(1.0)


def test_reduced_density_orthogonal_environments_decohere():
    state = SparseState({("c1", "e1"): INV_SQRT2, ("c2", "e2"): INV_SQRT2})
    rho = reduced_density(state, _split_pair)
    mat = rho.matrix
    assert mat[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert mat[1, 1] == pytest.approx(0.5, abs=1e-15)
    assert abs(mat[0, 1]) == 0.0


def test_reduced_density_shared_environment_keeps_coherence():
    state = SparseState({("c1", "e"): INV_SQRT2, ("c2", "e"): INV_SQRT2})
    rho = reduced_density(state, _split_pair)
    assert rho.entry("c1", "c2") == pytest.approx(0.5, abs=1e-15)


def test_reduced_density_identity_projection_gives_projector():
    state = SparseState({"a": 0.6, "b": 0.8j})
    rho = reduced_density(state, lambda l: (l, None))
    vec = np.array([0.6, 0.8j])
    assert np.max(np.abs(rho.matrix - np.outer(vec, vec.conj()))) < 1e-15


def test_reduced_density_rejects_zero_state():
    with pytest.raises(HilbertError):
        reduced_density(SparseState(), _split_pair)


def test_reduced_density_trace_matches_squared_norm_unnormalized():
    state = SparseState({("c1", "e1"): 1.5, ("c2", "e2"): -2.0j, ("c1", "e3"): 0.25})
    rho = reduced_density(state, _split_pair)
    assert rho.trace == pytest.approx(state.norm_squared(), abs=1e-12)


def test_density_matrix_rejects_non_hermitian():
    with pytest.raises(HilbertError):
        DensityMatrix(("a", "b"), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_density_matrix_rejects_negative():
    with pytest.raises(HilbertError):
        DensityMatrix(("a", "b"), np.array([[1.0, 0.0], [0.0, -1e-6]]))


# -- property tests ---------------------------------------------------------

amplitudes = st.complex_numbers(
    min_magnitude=0.0, max_magnitude=3.0, allow_nan=False, allow_infinity=False
)
states = st.dictionaries(st.integers(0, 12), amplitudes, min_size=1, max_size=8).map(SparseState)


@given(states, states)
@settings(max_examples=200)
def test_cauchy_schwarz(x, y):
    lhs = abs(inner_product(x, y)) ** 2
    rhs = x.norm_squared() * y.norm_squared()
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


@given(st.lists(states, min_size=1, max_size=5))
@settings(max_examples=100)
def test_gram_is_hermitian_psd(vectors):
    g = gram(vectors)
    assert np.max(np.abs(g - g.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(g).min() >= -1e-10


@given(states)
@settings(max_examples=100)
def test_norm_matches_self_inner_product(x):
    ip = inner_product(x, x)
    assert abs(ip.imag) < 1e-12
    assert math.isclose(ip.real, x.norm_squared(), rel_tol=1e-12, abs_tol=1e-12)
