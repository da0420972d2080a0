import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eomqsd import (MECHANICAL, MICROWAVE, OPTICAL, CapacityError, InvalidBasisError,
                    StateVector, UnknownModeError, apply_ladder, expectation_number,
                    fock_state, make_basis, partial_trace, tensor_product_state)
from eomqsd.states import coherent_state

from oracles import dense_lowering

cutoff_lists = st.lists(st.integers(2, 5), min_size=1, max_size=3)


def random_state(basis, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=basis.total_dim) + 1j * rng.normal(size=basis.total_dim)
    return StateVector(basis, v / np.linalg.norm(v))


def test_total_dim_examples():
    assert make_basis([2, 2]).total_dim == 4
    assert make_basis([8, 8, 8]).total_dim == 512


def test_flat_index_example():
    b = make_basis([2, 2, 2])
    assert b.flat_index((1, 0, 1)) == 5
    assert b.modes == (MICROWAVE, MECHANICAL, OPTICAL)


def test_basis_errors():
    with pytest.raises(InvalidBasisError):
        make_basis([1, 4])
    with pytest.raises(CapacityError):
        make_basis([1000, 1000, 1000])
    with pytest.raises(UnknownModeError):
        make_basis([2, 2]).mode_index(OPTICAL)
    with pytest.raises(InvalidBasisError):
        make_basis([2, 2]).flat_index((2, 0))


@given(cutoff_lists)
def test_index_round_trip(cutoffs):
    b = make_basis(cutoffs)
    for k in range(b.total_dim):
        assert b.flat_index(b.occupation(k)) == k


@settings(max_examples=30, deadline=None)
@given(cutoff_lists, st.integers(0, 2), st.integers(0, 2**31))
def test_ladders_match_dense_matrices(cutoffs, m, seed):
    m = m % len(cutoffs)
    b = make_basis(cutoffs)
    psi = random_state(b, seed)
    a = dense_lowering(cutoffs, m)
    low = apply_ladder(m, "lower", psi).amplitudes
    up = apply_ladder(m, "raise", psi).amplitudes
    np.testing.assert_allclose(low, a @ psi.amplitudes, atol=1e-12)
    np.testing.assert_allclose(up, a.conj().T @ psi.amplitudes, atol=1e-12)


def test_raise_then_lower_below_top():
    b = make_basis([5, 3])
    for k in range(b.total_dim):
        occ = b.occupation(k)
        if occ[0] == 4:
            continue
        v = np.zeros(b.total_dim, complex)
        v[k] = 1.0
        out = apply_ladder(0, "lower", apply_ladder(0, "raise", StateVector(b, v)))
        np.testing.assert_allclose(out.amplitudes, (occ[0] + 1) * v, atol=1e-12)


def test_raise_from_top_is_truncated():
    b = make_basis([3])
    out = apply_ladder(0, "raise", StateVector(b, fock_state(2, 3)))
    assert np.all(out.amplitudes == 0)


def test_commutator_on_low_states():
    b = make_basis([12])
    psi = StateVector(b, coherent_state(1.0, 12))
    assert abs(psi.amplitudes[-1]) ** 2 < 1e-8
    ad_a = apply_ladder(0, "raise", apply_ladder(0, "lower", psi)).amplitudes
    a_ad = apply_ladder(0, "lower", apply_ladder(0, "raise", psi)).amplitudes
    assert np.vdot(psi.amplitudes, a_ad - ad_a).real == pytest.approx(1.0, abs=1e-6)


def test_lower_on_coherent_state():
    psi = StateVector(make_basis([12]), coherent_state(1.0, 12))
    val = np.vdot(psi.amplitudes, apply_ladder(0, "lower", psi).amplitudes)
    assert val == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.complex_numbers(max_magnitude=3, allow_nan=False,
                                                 allow_infinity=False))
def test_ladder_is_linear(seed, c):
    b = make_basis([4, 3])
    x, y = random_state(b, seed), random_state(b, seed + 1)
    combo = StateVector(b, x.amplitudes + c * y.amplitudes)
    for kind in ("lower", "raise"):
        lhs = apply_ladder(1, kind, combo).amplitudes
        rhs = apply_ladder(1, kind, x).amplitudes + c * apply_ladder(1, kind, y).amplitudes
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_expectation_number_range():
    b = make_basis([4, 6])
    psi = tensor_product_state([fock_state(1, 4), fock_state(5, 6)], b)
    assert expectation_number(MICROWAVE, psi) == 1.0
    assert expectation_number(MECHANICAL, psi) == 5.0


@settings(max_examples=30, deadline=None)
@given(cutoff_lists, st.integers(0, 2**31))
def test_partial_trace_is_a_state(cutoffs, seed):
    b = make_basis(cutoffs)
    psi = random_state(b, seed)
    for m in range(b.n_modes):
        rho = partial_trace(psi, m)
        assert np.trace(rho.elements).real == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.eigvalsh(rho.elements).min() > -1e-8
        rho.check()


def test_partial_trace_of_product():
    b = make_basis([2, 3])
    v = np.array([1, 1j]) / np.sqrt(2)
    psi = tensor_product_state([v, fock_state(2, 3)], b)
    np.testing.assert_allclose(partial_trace(psi, MICROWAVE).elements, np.outer(v, v.conj()),
                               atol=1e-14)


def test_tensor_product_example():
    b = make_basis([2, 2])
    psi = tensor_product_state([np.array([1, 1]) / np.sqrt(2), fock_state(0, 2)], b)
    np.testing.assert_allclose(psi.amplitudes, [1 / np.sqrt(2), 0, 1 / np.sqrt(2), 0])


def test_tensor_product_shape_errors():
    b = make_basis([2, 3])
    with pytest.raises(InvalidBasisError):
        tensor_product_state([fock_state(0, 2)], b)
    with pytest.raises(InvalidBasisError):
        tensor_product_state([fock_state(0, 2), fock_state(0, 2)], b)
