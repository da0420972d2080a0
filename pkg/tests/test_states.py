import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eomqsd import (DomainError, InputStateSpec, TruncationError, analytic_coherent_fidelity,
                    cat_state, coherent_state, fock_superposition, sample_thermal_fock,
                    squeezed_coherent_state, thermal_saturation_fidelity, zeta)
from eomqsd.states import thermal_probabilities

from oracles import lowering, quadrature_variances, squeezed_vacuum


def mean_n(v):
    return float(np.sum(np.arange(v.size) * np.abs(v) ** 2))


def test_coherent_mean_number():
    assert mean_n(coherent_state(1.0, 12)) == pytest.approx(1.0, abs=1e-6)


def test_coherent_overlap_identity():
    a = 1.0
    ov = abs(np.vdot(coherent_state(a, 30), coherent_state(-a, 30))) ** 2
    assert ov == pytest.approx(np.exp(-4 * a * a), abs=1e-8)


def test_coherent_is_lowering_eigenstate():
    alpha = 0.7 - 0.4j
    v = coherent_state(alpha, 30)
    np.testing.assert_allclose(lowering(30) @ v, alpha * v, atol=1e-8)


def test_coherent_cutoff_rule():
    with pytest.raises(TruncationError):
        coherent_state(1.0, 7)
    # meets the size rule but loses more than the allowed norm
    with pytest.raises(TruncationError):
        coherent_state(1.0, 8)


def test_squeezed_variances_match_expm_oracle():
    r = 0.5
    v = squeezed_coherent_state(0.0, r, 30)
    vx, vp = quadrature_variances(v)
    assert vx == pytest.approx(np.exp(-2 * r), abs=1e-4)
    assert vp == pytest.approx(np.exp(2 * r), abs=1e-4)
    ref = squeezed_vacuum(r, 30)
    assert abs(np.vdot(ref, v)) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_squeezed_coherent_mean():
    v = squeezed_coherent_state(0.8, 0.3, 30)
    assert np.vdot(v, lowering(30) @ v) == pytest.approx(0.8, abs=1e-8)


def test_cat_state_is_even():
    v = cat_state(1.0, 12)
    assert np.allclose(v[1::2], 0)
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_fock_superposition():
    v = fock_superposition(4)
    np.testing.assert_allclose(v, [1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0])


def test_input_spec_min_cutoff():
    assert InputStateSpec("fock_superposition").min_cutoff() == 2
    n = InputStateSpec("coherent", 1.0).min_cutoff()
    coherent_state(1.0, n)
    with pytest.raises(TruncationError):
        coherent_state(1.0, n - 1)
    with pytest.raises(ValueError):
        InputStateSpec("vacuum")


def test_thermal_sampling_law():
    rng = np.random.default_rng(5)
    nbar = 3.0
    draws = np.array([sample_thermal_fock(nbar, rng) for _ in range(40000)])
    assert draws.mean() == pytest.approx(nbar, abs=0.06)
    p = thermal_probabilities(nbar, 6)
    counts = np.bincount(draws, minlength=6)[:6] / draws.size
    np.testing.assert_allclose(counts, p, atol=0.01)


def test_thermal_sampling_respects_cutoff():
    rng = np.random.default_rng(1)
    draws = [sample_thermal_fock(3.0, rng, cutoff=4) for _ in range(5000)]
    assert max(draws) <= 3
    assert sample_thermal_fock(0.0, rng) == 0
    with pytest.raises(DomainError):
        sample_thermal_fock(-1.0, rng)


@settings(max_examples=50)
@given(st.floats(0.01, 10), st.integers(0, 2**31))
def test_thermal_samples_nonnegative(nbar, seed):
    assert sample_thermal_fock(nbar, np.random.default_rng(seed)) >= 0


def test_saturation_value():
    assert thermal_saturation_fidelity(1.0, 3.0) == pytest.approx(np.exp(-0.25) / 4, abs=1e-12)


def test_analytic_fidelity_limits():
    assert analytic_coherent_fidelity(1.0, 1.0, 64, 1e12, 0) == pytest.approx(1.0, abs=1e-9)
    low = analytic_coherent_fidelity(1.0, 1.0, 64, 1e-6, 0)
    assert low == pytest.approx(np.exp(-1.0), abs=1e-9)
    f0 = thermal_saturation_fidelity(1.0, 3)
    assert analytic_coherent_fidelity(1.0, 1.0, 64, 1e-6, 3) == pytest.approx(
        f0 + (1 - f0) * np.exp(-1.0), abs=1e-9)
    assert analytic_coherent_fidelity(0.0, 1.0, 64, 50, 3) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        analytic_coherent_fidelity(1.0, 1.0, 64, 0, 0)


@settings(max_examples=50)
@given(st.floats(10, 1e7), st.floats(0, 200))
def test_analytic_fidelity_bounded_and_monotone(q, dt):
    f1 = analytic_coherent_fidelity(1.0, 1.0, dt, q, 0)
    f2 = analytic_coherent_fidelity(1.0, 1.0, dt, 2 * q, 0)
    assert 0 <= f1 <= f2 <= 1


def test_zeta_example():
    zp = zeta(1.0, 64, 0.1, 1000, 3)
    assert zp.zeta_o == pytest.approx((64 - 10 * np.pi) / 1000, rel=1e-12)
    assert zp.zeta_o == pytest.approx(0.03258, abs=1e-5)
    assert zp.zeta == pytest.approx(0.09775, abs=1e-5)
    with pytest.raises(DomainError):
        zeta(1.0, 10, 0.1, 1000, 3)
