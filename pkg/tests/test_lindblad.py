import numpy as np
import pytest

from eomqsd import (MECHANICAL, MICROWAVE, HamiltonianSpec, NoiseChannel, OracleCapError,
                    PulseSchedule, ThermalProductInput, fock_superposition, make_basis,
                    memory_schedule, run_ensemble, trace_distance)
from eomqsd.lindblad import lindblad_evolve
from eomqsd.states import thermal_probabilities

from oracles import dense_lowering


def relax(n0, t_end, cut=20, gamma=0.01, nbar=3.0):
    b = make_basis([cut], (MECHANICAL,))
    spec = HamiltonianSpec(b, PulseSchedule((), 0.0, t_end))
    rho0 = np.zeros((cut, cut))
    rho0[n0, n0] = 1.0
    rho = lindblad_evolve(rho0, spec, NoiseChannel(gamma, nbar), dt=0.05).elements
    return float(np.real(np.trace(np.diag(np.arange(cut)) @ rho))), rho


@pytest.mark.parametrize("n0,cut", [(0, 20), (1, 20), (2, 20), (5, 40)])
def test_relaxation_law(n0, cut):
    t_end, gamma, nbar = 50.0, 0.01, 3.0
    n, rho = relax(n0, t_end, cut=cut)
    assert n == pytest.approx(nbar + (n0 - nbar) * np.exp(-gamma * t_end), abs=1e-3)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)


def test_long_time_limit_is_thermal():
    _, rho = relax(0, 3000.0, cut=40)
    p = thermal_probabilities(3.0, 40)
    np.testing.assert_allclose(np.diag(rho).real[:10], p[:10], atol=2e-3)


def test_dense_generator_agrees():
    cut = [3, 4]
    b = make_basis(cut)
    sched = memory_schedule(0.2, 5)
    spec = HamiltonianSpec(b, sched)
    noise = NoiseChannel(0.02, 1.5)
    rng = np.random.default_rng(0)
    g = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    rho0 = g @ g.conj().T
    rho0 /= np.trace(rho0)
    t_end = sched.t_start + 0.5
    got = lindblad_evolve(rho0, spec, noise, dt=0.001, t_end=t_end).elements
    # independent first-order expansion at this short time is not enough; use
    # a fine dense RK4 on the generator built from explicit matrices
    m, d = dense_lowering(cut, 0), dense_lowering(cut, 1)
    jumps = [np.sqrt(noise.loss_rate) * d, np.sqrt(noise.absorption_rate) * d.conj().T]

    def gen(t, r):
        om = sched.omegas([t])[0, 0]
        h = -0.5 * om * (m.conj().T @ d + m @ d.conj().T)
        out = -1j * (h @ r - r @ h)
        for L in jumps:
            out += L @ r @ L.conj().T - 0.5 * (L.conj().T @ L @ r + r @ L.conj().T @ L)
        return out

    r, t, n = rho0.copy(), sched.t_start, 2000
    h_ = (t_end - t) / n
    for _ in range(n):
        k1 = gen(t, r)
        k2 = gen(t + h_ / 2, r + h_ / 2 * k1)
        k3 = gen(t + h_ / 2, r + h_ / 2 * k2)
        k4 = gen(t + h_, r + h_ * k3)
        r = r + h_ / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h_
    np.testing.assert_allclose(got, r, atol=1e-9)


def test_cap():
    b = make_basis([17, 16])
    spec = HamiltonianSpec(b, memory_schedule(0.1, 10))
    with pytest.raises(OracleCapError):
        lindblad_evolve(np.eye(b.total_dim) / b.total_dim, spec, NoiseChannel())


def test_record_times():
    b = make_basis([3, 3])
    spec = HamiltonianSpec(b, memory_schedule(0.1, 10))
    rho0 = np.zeros((9, 9))
    rho0[3, 3] = 1.0
    final, recs = lindblad_evolve(rho0, spec, NoiseChannel(), dt=0.05,
                                  record_times=[spec.schedule.t_start, spec.schedule.t_end])
    assert len(recs) == 2
    np.testing.assert_allclose(recs[0].elements, rho0)
    np.testing.assert_allclose(recs[1].elements, final.elements)


def test_ensemble_approaches_master_equation():
    cut = 4
    b = make_basis([cut, cut])
    spec = HamiltonianSpec(b, memory_schedule(0.1, 20))
    noise = NoiseChannel(1 / 500, 3.0)
    inp = ThermalProductInput(b, ((MICROWAVE, fock_superposition(cut)),), 3.0)
    p = thermal_probabilities(3.0, cut)
    rho0 = np.kron(np.outer(fock_superposition(cut), fock_superposition(cut)), np.diag(p / p.sum()))
    exact = lindblad_evolve(rho0, spec, noise, dt=0.05)
    dists = []
    for n in (100, 1600):
        ens = run_ensemble(inp, spec, noise, dt=0.02, n_traj=n, master_seed=1, keep_full=True)
        dists.append(trace_distance(ens.mean_full, exact))
    assert dists[1] < dists[0]
    assert dists[1] < 0.05
