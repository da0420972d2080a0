import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eomqsd import kernels, make_basis
from eomqsd._jit import HAS_NUMBA

from oracles import dense_lowering

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not available")


def layout(cutoffs):
    b = make_basis(cutoffs)
    return b, b.occupation_table, b.cut_array, b.stride_array


def rand_psi(dim, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def terms(n_modes):
    ti = np.array([0] + ([2] if n_modes == 3 else []), dtype=np.int64)
    tj = np.ones_like(ti)
    tch = np.arange(ti.size, dtype=np.int64)
    return ti, tj, tch


@needs_numba
@pytest.mark.parametrize("m", [0, 1, 2])
def test_primitives_agree(m):
    _, occ, cut, stride = layout([3, 4, 5])
    psi = rand_psi(60, m)
    for nb, np_ in ((kernels._lower_nb, kernels._lower_np), (kernels._raise_nb, kernels._raise_np)):
        np.testing.assert_allclose(nb(psi, occ, cut, stride, m), np_(psi, occ, cut, stride, m),
                                   atol=1e-14)
    np.testing.assert_allclose(kernels._number_nb(psi, occ, m), kernels._number_np(psi, occ, m))
    ti, tj, _ = terms(3)
    tw = np.array([0.03, -0.07])
    np.testing.assert_allclose(kernels._hamiltonian_nb(psi, occ, cut, stride, ti, tj, tw, 0.5),
                               kernels._hamiltonian_np(psi, occ, cut, stride, ti, tj, tw, 0.5),
                               atol=1e-14)


@needs_numba
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([kernels.FORM_STANDARD, kernels.FORM_SWAPPED]),
       st.floats(0, 0.02), st.floats(0, 0.02), st.sampled_from([[3, 4], [2, 3, 3]]),
       st.floats(0, 1))
def test_platen_step_paths_agree(seed, form, r_loss, r_abs, cutoffs, free):
    b, occ, cut, stride = layout(cutoffs)
    psi = rand_psi(b.total_dim, seed)
    ti, tj, _ = terms(b.n_modes)
    rng = np.random.default_rng(seed)
    tw0, tw1 = rng.normal(size=(2, ti.size)) * 0.05
    dt = 0.02
    dw0, dw1 = rng.normal(size=2) * np.sqrt(dt)
    v = dt if rng.random() < 0.5 else -dt
    args = (psi, occ, cut, stride, ti, tj, tw0, tw1, free, 1, r_loss, r_abs, form, dt,
            dw0, dw1, v)
    np.testing.assert_allclose(kernels._platen_step_nb(*args), kernels._platen_step_np(*args),
                               atol=1e-12)


def test_drift_matches_dense_formula():
    cutoffs = [3, 5]
    b, occ, cut, stride = layout(cutoffs)
    psi = rand_psi(b.total_dim, 3)
    ti, tj, _ = terms(2)
    tw = np.array([-0.04])
    r_l, r_a = 0.013, 0.007
    m, d = dense_lowering(cutoffs, 0), dense_lowering(cutoffs, 1)
    h = tw[0] * (m.conj().T @ d + m @ d.conj().T)
    expected = -1j * h @ psi
    for rate, L in ((r_l, d), (r_a, d.conj().T)):
        L = np.sqrt(rate) * L
        x = np.vdot(psi, (L + L.conj().T) @ psi).real
        expected += -0.5 * (L.conj().T @ L - x * L + 0.25 * x * x * np.eye(len(psi))) @ psi
    got = kernels._drift_np(psi, occ, cut, stride, ti, tj, tw, 0.0, 1, r_l, r_a,
                            kernels.FORM_STANDARD)
    np.testing.assert_allclose(got, expected, atol=1e-13)


def test_noise_free_step_is_heun():
    cutoffs = [4, 4]
    b, occ, cut, stride = layout(cutoffs)
    psi = rand_psi(b.total_dim, 4)
    ti, tj, _ = terms(2)
    m, d = dense_lowering(cutoffs, 0), dense_lowering(cutoffs, 1)
    hop = m.conj().T @ d + m @ d.conj().T
    tw0, tw1, dt = np.array([-0.05]), np.array([-0.03]), 0.1
    a0 = -1j * tw0[0] * hop @ psi
    a1 = -1j * tw1[0] * hop @ (psi + dt * a0)
    got = kernels.platen_step(psi, occ, cut, stride, ti, tj, tw0, tw1, 0.0, 1, 0.0, 0.0,
                              kernels.FORM_STANDARD, dt, 0.3, -0.2, dt)
    np.testing.assert_allclose(got, psi + 0.5 * dt * (a0 + a1), atol=1e-14)


SCRIPT = """
import json, numpy as np
from eomqsd import kernels, make_basis, NoiseChannel, HamiltonianSpec, integrate_trajectory
from eomqsd import memory_schedule, tensor_product_state, fock_state, fock_superposition
b = make_basis([4, 6])
spec = HamiltonianSpec(b, memory_schedule(0.1, 20))
psi = tensor_product_state([fock_superposition(4), fock_state(2, 6)], b)
r = integrate_trajectory(psi, spec, NoiseChannel(1 / 300, 2.0), dt=0.02, seed=11,
                         record_times=[spec.schedule.t_end])
a = r.final.amplitudes
print(json.dumps({"numba": kernels.USE_NUMBA, "re": a.real.tolist(), "im": a.imag.tolist(),
                  "pops": r.populations.tolist()}))
"""


def run_script(disable):
    env = dict(os.environ)
    env.pop("EOMQSD_DISABLE_NUMBA", None)
    if disable:
        env["EOMQSD_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@needs_numba
def test_env_flag_selects_numpy_path_with_same_results():
    fast, slow = run_script(False), run_script(True)
    assert fast["numba"] is True and slow["numba"] is False
    np.testing.assert_allclose(np.array(fast["re"]) + 1j * np.array(fast["im"]),
                               np.array(slow["re"]) + 1j * np.array(slow["im"]), atol=1e-9)
    np.testing.assert_allclose(fast["pops"], slow["pops"], atol=1e-9)
