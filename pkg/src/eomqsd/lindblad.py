"""Master-equation oracle for small bases.

Operators are built as explicit sparse Kronecker products, independently of
the index arithmetic used by the trajectory kernels, and the density matrix
is stepped with classical RK4.
"""

import numpy as np
import scipy.sparse as sp

from .errors import OracleCapError
from .fock import MECHANICAL, DensityMatrix, ladder_matrix
from .protocols import CHANNELS
from .qsd import CHANNEL_MODES, HamiltonianSpec, NoiseChannel

ORACLE_MAX_DIM = 256


def mode_operator(basis, mode):
    """Sparse lowering operator of ``mode`` on the full tensor-product space."""
    m = basis.mode_index(mode)
    op = sp.identity(1, dtype=np.complex128, format="csr")
    for i, c in enumerate(basis.cutoffs):
        factor = sp.csr_matrix(ladder_matrix(c)) if i == m else sp.identity(c, format="csr")
        op = sp.kron(op, factor, format="csr")
    return op


def build_operators(spec: HamiltonianSpec, noise: NoiseChannel):
    """(free part, [(channel index, coupling operator)], [jump operators])."""
    basis = spec.basis
    dim = basis.total_dim
    free = sp.csr_matrix((dim, dim), dtype=np.complex128)
    if not spec.interaction_frame:
        for mode in basis.modes:
            a = mode_operator(basis, mode)
            free = free + spec.omega_m * (a.conj().T @ a)
    couplings = []
    if MECHANICAL in basis.modes:
        d = mode_operator(basis, MECHANICAL)
        for c, ch in enumerate(CHANNELS):
            if CHANNEL_MODES[ch] in basis.modes:
                m = mode_operator(basis, CHANNEL_MODES[ch])
                couplings.append((c, -0.5 * (m.conj().T @ d + m @ d.conj().T)))
    jumps = []
    if noise.gamma_m > 0:
        d = mode_operator(basis, noise.mode)
        if noise.loss_rate > 0:
            jumps.append(np.sqrt(noise.loss_rate) * d)
        if noise.absorption_rate > 0:
            jumps.append(np.sqrt(noise.absorption_rate) * d.conj().T.tocsr())
    return free, couplings, jumps


def _right(rho, op):
    """rho @ op for dense rho and sparse op."""
    return (op.T @ rho.T).T


def _lindbladian(rho, h, jumps, ldl):
    # general form: assuming rho Hermitian lets rounding errors in the
    # anti-Hermitian part grow
    out = -1j * (h @ rho - _right(rho, h))
    for L in jumps:
        out += _right(L @ rho, L.conj().T)
    if ldl is not None:
        out -= 0.5 * (ldl @ rho + _right(rho, ldl))
    return out


def lindblad_evolve(rho0, spec: HamiltonianSpec, noise: NoiseChannel, dt: float = 0.01,
                    t_end: float = None, max_dim: int = ORACLE_MAX_DIM,
                    record_times=()):
    """Evolve ``rho0`` from the schedule start to ``t_end`` (default: schedule end).

    Returns the final DensityMatrix, or ``(final, [DensityMatrix at each
    record time])`` when ``record_times`` is given.
    """
    basis = spec.basis
    if basis.total_dim > max_dim:
        raise OracleCapError(f"dimension {basis.total_dim} exceeds oracle cap {max_dim}")
    rho = np.array(getattr(rho0, "elements", rho0), dtype=np.complex128)
    if rho.shape != (basis.total_dim,) * 2:
        raise ValueError("rho0 does not match the basis")
    sched = spec.schedule
    t0 = sched.t_start
    t_end = sched.t_end if t_end is None else t_end
    n_steps = max(1, int(np.ceil((t_end - t0) / dt - 1e-9)))
    h_step = (t_end - t0) / n_steps
    free, couplings, jumps = build_operators(spec, noise)
    ldl = None
    for L in jumps:
        ldl = L.conj().T @ L if ldl is None else ldl + L.conj().T @ L
    half_times = t0 + 0.5 * h_step * np.arange(2 * n_steps + 1)
    omegas = sched.omegas(half_times)

    def ham(k):
        h = free
        for c, op in couplings:
            if omegas[k, c] != 0.0:
                h = h + omegas[k, c] * op
        return h

    rec_steps = [int(round((t - t0) / h_step)) for t in record_times]
    records = []
    for s in range(n_steps + 1):
        while rec_steps and rec_steps[0] == s:
            records.append(DensityMatrix(0.5 * (rho + rho.conj().T)))
            rec_steps.pop(0)
        if s == n_steps:
            break
        h0, hm, h1 = ham(2 * s), ham(2 * s + 1), ham(2 * s + 2)
        k1 = _lindbladian(rho, h0, jumps, ldl)
        k2 = _lindbladian(rho + 0.5 * h_step * k1, hm, jumps, ldl)
        k3 = _lindbladian(rho + 0.5 * h_step * k2, hm, jumps, ldl)
        k4 = _lindbladian(rho + h_step * k3, h1, jumps, ldl)
        rho = rho + (h_step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    final = DensityMatrix(0.5 * (rho + rho.conj().T))
    if record_times is not None and len(record_times):
        return final, records
    return final
