"""Distance measures between density matrices."""

import numpy as np

from .errors import MetricError

CLAMP_TOL = 1e-10
PSD_TOL = 1e-8


def _as_matrix(rho):
    rho = np.asarray(getattr(rho, "elements", rho), dtype=np.complex128)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    return rho


def _psd_sqrt(rho, name):
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    if w.min() < -PSD_TOL:
        raise MetricError(f"{name} has eigenvalue {w.min():.3e} below -{PSD_TOL}")
    w = np.where(w < CLAMP_TOL, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def uhlmann_fidelity(rho_i, rho_f) -> float:
    """F = [Tr sqrt(sqrt(rho_i) rho_f sqrt(rho_i))]^2.

    Accepts density matrices, DensityMatrix objects or pure state vectors.
    """
    a = _as_matrix(rho_i)
    b = _as_matrix(rho_f)
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch {a.shape} vs {b.shape}")
    _psd_sqrt(b, "rho_f")  # validation only
    sa = _psd_sqrt(a, "rho_i")
    m = sa @ b @ sa
    mu = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    mu = np.where(mu < CLAMP_TOL, 0.0, mu)
    f = float(np.sum(np.sqrt(mu)) ** 2)
    return min(max(f, 0.0), 1.0)


def pure_state_fidelity(psi, rho) -> float:
    """<psi|rho|psi>, the Uhlmann fidelity when the first argument is pure."""
    psi = np.asarray(getattr(psi, "amplitudes", psi), dtype=np.complex128)
    rho = _as_matrix(rho)
    f = float(np.real(np.vdot(psi, rho @ psi)))
    return min(max(f, 0.0), 1.0)


def trace_distance(rho, sigma) -> float:
    d = _as_matrix(rho) - _as_matrix(sigma)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def purity(rho) -> float:
    r = _as_matrix(rho)
    return float(np.real(np.trace(r @ r)))
