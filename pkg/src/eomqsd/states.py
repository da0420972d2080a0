"""Input states, thermal Fock sampling and the analytic reference formulas."""

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, TruncationError
from .fock import fock_state, ladder_matrix

# largest norm a single-mode input may lose to truncation before renormalizing
MAX_TRUNCATION_LOSS = 1e-6

INPUT_KINDS = ("coherent", "squeezed", "cat", "fock_superposition")


def _finish(amps, cutoff, what):
    kept = amps[:cutoff]
    norm2 = float(np.vdot(kept, kept).real)
    total = float(np.vdot(amps, amps).real)
    if total - norm2 > MAX_TRUNCATION_LOSS * total:
        raise TruncationError(
            f"{what}: cutoff {cutoff} loses {1 - norm2 / total:.2e} of the norm")
    return kept / np.sqrt(norm2)


def _coherent_amplitudes(alpha, n):
    k = np.arange(n)
    logf = np.array([np.log(float(factorial(int(i)))) for i in k]) / 2.0
    # alpha**k / sqrt(k!) with the k = 0 term exact even for alpha = 0
    mag = np.where(k == 0, 1.0, np.exp(k * np.log(abs(alpha) + 1e-300) - logf))
    phase = np.exp(1j * k * np.angle(alpha))
    return np.exp(-abs(alpha) ** 2 / 2) * mag * phase


def coherent_state(alpha, cutoff: int) -> np.ndarray:
    """Truncated, renormalized coherent state |alpha> as a single-mode vector."""
    alpha = complex(alpha)
    if cutoff < 4 * (1 + abs(alpha) ** 2):
        raise TruncationError(f"cutoff {cutoff} too small for |alpha| = {abs(alpha)}")
    amps = _coherent_amplitudes(alpha, cutoff + 60)
    return _finish(amps, cutoff, "coherent state")


def squeezed_coherent_state(alpha, xi, cutoff: int) -> np.ndarray:
    """D(alpha) S(xi)|0> via matrix exponentials, renormalized after truncation.

    The exponentials are taken in a padded working space so that the
    truncation of the operators does not leak into the kept levels.
    """
    alpha, xi = complex(alpha), complex(xi)
    if cutoff < 4 * (1 + abs(alpha) ** 2 + np.sinh(abs(xi)) ** 2):
        raise TruncationError(
            f"cutoff {cutoff} too small for alpha={alpha}, xi={xi}")
    work = 2 * cutoff + 40
    a = ladder_matrix(work)
    ad = a.conj().T
    squeeze = expm(0.5 * (np.conj(xi) * a @ a - xi * ad @ ad))
    displace = expm(alpha * ad - np.conj(alpha) * a)
    amps = displace @ (squeeze @ fock_state(0, work))
    return _finish(amps, cutoff, "squeezed state")


def cat_state(alpha, cutoff: int) -> np.ndarray:
    """Even cat N(|alpha> + |-alpha>)."""
    alpha = complex(alpha)
    if cutoff < 4 * (1 + abs(alpha) ** 2):
        raise TruncationError(f"cutoff {cutoff} too small for |alpha| = {abs(alpha)}")
    if abs(alpha) < 1e-12:
        return fock_state(0, cutoff)
    amps = _coherent_amplitudes(alpha, cutoff + 60) + _coherent_amplitudes(-alpha, cutoff + 60)
    return _finish(amps, cutoff, "cat state")


def fock_superposition(cutoff: int) -> np.ndarray:
    """(|0> + |1>)/sqrt(2)."""
    v = np.zeros(cutoff, dtype=np.complex128)
    v[0] = v[1] = 1 / np.sqrt(2)
    return v


@dataclass(frozen=True)
class InputStateSpec:
    kind: str = "coherent"
    alpha: complex = 1.0
    xi: complex = 0.0

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ValueError(f"unknown input kind {self.kind!r}; expected one of {INPUT_KINDS}")

    def build(self, cutoff: int) -> np.ndarray:
        if self.kind == "coherent":
            return coherent_state(self.alpha, cutoff)
        if self.kind == "squeezed":
            return squeezed_coherent_state(self.alpha, self.xi, cutoff)
        if self.kind == "cat":
            return cat_state(self.alpha, cutoff)
        return fock_superposition(cutoff)

    def min_cutoff(self) -> int:
        """Smallest cutoff meeting both the size rule and the truncation-loss bound."""
        if self.kind == "fock_superposition":
            return 2
        n = 2
        while True:
            try:
                self.build(n)
                return n
            except TruncationError:
                n += 1


def thermal_probabilities(nbar: float, cutoff: int) -> np.ndarray:
    """P_n = nbar^n / (nbar+1)^(n+1) for n < cutoff (not renormalized)."""
    n = np.arange(cutoff)
    if nbar == 0:
        return (n == 0).astype(float)
    return nbar ** n / (nbar + 1.0) ** (n + 1)


def sample_thermal_fock(nbar: float, rng: np.random.Generator, cutoff: int = None) -> int:
    """Draw a Fock level from the thermal (geometric) law.

    With ``cutoff`` the law is restricted to levels below the cutoff and
    renormalized, which keeps the sample representable in a truncated mode.
    """
    if nbar < 0:
        raise DomainError("nbar must be nonnegative")
    if nbar == 0:
        return 0
    p = nbar / (nbar + 1.0)
    u = 1.0 - rng.random()  # (0, 1]
    if cutoff is not None:
        u = p ** cutoff + u * (1.0 - p ** cutoff)
    n = int(np.floor(np.log(u) / np.log(p)))
    if cutoff is not None:
        n = min(n, cutoff - 1)
    return n


def analytic_coherent_fidelity(alpha, omega_m, delta_t, q_m, nbar, saturated=None) -> float:
    """Coherent-state memory fidelity after a wait ``delta_t``.

    At zero temperature the pure decayed-state overlap is returned; for
    ``nbar > 0`` (or ``saturated=True``) the thermal-saturation form is used.
    """
    if q_m <= 0:
        raise DomainError("q_m must be positive")
    a2 = abs(complex(alpha)) ** 2
    decay = 1.0 - np.exp(-omega_m * delta_t / (2.0 * q_m))
    f_pure = float(np.exp(-a2 * decay ** 2))
    if saturated is None:
        saturated = nbar > 0
    if not saturated:
        return f_pure
    f0 = thermal_saturation_fidelity(alpha, nbar)
    return f0 + (1.0 - f0) * f_pure


def thermal_saturation_fidelity(alpha, nbar) -> float:
    """Overlap of the coherent state with a thermal state of occupancy nbar."""
    return float(np.exp(-abs(complex(alpha)) ** 2 / (1.0 + nbar)) / (1.0 + nbar))


@dataclass(frozen=True)
class ScalingPoint:
    zeta_o: float
    zeta: float
    omega_m: float
    delta_t: float
    omega_mu: float
    q_m: float
    nbar: float


def zeta(omega_m, delta_t, omega_mu, q_m, nbar) -> ScalingPoint:
    """Dimensionless storage time with the pi-pulse duration removed."""
    storage = delta_t - np.pi / omega_mu
    if storage < -1e-12 * max(1.0, abs(delta_t)):
        raise DomainError(f"delta_t={delta_t} shorter than the pulse duration pi/Omega")
    storage = max(storage, 0.0)
    zo = omega_m * storage / q_m
    return ScalingPoint(zo, zo * nbar, omega_m, delta_t, omega_mu, q_m, nbar)
