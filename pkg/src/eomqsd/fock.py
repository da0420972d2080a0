"""Truncated multimode Fock-space algebra.

Modes are stored in the fixed order (microwave, mechanical, optical); a
two-mode memory system drops the optical slot.  Flat indices are the
row-major mixed-radix value of the occupation tuple.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import kernels
from .errors import CapacityError, InvalidBasisError, UnknownModeError

MICROWAVE = "microwave"
MECHANICAL = "mechanical"
OPTICAL = "optical"

DEFAULT_MAX_DIM = 10**6

ModeId = Union[int, str]


def _default_modes(k):
    if k == 2:
        return (MICROWAVE, MECHANICAL)
    if k == 3:
        return (MICROWAVE, MECHANICAL, OPTICAL)
    return tuple(f"mode{i}" for i in range(k))


@dataclass(frozen=True)
class BasisDescriptor:
    cutoffs: tuple
    modes: tuple

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)

    @cached_property
    def total_dim(self) -> int:
        return int(np.prod(self.cutoffs, dtype=np.int64))

    @cached_property
    def strides(self) -> tuple:
        s = [1] * self.n_modes
        for i in range(self.n_modes - 2, -1, -1):
            s[i] = s[i + 1] * self.cutoffs[i + 1]
        return tuple(s)

    @cached_property
    def cut_array(self) -> np.ndarray:
        return np.asarray(self.cutoffs, dtype=np.int64)

    @cached_property
    def stride_array(self) -> np.ndarray:
        return np.asarray(self.strides, dtype=np.int64)

    @cached_property
    def occupation_table(self) -> np.ndarray:
        """int64 array (n_modes, total_dim) of occupations per flat index."""
        k = np.arange(self.total_dim, dtype=np.int64)
        occ = np.empty((self.n_modes, self.total_dim), dtype=np.int64)
        for m, (c, s) in enumerate(zip(self.cutoffs, self.strides)):
            occ[m] = (k // s) % c
        occ.setflags(write=False)
        return occ

    def mode_index(self, mode: ModeId) -> int:
        if isinstance(mode, (int, np.integer)) and not isinstance(mode, bool):
            if 0 <= mode < self.n_modes:
                return int(mode)
        elif mode in self.modes:
            return self.modes.index(mode)
        raise UnknownModeError(f"mode {mode!r} not in basis {self.modes}")

    def flat_index(self, occupation: Sequence[int]) -> int:
        if len(occupation) != self.n_modes:
            raise InvalidBasisError("occupation length does not match mode count")
        idx = 0
        for n, c, s in zip(occupation, self.cutoffs, self.strides):
            if not 0 <= n < c:
                raise InvalidBasisError(f"occupation {n} outside cutoff {c}")
            idx += n * s
        return int(idx)

    def occupation(self, flat: int) -> tuple:
        if not 0 <= flat < self.total_dim:
            raise InvalidBasisError(f"flat index {flat} out of range")
        return tuple(int((flat // s) % c) for c, s in zip(self.cutoffs, self.strides))


def make_basis(cutoffs, modes=None, max_dim=DEFAULT_MAX_DIM) -> BasisDescriptor:
    cutoffs = tuple(int(c) for c in cutoffs)
    if not cutoffs:
        raise InvalidBasisError("at least one mode is required")
    if any(c < 2 for c in cutoffs):
        raise InvalidBasisError(f"every cutoff must be >= 2, got {cutoffs}")
    total = 1
    for c in cutoffs:
        total *= c
    if total > max_dim:
        raise CapacityError(f"basis dimension {total} exceeds maximum {max_dim}")
    modes = _default_modes(len(cutoffs)) if modes is None else tuple(modes)
    if len(modes) != len(cutoffs) or len(set(modes)) != len(modes):
        raise InvalidBasisError("modes must be distinct and match the cutoffs")
    return BasisDescriptor(cutoffs, modes)


@dataclass(frozen=True)
class StateVector:
    basis: BasisDescriptor
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amp.size != self.basis.total_dim:
            raise InvalidBasisError(
                f"{amp.size} amplitudes for basis of dimension {self.basis.total_dim}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes / self.norm)


@dataclass(frozen=True)
class DensityMatrix:
    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.elements, dtype=np.complex128)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got {rho.shape}")
        rho.setflags(write=False)
        object.__setattr__(self, "elements", rho)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(getattr(psi, "amplitudes", psi), dtype=np.complex128)
        return cls(np.outer(psi, psi.conj()))

    def check(self, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8) -> None:
        """Raise ValueError if the density-matrix invariants are violated."""
        rho = self.elements
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > trace_tol:
            raise ValueError(f"trace {np.trace(rho).real} != 1")
        if np.linalg.eigvalsh(rho).min() < -eig_tol:
            raise ValueError("density matrix is not positive semidefinite")


def apply_ladder(mode: ModeId, kind: str, state: StateVector) -> StateVector:
    """Apply the lowering or raising operator of ``mode`` (unnormalized).

    Raising from the top Fock level is truncated to zero.
    """
    basis = state.basis
    m = basis.mode_index(mode)
    args = (state.amplitudes, basis.occupation_table, basis.cut_array, basis.stride_array, m)
    if kind == "lower":
        out = kernels.lower(*args)
    elif kind == "raise":
        out = kernels.raise_(*args)
    else:
        raise ValueError(f"kind must be 'lower' or 'raise', got {kind!r}")
    return StateVector(basis, out)


def expectation_number(mode: ModeId, state: StateVector) -> float:
    basis = state.basis
    m = basis.mode_index(mode)
    p = np.abs(state.amplitudes) ** 2
    return float(np.dot(basis.occupation_table[m], p))


def partial_trace(state: StateVector, keep: ModeId) -> DensityMatrix:
    basis = state.basis
    m = basis.mode_index(keep)
    psi = state.amplitudes.reshape(basis.cutoffs)
    mat = np.moveaxis(psi, m, 0).reshape(basis.cutoffs[m], -1)
    return DensityMatrix(mat @ mat.conj().T)


def tensor_product_state(factors, basis: BasisDescriptor = None) -> StateVector:
    """Product state from single-mode factors (StateVectors or arrays)."""
    vecs = [np.asarray(getattr(f, "amplitudes", f), dtype=np.complex128).reshape(-1)
            for f in factors]
    if basis is None:
        basis = make_basis([v.size for v in vecs])
    if len(vecs) != basis.n_modes:
        raise InvalidBasisError(
            f"{len(vecs)} factors for a {basis.n_modes}-mode basis")
    for v, c in zip(vecs, basis.cutoffs):
        if v.size != c:
            raise InvalidBasisError(f"factor of length {v.size} for cutoff {c}")
    amp = vecs[0]
    for v in vecs[1:]:
        amp = np.kron(amp, v)
    return StateVector(basis, amp)


def fock_state(n: int, cutoff: int) -> np.ndarray:
    if not 0 <= n < cutoff:
        raise InvalidBasisError(f"Fock level {n} outside cutoff {cutoff}")
    v = np.zeros(cutoff, dtype=np.complex128)
    v[n] = 1.0
    return v


def ladder_matrix(cutoff: int) -> np.ndarray:
    """Dense single-mode lowering matrix; for oracles and small tests only."""
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=np.float64)), k=1).astype(np.complex128)
