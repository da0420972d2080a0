"""Quantum-state-diffusion trajectories under the beam-splitter Hamiltonian.

The mechanical mode couples to a thermal bath through two channels: phonon
loss sqrt(gamma_m (nbar+1)) d and phonon absorption sqrt(gamma_m nbar) d^dag.
Each trajectory follows the normalized homodyne unraveling of the
corresponding master equation, integrated with an explicit weak order-2.0
scheme and renormalized after every step.  A variant with the rates of the
two noise operators swapped and an unnormalized drift is available as
``sde_form="swapped"`` for comparison only; it does not reproduce the master
equation.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidBasisError, StepSizeError
from .fock import (MECHANICAL, MICROWAVE, OPTICAL, BasisDescriptor, DensityMatrix,
                   StateVector, fock_state, partial_trace, tensor_product_state)
from .metrics import pure_state_fidelity, uhlmann_fidelity
from .protocols import CHANNELS, ELECTROMECHANICAL, OPTOMECHANICAL, PulseSchedule
from .states import sample_thermal_fock

CHANNEL_MODES = {ELECTROMECHANICAL: MICROWAVE, OPTOMECHANICAL: OPTICAL}
SDE_FORMS = {"standard": kernels.FORM_STANDARD, "swapped": kernels.FORM_SWAPPED}

DEFAULT_DT = 0.01
MAX_HALVINGS = 4
# dt * (max coupling + gamma_m (2 nbar + 1) * cutoff) must stay below this
STEP_BUDGET = 0.1


@dataclass(frozen=True)
class HamiltonianSpec:
    """H = omega_m N_total - sum_ch Omega_ch(t)/2 (m_ch^dag d + m_ch d^dag).

    With ``interaction_frame`` the free term is dropped (all modes rotate at
    omega_m and the couplings conserve total number).
    """
    basis: BasisDescriptor
    schedule: PulseSchedule
    interaction_frame: bool = True
    omega_m: float = 1.0

    def __post_init__(self):
        for ch in self.schedule.channels_used():
            if CHANNEL_MODES[ch] not in self.basis.modes:
                raise InvalidBasisError(f"{ch} pulses need a {CHANNEL_MODES[ch]} mode")
        if MECHANICAL not in self.basis.modes and self.schedule.pulses:
            raise InvalidBasisError("couplings need a mechanical mode")

    def terms(self):
        """Arrays (ti, tj, tch) of coupled mode pairs and their channel index."""
        ti, tj, tch = [], [], []
        for c, ch in enumerate(CHANNELS):
            mode = CHANNEL_MODES[ch]
            if mode in self.basis.modes and MECHANICAL in self.basis.modes:
                ti.append(self.basis.mode_index(mode))
                tj.append(self.basis.mode_index(MECHANICAL))
                tch.append(c)
        as_int = lambda x: np.asarray(x, dtype=np.int64)
        return as_int(ti), as_int(tj), as_int(tch)

    @property
    def free_frequency(self) -> float:
        return 0.0 if self.interaction_frame else float(self.omega_m)


@dataclass(frozen=True)
class NoiseChannel:
    gamma_m: float = 0.0
    nbar: float = 0.0
    mode: str = MECHANICAL

    def __post_init__(self):
        if self.gamma_m < 0 or self.nbar < 0:
            raise ValueError("gamma_m and nbar must be nonnegative")

    @classmethod
    def from_quality(cls, q_m, nbar, omega_m=1.0):
        """``q_m`` may be float('inf') or the string 'inf' for a lossless resonator."""
        q = float(q_m)
        return cls(0.0 if math.isinf(q) else omega_m / q, float(nbar))

    @property
    def loss_rate(self) -> float:
        return self.gamma_m * (self.nbar + 1.0)

    @property
    def absorption_rate(self) -> float:
        return self.gamma_m * self.nbar


@dataclass
class TrajectoryResult:
    index: int
    seed: int
    final: StateVector
    times: np.ndarray
    populations: np.ndarray      # (n_records, n_modes) <n> per mode
    norm_drift: np.ndarray       # squared-norm drift of the step ending at each record
    max_norm_drift: float
    top_population: np.ndarray   # largest top-level population over modes, per record
    dt: float
    initial_label: dict = field(default_factory=dict)


def _layout(basis):
    return basis.occupation_table, basis.cut_array, basis.stride_array


def _check_budget(spec, noise, dt):
    mech_cut = spec.basis.cutoffs[spec.basis.mode_index(noise.mode)] \
        if noise.mode in spec.basis.modes else 0
    load = spec.schedule.max_coupling() + noise.gamma_m * (2 * noise.nbar + 1) * mech_cut
    if dt * load > STEP_BUDGET:
        raise StepSizeError(
            f"dt={dt} too large: dt*(coupling + gamma(2n+1)cutoff) = {dt * load:.3g} "
            f"> {STEP_BUDGET}")


def _noise_args(spec, noise, sde_form):
    if sde_form not in SDE_FORMS:
        raise ValueError(f"sde_form must be one of {sorted(SDE_FORMS)}")
    if noise.gamma_m > 0:
        mech = spec.basis.mode_index(noise.mode)
    else:
        mech = 0
    return mech, noise.loss_rate, noise.absorption_rate, SDE_FORMS[sde_form]


def qsd_step(state: StateVector, spec: HamiltonianSpec, noise: NoiseChannel, t: float,
             dt: float, dW_lower: float, dW_raise: float, v_cross: float = 0.0,
             sde_form: str = "standard") -> StateVector:
    """One weak second-order step from ``t`` to ``t + dt``, renormalized.

    ``dW_lower`` drives the loss channel (d) and ``dW_raise`` the absorption
    channel (d^dag).  ``v_cross`` is the +-dt two-point variable for the
    mixed multiple integral; it only matters when both channels are active.
    """
    if abs(state.norm - 1.0) > 1e-8:
        raise ValueError("qsd_step needs a normalized state")
    _check_budget(spec, noise, dt)
    occ, cut, stride = _layout(spec.basis)
    ti, tj, tch = spec.terms()
    om = spec.schedule.omegas([t, t + dt])
    mech, r_l, r_a, form = _noise_args(spec, noise, sde_form)
    new = kernels.platen_step(
        np.ascontiguousarray(state.amplitudes), occ, cut, stride, ti, tj,
        kernels.term_weights(om[0], tch), kernels.term_weights(om[1], tch),
        spec.free_frequency, mech, r_l, r_a, form, dt, float(dW_lower), float(dW_raise),
        float(v_cross))
    nrm2 = float(np.vdot(new, new).real)
    if not kernels.NORM_LOW <= nrm2 <= kernels.NORM_HIGH:
        raise StepSizeError(f"norm^2 {nrm2:.3g} before renormalization at t={t}", t=t)
    return StateVector(spec.basis, new / math.sqrt(nrm2))


def _draw_increments(rng, n_steps, dt):
    dw = rng.standard_normal((n_steps, 2)) * math.sqrt(dt)
    v = np.where(rng.random(n_steps) < 0.5, dt, -dt)
    return dw, v


def _seed_int(seed):
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, dtype=np.uint64)[0])
    return int(seed)


def integrate_trajectory(initial: StateVector, spec: HamiltonianSpec, noise: NoiseChannel,
                         dt: float = DEFAULT_DT, seed=0, record_times=(),
                         sde_form: str = "standard", index: int = 0,
                         max_halvings: int = MAX_HALVINGS) -> TrajectoryResult:
    """Integrate one trajectory over the whole schedule.

    ``seed`` is an int or a ``numpy.random.SeedSequence``.  Results are
    bit-reproducible for a fixed seed on one platform.  If the step guard
    trips, the trajectory is restarted with half the step (same seed).
    """
    sched = spec.schedule
    record_times = np.asarray(record_times, dtype=float)
    if record_times.size and (np.any(np.diff(record_times) < 0)
                              or record_times[0] < sched.t_start - 1e-9
                              or record_times[-1] > sched.t_end + 1e-9):
        raise ValueError("record_times must be sorted and inside the schedule")
    if initial.basis != spec.basis:
        raise InvalidBasisError("initial state basis differs from the Hamiltonian basis")
    _check_budget(spec, noise, dt)
    occ, cut, stride = _layout(spec.basis)
    ti, tj, tch = spec.terms()
    mech, r_l, r_a, form = _noise_args(spec, noise, sde_form)
    psi0 = np.ascontiguousarray(initial.amplitudes, dtype=np.complex128)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-8:
        raise ValueError("initial state must be normalized")

    step = dt
    for attempt in range(max_halvings + 1):
        n_steps = max(1, int(math.ceil(sched.duration / step - 1e-9)))
        h = sched.duration / n_steps
        times = sched.t_start + h * np.arange(n_steps + 1)
        omegas = sched.omegas(times)
        rec_steps = np.rint((record_times - sched.t_start) / h).astype(np.int64)
        rec_steps = np.clip(rec_steps, 0, n_steps)
        rng = np.random.Generator(np.random.PCG64(seed))
        dw, v = _draw_increments(rng, n_steps, h)
        psi, status, fail, pops, drift_rec, max_drift, top = kernels.run_steps(
            psi0, occ, cut, stride, ti, tj, tch, spec.free_frequency, mech, r_l, r_a,
            form, omegas, dw, v, h, rec_steps)
        if status == kernels.STATUS_OK:
            return TrajectoryResult(index, _seed_int(seed), StateVector(spec.basis, psi),
                                    times[rec_steps], pops, drift_rec, float(max_drift),
                                    top, h)
        step = step / 2
    raise StepSizeError(
        f"trajectory {index} unstable at t={times[fail]:.4g} (seed {_seed_int(seed)}) "
        f"after {max_halvings} step halvings", t=float(times[fail]), seed=_seed_int(seed))


@dataclass(frozen=True)
class ThermalProductInput:
    """Product input whose mechanical factor is a thermally sampled Fock state.

    ``factors`` maps the non-mechanical modes to single-mode vectors.  The
    thermal law is restricted to levels below the mechanical cutoff.
    """
    basis: BasisDescriptor
    factors: tuple  # ((mode, vector), ...)
    nbar: float = 0.0

    def __call__(self, rng):
        mcut = self.basis.cutoffs[self.basis.mode_index(MECHANICAL)]
        n = sample_thermal_fock(self.nbar, rng, cutoff=mcut)
        fmap = dict(self.factors)
        vecs = [fock_state(n, mcut) if mode == MECHANICAL else fmap[mode]
                for mode in self.basis.modes]
        return tensor_product_state(vecs, self.basis), {"mechanical_fock": n}

    def reference(self, mode=MICROWAVE):
        return dict(self.factors)[mode]


@dataclass
class EnsembleResult:
    fidelities: np.ndarray
    mean_reduced: DensityMatrix
    fidelity_of_mean: float
    times: np.ndarray
    mean_populations: np.ndarray
    trajectories: list
    mean_full: DensityMatrix = None
    readout: str = None
    max_top_population: float = 0.0

    @property
    def n_traj(self) -> int:
        return len(self.trajectories)

    def summary(self) -> dict:
        f = self.fidelities
        if f.size == 0:
            return {}
        q = np.percentile(f, [5, 25, 50, 75, 95])
        return {
            "n_traj": int(f.size),
            "mean": float(f.mean()),
            "std": float(f.std(ddof=1)) if f.size > 1 else 0.0,
            "sem": float(f.std(ddof=1) / np.sqrt(f.size)) if f.size > 1 else 0.0,
            "median": float(q[2]),
            "p05": float(q[0]),
            "p95": float(q[4]),
            "iqr": float(q[3] - q[1]),
            "fidelity_of_mean": float(self.fidelity_of_mean),
        }


def trajectory_seed(master_seed, index, key=()):
    """Per-trajectory seed: a counter-based child of the master seed."""
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(key) + (int(index),))


def _one(args):
    (index, initial, spec, noise, dt, master_seed, key, record_times, sde_form) = args
    ss = trajectory_seed(master_seed, index, key)
    init_ss, noise_ss = ss.spawn(2)
    label = {}
    if callable(initial):
        state, label = initial(np.random.Generator(np.random.PCG64(init_ss)))
    else:
        state = initial
    res = integrate_trajectory(state, spec, noise, dt, noise_ss, record_times,
                               sde_form=sde_form, index=index)
    res.seed = _seed_int(ss)
    res.initial_label = label
    return res


def _chunk(args_list):
    return [_one(a) for a in args_list]


def run_ensemble(initial, spec: HamiltonianSpec, noise: NoiseChannel, dt: float = DEFAULT_DT,
                 n_traj: int = 1000, master_seed: int = 0, record_times=(),
                 readout=None, reference=None, keep_full: bool = False,
                 keep_states: bool = False, workers: int = 1, sde_form: str = "standard",
                 seed_key=()) -> EnsembleResult:
    """Run ``n_traj`` independent trajectories and aggregate them by index.

    ``initial`` is a StateVector or a callable ``rng -> (StateVector, label)``
    (e.g. ThermalProductInput).  ``reference`` is the pure single-mode state
    the ``readout`` mode is compared with.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    args = [(i, initial, spec, noise, dt, master_seed, tuple(seed_key),
             tuple(record_times), sde_form) for i in range(n_traj)]
    if workers > 1 and n_traj > 1:
        chunks = [args[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = [r for part in pool.map(_chunk, chunks) for r in part]
        results = sorted(flat, key=lambda r: r.index)
    else:
        results = [_one(a) for a in args]
    return aggregate(results, spec.basis, readout, reference, keep_full, keep_states)


def aggregate(results, basis, readout=None, reference=None, keep_full=False,
              keep_states=False) -> EnsembleResult:
    """Deterministic reduction in trajectory-index order."""
    results = sorted(results, key=lambda r: r.index)
    readout = readout if readout is not None else basis.modes[0]
    rc = basis.cutoffs[basis.mode_index(readout)]
    rho_sum = np.zeros((rc, rc), dtype=np.complex128)
    full_sum = np.zeros((basis.total_dim,) * 2, dtype=np.complex128) if keep_full else None
    fids = []
    ref = None
    if reference is not None:
        ref = np.zeros(rc, dtype=np.complex128)
        r = np.asarray(reference, dtype=np.complex128)
        if r.size > rc and np.linalg.norm(r[rc:]) > 1e-12:
            raise InvalidBasisError("reference state does not fit the readout cutoff")
        ref[:min(rc, r.size)] = r[:rc]
    for res in results:
        rho = partial_trace(res.final, readout).elements
        rho_sum += rho
        if keep_full:
            psi = res.final.amplitudes
            full_sum += np.outer(psi, psi.conj())
        if ref is not None:
            fids.append(pure_state_fidelity(ref, rho))
    n = len(results)
    mean_rho = DensityMatrix(rho_sum / n)
    f_mean = uhlmann_fidelity(ref, mean_rho) if ref is not None else float("nan")
    pops = np.mean([r.populations for r in results], axis=0)
    top = max((float(r.top_population.max()) for r in results if r.top_population.size),
              default=0.0)
    if not keep_states:
        for r in results:
            r.final = None
    return EnsembleResult(np.asarray(fids), mean_rho, f_mean, results[0].times, pops,
                          results, DensityMatrix(full_sum / n) if keep_full else None,
                          readout, top)
