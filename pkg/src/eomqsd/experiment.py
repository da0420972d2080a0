"""Experiment configuration, deterministic runs, sweeps and report tables.

A configuration is a JSON document with a ``schema_version``.  Times are
in units of 1/omega_m and rates in units of omega_m throughout.  Each run
derives its trajectory seeds from ``numerics.master_seed`` and a hash of
the physical content of the configuration, so a point gives the same
numbers whether it runs alone or inside a sweep, in any order.
"""

import dataclasses
import hashlib
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import USE_NUMBA
from .errors import ConfigError, OutputExistsError, ReportError
from .fock import MECHANICAL, MICROWAVE, OPTICAL, make_basis
from .lindblad import ORACLE_MAX_DIM, lindblad_evolve
from .metrics import trace_distance
from .protocols import (TRANSDUCTION_KINDS, memory_schedule, separation_percent,
                        transduction_schedule)
from .qsd import SDE_FORMS, HamiltonianSpec, NoiseChannel, ThermalProductInput, run_ensemble
from .states import (INPUT_KINDS, InputStateSpec, analytic_coherent_fidelity,
                     thermal_probabilities, zeta)

SCHEMA_VERSION = 1
KINDS = ("memory", "transduce", "contour", "oracle-check")
UNITS = "times in units of 1/omega_m; rates and couplings in units of omega_m"
HIST_BINS = 20
OUTPUT_FILES = ("config.snapshot.json", "fidelity.csv", "populations.csv",
                "histogram.csv", "summary.txt", "record.json")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InputConfig:
    kind: str = "coherent"
    alpha: float = 1.0
    xi: float = 0.0

    def spec(self) -> InputStateSpec:
        return InputStateSpec(self.kind, self.alpha, self.xi)


@dataclass(frozen=True)
class ProtocolConfig:
    omega_peak: float = 0.1
    delta_t: float = 64.0
    retrieval_sign: int = -1
    transduction: str = "simultaneous"
    area_pi: float = None          # pulse area in units of pi
    separation: float = None       # signed peak distance, percent of the sequence
    areas_pi: tuple = (1.0, math.sqrt(2.0), 2.0, 3.0)
    separations: tuple = (-15.0, 0.0, 10.0, 40.0)


@dataclass(frozen=True)
class PhysicsConfig:
    q_m: float = 1e5
    nbar: float = 0.0
    omega_m: float = 1.0


@dataclass(frozen=True)
class NumericsConfig:
    dt: float = 0.01
    n_traj: int = 1000
    master_seed: int = 0
    sde_form: str = "standard"
    workers: int = 1
    record_points: int = 101
    oracle_dt: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "memory"
    cutoffs: tuple = (10, 10)
    input: InputConfig = field(default_factory=InputConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: str = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["cutoffs"] = list(self.cutoffs)
        d["protocol"]["areas_pi"] = list(self.protocol.areas_pi)
        d["protocol"]["separations"] = list(self.protocol.separations)
        if math.isinf(self.physics.q_m):
            d["physics"]["q_m"] = "inf"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _parse(d)

    def updated(self, updates: dict) -> "ExperimentConfig":
        """Copy with dotted-path fields replaced, e.g. {'physics.q_m': 500}."""
        d = self.to_dict()
        for name, value in updates.items():
            parts = name.split(".")
            node = d
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ConfigError("unknown field", name)
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError("unknown field", name)
            node[parts[-1]] = value
        return _parse(d)


_SECTIONS = {"input": InputConfig, "protocol": ProtocolConfig,
             "physics": PhysicsConfig, "numerics": NumericsConfig}


def _number(value, path, integer=False, allow_inf=False):
    if allow_inf and isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    value = float(value)
    if not math.isfinite(value) and not (allow_inf and value == math.inf):
        raise ConfigError(f"expected a finite number, got {value!r}", path)
    return value


def _parse(d) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in d:
        if key not in known:
            raise ConfigError("unknown field", key)
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {version!r}", "schema_version")
    kind = d.get("kind", "memory")
    if kind not in KINDS:
        raise ConfigError(f"must be one of {KINDS}", "kind")
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = d.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError("expected an object", name)
        fields = {f.name: f for f in dataclasses.fields(cls)}
        vals = {}
        for key, value in raw.items():
            if key not in fields:
                raise ConfigError("unknown field", f"{name}.{key}")
            vals[key] = value
        sections[name] = _check_section(name, cls, vals)
    default_cut = (10, 10, 10) if kind in ("transduce", "contour") else (10, 10)
    cutoffs = d.get("cutoffs", list(default_cut))
    if not isinstance(cutoffs, (list, tuple)):
        raise ConfigError("expected a list of integers", "cutoffs")
    cutoffs = tuple(_number(c, f"cutoffs[{i}]", integer=True) for i, c in enumerate(cutoffs))
    need = 3 if kind in ("transduce", "contour") else 2
    if kind == "oracle-check":
        need = len(cutoffs) if len(cutoffs) in (2, 3) else 2
    if len(cutoffs) != need:
        raise ConfigError(f"{kind} needs {need} cutoffs (microwave, mechanical"
                          f"{', optical' if need == 3 else ''})", "cutoffs")
    for i, c in enumerate(cutoffs):
        if c < 2:
            raise ConfigError("cutoffs must be >= 2", f"cutoffs[{i}]")
    output = d.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("expected a path string", "output")
    cfg = ExperimentConfig(kind, cutoffs, sections["input"], sections["protocol"],
                           sections["physics"], sections["numerics"], output, version)
    _check_consistency(cfg)
    return cfg


def _check_section(p, cls, vals):
    if cls is InputConfig:
        kind = vals.get("kind", "coherent")
        if kind not in INPUT_KINDS:
            raise ConfigError(f"must be one of {INPUT_KINDS}", f"{p}.kind")
        return InputConfig(kind, _number(vals.get("alpha", 1.0), f"{p}.alpha"),
                           _number(vals.get("xi", 0.0), f"{p}.xi"))
    if cls is ProtocolConfig:
        base = ProtocolConfig()
        omega = _number(vals.get("omega_peak", base.omega_peak), f"{p}.omega_peak")
        if not 0 < omega <= 1.0:
            raise ConfigError("must lie in (0, 1] (units of omega_m)", f"{p}.omega_peak")
        delta_t = _number(vals.get("delta_t", base.delta_t), f"{p}.delta_t")
        if delta_t < 0:
            raise ConfigError("must be nonnegative", f"{p}.delta_t")
        sign = _number(vals.get("retrieval_sign", base.retrieval_sign),
                       f"{p}.retrieval_sign", integer=True)
        if sign not in (-1, 1):
            raise ConfigError("must be -1 or +1", f"{p}.retrieval_sign")
        tkind = vals.get("transduction", base.transduction)
        if tkind not in TRANSDUCTION_KINDS:
            raise ConfigError(f"must be one of {TRANSDUCTION_KINDS}", f"{p}.transduction")
        area = vals.get("area_pi")
        area = None if area is None else _number(area, f"{p}.area_pi")
        if area is not None and area <= 0:
            raise ConfigError("must be positive", f"{p}.area_pi")
        sep = vals.get("separation")
        sep = None if sep is None else _number(sep, f"{p}.separation")
        if sep is not None and not -100 < sep < 100:
            raise ConfigError("must lie in (-100, 100) percent", f"{p}.separation")
        areas = vals.get("areas_pi", list(base.areas_pi))
        seps = vals.get("separations", list(base.separations))
        for key, seq in (("areas_pi", areas), ("separations", seps)):
            if not isinstance(seq, (list, tuple)) or not seq:
                raise ConfigError("expected a nonempty list", f"{p}.{key}")
        areas = tuple(_number(a, f"{p}.areas_pi[{i}]") for i, a in enumerate(areas))
        seps = tuple(_number(s, f"{p}.separations[{i}]") for i, s in enumerate(seps))
        if any(a <= 0 for a in areas):
            raise ConfigError("areas must be positive", f"{p}.areas_pi")
        if any(not -100 < s < 100 for s in seps):
            raise ConfigError("separations must lie in (-100, 100) percent", f"{p}.separations")
        return ProtocolConfig(omega, delta_t, sign, tkind, area, sep, areas, seps)
    if cls is PhysicsConfig:
        q = _number(vals.get("q_m", 1e5), f"{p}.q_m", allow_inf=True)
        if not q > 0:
            raise ConfigError("must be positive or \"inf\"", f"{p}.q_m")
        nbar = _number(vals.get("nbar", 0.0), f"{p}.nbar")
        if nbar < 0:
            raise ConfigError("must be nonnegative", f"{p}.nbar")
        om = _number(vals.get("omega_m", 1.0), f"{p}.omega_m")
        if om != 1.0:
            raise ConfigError("omega_m is the unit of frequency and must be 1", f"{p}.omega_m")
        return PhysicsConfig(q, nbar, om)
    base = NumericsConfig()
    dt = _number(vals.get("dt", base.dt), f"{p}.dt")
    if not 0 < dt <= 1:
        raise ConfigError("must lie in (0, 1]", f"{p}.dt")
    n_traj = _number(vals.get("n_traj", base.n_traj), f"{p}.n_traj", integer=True)
    if n_traj < 1:
        raise ConfigError("must be >= 1", f"{p}.n_traj")
    seed = _number(vals.get("master_seed", base.master_seed), f"{p}.master_seed", integer=True)
    if seed < 0:
        raise ConfigError("must be nonnegative", f"{p}.master_seed")
    form = vals.get("sde_form", base.sde_form)
    if form not in SDE_FORMS:
        raise ConfigError(f"must be one of {sorted(SDE_FORMS)}", f"{p}.sde_form")
    workers = _number(vals.get("workers", base.workers), f"{p}.workers", integer=True)
    if workers < 1:
        raise ConfigError("must be >= 1", f"{p}.workers")
    rec = _number(vals.get("record_points", base.record_points), f"{p}.record_points",
                  integer=True)
    if rec < 2:
        raise ConfigError("must be >= 2", f"{p}.record_points")
    odt = _number(vals.get("oracle_dt", base.oracle_dt), f"{p}.oracle_dt")
    if not 0 < odt <= 1:
        raise ConfigError("must lie in (0, 1]", f"{p}.oracle_dt")
    return NumericsConfig(dt, n_traj, seed, form, workers, rec, odt)


def _check_consistency(cfg: ExperimentConfig):
    spec = cfg.input.spec()
    need = spec.min_cutoff()
    if cfg.cutoffs[0] < need:
        raise ConfigError(f"input {spec.kind} needs a microwave cutoff of at least {need}",
                          "cutoffs[0]")
    if cfg.kind == "transduce":
        pr = cfg.protocol
        if pr.transduction == "overlapping" and (pr.area_pi is None or pr.separation is None):
            raise ConfigError("overlapping pulses need area_pi and separation",
                              "protocol.area_pi")
        if pr.transduction == "separated" and not (pr.separation or 0) > 0:
            raise ConfigError("separated pulses need a positive separation",
                              "protocol.separation")
        if pr.transduction == "simultaneous" and pr.separation not in (None, 0.0):
            raise ConfigError("simultaneous pulses have zero separation",
                              "protocol.separation")
    if cfg.kind == "oracle-check":
        dim = int(np.prod(cfg.cutoffs))
        if dim > ORACLE_MAX_DIM:
            raise ConfigError(f"oracle dimension {dim} exceeds {ORACLE_MAX_DIM}", "cutoffs")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such file {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return _parse(d)


def default_config(kind: str) -> ExperimentConfig:
    if kind not in KINDS:
        raise ConfigError(f"must be one of {KINDS}", "kind")
    return _parse({"kind": kind})


# --------------------------------------------------------------------------
# hashing and seeds
# --------------------------------------------------------------------------

def _canonical(d) -> bytes:
    return json.dumps(d, sort_keys=True, separators=(",", ":")).encode()


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(_canonical(cfg.to_dict())).hexdigest()


def seed_key(cfg: ExperimentConfig) -> tuple:
    """Spawn key from the physical content of a configuration.

    Output location, worker count and n_traj are left out, so trajectory i
    draws the same numbers however the run is sliced or scheduled.
    """
    d = cfg.to_dict()
    d.pop("output")
    d["numerics"] = {k: d["numerics"][k] for k in ("dt", "sde_form", "record_points")}
    digest = hashlib.sha256(_canonical(d)).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------

@dataclass
class ResultRecord:
    kind: str
    config: dict
    config_hash: str
    master_seed: int
    coords: dict
    summary: dict
    fidelities: np.ndarray
    labels: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    times: np.ndarray = None
    populations: np.ndarray = None
    modes: tuple = ()
    extras: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)
    grid: dict = None
    output: str = None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind, "config": self.config, "config_hash": self.config_hash,
            "master_seed": self.master_seed, "coords": self.coords, "summary": self.summary,
            "fidelities": [float(f) for f in self.fidelities],
            "labels": self.labels, "seeds": [int(s) for s in self.seeds],
            "modes": list(self.modes), "extras": self.extras, "runtime": self.runtime,
        }
        if self.times is not None:
            out["times"] = [float(t) for t in self.times]
            out["populations"] = np.asarray(self.populations).tolist()
        if self.grid is not None:
            out["grid"] = self.grid
        return out

    @classmethod
    def from_dict(cls, d) -> "ResultRecord":
        return cls(d["kind"], d["config"], d["config_hash"], d["master_seed"], d["coords"],
                   d["summary"], np.asarray(d["fidelities"], dtype=float), d.get("labels", []),
                   d.get("seeds", []),
                   np.asarray(d["times"]) if "times" in d else None,
                   np.asarray(d["populations"]) if "populations" in d else None,
                   tuple(d.get("modes", ())), d.get("extras", {}), d.get("runtime", {}),
                   d.get("grid"))


def load_record(path) -> ResultRecord:
    path = Path(path)
    if path.is_dir():
        path = path / "record.json"
    try:
        return ResultRecord.from_dict(json.loads(path.read_text()))
    except FileNotFoundError:
        raise ReportError(f"no record at {path}") from None


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

def _physics(cfg):
    return NoiseChannel.from_quality(cfg.physics.q_m, cfg.physics.nbar, cfg.physics.omega_m)


def _setup(cfg: ExperimentConfig, area_pi=None, separation=None):
    """(spec, initial, readout, reference vector) for a memory or transduction run."""
    pr = cfg.protocol
    vec = cfg.input.spec().build(cfg.cutoffs[0])
    if cfg.kind == "memory" or (cfg.kind == "oracle-check" and len(cfg.cutoffs) == 2):
        basis = make_basis(cfg.cutoffs, (MICROWAVE, MECHANICAL))
        sched = memory_schedule(pr.omega_peak, pr.delta_t, pr.retrieval_sign)
        readout = MICROWAVE
    else:
        basis = make_basis(cfg.cutoffs, (MICROWAVE, MECHANICAL, OPTICAL))
        if area_pi is not None:
            sched = transduction_schedule("overlapping", area=area_pi * np.pi,
                                          separation=separation, omega_peak=pr.omega_peak)
        else:
            area = None if pr.area_pi is None else pr.area_pi * np.pi
            sched = transduction_schedule(pr.transduction, area=area, separation=pr.separation,
                                          omega_peak=pr.omega_peak)
        readout = OPTICAL
    spec = HamiltonianSpec(basis, sched)
    factors = [(MICROWAVE, vec)]
    if OPTICAL in basis.modes:
        factors.append((OPTICAL, np.eye(cfg.cutoffs[2], dtype=np.complex128)[0]))
    initial = ThermalProductInput(basis, tuple(factors), cfg.physics.nbar)
    return spec, initial, readout, vec


def _record_times(spec, n):
    return np.linspace(spec.schedule.t_start, spec.schedule.t_end, n)


def _ensemble(cfg, spec, initial, readout, ref, key, keep_full=False, n_traj=None):
    return run_ensemble(initial, spec, _physics(cfg), cfg.numerics.dt,
                        n_traj or cfg.numerics.n_traj, cfg.numerics.master_seed,
                        _record_times(spec, cfg.numerics.record_points), readout=readout,
                        reference=ref, keep_full=keep_full, workers=cfg.numerics.workers,
                        sde_form=cfg.numerics.sde_form, seed_key=key)


def _summary(ens):
    s = ens.summary()
    s["max_top_population"] = float(ens.max_top_population)
    return s


def _coords(cfg):
    c = {"q_m": cfg.physics.q_m if math.isfinite(cfg.physics.q_m) else "inf",
         "nbar": cfg.physics.nbar, "omega_peak": cfg.protocol.omega_peak}
    if cfg.kind == "memory" or cfg.kind == "oracle-check":
        c["delta_t"] = cfg.protocol.delta_t
    if cfg.kind == "transduce":
        c["transduction"] = cfg.protocol.transduction
    return c


def _run_memory_like(cfg, key):
    spec, initial, readout, ref = _setup(cfg)
    ens = _ensemble(cfg, spec, initial, readout, ref, key)
    coords = _coords(cfg)
    extras = {}
    if cfg.kind == "memory":
        q = cfg.physics.q_m
        if cfg.input.kind == "coherent" and math.isfinite(q):
            extras["analytic"] = analytic_coherent_fidelity(
                cfg.input.alpha, cfg.physics.omega_m, cfg.protocol.delta_t, q, cfg.physics.nbar)
        if math.isfinite(q) and cfg.protocol.delta_t >= np.pi / cfg.protocol.omega_peak:
            zp = zeta(cfg.physics.omega_m, cfg.protocol.delta_t, cfg.protocol.omega_peak, q,
                      cfg.physics.nbar)
            extras["zeta_o"], extras["zeta"] = zp.zeta_o, zp.zeta
    else:
        extras["separation_percent"] = separation_percent(spec.schedule)
        extras["area"] = spec.schedule.meta["area"]
        extras["max_mechanical_population"] = float(
            ens.mean_populations[:, spec.basis.mode_index(MECHANICAL)].max())
    return ens, coords, extras, spec


def _run_contour(cfg, key):
    pr = cfg.protocol
    grid_mean = np.zeros((len(pr.areas_pi), len(pr.separations)))
    grid_sem = np.zeros_like(grid_mean)
    all_f, labels, seeds = [], [], []
    for i, a in enumerate(pr.areas_pi):
        for j, s in enumerate(pr.separations):
            spec, initial, readout, ref = _setup(cfg, area_pi=a, separation=s)
            ens = _ensemble(cfg, spec, initial, readout, ref, key + (i, j))
            sm = ens.summary()
            grid_mean[i, j], grid_sem[i, j] = sm["mean"], sm["sem"]
            all_f.extend(ens.fidelities.tolist())
            labels.extend({"area_pi": a, "separation": s, **t.initial_label}
                          for t in ens.trajectories)
            seeds.extend(t.seed for t in ens.trajectories)
    grid = {"areas_pi": list(pr.areas_pi), "separations": list(pr.separations),
            "mean": grid_mean.tolist(), "sem": grid_sem.tolist()}
    return np.asarray(all_f), labels, seeds, grid


def _run_oracle(cfg, key):
    spec, initial, readout, ref = _setup(cfg)
    noise = _physics(cfg)
    ens = _ensemble(cfg, spec, initial, readout, ref, key, keep_full=True)
    mc = spec.basis.cutoffs[spec.basis.mode_index(MECHANICAL)]
    p = thermal_probabilities(cfg.physics.nbar, mc)
    factors = {MICROWAVE: np.outer(ref, ref.conj()), MECHANICAL: np.diag(p / p.sum())}
    if OPTICAL in spec.basis.modes:
        vac = np.zeros((cfg.cutoffs[2],) * 2)
        vac[0, 0] = 1.0
        factors[OPTICAL] = vac
    rho0 = np.ones((1, 1))
    for mode in spec.basis.modes:
        rho0 = np.kron(rho0, factors[mode])
    rho = lindblad_evolve(rho0, spec, noise, dt=cfg.numerics.oracle_dt)
    td = trace_distance(ens.mean_full, rho)
    return ens, {"trace_distance": td}, spec


def _check_output(out: Path, overwrite: bool):
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise OutputExistsError(f"{out} is not empty; pass overwrite=True to replace it",
                                    "output")
        for name in OUTPUT_FILES:
            if (out / name).exists():
                (out / name).unlink()


def run_experiment(cfg: ExperimentConfig, out=None, overwrite: bool = False,
                   seed_prefix: tuple = ()) -> ResultRecord:
    """Run one experiment and, when an output directory is known, persist it.

    ``out`` overrides ``cfg.output``.  The returned record carries the config
    hash and master seed; re-running the same config reproduces it exactly.
    """
    out = out if out is not None else cfg.output
    if out is not None:
        _check_output(Path(out), overwrite)
    key = tuple(seed_prefix) + seed_key(cfg)
    t0 = time.perf_counter()
    times = pops = None
    modes = ()
    grid = None
    extras = {}
    if cfg.kind == "contour":
        fids, labels, seeds, grid = _run_contour(cfg, key)
        summary = _fid_summary(fids)
        coords = _coords(cfg)
    else:
        if cfg.kind == "oracle-check":
            ens, extras, spec = _run_oracle(cfg, key)
            coords = _coords(cfg)
        else:
            ens, coords, extras, spec = _run_memory_like(cfg, key)
        fids = ens.fidelities
        summary = _summary(ens)
        labels = [t.initial_label for t in ens.trajectories]
        seeds = [t.seed for t in ens.trajectories]
        times, pops, modes = ens.times, ens.mean_populations, spec.basis.modes
    runtime = {"seconds": time.perf_counter() - t0, "numba": USE_NUMBA,
               "version": __version__, "workers": cfg.numerics.workers}
    rec = ResultRecord(cfg.kind, cfg.to_dict(), config_hash(cfg), cfg.numerics.master_seed,
                       coords, summary, np.asarray(fids, dtype=float), labels, seeds, times,
                       pops, tuple(modes), extras, runtime, grid)
    if out is not None:
        write_record(rec, Path(out))
        rec.output = str(out)
    return rec


def _fid_summary(f):
    f = np.asarray(f, dtype=float)
    q = np.percentile(f, [5, 25, 50, 75, 95])
    n = f.size
    return {"n_traj": int(n), "mean": float(f.mean()),
            "std": float(f.std(ddof=1)) if n > 1 else 0.0,
            "sem": float(f.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            "median": float(q[2]), "p05": float(q[0]), "p95": float(q[4]),
            "iqr": float(q[3] - q[1])}


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _write_table(path: Path, header_lines, columns, rows):
    lines = [f"# {h}" for h in header_lines]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def histogram(fidelities, bins=HIST_BINS):
    counts, edges = np.histogram(np.clip(fidelities, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return edges, counts


def write_record(rec: ResultRecord, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    head = [UNITS, f"kind: {rec.kind}", f"config_hash: {rec.config_hash}",
            f"master_seed: {rec.master_seed}"]
    (out / "config.snapshot.json").write_text(
        json.dumps(rec.config, indent=2, sort_keys=True) + "\n")
    if rec.grid is None:
        label_keys = sorted({k for lab in rec.labels for k in lab})
        rows = [[i, s, f] + [lab.get(k, "") for k in label_keys]
                for i, (s, f, lab) in enumerate(zip(rec.seeds, rec.fidelities, rec.labels))]
        _write_table(out / "fidelity.csv", head + ["per-trajectory fidelity with the input"],
                     ["trajectory", "seed", "fidelity"] + label_keys, rows)
        cols = ["time"] + [f"n_{m}" for m in rec.modes]
        rows = [[t] + list(p) for t, p in zip(rec.times, rec.populations)]
        _write_table(out / "populations.csv", head + ["ensemble-mean occupation per mode"],
                     cols, rows)
    else:
        g = rec.grid
        rows = [[a, s, g["mean"][i][j], g["sem"][i][j]]
                for i, a in enumerate(g["areas_pi"]) for j, s in enumerate(g["separations"])]
        _write_table(out / "fidelity.csv",
                     head + ["mean fidelity per grid point; area in units of pi, "
                             "separation in percent of the sequence time"],
                     ["area_pi", "separation", "mean", "sem"], rows)
        rows = [[lab["area_pi"], lab["separation"], i, f]
                for i, (lab, f) in enumerate(zip(rec.labels, rec.fidelities))]
        _write_table(out / "populations.csv",
                     head + ["contour runs keep no population traces; per-trajectory "
                             "fidelities listed instead"],
                     ["area_pi", "separation", "trajectory", "fidelity"], rows)
    edges, counts = histogram(rec.fidelities)
    _write_table(out / "histogram.csv", head + ["distribution of per-trajectory fidelities"],
                 ["bin_lo", "bin_hi", "count"],
                 [[edges[i], edges[i + 1], int(c)] for i, c in enumerate(counts)])
    (out / "summary.txt").write_text(format_summary(rec))
    (out / "record.json").write_text(json.dumps(rec.to_dict(), indent=1, sort_keys=True) + "\n")


def format_summary(rec: ResultRecord) -> str:
    lines = [f"experiment: {rec.kind}", f"config hash: {rec.config_hash}",
             f"master seed: {rec.master_seed}", f"units: {UNITS}"]
    for k, v in rec.coords.items():
        lines.append(f"{k}: {v}")
    for k in ("n_traj", "mean", "sem", "median", "p05", "p95", "iqr", "fidelity_of_mean"):
        if k in rec.summary:
            v = rec.summary[k]
            lines.append(f"{k}: {v}" if isinstance(v, int) else f"{k}: {v:.6f}")
    for k, v in sorted(rec.extras.items()):
        lines.append(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    if rec.grid is not None:
        lines.append("mean fidelity grid (rows: area/pi, columns: separation %):")
        lines.append("area/pi  " + "  ".join(f"{s:>8g}" for s in rec.grid["separations"]))
        for a, row in zip(rec.grid["areas_pi"], rec.grid["mean"]):
            lines.append(f"{a:<8.4g} " + "  ".join(f"{v:8.4f}" for v in row))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# sweeps and reports
# --------------------------------------------------------------------------

def sweep(cfg: ExperimentConfig, axes, out=None, overwrite: bool = False):
    """Cartesian product over ``axes`` = [(dotted field name, values), ...].

    Every point is an independent run_experiment of the updated config, so
    its seeds depend only on its own content and not on its position.
    """
    axes = list(axes)
    if not axes:
        raise ConfigError("a sweep needs at least one axis")
    for name, values in axes:
        if len(list(values)) == 0:
            raise ConfigError("empty sweep axis", name)
    out = out if out is not None else cfg.output
    names = [n for n, _ in axes]
    records = []
    points = list(itertools.product(*[list(v) for _, v in axes]))
    cfgs = [cfg.updated(dict(zip(names, pt))) for pt in points]
    if out is not None:
        base = Path(out)
        if base.exists() and any(base.iterdir()) and not overwrite:
            raise OutputExistsError(f"{base} is not empty; pass overwrite=True", "output")
    for i, (pt, c) in enumerate(zip(points, cfgs)):
        sub = None if out is None else str(Path(out) / f"point_{i:04d}")
        rec = run_experiment(c, out=sub, overwrite=overwrite)
        rec.coords.update({n: v for n, v in zip(names, pt)})
        records.append(rec)
    if out is not None:
        rows = [[i] + [_fmt(v) for v in pt] + [r.summary.get("mean", float("nan"))]
                for i, (pt, r) in enumerate(zip(points, records))]
        _write_table(Path(out) / "sweep.csv", [UNITS, f"axes: {', '.join(names)}"],
                     ["point"] + names + ["mean_fidelity"], rows)
    return records


def emit_report(records, out) -> dict:
    """Plot-ready tables from a list of records; returns {table name: path}."""
    records = list(records)
    if not records:
        raise ReportError("no records to report")
    kinds = {r.kind for r in records}
    if len(kinds) > 1:
        raise ReportError(f"cannot combine experiment kinds {sorted(kinds)}")
    kind = kinds.pop()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    head = [UNITS, f"kind: {kind}", f"records: {len(records)}"]
    if kind == "contour":
        for n, r in enumerate(records):
            g = r.grid
            rows = [[a] + list(row) for a, row in zip(g["areas_pi"], g["mean"])]
            path = out / (f"contour_{n:03d}.csv" if len(records) > 1 else "contour.csv")
            _write_table(path, head + ["mean fidelity; rows: pulse area in units of pi, "
                                       "columns: peak separation in percent"],
                         ["area_pi"] + [f"sep_{_fmt(s)}" for s in g["separations"]], rows)
            written[path.stem] = path
    else:
        rows = []
        for r in records:
            c, s = r.config, r.summary
            rows.append([c["physics"]["q_m"], c["physics"]["nbar"], c["protocol"]["delta_t"],
                         s["mean"], s["sem"], s["median"], s["p05"], s["p95"], s["iqr"],
                         r.extras.get("analytic", float("nan"))])
        order = sorted(range(len(rows)), key=lambda i: (rows[i][1], _qkey(rows[i][0])))
        path = out / "fidelity_vs_q.csv"
        _write_table(path, head + ["fidelity statistics against the mechanical quality factor"],
                     ["q_m", "nbar", "delta_t", "mean", "sem", "median", "p05", "p95", "iqr",
                      "analytic"], [rows[i] for i in order])
        written["fidelity_vs_q"] = path
        zrows = [[r.extras["zeta"], r.extras["zeta_o"], r.config["physics"]["nbar"],
                  r.config["physics"]["q_m"], r.summary["mean"], r.summary["sem"]]
                 for r in records if "zeta" in r.extras]
        if zrows:
            zrows.sort(key=lambda x: (x[2], x[0]))
            path = out / "fidelity_vs_zeta.csv"
            _write_table(path, head + ["zeta = omega_m (delta_t - pi/Omega) nbar / q_m"],
                         ["zeta", "zeta_o", "nbar", "q_m", "mean", "sem"], zrows)
            written["fidelity_vs_zeta"] = path
        prow = []
        for n, r in enumerate(records):
            if r.times is None:
                continue
            for t, p in zip(r.times, r.populations):
                prow.append([n, t] + list(p))
        if prow:
            modes = records[0].modes
            path = out / "populations.csv"
            _write_table(path, head + ["ensemble-mean occupation per mode"],
                         ["record", "time"] + [f"n_{m}" for m in modes], prow)
            written["populations"] = path
    lines = [f"report over {len(records)} {kind} record(s)"]
    for r in records:
        lines.append(f"- {r.config_hash[:12]} {r.coords} mean={r.summary.get('mean', 0):.6f}")
    path = out / "summary.txt"
    path.write_text("\n".join(lines) + "\n")
    written["summary"] = path
    return written


def _qkey(q):
    return math.inf if q == "inf" else float(q)
