import json

import numpy as np
import pytest

from eomqsd import ConfigError, OutputExistsError, ReportError
from eomqsd.experiment import (OUTPUT_FILES, UNITS, ExperimentConfig, config_hash,
                               default_config, emit_report, load_config, load_record,
                               run_experiment, seed_key, sweep)


def small(kind="memory", **over):
    d = {"kind": kind, "cutoffs": [2, 3] if kind in ("memory", "oracle-check") else [2, 2, 2],
         "input": {"kind": "fock_superposition"},
         "physics": {"q_m": 400, "nbar": 1.0},
         "protocol": {"delta_t": 40},
         "numerics": {"n_traj": 6, "dt": 0.02, "master_seed": 3, "record_points": 5}}
    for k, v in over.items():
        d[k] = {**d.get(k, {}), **v} if isinstance(v, dict) else v
    return ExperimentConfig.from_dict(d)


def test_defaults_and_round_trip():
    for kind in ("memory", "transduce", "contour", "oracle-check"):
        cfg = default_config(kind)
        assert ExperimentConfig.from_dict(json.loads(cfg.to_json())) == cfg
    cfg = small(physics={"q_m": "inf"})
    assert cfg.physics.q_m == float("inf")
    assert cfg.to_dict()["physics"]["q_m"] == "inf"
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("bad,path", [
    ({"kind": "teleport"}, "kind"),
    ({"colour": 1}, "colour"),
    ({"cutoffs": [2, 2, 2]}, "cutoffs"),
    ({"cutoffs": [1, 4]}, "cutoffs[0]"),
    ({"cutoffs": [4, 4], "input": {"kind": "coherent", "alpha": 1.0}}, "cutoffs[0]"),
    ({"physics": {"q_m": -5}}, "physics.q_m"),
    ({"physics": {"nbar": "three"}}, "physics.nbar"),
    ({"numerics": {"n_traj": 0}}, "numerics.n_traj"),
    ({"numerics": {"sde_form": "ito"}}, "numerics.sde_form"),
    ({"protocol": {"wait": 3}}, "protocol.wait"),
    ({"schema_version": 7}, "schema_version"),
])
def test_config_errors_carry_field_path(bad, path):
    d = {"kind": "memory", "cutoffs": [4, 4], "input": {"kind": "fock_superposition"}}
    d.update(bad)
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(d)
    assert info.value.path == path


def test_oracle_check_cap():
    with pytest.raises(ConfigError):
        small("oracle-check", cutoffs=[20, 20])


def test_updated_and_unknown_field():
    cfg = small().updated({"physics.q_m": 900, "numerics.n_traj": 2})
    assert cfg.physics.q_m == 900 and cfg.numerics.n_traj == 2
    with pytest.raises(ConfigError):
        small().updated({"physics.temperature": 1})


def test_seed_key_ignores_bookkeeping_fields():
    cfg = small()
    other = cfg.updated({"numerics.n_traj": 50, "numerics.workers": 3, "output": "x"})
    assert seed_key(cfg) == seed_key(other)
    assert config_hash(cfg) != config_hash(other)
    assert seed_key(cfg) != seed_key(cfg.updated({"physics.q_m": 401}))


def test_lossless_memory_run_is_exact():
    cfg = small(physics={"q_m": "inf", "nbar": 0})
    rec = run_experiment(cfg)
    assert rec.fidelities.min() >= 1 - 1e-6


def test_outputs_written_and_deterministic(tmp_path):
    cfg = small()
    a = run_experiment(cfg, out=tmp_path / "a")
    b = run_experiment(cfg, out=tmp_path / "b")
    for name in ("fidelity.csv", "populations.csv", "histogram.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert UNITS in (tmp_path / "a" / name).read_text()
    for name in OUTPUT_FILES:
        assert (tmp_path / "a" / name).exists()
    assert a.config_hash == b.config_hash and a.master_seed == 3
    snap = load_config(tmp_path / "a" / "config.snapshot.json")
    assert snap == cfg
    rec = load_record(tmp_path / "a")
    np.testing.assert_array_equal(rec.fidelities, a.fidelities)
    hist = np.loadtxt(tmp_path / "a" / "histogram.csv", delimiter=",", comments="#",
                      skiprows=1 + sum(1 for l in (tmp_path / "a" / "histogram.csv")
                                       .read_text().splitlines() if l.startswith("#")))
    assert hist[:, 2].sum() == cfg.numerics.n_traj


def test_rerun_reproduces_record(tmp_path):
    rec = run_experiment(small(), out=tmp_path / "r")
    again = run_experiment(ExperimentConfig.from_dict(rec.config))
    np.testing.assert_array_equal(again.fidelities, rec.fidelities)


def test_overwrite_guard(tmp_path):
    cfg = small()
    run_experiment(cfg, out=tmp_path)
    with pytest.raises(OutputExistsError):
        run_experiment(cfg, out=tmp_path)
    run_experiment(cfg, out=tmp_path, overwrite=True)


def test_sweep_points_independent_of_order(tmp_path):
    cfg = small()
    fwd = sweep(cfg, [("physics.q_m", [300, 600])], out=tmp_path / "f")
    rev = sweep(cfg, [("physics.q_m", [600, 300])])
    np.testing.assert_array_equal(fwd[0].fidelities, rev[1].fidelities)
    np.testing.assert_array_equal(fwd[1].fidelities, rev[0].fidelities)
    assert (tmp_path / "f" / "sweep.csv").exists()
    assert (tmp_path / "f" / "point_0001" / "record.json").exists()
    single = run_experiment(cfg.updated({"physics.q_m": 300}))
    np.testing.assert_array_equal(single.fidelities, fwd[0].fidelities)
    with pytest.raises(ConfigError):
        sweep(cfg, [("physics.q_m", [])])


def test_sweep_grid_size():
    recs = sweep(small(numerics={"n_traj": 2}), [("physics.q_m", [300, 600]),
                                                  ("physics.nbar", [0, 1])])
    assert len(recs) == 4
    assert {(r.coords["physics.q_m"], r.coords["physics.nbar"]) for r in recs} == \
        {(300, 0), (300, 1), (600, 0), (600, 1)}


def test_report_tables(tmp_path):
    recs = sweep(small(numerics={"n_traj": 2}), [("physics.q_m", [300, 600])])
    paths = emit_report(recs, tmp_path / "rep")
    rows = [l for l in paths["fidelity_vs_q"].read_text().splitlines()
            if not l.startswith("#")]
    assert len(rows) == 1 + 2
    assert "fidelity_vs_zeta" in paths and "populations" in paths
    one = emit_report(recs[:1], tmp_path / "one")
    rows = [l for l in one["fidelity_vs_q"].read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 2
    assert (tmp_path / "rep" / "summary.txt").exists()


def test_report_errors(tmp_path):
    with pytest.raises(ReportError):
        emit_report([], tmp_path)
    a = run_experiment(small(numerics={"n_traj": 2}))
    b = run_experiment(small("transduce", numerics={"n_traj": 2}))
    with pytest.raises(ReportError):
        emit_report([a, b], tmp_path)
    with pytest.raises(ReportError):
        load_record(tmp_path / "missing")


def test_contour_report_shape(tmp_path):
    cfg = small("contour", protocol={"areas_pi": [1.0, 2.0, 3.0], "separations": [0.0, 40.0]},
                physics={"q_m": "inf", "nbar": 0}, numerics={"n_traj": 1})
    rec = run_experiment(cfg, out=tmp_path / "c")
    assert np.shape(rec.grid["mean"]) == (3, 2)
    paths = emit_report([rec], tmp_path / "rep")
    lines = [l for l in paths["contour"].read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 1 + 3
    assert all(len(l.split(",")) == 1 + 2 for l in lines)
    # separated pi pulses transfer, separated 3pi pulses too
    assert rec.grid["mean"][0][1] > 0.99 and rec.grid["mean"][2][1] > 0.99


def test_oracle_check_reports_trace_distance():
    rec = run_experiment(small("oracle-check", numerics={"n_traj": 40}))
    assert 0 <= rec.extras["trace_distance"] < 0.3


def test_transduce_extras():
    rec = run_experiment(small("transduce", physics={"q_m": "inf", "nbar": 0},
                               numerics={"n_traj": 1}))
    assert rec.extras["separation_percent"] == 0.0
    assert rec.extras["area"] == pytest.approx(np.sqrt(2) * np.pi)
    assert rec.fidelities[0] >= 1 - 1e-4
