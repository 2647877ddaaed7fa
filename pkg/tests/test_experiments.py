"""Experiment runner: spec handling, CSV artifacts, audits, CLI."""

import csv
import shutil
from pathlib import Path

import numpy as np
import pytest

from covertjam import cli
from covertjam.experiments import (
    FIGURE_IDS,
    ExperimentSpec,
    audit_run,
    default_spec,
    default_sweep,
    list_defaults,
    load_spec,
    recompute_objective,
    run_experiment,
    save_spec,
)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(figure_id="fig1_nope", sweep=(1.0,))
    with pytest.raises(ValueError):
        ExperimentSpec(figure_id="fig4_rate_vs_Q", sweep=())
    with pytest.raises(ValueError):
        ExperimentSpec(figure_id="fig4_rate_vs_Q", sweep=(25.0,),
                       scenarios_per_point=0)
    with pytest.raises(ValueError):
        ExperimentSpec(figure_id="fig4_rate_vs_Q", sweep=(25.0,), jobs=0)


def test_default_sweeps_cover_every_figure():
    for figure_id in FIGURE_IDS:
        sweep = default_sweep(figure_id)
        assert len(sweep) >= 1
        spec = default_spec(figure_id)
        assert spec.sweep == sweep


def test_spec_roundtrip_through_ini(tmp_path):
    spec = default_spec("fig8_rate_vs_Q_fast", seed=5, jobs=2,
                        scenario={"M": 10, "P_R_dBm": 7.5})
    path = tmp_path / "spec.ini"
    save_spec(spec, path)
    back = load_spec(path)
    assert back.figure_id == spec.figure_id
    assert back.sweep == spec.sweep
    assert back.seed == 5
    assert back.scenario["M"] == 10
    assert abs(back.scenario["P_R_dBm"] - 7.5) < 1e-12


def test_load_spec_fills_default_sweep(tmp_path):
    path = tmp_path / "spec.ini"
    path.write_text("[experiment]\nfigure = fig5_rate_vs_M\n")
    spec = load_spec(path)
    assert spec.sweep == default_sweep("fig5_rate_vs_M")
    assert spec.scenarios_per_point == 20


def test_bound_comparison_figure(tmp_path):
    spec = default_spec("fig2_tv_bounds", sweep=(0.1, 0.5),
                        trials=40000, seed=1, output_dir=str(tmp_path))
    out = run_experiment(spec)
    rows = _read(out / "points.csv")
    by = {(r["sweep_value"], r["method"]): float(r["objective"])
          for r in rows}
    for chi_key in ("0.10000000000000001", "0.5"):
        tv = by[(chi_key, "tv_numeric")]
        proposed = by[(chi_key, "proposed_bound")]
        pinsker = by[(chi_key, "pinsker_bound")]
        hellinger = by[(chi_key, "hellinger_bound")]
        ci = next(float(r["ci"]) for r in rows
                  if r["sweep_value"] == chi_key
                  and r["method"] == "tv_numeric")
        assert tv <= proposed + 3.0 * ci
        assert tv <= pinsker + 3.0 * ci
        assert tv <= hellinger + 3.0 * ci
        # The additive eta bound beats Pinsker throughout the covert
        # range; the Hellinger route only catches up at large chi.
        assert proposed < pinsker
    chi_small = "0.10000000000000001"
    assert by[(chi_small, "proposed_bound")] < by[(chi_small,
                                                   "hellinger_bound")]
    assert (out / "plot.py").exists()
    assert (out / "spec.ini").exists()


def test_runs_are_byte_identical(tmp_path):
    kwargs = dict(sweep=(20.0, 30.0), scenarios_per_point=2, seed=3)
    a = run_experiment(default_spec("fig4_rate_vs_Q",
                                    output_dir=str(tmp_path / "a"), **kwargs))
    b = run_experiment(default_spec("fig4_rate_vs_Q", jobs=3,
                                    output_dir=str(tmp_path / "b"), **kwargs))
    for name in ("points.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_every_row_objective_recomputable(tmp_path):
    for figure_id, kwargs in (
            ("fig4_rate_vs_Q", dict(sweep=(25.0,), scenarios_per_point=2)),
            ("fig9_rate_vs_eps", dict(sweep=(0.05,),
                                      scenarios_per_point=2)),
            ("fig2_tv_bounds", dict(sweep=(0.3,), trials=20000)),
    ):
        spec = default_spec(figure_id, seed=2, output_dir=str(tmp_path),
                            **kwargs)
        out = run_experiment(spec)
        spec_back = load_spec(out / "spec.ini")
        for row in _read(out / "points.csv"):
            if row["error"] or not row["chi"]:
                continue
            val = recompute_objective(spec_back, row)
            assert abs(val - float(row["objective"])) <= 1e-9, \
                (figure_id, row["method"])


def test_summary_aggregates_points(tmp_path):
    spec = default_spec("fig5_rate_vs_M", sweep=(10, 20),
                        scenarios_per_point=3, seed=1,
                        output_dir=str(tmp_path))
    out = run_experiment(spec)
    points = _read(out / "points.csv")
    summary = _read(out / "summary.csv")
    for srow in summary:
        group = [float(p["objective"]) for p in points
                 if p["sweep_value"] == srow["sweep_value"]
                 and p["method"] == srow["method"] and not p["error"]]
        assert int(srow["n_ok"]) == len(group)
        assert abs(float(srow["mean_objective"]) - np.mean(group)) < 1e-12


def test_convergence_figures_emit_traces(tmp_path):
    spec = default_spec("fig6_ao_convergence", sweep=(0, 1), seed=4,
                        output_dir=str(tmp_path))
    out = run_experiment(spec)
    traces = _read(out / "traces.csv")
    assert {t["sweep_value"] for t in traces} == {"0", "1"}
    for key in ("0", "1"):
        objs = [float(t["objective"]) for t in traces
                if t["sweep_value"] == key][:-1]
        assert all(b >= a - 1e-10 for a, b in zip(objs, objs[1:]))


def test_partial_failures_recorded_not_raised(tmp_path):
    # An impossible scenario override breaks sampling for every point;
    # the run must still complete and record the reason per row.
    spec = default_spec("fig5_rate_vs_M", sweep=(10,),
                        scenarios_per_point=2, seed=1,
                        output_dir=str(tmp_path), scenario={"K": 0})
    out = run_experiment(spec)
    rows = _read(out / "points.csv")
    assert len(rows) == 2
    assert all(r["error"] for r in rows)
    summary = _read(out / "summary.csv")
    assert summary[0]["n_failed"] == "2"
    assert summary[0]["mean_objective"] == ""


def test_audit_passes_clean_run(tmp_path):
    spec = default_spec("fig4_rate_vs_Q", sweep=(25.0,),
                        scenarios_per_point=2, seed=6,
                        output_dir=str(tmp_path))
    out = run_experiment(spec)
    path = audit_run(out, trials=20000)
    rows = _read(path)
    assert len(rows) == 4  # 2 scenarios x {sca, poa}
    assert all(r["passed"] == "True" for r in rows)


def test_audit_detects_power_inflation(tmp_path):
    spec = default_spec("fig4_rate_vs_Q", sweep=(25.0,),
                        scenarios_per_point=2, seed=6,
                        output_dir=str(tmp_path / "clean"))
    out = run_experiment(spec)
    bad = tmp_path / "bad" / "fig4_rate_vs_Q"
    shutil.copytree(out, bad)
    pts = bad / "points.csv"
    rows = _read(pts)
    for row in rows:
        if row["chi"]:
            row["chi"] = ";".join(format(5.0 * float(t), ".17g")
                                  for t in row["chi"].split(";"))
    with open(pts, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    path = audit_run(bad, trials=10**5, max_rows=2)
    audited = _read(path)
    assert len(audited) == 2
    assert all(r["passed"] == "False" for r in audited)


def test_audit_trivial_epsilon_passes(tmp_path):
    spec = default_spec("fig4_rate_vs_Q", sweep=(25.0,),
                        scenarios_per_point=1, seed=6,
                        output_dir=str(tmp_path))
    out = run_experiment(spec)
    pts = out / "points.csv"
    rows = _read(pts)
    for row in rows:
        row["epsilon"] = "0.99"
        if row["chi"]:
            row["chi"] = ";".join(format(5.0 * float(t), ".17g")
                                  for t in row["chi"].split(";"))
    with open(pts, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    audited = _read(audit_run(out, trials=5000))
    assert audited and all(r["passed"] == "True" for r in audited)


def test_defaults_listing_mentions_stock_values():
    text = list_defaults()
    assert "150" in text       # adversary distance
    assert "25" in text        # jammer power dBm
    assert "0.005" in text     # slow-fading epsilon
    assert "fig9_rate_vs_eps" in text


def test_cli_run_audit_defaults(tmp_path, capsys):
    ini = tmp_path / "spec.ini"
    ini.write_text("[experiment]\nfigure = fig9_rate_vs_eps\n"
                   "sweep = 0.05,0.2\nscenarios_per_point = 1\nseed = 1\n"
                   f"output_dir = {tmp_path / 'runs'}\n")
    assert cli.main(["run", str(ini), "--jobs", "2"]) == 0
    run_dir = tmp_path / "runs" / "fig9_rate_vs_eps"
    assert (run_dir / "points.csv").exists()
    assert cli.main(["audit", str(run_dir), "--trials", "5000",
                     "--max-rows", "2"]) == 0
    assert cli.main(["defaults"]) == 0
    out = capsys.readouterr().out
    assert "fig9_rate_vs_eps" in out


def test_cli_flag_overrides_spec(tmp_path):
    ini = tmp_path / "spec.ini"
    ini.write_text("[experiment]\nfigure = fig2_tv_bounds\nsweep = 0.2\n"
                   "trials = 50\nseed = 9\n"
                   f"output_dir = {tmp_path / 'runs'}\n")
    assert cli.main(["run", str(ini), "--trials", "20000"]) == 0
    rows = _read(tmp_path / "runs" / "fig2_tv_bounds" / "points.csv")
    # CI at 2e4 samples is far tighter than 50 samples could give.
    ci = next(float(r["ci"]) for r in rows if r["method"] == "tv_numeric")
    assert ci < 0.01
