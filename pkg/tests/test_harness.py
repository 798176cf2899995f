import csv
import json
import math

import numpy as np
import pytest

from wedgetc.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    ResultRow,
    budget_rates,
    emit_outputs,
    median_table,
    replay,
    rows_to_csv,
    run_experiment,
    run_gd_sweep,
    run_subspace_sweep,
)

SMALL = dict(n=[20], r=[1, 2], s=[1.0], trials=2, seed=11)


def row(value, trial=0, scheme="wedge"):
    return ResultRow("subspace", 10, 1, 1.0, scheme, trial, 0, 5, "op_err", value)


def test_csv_header_and_line_count():
    assert rows_to_csv([]).splitlines() == [",".join(CSV_HEADER)]
    text = rows_to_csv([row(0.1, t) for t in range(3)])
    lines = text.splitlines()
    assert lines[0] == "experiment,n,r,s,scheme,trial,seed,samples,metric,value,wall_ms,failure_code"
    assert len(lines) == 4


def test_empty_grid_writes_header_only(tmp_path):
    cfg = ExperimentConfig(n=[], r=[1], s=[1.0], trials=1, out_dir=str(tmp_path))
    rows, traces = run_experiment(cfg)
    assert rows == [] and traces == []
    paths = emit_outputs(rows, cfg)
    assert paths["results"].read_text().splitlines() == [",".join(CSV_HEADER)]


def test_budget_rates_match_entry_budget():
    n, s, c = 50, 1.5, 4.0
    p_w, p_u = budget_rates(n, s, c)
    m = n**2
    # expected entries: wedges over pairs i <= j give about p n^2 m, uniform gives p n m
    assert p_w * n**2 * m == pytest.approx(p_u * n * m)
    assert p_u == pytest.approx(c * math.log(n) / n**s)


def test_sample_accounting_and_full_rate_recovery(tmp_path):
    cfg = ExperimentConfig(experiment="subspace", n=[15], r=[2], s=[1.0], trials=1, p_override=1.0, seed=3)
    rows = run_subspace_sweep(cfg)
    for r in rows:
        if r.scheme == "wedge":
            # every wedge observed: 2 entries each, diagonal wedges counted once
            n, m = 15, 15**2
            assert r.samples == 2 * (n * (n + 1) // 2) * m - n * m
            assert r.value < 1e-8
        assert r.failure_code == ""


def test_median_table_matches_recomputation():
    cfg = ExperimentConfig(**SMALL)
    rows = run_subspace_sweep(cfg)
    table = median_table(rows)
    for (exp, n, r, s, scheme, metric), med in table.items():
        vals = [x.value for x in rows if (x.n, x.r, x.scheme, x.metric) == (n, r, scheme, metric)]
        assert med == pytest.approx(float(np.median(vals)))
    nan_rows = [row(math.nan, 0), row(math.nan, 1), row(1.0, 2)]
    assert median_table(nan_rows)[("subspace", 10, 1, 1.0, "wedge", "op_err")] == math.inf


def test_same_seed_identical_bytes_and_threads(tmp_path, monkeypatch):
    cfg = ExperimentConfig(**SMALL, out_dir=str(tmp_path / "a"))
    a = emit_outputs(run_experiment(cfg)[0], cfg)["results"].read_bytes()
    cfg_b = ExperimentConfig(**SMALL, out_dir=str(tmp_path / "b"))
    monkeypatch.setenv("WEDGE_THREADS", "3")
    b = emit_outputs(run_experiment(cfg_b, threads=1)[0], cfg_b)["results"].read_bytes()
    assert a == b
    other = ExperimentConfig(**{**SMALL, "seed": 12})
    assert rows_to_csv(run_experiment(other)[0]) != a.decode()


def test_replay_reproduces_digests(tmp_path):
    cfg = ExperimentConfig(**SMALL, out_dir=str(tmp_path / "orig"))
    paths = emit_outputs(run_experiment(cfg)[0], cfg)
    same, new_paths = replay(paths["manifest"], out_dir=tmp_path / "again")
    assert same
    assert new_paths["results"].read_bytes() == paths["results"].read_bytes()


def test_plots_only_when_requested(tmp_path):
    cfg = ExperimentConfig(**SMALL, out_dir=str(tmp_path / "np"))
    emit_outputs(run_experiment(cfg)[0], cfg)
    assert not list((tmp_path / "np").glob("*.svg"))
    cfg = ExperimentConfig(**SMALL, out_dir=str(tmp_path / "p"), plots=True)
    paths = emit_outputs(run_experiment(cfg)[0], cfg)
    svgs = list((tmp_path / "p").glob("*.svg"))
    assert svgs and all(p.read_text().lstrip().startswith("<?xml") for p in svgs)
    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["config_hash"] == ExperimentConfig(**SMALL).hash()


def test_gd_sweep_writes_traces(tmp_path):
    cfg = ExperimentConfig(experiment="gd", n=[15], r=[1], s=[1.0], trials=1, p_override=1.0,
                           q_const=1.0, q_exp=0.0, t_max=30, out_dir=str(tmp_path))
    rows, traces = run_gd_sweep(cfg)
    assert {r.metric for r in rows} == {"init_rel_err_F", "final_rel_err_F", "final_rel_err_inf", "iterations"}
    paths = emit_outputs(rows, cfg, traces)
    lines = list(csv.reader(open(paths["traces"])))
    assert lines[0] == ["n", "r", "s", "scheme", "trial", "iteration", "F", "rel_err_F", "rel_err_inf"]
    assert len(lines) == len(traces) + 1 > 2


def test_delta_probe_rows(tmp_path):
    cfg = ExperimentConfig(experiment="delta_probe", n=[8], r=[1], s=[0.5, 0.0], trials=2, restarts=2,
                           iters=20, out_dir=str(tmp_path))
    rows, _ = run_experiment(cfg)
    assert {r.scheme for r in rows} == {"delta", "operator"}
    # rate 1 reveals the tensor exactly
    assert all(abs(r.value) < 1e-10 for r in rows if r.s == 0.0)
    assert emit_outputs(rows, cfg)["probe"].exists()


@pytest.mark.parametrize("bad", [
    dict(experiment="nope"), dict(trials=0), dict(n=[5], r=[6]), dict(schemes=["other"]),
    dict(c=-1.0), dict(p_override=2.0), dict(step="x"),
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(n=[5], bogus=1))
