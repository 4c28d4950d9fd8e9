import json
import math
from pathlib import Path

import numpy as np
import pytest

from delaystab.cli import main
from delaystab.genfun import t0
from delaystab.harness import (
    GEN_COLUMNS, STAB_COLUMNS, ExperimentConfig, emit_results, estimate_avg_stability, prepare_data,
    run_gen_sweep, verify_lemma_grid,
)

FIXTURE = Path(__file__).parent / "data" / "ijcnn1_standin.libsvm"


def _small(**kw):
    base = dict(d=5, n=40, n_test=200, T=200, delays=[1, 3], seeds=[0, 1], label_noise=0.3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_invariants():
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=[])
    with pytest.raises(ValueError):
        ExperimentConfig(delays=[1, 1])
    with pytest.raises(ValueError):
        ExperimentConfig(eta=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(mode="nope")
    with pytest.raises(ValueError):
        ExperimentConfig.from_mapping({"bogus": 1})


def test_config_yaml_and_digest(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("d: 5\nn: 40\ndelays: [1, 3]\nseeds: [0, 1]\nT: 200\nlabel_noise: 0.3\nn_test: 200\n")
    cfg = ExperimentConfig.load(p)
    assert cfg == _small()
    assert cfg.digest == _small().digest and len(cfg.digest) == 16
    assert cfg.digest == _small(out="elsewhere", format="json").digest
    assert cfg.digest != _small(T=201).digest


def test_sweep_cardinality():
    res = run_gen_sweep(_small(d=50, n=100, delays=[1, 4, 8, 16], seeds=list(range(5)), T=100, stride=50))
    curves = {}
    for r in res.records:
        curves.setdefault(r["delay"], set()).add(r["seed"])
    assert sorted(curves) == [1, 4, 8, 16] and all(len(s) == 5 for s in curves.values())
    assert {r["runs"] for r in res.summary_rows} == {5}


def test_single_checkpoint():
    res = run_gen_sweep(_small(delays=[2], seeds=[3], T=50, stride=50))
    assert len(res.records) == 1 and res.records[0]["t"] == 50


def test_curves_share_start():
    res = run_gen_sweep(_small(delays=[1, 3, 7], record_start=True))
    starts = [r for r in res.records if r["t"] == r["delay"]]
    assert len(starts) == 6
    assert len({(r["train_loss"], r["test_loss"]) for r in starts}) == 1


def test_divergence_flagged_and_sweep_continues():
    res = run_gen_sweep(_small(eta=3.0, delays=[0, 1], T=500))
    assert len(res.summary["diverged"]) == 4 and not res.records
    ok = run_gen_sweep(_small(eta=0.05))
    assert not ok.summary["diverged"]


def test_gen_error_is_test_minus_train():
    res = run_gen_sweep(_small())
    for r in res.records:
        assert r["gen_error"] == r["test_loss"] - r["train_loss"]


def test_identical_replacement_control_is_zero():
    cfg = _small(mode="stability", num_replacements=5, delays=[2])
    res = estimate_avg_stability(cfg, identical_replacement=True)
    assert res.summary["by_delay"]["2"]["estimate"] == 0.0
    assert all(r["loss_gap"] == 0.0 for r in res.records)


def test_stability_records_and_bounds():
    cfg = _small(mode="stability", num_replacements=6, delays=[2], ridge_ratio=0.1)
    res = estimate_avg_stability(cfg)
    assert res.columns == STAB_COLUMNS and len(res.records) == 12
    s = res.summary["by_delay"]["2"]
    assert s["estimate"] == abs(s["signed_mean"]) and s["stderr"] > 0
    for r in res.records:
        assert math.isfinite(r["bound_prop1"]) and r["bound_prop1"] >= 0
        assert math.isfinite(r["bound_thm"]) and r["bound_thm"] >= 0
    assert s["bound_thm"]["bound"] == "thm2"
    assert s["r"] == pytest.approx(prepare_data(cfg).train.b_norm)


def test_stability_random_delays_use_corollary():
    cfg = _small(mode="stability", num_replacements=3, delays=[4], seeds=[0], random_delays=True)
    s = estimate_avg_stability(cfg).summary["by_delay"]["4"]
    assert s["rho"] > 0 and s["bound_thm"]["bound"].startswith("corollary")


def test_stability_errors():
    cfg = _small(mode="stability")
    with pytest.raises(ValueError):
        estimate_avg_stability(cfg, num_replacements=41)
    with pytest.raises(ValueError, match="empty replacement pool"):
        estimate_avg_stability(cfg, num_replacements=0)


def test_stability_from_libsvm_uses_test_split():
    cfg = ExperimentConfig(mode="stability", dataset=str(FIXTURE), delays=[2], seeds=[0], T=100, num_replacements=4)
    res = estimate_avg_stability(cfg)
    assert res.summary["n"] == 800 and len(res.records) == 4


def test_emit_csv_schema_and_rerun_identity(tmp_path):
    cfg = _small(delays=[1], seeds=[0], T=30, stride=30)
    paths = emit_results(run_gen_sweep(cfg), tmp_path / "a")
    lines = paths[0].read_text().splitlines()
    assert lines[0] == f"# config_digest={cfg.digest} mode=gen-sweep"
    assert lines[1] == ",".join(GEN_COLUMNS) and len(lines) == 3
    again = emit_results(run_gen_sweep(cfg), tmp_path / "b")
    for p, q in zip(paths, again):
        assert p.read_bytes() == q.read_bytes()


def test_emit_stability_columns_and_json(tmp_path):
    cfg = _small(mode="stability", num_replacements=2, delays=[1], seeds=[0])
    res = estimate_avg_stability(cfg)
    (p,) = emit_results(res, tmp_path)
    header = p.read_text().splitlines()[1].split(",")
    assert header[-4:] == ["replaced_index", "loss_gap", "bound_prop1", "bound_thm"]
    (j,) = emit_results(res, tmp_path, "json")
    doc = json.loads(j.read_text())
    assert doc["config_digest"] == cfg.digest and len(doc["records"]) == 2
    assert all("seed" in r for r in doc["records"])
    with pytest.raises(ValueError):
        emit_results(res, tmp_path, "xml")


def test_emit_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_results(run_gen_sweep(_small(T=20, stride=20)), blocker / "sub")


def test_lemma_grid_hundred_points():
    rng = np.random.default_rng(0)
    spec = rng.uniform(0, 1, 16)
    rows, ok = verify_lemma_grid(spec, np.linspace(0.05, 1.0, 4), range(25), relative=True)
    assert len(rows) == 100 and ok and all(r["status"] == "pass" for r in rows)


def test_lemma_grid_out_of_regime_and_t0_column():
    rows, ok = verify_lemma_grid([1.0, 0.4], [1.0], [3], T=300)
    assert ok and rows[0]["status"] == "not applicable"
    rows, _ = verify_lemma_grid([1.0], [0.5], range(33), relative=True, T=50)
    for r in rows:
        assert abs(r["t0"] - (r["tau"] + 1) * math.log(2 * (r["tau"] + 1))) <= 1e-12
        assert r["ceil_t0"] == math.ceil(t0(r["tau"]))


def test_cli_verify_lemma(tmp_path, capsys):
    out = tmp_path / "lemma.csv"
    assert main(["verify-lemma", "--taus", "0-4", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 15
    assert main(["verify-lemma", "--etas", "1", "--taus", "2,3", "--spectrum", "1,0.5"]) == 0
    assert "not applicable" in capsys.readouterr().out


def test_cli_sweep_and_stability(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("d: 4\nn: 30\nn_test: 100\nT: 100\nnum_replacements: 3\n")
    assert main(["sweep", "--config", str(cfg), "--delays", "1,2", "--seed", "5", "--out", str(tmp_path / "s")]) == 0
    rows = (tmp_path / "s" / "gen-sweep.csv").read_text().splitlines()[2:]
    assert {r.split(",")[2] for r in rows} == {"1", "2"} and {r.split(",")[3] for r in rows} == {"5"}
    assert main(["stability", "--config", str(cfg), "--delays", "2", "--iters", "60", "--eta", "0.01",
                 "--format", "json", "--out", str(tmp_path / "t")]) == 0
    doc = json.loads((tmp_path / "t" / "stability.json").read_text())
    assert doc["config"]["T"] == 60 and doc["config"]["eta"] == 0.01


def test_cli_parse(tmp_path, capsys):
    assert main(["parse", str(FIXTURE)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["d"] == 22 and info["n"] == 1000
    bad = tmp_path / "bad.libsvm"
    bad.write_text("1 1:1\n1 2:x\n")
    assert main(["parse", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_cli_bounds_and_coeffs(tmp_path, capsys):
    assert main(["bounds", "--n", "100", "--iters", "1000", "--tau", "9", "--eta", "0.001", "--mu", "1",
                 "--r", "1", "--sigma", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["bound"] == "thm1"
    assert doc["total"] == pytest.approx((2 / 100) * (math.sqrt(991) + math.log(10) ** 2) + (2 / 900) * 991)
    assert main(["bounds", "--kind", "prop1", "--n", "10", "--iters", "3", "--tau", "0", "--eta", "0.1",
                 "--mu", "1", "--r", "1", "--sigma", "1", "--spectrum", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["total"] == pytest.approx(0.0542 + 0.0293764)
    out = tmp_path / "c.csv"
    assert main(["coeffs", "--spectrum", "uniform:0.1:1", "--dim", "5", "--eta", "0.01", "--tau", "2",
                 "--iters", "50", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:5] == ["t", "norm", "weighted_norm", "lemma_bound", "S1"] and len(lines) == 52


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "delaystab", "verify-lemma", "--taus", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("tau,eta,t0")
