import csv
import json

import numpy as np
import pytest

from dyadsel.cli import main
from dyadsel.io import write_panel
from dyadsel.model import DyadPanel
from dyadsel.simulate import MEASUREMENT_COEFS


def write_config(path, **sampler):
    doc = {"sampler": {"n_iter": 300, "burn_in": 100, **sampler}, "covariates": {"member1": ["x"], "member2": ["x"]}}
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def sim_panel(tmp_path):
    assert main(["simulate", "--variant", "A", "--R", "2", "--n-dyads", "40", "--seed", "3", "--out-dir", str(tmp_path)]) == 0
    return tmp_path / "panel_0001.csv"


def test_simulate_writes_panels_and_summary(tmp_path, sim_panel):
    assert (tmp_path / "panel_0002.csv").exists()
    doc = json.loads((tmp_path / "simulate.json").read_text())
    assert set(doc["dropout"]) == {"panel_0001.csv", "panel_0002.csv"}
    again = tmp_path / "again"
    main(["simulate", "--variant", "A", "--R", "2", "--n-dyads", "40", "--seed", "3", "--out-dir", str(again)])
    assert (again / "panel_0001.csv").read_bytes() == sim_panel.read_bytes()


def test_fit_is_byte_identical(tmp_path, sim_panel):
    cfg = write_config(tmp_path / "cfg.json", seed=5)
    outs = []
    for name in ("one", "two"):
        out = tmp_path / name
        assert main(["fit", str(sim_panel), "--config", cfg, "--out-dir", str(out)]) == 0
        outs.append(out)
    for f in ("draws.csv", "summary.json"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert summary["n_dyads"] == 40
    assert "drop.k2.phi" in summary["parameters"]
    with open(outs[0] / "draws.csv") as fh:
        assert sum(1 for _ in fh) == 1 + 200


def test_seed_flag_overrides_config(tmp_path, sim_panel):
    cfg = write_config(tmp_path / "cfg.json", seed=5)
    main(["fit", str(sim_panel), "--config", cfg, "--out-dir", str(tmp_path / "a")])
    main(["fit", str(sim_panel), "--config", cfg, "--seed", "6", "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a/draws.csv").read_bytes() != (tmp_path / "b/draws.csv").read_bytes()
    assert json.loads((tmp_path / "b/summary.json").read_text())["seed"] == 6


def test_bad_config_exits_2(tmp_path, sim_panel, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"sampler": {"iterations": 10}}))
    assert main(["fit", str(sim_panel), "--config", str(path)]) == 2
    assert "additional properties" in capsys.readouterr().err.lower()


def test_bad_panel_exits_2(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("dyad_id,member,time,y\na,1,1,\n")
    assert main(["fit", str(path), "--out-dir", str(tmp_path)]) == 2
    assert main(["fit", str(tmp_path / "missing.csv"), "--out-dir", str(tmp_path)]) == 2


def test_improper_posterior_exits_3(tmp_path, capsys):
    # nobody drops out, so the flat-prior hazard intercept runs off to -infinity
    rng = np.random.default_rng(0)
    n = 40
    x = rng.normal(size=(2, n))
    panel = DyadPanel.from_complete(
        rng.normal(size=(2, n, 3)), np.broadcast_to(x[:, :, None, None], (2, n, 3, 1)),
        np.full((2, n), 4), covariate_names=("x",),
    )
    write_panel(panel, tmp_path / "p.csv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sampler": {"n_iter": 3000, "burn_in": 500}, "covariates": {"member1": ["x"], "member2": ["x"]}}))
    assert main(["fit", str(tmp_path / "p.csv"), "--config", str(cfg), "--out-dir", str(tmp_path)]) == 3
    assert "improper" in capsys.readouterr().err


def test_replicate_report_rows(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", seed=2)
    args = ["replicate", "--variant", "B", "--R", "2", "--config", cfg, "--out-dir", str(tmp_path)]
    assert main(args) == 0
    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 * len(MEASUREMENT_COEFS)
    assert {r["method"] for r in rows} == {"complete-case", "available-case", "proposed"}
    first = (tmp_path / "report.csv").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "report.csv").read_bytes() == first


def test_replicate_rejects_unknown_method(tmp_path):
    assert main(["replicate", "--R", "2", "--methods", "magic", "--out-dir", str(tmp_path)]) == 2


def test_sensitivity_outputs(tmp_path, sim_panel):
    cfg = write_config(tmp_path / "cfg.json", seed=1)
    out = tmp_path / "sens"
    args = ["sensitivity", str(sim_panel), "--config", cfg, "--phi-means=-1,1", "--out-dir", str(out)]
    assert main(args) == 0
    for f in ("phi_sweep.csv", "phi_sweep_long.csv", "ig_prior.csv", "ig_prior_long.csv"):
        assert (out / f).exists()
    assert len((out / "phi_sweep.csv").read_text().splitlines()) == 3
    assert len((out / "ig_prior.csv").read_text().splitlines()) == 4


def test_check_small(tmp_path, capsys):
    code = main(["check", "--samples", "500", "--oracle-draws", "100000", "--seed", "3", "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "FAIL" not in out
    report = json.loads((tmp_path / "check.json").read_text())
    assert report["getting_it_right"]["passed"]
