import csv
import json
import math
import subprocess
import sys

import jsonschema
import pytest
import yaml

from conftest import all_models
from floquet.cli import EXIT_ASSUMPTION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, OUT_ENV, main, run_command
from floquet.config import RunConfig, RunRecord, jsonable, load_schema, parse_config
from floquet.cocycle import ConfigError

SYM = {"variant": "deterministic", "matrix": [[2.0, 1.0], [1.0, 2.0]]}
IID2 = {"variant": "iid", "dimension": 2, "entry": {"dist": "uniform", "low": 1.0, "high": 2.0}}


def write_cfg(tmp_path, name="cfg.yaml", **kw):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(kw))
    return p


def run(tmp_path, command, out="out", **kw):
    cfg = write_cfg(tmp_path, **kw)
    code = main([command, "--config", str(cfg), "--out", str(tmp_path / out), "--workers", "1"])
    rec_path = tmp_path / out / "record.json"
    rec = json.loads(rec_path.read_text()) if rec_path.exists() else None
    return code, rec


# -- configuration -----------------------------------------------------------

@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.variant)
def test_round_trip(model):
    cfg = RunConfig(model=model.to_dict(), seeds=[3, 1], horizon=100, options={"points": 8})
    again = parse_config(cfg.dumps())
    assert again == cfg and again.dumps() == cfg.dumps()
    assert again.build_model().to_dict() == model.to_dict()


def test_round_trip_compare_fields():
    cfg = RunConfig(model=IID2, seeds=[0], horizon=50, coupling={"scale": 1.1}, focus=[1.0, 2.0])
    assert parse_config(cfg.dumps()) == cfg


@pytest.mark.parametrize("bad", [
    {"seeds": []},
    {"seeds": [1, 1]},
    {"seeds": [-1]},
    {"seeds": [2 ** 64]},
    {"seeds": [1.5]},
    {"horizon": 1},
    {"burn_in": 100},
    {"tol": 0},
    {"cap": 1},
    {"focus": [1.0, -1.0]},
    {"focus": [1.0]},
    {"extra_key": 1},
    {"options": []},
    {"coupling": {"scale": 2.0, "shift": 1}},
])
def test_invalid_configs(bad):
    d = {"model": IID2, "seeds": [0], "horizon": 100, **bad}
    with pytest.raises(ConfigError):
        RunConfig.from_dict(d)


def test_missing_and_unparseable():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"model": IID2, "horizon": 10})
    with pytest.raises(ConfigError):
        parse_config("model: [unclosed")
    with pytest.raises(ConfigError):
        parse_config("- a list")


def test_jsonable():
    import numpy as np
    assert jsonable({"a": np.float64(math.inf), "b": np.arange(2), "c": (np.bool_(True),)}) == \
        {"a": None, "b": [0, 1], "c": [True]}


# -- commands ----------------------------------------------------------------

def test_estimate_symmetric(tmp_path):
    code, rec = run(tmp_path, "estimate", model=SYM, seeds=[0], horizon=2000)
    assert code == EXIT_OK and rec["status"] == "ok"
    lam = rec["results"]["lambda1"]
    assert lam["mean"] == pytest.approx(math.log(3), abs=1e-10) and lam["se"] == 0.0
    assert lam["count"] == 1
    rows = list(csv.reader(open(tmp_path / "out" / "growth_seed0.csv")))
    assert rows[0] == ["step", "ln_rho", "cumulative", "certificate"]
    assert float(rows[1][1]) == pytest.approx(math.log(3), abs=1e-12)


def test_estimate_zero_seeds(tmp_path):
    code, rec = run(tmp_path, "estimate", model=SYM, seeds=[], horizon=100)
    assert code == EXIT_CONFIG and rec is None


def test_bad_config_path_and_options(tmp_path, capsys):
    assert main(["estimate", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == EXIT_CONFIG
    code, _ = run(tmp_path, "estimate", model=SYM, seeds=[0], horizon=100, options={"bogus": 1})
    assert code == EXIT_CONFIG
    assert "unknown options" in capsys.readouterr().err
    code, _ = run(tmp_path, "compare", model=SYM, seeds=[0], horizon=100)
    assert code == EXIT_CONFIG


def test_determinism_across_runs_and_orders(tmp_path):
    kw = dict(model=IID2, horizon=3000, options={"points": 10})
    a = RunConfig(seeds=[4, 1, 7], **kw)
    b = RunConfig(seeds=[7, 4, 1], **kw)
    r1, _ = run_command("separation", a, tmp_path / "a", workers=1)
    r2, _ = run_command("separation", a, tmp_path / "b", workers=3)
    assert json.dumps(r1.payload(), sort_keys=True) == json.dumps(r2.payload(), sort_keys=True)
    for name in r1.outputs:
        if name.endswith(".csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    r3, _ = run_command("separation", b, tmp_path / "c", workers=2)
    by_seed = lambda r: sorted(r.payload()["replicates"], key=lambda x: x["seed"])
    assert by_seed(r1) == by_seed(r3)
    assert r1.payload()["results"]["lambda2"]["mean"] == r3.payload()["results"]["lambda2"]["mean"]


def test_separation_symmetric(tmp_path):
    code, rec = run(tmp_path, "separation", model=SYM, seeds=[0], horizon=2000)
    res = rec["results"]
    assert code == EXIT_OK
    assert res["sigma"] == pytest.approx(math.log(3), abs=1e-10)
    assert res["pair"]["pairing"] == pytest.approx(0.5)
    assert res["verdicts"]["tempered"] and not res["verdicts"]["zero_separation"]
    rows = list(csv.reader(open(tmp_path / "out" / "separation_seed0.csv")))
    assert rows[0] == ["n", "g_n"]


def test_separation_identity_zero(tmp_path):
    ident = {"variant": "deterministic", "matrix": [[1.0, 0.0], [0.0, 1.0]]}
    code, rec = run(tmp_path, "separation", model=ident, seeds=[0], horizon=500, cap=16)
    res = rec["results"]
    assert res["lambda1"]["mean"] == 0.0 and res["lambda2"]["mean"] == pytest.approx(0.0, abs=1e-12)
    assert res["verdicts"]["zero_separation"]
    assert code == EXIT_OK


def test_separation_iid_positive(tmp_path):
    code, rec = run(tmp_path, "separation", model=IID2, seeds=[0, 1, 2], horizon=20000)
    res = rec["results"]
    assert code == EXIT_OK and res["verdicts"]["sigma_positive"]
    assert res["sigma"] - 3 * res["sigma_se"] > 0
    q = res["qr"]
    assert abs(res["lambda2"]["mean"] - q[1]["mean"]) <= 3 * math.hypot(res["lambda2"]["se"], q[1]["se"])


def test_verify_iid_passes(tmp_path):
    code, rec = run(tmp_path, "verify", model=IID2, seeds=[0], horizon=2000,
                    options={"integrability_replicates": 200, "invariant_samples": 1000})
    assert code == EXIT_OK, rec["results"]["verdicts"]
    assert all(rec["results"]["verdicts"].values())


def test_verify_permutation_fails(tmp_path):
    perm = {"variant": "deterministic", "matrix": [[0.0, 1.0], [1.0, 0.0]]}
    code, rec = run(tmp_path, "verify", model=perm, seeds=[0], horizon=200, step=1)
    v = rec["results"]["verdicts"]
    assert code == EXIT_ASSUMPTION and rec["status"] == "assumption_failed"
    assert not v["A3_focusing"] and not v["primitive"]
    assert rec["focusing"]["primitivity_index"] is None


def test_verify_leslie_two_step(tmp_path):
    leslie = {"variant": "leslie",
              "fecundity": [{"dist": "uniform", "low": 0.5, "high": 1.0},
                            {"dist": "uniform", "low": 1.0, "high": 2.0}],
              "survival": [{"dist": "uniform", "low": 0.3, "high": 0.8}]}
    code, rec = run(tmp_path, "verify", model=leslie, seeds=[0], horizon=2000,
                    options={"integrability_replicates": 200, "invariant_samples": 1000})
    assert code == EXIT_OK and rec["results"]["step"] == 2


@pytest.mark.parametrize("coupling,gap", [({"scale": 1.1}, math.log(1.1)), ({"scale": 1.0}, 0.0)])
def test_compare_cli(tmp_path, coupling, gap):
    code, rec = run(tmp_path, "compare", model=IID2, seeds=[0, 1], horizon=4000, coupling=coupling)
    assert code == EXIT_OK and rec["results"]["verdicts"]["ordered"]
    assert rec["results"]["gap"] == pytest.approx(gap, abs=1e-10)


def test_compare_cli_offset(tmp_path):
    code, rec = run(tmp_path, "compare", model=IID2, seeds=[0, 1], horizon=10000,
                    coupling={"scale": 1.0, "offset": [[0.5, 0.0], [0.0, 0.0]]})
    assert code == EXIT_OK and rec["results"]["gap"] > 0


def test_compare_domination_violation(tmp_path):
    hi = dict(IID2, entry={"dist": "uniform", "low": 0.5, "high": 1.0})
    code, rec = run(tmp_path, "compare", model=IID2, model_hi=hi, seeds=[5], horizon=1000)
    assert code == EXIT_ASSUMPTION
    err = rec["errors"][0]
    assert err["kind"] == "domination" and err["seed"] == 5 and isinstance(err["index"], int)


def test_orbit_cli(tmp_path):
    code, rec = run(tmp_path, "orbit", model=IID2, seeds=[0, 1], horizon=100,
                    options={"backward": 10, "forward": 10})
    assert code == EXIT_OK and all(rec["results"]["verdicts"].values())
    rows = list(csv.reader(open(tmp_path / "out" / "orbit_seed1.csv")))
    assert rows[0] == ["index", "log_scale", "u0", "u1"] and len(rows) == 22


def test_numerical_abort_exit(tmp_path, monkeypatch):
    from floquet import cli
    from floquet.focusing import FocusingError

    def boom(*a, **k):
        raise FocusingError("a cone vector was mapped to zero", 17)

    monkeypatch.setattr(cli, "lyapunov_top", boom)
    code, rec = run(tmp_path, "estimate", model=SYM, seeds=[0, 1], horizon=100)
    assert code == EXIT_NUMERICAL and rec["status"] == "numerical_abort"
    assert rec["results"]["partial"] and {e["index"] for e in rec["errors"]} == {17}


# -- records, environment and entry points ------------------------------------

def test_records_validate(tmp_path):
    schema = load_schema()
    for cmd, kw in [("estimate", dict(model=IID2, seeds=[0], horizon=500)),
                    ("orbit", dict(model=SYM, seeds=[0], horizon=100))]:
        code, rec = run(tmp_path, cmd, out=cmd, **kw)
        jsonschema.validate(rec, schema)
        assert rec["schema_version"] == "1.0.0"
        for est in [v for v in rec["results"].values() if isinstance(v, dict) and "mean" in v]:
            assert "se" in est and "count" in est


def test_schema_rejects_garbage():
    rec = RunRecord("estimate", RunConfig(model=IID2, seeds=[0], horizon=10).to_dict(), backend="python")
    rec.validate()
    rec.status = "bogus"
    with pytest.raises(jsonschema.ValidationError):
        rec.validate()


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envdir"))
    cfg = write_cfg(tmp_path, model=SYM, seeds=[0], horizon=100)
    assert main(["estimate", "--config", str(cfg), "--workers", "1"]) == EXIT_OK
    assert (tmp_path / "envdir" / "record.json").exists()


def test_horizon_override(tmp_path):
    cfg = write_cfg(tmp_path, model=SYM, seeds=[0], horizon=100)
    assert main(["estimate", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--workers", "1", "--horizon", "300"]) == EXIT_OK
    rec = json.loads((tmp_path / "o" / "record.json").read_text())
    assert rec["config"]["horizon"] == 300 and rec["steps"] == 300


def test_bad_workers(tmp_path):
    cfg = write_cfg(tmp_path, model=SYM, seeds=[0], horizon=100)
    assert main(["estimate", "--config", str(cfg), "--out", str(tmp_path), "--workers", "0"]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, model=SYM, seeds=[0], horizon=100)
    proc = subprocess.run([sys.executable, "-m", "floquet", "estimate", "--config", str(cfg),
                           "--out", str(tmp_path / "m"), "--workers", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "estimate: ok" in proc.stdout
