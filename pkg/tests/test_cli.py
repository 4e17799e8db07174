import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from ergokit import __version__
from ergokit.cli import SUBCOMMANDS, main, render_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
CTMC_COMMANDS = ["drift-check", "resolvent-verify", "hitting", "lyapunov", "skeleton",
                 "norm-check", "decay", "theorem2", "equivalence"]


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_every_subcommand_is_dispatched():
    assert sorted(SUBCOMMANDS) == sorted(CTMC_COMMANDS + ["diffusion"])


@pytest.mark.parametrize("subcommand", CTMC_COMMANDS)
def test_ctmc_subcommands_succeed(tmp_path, subcommand):
    assert main([subcommand, "--config", str(CONFIGS / "three_state.json"), "--out", str(tmp_path), "--quiet"]) == 0
    record = json.loads((tmp_path / f"{subcommand}.json").read_text())
    assert record["status"] == "passed" and record["ergokit"] == __version__
    assert not list(tmp_path.glob("*.tmp"))


def test_decay_emits_closed_form_curve(tmp_path):
    assert main(["decay", "--config", str(CONFIGS / "two_state.json"), "--out", str(tmp_path), "--quiet"]) == 0
    comment, rows = read_csv(tmp_path / "decay_curve.csv")
    record = json.loads((tmp_path / "decay.json").read_text())
    assert comment == f"# config_digest={record['config_digest']} ergokit={__version__}"
    t = np.array([float(r["t"]) for r in rows])
    tv = np.array([float(r["tv"]) for r in rows])
    assert len(t) == 31
    assert np.allclose(tv, 2 / 3 * np.exp(-3 * t), atol=1e-12)


def test_ou_drift_check_exits_zero(tmp_path):
    assert main(["drift-check", "--config", str(CONFIGS / "ou.json"), "--out", str(tmp_path), "--quiet"]) == 0
    _, rows = read_csv(tmp_path / "drift-check_margins.csv")
    assert len(rows) == 2001
    assert max(float(r["margin"]) for r in rows) <= 1e-6


def test_sublevel_and_expression_model(tmp_path):
    assert main(["drift-check", "--config", str(CONFIGS / "double_well.json"), "--out", str(tmp_path), "--quiet"]) == 0


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda c: c.pop("C"), "C"),
        (lambda c: c["model"].update(kind="sde"), "model.kind"),
        (lambda c: c["model"]["rates"][1].append(3), "model.rates[1]"),
        (lambda c: c["model"]["rates"][0].__setitem__(1, -1), "model.rates[0][1]"),
        (lambda c: c.update(f=[1, 0.5]), "f[1]"),
        (lambda c: c.update(C=[5]), "C[0]"),
        (lambda c: c["params"].update(x=9), "params.x"),
        (lambda c: c["params"].update(t_grid={"stop": 1, "num": 0}), "params.t_grid.num"),
    ],
)
def test_malformed_config_exits_2_with_field_path(tmp_path, capsys, mutate, path):
    cfg = json.loads((CONFIGS / "two_state.json").read_text())
    mutate(cfg)
    code = main(["decay", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "out")])
    assert code == 2
    assert f"{path}:" in capsys.readouterr().err


def test_diffusion_config_errors(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "ou.json").read_text())
    cfg["V"] = "x1^^2"
    assert main(["drift-check", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "V:" in err and "byte 3" in err
    cfg = json.loads((CONFIGS / "ou.json").read_text())
    cfg["C"] = {"ball": {"center": [0, 0], "radius": 1}}
    assert main(["drift-check", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == 2
    assert "C.ball.center" in capsys.readouterr().err


def test_missing_file_and_bad_json(tmp_path, capsys):
    assert main(["decay", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["decay", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_wrong_model_kind_for_subcommand(tmp_path, capsys):
    assert main(["skeleton", "--config", str(CONFIGS / "ou.json"), "--out", str(tmp_path)]) == 2
    assert "model.kind" in capsys.readouterr().err


def test_numerical_failure_exits_3_with_partial_report(tmp_path):
    cfg = json.loads((CONFIGS / "two_state.json").read_text())
    cfg["model"] = {"kind": "ctmc", "rates": [[0, 1, 0], [0, 0, 1], [0, 1, 0]]}
    cfg["f"] = [1, 1, 1]
    code = main(["equivalence", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 3
    record = json.loads((tmp_path / "o" / "equivalence.json").read_text())
    assert record["status"] == "error" and "NotIrreducibleError" in record["error"]


def test_failed_check_exits_1(tmp_path):
    cfg = json.loads((CONFIGS / "two_state.json").read_text())
    cfg.update(V=[1.5, 2.0], b=1.0)
    assert main(["drift-check", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path), "--quiet"]) == 1
    assert json.loads((tmp_path / "drift-check.json").read_text())["status"] == "failed"


def test_infinite_lyapunov_values_in_config(tmp_path):
    cfg = {"model": {"kind": "ctmc", "rates": [[0, 1, 0], [1, 0, 0], [1, 0, 0]]},
           "f": [1, 1, 1], "C": [0], "V": [1, 2, "inf"], "b": 2}
    assert main(["drift-check", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path), "--quiet"]) == 0
    _, rows = read_csv(tmp_path / "drift-check_margins.csv")
    assert rows[2]["V"] == "inf" and rows[2]["margin"] == "nan"


def test_equivalence_with_targets_writes_two_reports(tmp_path):
    main(["equivalence", "--config", str(CONFIGS / "two_state.json"), "--out", str(tmp_path), "--quiet"])
    record = json.loads((tmp_path / "equivalence.json").read_text())
    assert [r["experiment"] for r in record["reports"]] == ["equivalence", "regularity_transfer"]


def _run_all(out, config, commands, seed=None):
    extra = ["--seed", str(seed)] if seed is not None else []
    for sub in commands:
        assert main([sub, "--config", str(config), "--out", str(out), "--quiet", *extra]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_outputs_are_byte_identical_across_runs(tmp_path):
    commands = ["hitting", "lyapunov", "decay", "skeleton"]
    a = _run_all(tmp_path / "a", CONFIGS / "three_state.json", commands)
    b = _run_all(tmp_path / "b", CONFIGS / "three_state.json", commands)
    assert a == b
    c = _run_all(tmp_path / "c", CONFIGS / "three_state.json", ["hitting"], seed=99)
    assert c["hitting_mc.csv"] != a["hitting_mc.csv"]
    assert json.loads(c["hitting.json"])["config_digest"] != json.loads(a["hitting.json"])["config_digest"]


def test_every_output_embeds_digest_and_version(tmp_path):
    _run_all(tmp_path, CONFIGS / "two_state.json", ["theorem2", "skeleton"])
    for p in tmp_path.iterdir():
        text = p.read_text()
        if p.suffix == ".csv":
            assert text.startswith("# config_digest=") and f"ergokit={__version__}" in text.splitlines()[0]
        else:
            rec = json.loads(text)
            assert rec["config_digest"] and rec["ergokit"] == __version__


def test_verbosity_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ERGOKIT_VERBOSITY", "quiet")
    main(["decay", "--config", str(CONFIGS / "two_state.json"), "--out", str(tmp_path)])
    assert capsys.readouterr().err == ""
    monkeypatch.setenv("ERGOKIT_VERBOSITY", "info")
    main(["decay", "--config", str(CONFIGS / "two_state.json"), "--out", str(tmp_path)])
    assert "tv_increase_max" in capsys.readouterr().err


def test_render_csv_uses_repr_floats():
    text = render_csv({"t": [0.1, 1], "v": [1 / 3, np.inf]}, "abc")
    assert text.splitlines() == [f"# config_digest=abc ergokit={__version__}", "t,v",
                                 "0.1,0.3333333333333333", "1.0,inf"]


def test_argparse_rejects_unknown_subcommand(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["nonsense", "--config", "x", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_console_script_installed():
    assert shutil.which("ergokit") is not None
