import json
import subprocess
import sys

import yaml

from reflexnet.cli import main

from scenarios import HIDDEN_WEIGHTS, scenario


def write_cfg(tmp_path, name="cfg.yaml", **kw):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(scenario(**kw)))
    return path


def test_gen_reference_then_calibrate(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["gen-reference", str(cfg), "--out", str(tmp_path / "ref.csv")]) == 0
    assert main(["calibrate", str(cfg), "--reference", str(tmp_path / "ref.csv"),
                 "--out-dir", str(tmp_path / "cal")]) == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["converged"] is True
    for name in ("spikes.csv", "organization.jsonl", "frequency.csv", "psth.csv", "report.json"):
        assert (tmp_path / "cal" / name).exists()


def test_non_convergence_still_exits_zero(tmp_path):
    ref_cfg = write_cfg(tmp_path)
    main(["gen-reference", str(ref_cfg), "--out", str(tmp_path / "ref.csv")])
    silent = write_cfg(tmp_path, "silent.yaml", weights={k: 0.0 for k in HIDDEN_WEIGHTS})
    code = main(["calibrate", str(silent), "--reference", str(tmp_path / "ref.csv"),
                 "--out-dir", str(tmp_path / "cal"), "--trials", "4"])
    assert code == 0
    report = json.loads((tmp_path / "cal/report.json").read_text())
    assert report["trials"] == 4 and report["converged"] is False


def test_seed_and_trials_overrides(tmp_path):
    cfg = write_cfg(tmp_path)
    main(["simulate", str(cfg), "--out-dir", str(tmp_path / "a"), "--seed", "9", "--trials", "2"])
    main(["simulate", str(cfg), "--out-dir", str(tmp_path / "b"), "--seed", "9", "--trials", "2"])
    main(["simulate", str(cfg), "--out-dir", str(tmp_path / "c"), "--trials", "2"])
    a = (tmp_path / "a/spikes.csv").read_bytes()
    assert a == (tmp_path / "b/spikes.csv").read_bytes()
    assert a != (tmp_path / "c/spikes.csv").read_bytes()
    assert json.loads((tmp_path / "a/report.json").read_text())["trials"] == 2


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({**scenario(), "stimulus": {"targets": ["nobody"]}, "extra": 1}))
    assert main(["simulate", str(bad), "--out-dir", str(tmp_path)]) != 0
    err = capsys.readouterr().err
    assert "'nobody'" in err and "'extra'" in err


def test_missing_files_exit_nonzero(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.yaml")]) != 0
    cfg = write_cfg(tmp_path)
    assert main(["calibrate", str(cfg), "--reference", str(tmp_path / "nope.csv"),
                 "--out-dir", str(tmp_path / "cal")]) != 0


def test_console_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    out = subprocess.run(
        [sys.executable, "-m", "reflexnet.cli", "gen-reference", str(cfg), "--out", str(tmp_path / "r.csv")],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "r.csv").read_text().startswith("time_ms,frequency_hz\n")
