"""Command-line front end: outputs, exit codes and reproducibility."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from twistpar.decompose import apply_decomposed, import_decomposition
from twistpar.grid import GridGeometry, band_limited_random, read_gfn, sample, write_gfn
from twistpar.harness.cli import EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_OK, build_parser, main
from twistpar.operators import apply_symbol, cone_symbol

SMALL_SWEEP = {"ensemble": {"count": 3}, "sweep": {"dilations": [-1, 0, 1]}}


def run(tmp_path, command, config=None, *extra):
    args = []
    tmp_path.mkdir(parents=True, exist_ok=True)
    if config is not None:
        cfg = tmp_path / f"{command}.json"
        cfg.write_text(json.dumps(config))
        args += ["--config", str(cfg)]
    out = tmp_path / "out"
    code = main([*args, "--out", str(out), *extra, command])
    return code, out


def load(out):
    report = json.loads((out / "report.json").read_text())
    with open(out / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return report, rows


class TestParser:
    def test_flags_before_and_after_command(self):
        p = build_parser()
        a = p.parse_args(["--seed", "5", "--grid", "32,8", "ratio-sweep"])
        b = p.parse_args(["ratio-sweep", "--seed", "5", "--grid", "32,8"])
        assert (a.seed, a.grid) == (b.seed, b.grid) == (5, (32, 8.0))

    @pytest.mark.parametrize("bad", [["--grid", "32", "ratio-sweep"], ["--seed", "-1", "ratio-sweep"], ["nope"]])
    def test_rejects_malformed_flags(self, bad):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(bad)
        assert info.value.code == 2


class TestCommands:
    def test_ratio_sweep_outputs(self, tmp_path):
        code, out = run(tmp_path, "ratio-sweep", SMALL_SWEEP, "--grid", "32,8", "--seed", "3")
        assert code == EXIT_OK
        report, rows = load(out)
        assert report["command"] == "ratio-sweep"
        assert report["config"]["grid"] == {"n": 32, "l": 8.0} and report["config"]["ensemble"]["seed"] == 3
        assert len(rows) == 9 and list(rows[0])[:3] == ["trial_id", "a_dilation", "ratio"]
        assert [int(r["a_dilation"]) for r in rows[:3]] == [-1, 0, 1]
        assert report["summary"]["trials"] == 9

    def test_csv_bit_identical_on_rerun(self, tmp_path):
        run(tmp_path / "a", "ratio-sweep", SMALL_SWEEP, "--grid", "32,8")
        run(tmp_path / "b", "ratio-sweep", SMALL_SWEEP, "--grid", "32,8")
        run(tmp_path / "c", "ratio-sweep", SMALL_SWEEP, "--grid", "32,8", "--seed", "9")
        a = (tmp_path / "a" / "out" / "report.csv").read_bytes()
        assert a == (tmp_path / "b" / "out" / "report.csv").read_bytes()
        assert a != (tmp_path / "c" / "out" / "report.csv").read_bytes()

    def test_partition_check(self, tmp_path):
        code, out = run(tmp_path, "partition-check")
        report, rows = load(out)
        assert code == EXIT_OK and report["summary"]["pass"] and float(rows[0]["max_deviation"]) <= 1e-12

    def test_decompose_then_apply(self, tmp_path):
        code, out = run(tmp_path, "decompose", {"decomposition": {"n_max": 2, "k_range": [-1, 0]}})
        assert code == EXIT_OK
        report, rows = load(out)
        assert report["summary"]["term_count"] == 75 and len(rows) == 5
        dpath = out / "decomposition.json"
        geo = GridGeometry(32, 8.0)
        f = sample(band_limited_random(geo, (0.25, 1.0), 1), geo)
        g = sample(band_limited_random(geo, (0.25, 1.0), 2), geo)
        write_gfn(tmp_path / "f.gfn", f)
        write_gfn(tmp_path / "g.gfn", g)
        inputs = {"f": str(tmp_path / "f.gfn"), "g": str(tmp_path / "g.gfn")}
        code, out2 = run(tmp_path / "x", "apply", {"inputs": {**inputs, "decomposition": str(dpath)}})
        assert code == EXIT_OK
        expected = apply_decomposed(import_decomposition(dpath), f, g)
        np.testing.assert_array_equal(read_gfn(out2 / "output.gfn").values, expected.values)
        code, out3 = run(tmp_path / "y", "apply", {"inputs": inputs})
        assert code == EXIT_OK
        np.testing.assert_allclose(read_gfn(out3 / "output.gfn").values, apply_symbol(cone_symbol(1.0), f, g).values, atol=1e-14)

    def test_reconstruct_error(self, tmp_path):
        code, out = run(tmp_path, "reconstruct-error", {"decomposition": {"n_max_list": [1, 3], "k_range": [0, 0]}})
        report, rows = load(out)
        assert code == EXIT_OK and [int(r["n_max"]) for r in rows] == [1, 3]
        assert report["summary"]["strictly_decreasing"] == (float(rows[1]["sup_error"]) < float(rows[0]["sup_error"]))

    def test_recover_symbol(self, tmp_path):
        code, out = run(tmp_path, "recover-symbol")
        report, rows = load(out)
        assert code == EXIT_OK and len(rows) == 3 and report["summary"]["converged"]

    def test_prop1_probe(self, tmp_path):
        code, out = run(tmp_path, "prop1-probe")
        report, rows = load(out)
        assert code == EXIT_OK and report["summary"]["exponent"] >= 0.8
        assert report["summary"]["label"] and all("probe" in r["flags"] for r in rows)

    def test_leibniz_check(self, tmp_path):
        code, out = run(tmp_path, "leibniz-check", None, "--grid", "64,16")
        report, rows = load(out)
        assert code == EXIT_OK and report["summary"]["max_rel_error"] <= 1e-8 and len(rows) == 6


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert main(["--config", str(tmp_path / "absent.json"), "--out", str(tmp_path), "ratio-sweep"]) == EXIT_CONFIG

    def test_malformed_config(self, tmp_path):
        (tmp_path / "c.json").write_text("{not json")
        assert main(["--config", str(tmp_path / "c.json"), "--out", str(tmp_path), "ratio-sweep"]) == EXIT_CONFIG

    def test_bad_symbol(self, tmp_path):
        assert run(tmp_path, "ratio-sweep", {"symbol": {"expression": "tau1 +"}})[0] == EXIT_CONFIG

    def test_bad_gfn(self, tmp_path):
        (tmp_path / "f.gfn").write_bytes(b"garbage")
        cfg = {"inputs": {"f": str(tmp_path / "f.gfn"), "g": str(tmp_path / "f.gfn")}}
        assert run(tmp_path, "apply", cfg)[0] == EXIT_CONFIG

    def test_apply_needs_inputs(self, tmp_path):
        assert run(tmp_path, "apply")[0] == EXIT_CONFIG

    def test_nyquist_violation(self, tmp_path):
        assert run(tmp_path, "recover-symbol", {"recovery": {"xi0": [0.9, 0.0]}})[0] == EXIT_CONFIG

    def test_exponent_gate(self, tmp_path):
        cfg = {**SMALL_SWEEP, "exponents": {"p": 4, "q": 4, "r": 2, "s": 0}}
        code, out = run(tmp_path, "ratio-sweep", cfg, "--grid", "32,8")
        assert code == EXIT_HYPOTHESIS and not (out / "report.json").exists()

    def test_unsupported_symbol(self, tmp_path):
        assert run(tmp_path, "ratio-sweep", {**SMALL_SWEEP, "symbol": {"name": "one"}}, "--grid", "32,8")[0] == EXIT_HYPOTHESIS

    def test_probe_mode_allows_violation(self, tmp_path):
        cfg = {**SMALL_SWEEP, "symbol": {"name": "one"}, "probe": True}
        code, out = run(tmp_path, "ratio-sweep", cfg, "--grid", "32,8")
        assert code == EXIT_OK and load(out)[0]["summary"]["probe"]

    def test_non_convergence_writes_report(self, tmp_path):
        cfg = {"grid": {"n": 128, "l": 32.0}, "symbol": {"expression": "cone(1) * cos(60 * tau2)"}}
        code, out = run(tmp_path, "recover-symbol", cfg)
        assert code == EXIT_NUMERICAL
        report, rows = load(out)
        assert not report["summary"]["converged"] and len(rows) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "twistpar", "--out", str(tmp_path), "partition-check"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "report.json").exists()
