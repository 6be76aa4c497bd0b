import csv
import json
import math
import os
import shutil
import subprocess

import pytest

from nctorus.circle import WindingMap
from nctorus.cli import (f_spec_parser, main, parse_lambda, parse_real, parse_theta, resolve)
from nctorus.errors import ConfigError, ParseError

from conftest import GOLDEN


def _cfg(tmp_path, name="cfg.json", **kw):
    p = tmp_path / name
    p.write_text(json.dumps(kw))
    return str(p)


def _results(out):
    with open(os.path.join(out, "results.csv")) as fh:
        return {row["metric"]: json.loads(row["value"]) for row in csv.DictReader(fh)}


def _run(tmp_path, capsys, *extra, **kw):
    out = str(tmp_path / "out")
    code = main(["run", _cfg(tmp_path, **kw), "--out", out, "--no-plots", *extra])
    assert code == 0, capsys.readouterr().err
    return out


# -- parsers ------------------------------------------------------------------------------

def test_parse_real_forms():
    assert parse_real("1/3", "x") == 1 / 3
    assert parse_real("golden", "x") == (math.sqrt(5) - 1) / 2
    assert parse_real("pi*0.5", "x") == math.pi / 2
    assert parse_real(2, "x") == 2.0
    with pytest.raises(ConfigError):
        parse_real("third", "x")


def test_parse_theta():
    assert parse_theta("golden") == (GOLDEN, None)
    th, ang = parse_theta("liouville:levels=2")
    assert ang.levels == 2 and th == ang.theta
    with pytest.raises(ParseError) as e:
        parse_theta("liouville:depth=2")
    assert e.value.position == len("liouville:")


def test_f_spec_char():
    f, cons = f_spec_parser("char:z0=1,w=1")
    assert cons is None
    assert f.winding == 1 and f.at([0.3])[0] == pytest.approx(complex(math.cos(0.3), math.sin(0.3)))
    f, _ = f_spec_parser("char:z0=-1,w=0")
    assert f.at([1.0])[0] == pytest.approx(-1)


def test_f_spec_exp_sin():
    f, _ = f_spec_parser("exp-sin:amp=0.5,freq=2")
    ref = WindingMap.exp_sin(0.5, 2, 0)
    assert f.winding == 0 and f.phase.max_diff(ref.phase) == 0


def test_f_spec_right_side_is_twisted():
    f, _ = f_spec_parser("char:z0=1,w=1,side=right", alpha=0.25)
    # V f(U) = f(e^{-2 pi i alpha} U) V for the character z
    assert f.at([0.0])[0] == pytest.approx(complex(math.cos(-math.pi / 2), math.sin(-math.pi / 2)))


def test_f_spec_furstenberg_carries_construction():
    f, cons = f_spec_parser("furstenberg:levels=2")
    assert f.winding == 0
    assert cons["rough_solution"]["levels"] == 2
    assert cons["nu_closed_form"] == "2*pi*(sqrt(2)-1)"


@pytest.mark.parametrize("spec,pos", [
    ("cos:amp=1", 0),
    ("char:z0=1,k=2", 10),
    ("char:z0=2,w=1", 8),
    ("char:z0=1,w=x", 12),
    ("exp-sin:amp", 8),
])
def test_f_spec_errors_have_positions(spec, pos):
    with pytest.raises(ParseError) as e:
        f_spec_parser(spec)
    assert e.value.position == pos


def test_parse_lambda():
    assert parse_lambda("1", GOLDEN, 0.3).angle == 0.0
    two = parse_lambda("theta*2", GOLDEN, 0.3).angle
    one = parse_lambda("theta", GOLDEN, 0.3).angle
    assert abs(math.remainder(two - 2 * one, 2 * math.pi)) <= 1e-15
    assert parse_lambda("nu", GOLDEN, 0.3).angle == 0.3
    with pytest.raises(ParseError):
        parse_lambda("sqrt", GOLDEN, 0.3)


# -- config -------------------------------------------------------------------------------

def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        resolve({"experiment": "cohomology", "thetta": 1})


def test_unknown_key_exit_code(tmp_path, capsys):
    code = main(["run", _cfg(tmp_path, experiment="cohomology", thetta=1)])
    err = json.loads(capsys.readouterr().err)
    assert code == 2 and err["error"] == "ConfigError"


def test_parse_error_reports_position(tmp_path, capsys):
    code = main(["validate", _cfg(tmp_path, experiment="cohomology", f="char:z0=1,q=1")])
    err = json.loads(capsys.readouterr().err)
    assert code == 2 and err["error"] == "ParseError" and err["position"] == 10


def test_validate_prints_resolved(tmp_path, capsys):
    assert main(["validate", _cfg(tmp_path, experiment="cohomology"), "--set", "K=[8,16]"]) == 0
    r = json.loads(capsys.readouterr().out)
    assert r["K"] == [8, 16] and r["G"] == 4096


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("NCTORUS_OUT", "from-env")
    assert resolve({"experiment": "cohomology"})["output_dir"] == "from-env"
    assert resolve({"experiment": "cohomology", "output_dir": "from-file"})["output_dir"] == "from-file"
    assert resolve({"experiment": "cohomology", "output_dir": "from-file"}, "from-flag")["output_dir"] == "from-flag"
    monkeypatch.delenv("NCTORUS_OUT")
    assert resolve({"experiment": "cohomology"})["output_dir"] == "nctorus-out"


def test_set_overrides_file(tmp_path, capsys):
    out = _run(tmp_path, capsys, "--set", "n_max=1", "--set", "K=[16]",
               experiment="cohomology", n_max=3, K=[8])
    with open(os.path.join(out, "gaps.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["n"] for r in rows} == {"-1", "1"} and {r["K"] for r in rows} == {"16"}


def test_env_output_dir(tmp_path, capsys, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("NCTORUS_OUT", str(target))
    assert main(["run", _cfg(tmp_path, experiment="cohomology", K=[8], n_max=1), "--no-plots"]) == 0
    assert (target / "results.csv").exists()


# -- experiments --------------------------------------------------------------------------

def test_trace_invariance(tmp_path, capsys):
    out = _run(tmp_path, capsys, experiment="trace-invariance", alpha="1/3", k_max=200, samples=4)
    assert float(_results(out)["max_dtrace"]) <= 1e-10


def test_cohomology_character(tmp_path, capsys):
    out = _run(tmp_path, capsys, experiment="cohomology", K=[32, 64], n_max=2)
    res = _results(out)
    assert res["verdict"] == "ErgodicEvidence"
    with open(os.path.join(out, "manifest.json")) as fh:
        man = json.load(fh)
    assert set(man["summary"]["character_decision"].values()) == {"NoSolution"}


def test_ergodic_average_outputs(tmp_path, capsys):
    out = _run(tmp_path, capsys, experiment="ergodic-average", N=[16, 64])
    with open(os.path.join(out, "cesaro.csv")) as fh:
        header = fh.readline().strip().split(",")
    assert header[0] == "N"
    assert float(_results(out)["upper_norm"]) <= 1.0


def test_classical_crosscheck_needs_alpha0(tmp_path, capsys):
    code = main(["run", _cfg(tmp_path, experiment="classical-crosscheck", alpha=0.25), "--no-plots",
                 "--out", str(tmp_path / "o")])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_counterexample_manifest(tmp_path, capsys):
    out = _run(tmp_path, capsys, experiment="counterexample", theta="liouville:levels=3", levels=3,
               window=[256, 2048], points=8)
    with open(os.path.join(out, "manifest.json")) as fh:
        man = json.load(fh)
    assert man["construction"]["rough_solution"]["levels"] == 3
    assert "construction.json" in man["files"] and "oscillation.csv" in man["files"]
    assert float(_results(out)["identity_defect"]) <= 1e-12


def test_floats_use_full_precision(tmp_path, capsys):
    out = _run(tmp_path, capsys, experiment="spectral-measure", N=[64], grid=128)
    with open(os.path.join(out, "density.csv")) as fh:
        rows = list(csv.reader(fh))[1:]
    for row in rows[:10]:
        for v in row:
            assert float(repr(float(v))) == float(v) and float("%.17g" % float(v)) == float(v)


def test_reruns_are_bit_identical(tmp_path, capsys):
    cfg = _cfg(tmp_path, experiment="classical-crosscheck", f="exp-sin:amp=0.5,freq=1", a="UV",
               N=[32, 128], samples=4)
    outs = []
    for i in range(2):
        o = str(tmp_path / f"run{i}")
        assert main(["run", cfg, "--out", o, "--no-plots"]) == 0
        outs.append(o)
    for name in sorted(os.listdir(outs[0])):
        if name.endswith(".csv"):
            with open(os.path.join(outs[0], name), "rb") as a, open(os.path.join(outs[1], name), "rb") as b:
                assert a.read() == b.read(), name


def test_plots_written(tmp_path, capsys):
    out = str(tmp_path / "plots")
    assert main(["run", _cfg(tmp_path, experiment="cohomology", K=[8, 16], n_max=1), "--out", out]) == 0
    with open(os.path.join(out, "manifest.json")) as fh:
        files = json.load(fh)["files"]
    pngs = [f for f in files if f.endswith(".png")]
    assert pngs and all(os.path.getsize(os.path.join(out, f)) > 0 for f in pngs)


def test_no_plots_flag(tmp_path, capsys):
    out = _run(tmp_path, capsys, experiment="cohomology", K=[8], n_max=1)
    assert not [f for f in os.listdir(out) if f.endswith(".png")]


@pytest.mark.skipif(shutil.which("nctorus") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = _cfg(tmp_path, experiment="cohomology", K=[8], n_max=1)
    p = subprocess.run(["nctorus", "run", cfg, "--out", str(tmp_path / "cs"), "--no-plots"],
                       capture_output=True, text=True)
    assert p.returncode == 0, p.stderr
    assert json.loads(p.stdout)["summary"]["verdict"] == "ErgodicEvidence"
