import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from condstein.cli import main, parse_joint, parse_model, read_samples
from condstein.measures import joint_table
from condstein.oracle import tv_exact
from condstein.sim import sample_model

DATA = Path(__file__).parent / "data"
MODEL = str(DATA / "model_finite.json")
JOINT = str(DATA / "joint_perturbed.json")
GAUSS = str(DATA / "model_gauss.json")


def schema():
    return json.loads(resources.files("condstein").joinpath("report_schema.json").read_text())


def golden_lines(report):
    """Byte-stable fields of a seeded exact run, floats at 17 significant digits."""
    out = [f"mode {report['mode']}", f"n {report['n']}", f"seed {report['seed']}",
           f"model_digest {report['model_digest']}",
           f"characterization {report['characterization']}"]
    for key in ("tv", "w"):
        out.append(f"{key}.sup {report[key]['sup']:.17g}")
        out.append(f"{key}.lower_estimate {report[key]['lower_estimate']}")
    for key, v in sorted(report["oracle"].items()):
        out.append(f"oracle.{key} {v:.17g}")
    return "\n".join(out) + "\n"


def run(args, capsys):
    code = main(args)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestCheck:
    def test_exact_report_matches_schema_and_golden(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert run(["check", MODEL, "--exact", JOINT, "--out", str(out)], capsys)[0] == 0
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema())
        assert golden_lines(report) == (DATA / "check_exact.golden").read_text()

    def test_empirical_report_matches_schema(self, tmp_path, capsys):
        csv = tmp_path / "s.csv"
        assert run(["simulate", MODEL, "--n", "400", "--seed", "3", "--out", str(csv)], capsys)[0] == 0
        code, text, _ = run(["check", MODEL, "--samples", str(csv), "--seed", "1"], capsys)
        assert code == 0
        report = json.loads(text)
        jsonschema.validate(report, schema())
        assert report["n"] == 400 and report["oracle"] is None

    def test_seeded_runs_are_byte_identical(self, capsys):
        a = run(["check", MODEL, "--exact", JOINT, "--seed", "5"], capsys)[1]
        b = run(["check", MODEL, "--exact", JOINT, "--seed", "5"], capsys)[1]
        assert a == b

    def test_bad_spec_exits_2_with_field_and_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"y_values": [0, 1], "y_weights": [0.5, 0.5],\n "families": [\n'
                       '  {"tag": "Gaussian", "params": {"mean": 0, "variance": 1}},\n'
                       '  {"tag": "Gaussian", "params": {"mean": 0,\n "variance": -2}}]}\n')
        code, _, err = run(["check", str(bad), "--exact", JOINT], capsys)
        assert code == 2
        assert "families[1].params.variance" in err and "line 5" in err

    def test_unknown_tag_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"y_values": [0], "y_weights": [1], "families": [{"tag": "Cauchy", "params": {}}]}')
        assert run(["check", str(bad), "--exact", JOINT], capsys)[0] == 2

    def test_bad_csv_header_exits_2(self, tmp_path, capsys):
        csv = tmp_path / "s.csv"
        csv.write_text("a,b\n0,0\n")
        assert run(["check", MODEL, "--samples", str(csv)], capsys)[0] == 2

    def test_off_grid_exact_exits_2(self, tmp_path, capsys):
        j = tmp_path / "j.json"
        j.write_text('{"x_grid": [0, 9], "y_grid": [0, 1], "mass": [[0.4, 0.5], [0.0, 0.1]]}')
        assert run(["check", MODEL, "--exact", str(j)], capsys)[0] == 2


class TestSimulate:
    def test_csv_round_trip_is_bit_exact(self, tmp_path, capsys):
        csv = tmp_path / "g.csv"
        assert run(["simulate", GAUSS, "--n", "200", "--seed", "9", "--out", str(csv)], capsys)[0] == 0
        direct = sample_model(parse_model(GAUSS), 200, 9)
        back = read_samples(str(csv))
        np.testing.assert_array_equal(back.x, direct.x)
        np.testing.assert_array_equal(back.y, direct.y)

    def test_contaminate_and_swap(self, tmp_path, capsys):
        csv = tmp_path / "c.csv"
        args = ["simulate", MODEL, "--n", "50", "--contaminate", "0.2", "--noise", "0,1,2,3",
                "--swap", "0,1", "--out", str(csv)]
        assert run(args, capsys)[0] == 0
        assert len(read_samples(str(csv))) == 50

    def test_contaminate_gaussian_exits_2(self, capsys):
        args = ["simulate", GAUSS, "--n", "5", "--contaminate", "0.2", "--noise", "0,1"]
        assert run(args, capsys)[0] == 2


class TestSolve:
    def test_standard_normal_step(self, tmp_path, capsys):
        gauss = tmp_path / "n.json"
        gauss.write_text('{"y_values": [0], "y_weights": [1], '
                         '"families": [{"tag": "Gaussian", "params": {"mean": 0, "variance": 1}}]}')
        code, text, _ = run(["solve", str(gauss), "--h", "step:0", "--grid", "0"], capsys)
        assert code == 0
        lines = text.strip().splitlines()
        assert lines[0] == "y,x,f,residual"
        y, x, f, r = map(float, lines[1].split(","))
        assert f == pytest.approx(np.sqrt(2 * np.pi) / 4, abs=1e-14)
        assert r <= 1e-8

    def test_grid_range_and_every_y(self, capsys):
        code, text, _ = run(["solve", GAUSS, "--h", "linear:1", "--grid=-3:3:7"], capsys)
        assert code == 0
        assert len(text.strip().splitlines()) == 1 + 2 * 7

    def test_outside_domain_exits_2(self, capsys):
        assert run(["solve", MODEL, "--h", "const:1", "--grid", "0.5"], capsys)[0] == 2


def test_validate_all_suites_pass(capsys):
    code, text, _ = run(["validate"], capsys)
    assert code == 0
    assert "FAIL" not in text and text.count("PASS") >= 5


def test_exact_oracle_agrees_with_tables():
    model, joint = parse_model(MODEL), parse_joint(JOINT)
    assert tv_exact(joint, joint_table(model)) == pytest.approx(0.02, abs=1e-15)
