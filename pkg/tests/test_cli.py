import csv
import json
from dataclasses import replace

import pytest

from wrlattice import cli
from wrlattice.cli import RunConfig, ValidationError, main, parse_config, render
from wrlattice.exact import ConvergenceError

MINIMAL = """
[run]
command = simulate
[model]
variant = diamond
q = 2
z = 1.5
[torus]
width = 4
height = 6
"""


def read_jsonl(path):
    return [json.loads(line) for line in open(path)]


def read_csv(path):
    with open(path) as fh:
        first = fh.readline()
        return json.loads(first[2:]), list(csv.DictReader(fh))


def test_minimal_defaults():
    rc = parse_config(MINIMAL)
    assert (rc.variant, rc.q, rc.z, rc.width, rc.height) == ("diamond", 2, 1.5, 4, 6)
    assert rc.seed == 0 and rc.init == "auto" and rc.cluster_every == 1
    assert "burn_in = 1000" in render(rc)


def test_odd_dimension_rejected():
    with pytest.raises(ValidationError, match="even"):
        parse_config(MINIMAL.replace("width = 4", "width = 5"))


def test_alpha_with_discrete_rejected():
    with pytest.raises(ValidationError, match="alpha"):
        parse_config(MINIMAL.replace("q = 2", "q = 2\nalpha = 0.1"))


def test_unknown_key_has_line():
    with pytest.raises(ValidationError, match="line 6: unknown key 'colour'"):
        parse_config(MINIMAL.replace("q = 2", "colour = 2"))


def test_bad_value_has_line():
    with pytest.raises(ValidationError, match="line 7"):
        parse_config(MINIMAL.replace("z = 1.5", "z = lots"))


def test_hc_monochromatic_rejected():
    text = MINIMAL.replace("diamond", "molecular-hc") + "[chain]\ninit = monochromatic:1\n"
    with pytest.raises(ValidationError, match="init"):
        parse_config(text)


@pytest.mark.parametrize("rc", [
    RunConfig("simulate", q=2),
    RunConfig("sweep", variant="rotor", alpha=0.05, z_min=1.0, z_max=100.0, z_points=7, init="checkerboard-even"),
    RunConfig("count", family="E1L", width=8, height=4, q=1, level=0.5),
    RunConfig("transfer", variant="square", q=3, z_min=0.1, z_max=10.0, strip_width=3, seed=2**40),
    RunConfig("exact-prob", q=2, width=2, height=2, z=1 / 3, event="origin-class:GEVEN"),
])
def test_roundtrip(rc):
    assert parse_config(render(rc)) == rc


def test_sweep_needs_grid():
    with pytest.raises(ValidationError):
        parse_config(MINIMAL.replace("simulate", "sweep"))


def test_capacity_at_parse_time():
    with pytest.raises(cli.CapacityError):
        parse_config(MINIMAL.replace("simulate", "verify-chessboard").replace("height = 6", "height = 8"))


def test_count_command(tmp_path):
    code = main(["count", "--family", "B2L", "--width", "4", "--height", "6", "--q", "2", "--out", str(tmp_path)])
    assert code == 0
    header, rows = read_csv(tmp_path / "summary.csv")
    assert header["config"]["family"] == "B2L" and header["version"]
    assert rows[0]["formula"] == "24" and rows[0]["brute_force"] == "24"


def test_chessboard_command(tmp_path):
    code = main(["verify-chessboard", "--width", "4", "--height", "4", "--q", "2", "--out", str(tmp_path)])
    assert code == 0
    _, rows = read_csv(tmp_path / "summary.csv")
    assert len(rows) == 7 and all(r["holds"] == "True" for r in rows)
    assert all(float(r["lhs"]) <= float(r["rhs"]) for r in rows)


def test_simulate_deterministic(tmp_path):
    args = ["simulate", "--q", "2", "--width", "4", "--height", "4", "--burn-in", "20",
            "--sweeps", "200", "--measure-every", "20", "--seed", "7", "--out", str(tmp_path)]
    assert main(args) == 0
    first = (tmp_path / "records.jsonl").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "records.jsonl").read_bytes() == first
    recs = read_jsonl(tmp_path / "records.jsonl")
    assert recs[0]["type"] == "header" and recs[0]["config"]["seed"] == 7
    assert len(recs) == 11
    assert all(sum(r["histogram"].values()) == 16 for r in recs[1:])


def test_config_file_and_flag_override(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(MINIMAL + "[chain]\nsweeps = 40\nmeasure_every = 20\nburn_in = 0\n")
    assert main(["--config", str(p), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    header = read_jsonl(tmp_path / "o" / "records.jsonl")[0]
    assert header["config"]["seed"] == 3 and header["config"]["width"] == 4


def test_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--width", "5", "--q", "2", "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["code"] == 2 and "even" in err["message"]
    assert main(["exact-prob", "--width", "6", "--height", "6", "--q", "2", "--out", str(tmp_path)]) == 3
    assert main(["simulate", "--q", "two", "--out", str(tmp_path)]) == 2


def test_nonconvergence_exit(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("no")

    monkeypatch.setattr(cli, "transfer_pressure", boom)
    code = main(["transfer", "--q", "2", "--z-min", "0.5", "--z-max", "2", "--out", str(tmp_path)])
    assert code == 4
    assert read_jsonl(tmp_path / "records.jsonl")[-1] == {"code": 4, "message": "no", "type": "error"}


def test_other_commands(tmp_path):
    assert main(["exact-prob", "--q", "2", "--width", "2", "--height", "2", "--event", "empty",
                 "--out", str(tmp_path / "e")]) == 0
    _, rows = read_csv(tmp_path / "e" / "summary.csv")
    assert rows[0]["exact"] == "1/35"
    assert main(["transfer", "--q", "1", "--z-min", "0.5", "--z-max", "2", "--z-points", "3",
                 "--out", str(tmp_path / "t")]) == 0
    _, rows = read_csv(tmp_path / "t" / "summary.csv")
    assert abs(float(rows[0]["pressure"]) - 0.4054651081081644) < 1e-12
    assert main(["sweep", "--q", "2", "--width", "4", "--height", "4", "--z-min", "0.5", "--z-max", "8",
                 "--z-points", "3", "--burn-in", "10", "--sweeps", "50", "--out", str(tmp_path / "s")]) == 0
    recs = read_jsonl(tmp_path / "s" / "records.jsonl")
    assert sum(r["type"] == "sweep-point" for r in recs) == 6
    assert recs[-1]["type"] == "jump"
    assert main(["percolation-report", "--variant", "square", "--q", "2", "--width", "8", "--height", "8",
                 "--z", "5", "--init", "monochromatic:1", "--burn-in", "10", "--sweeps", "50",
                 "--out", str(tmp_path / "p")]) == 0
    _, rows = read_csv(tmp_path / "p" / "summary.csv")
    assert "both_contiguity" in rows[0]
