import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussgmt.errors import ConfigError
from gaussgmt.lab.cli import main
from gaussgmt.lab.config import EXPERIMENTS, ExperimentConfig, parse_config, serialize_config
from gaussgmt.lab.grammar import canonical_set_text, parse_set
from gaussgmt.lab.runner import canonical_json, example_config, execute, run
from gaussgmt.sets import Ball, Box, Complement, CylinderLift, DisjointUnion, Halfspace


def test_parse_set_examples():
    H = parse_set("halfspace(dir=[3, 4], c=0.5)")
    assert isinstance(H, Halfspace) and np.allclose(H.direction, [0.6, 0.8])
    B = parse_set("box([-1, 1] x [-inf, 2])")
    assert isinstance(B, Box) and B.lower[1] == -np.inf and B.upper[1] == 2
    C = parse_set("cylinder(base=box([-1, 1]), coords=[3], dim=10)")
    assert isinstance(C, CylinderLift) and C.coords == (3,) and C.dim == 10
    U = parse_set("union_disjoint(halfspace(dir=[1, 0], c=-3), ball(center=[0, 0], r=1))")
    assert isinstance(U, DisjointUnion) and isinstance(U.right, Ball)
    assert isinstance(parse_set("complement(ball(center=[0], r=2))"), Complement)


@pytest.mark.parametrize("text, line, col", [
    ("experiment = perimeter\nset = ball(center=[0, 0], r=)\n", 2, 29),
    ("experiment = perimeter\nset = blob(r=1)\n", 2, 7),
    ("experiment = perimeter\nset = ball(center=[0, 0], r=1) $\n", 2, 32),
    ("experiment = perimeter\n  colour = red\n", 2, 3),
    ("experiment = perimeter\ndim = 2\ndim = 3\n", 3, 1),
    ("experiment = perimeter\ndim = -2\n", 2, 7),
    ("experiment = perimeter\ngarbage\n", 2, 1),
    ("experiment = nonsense\n", 1, 14),
])
def test_config_errors_carry_position(text, line, col):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert (info.value.line, info.value.column) == (line, col)
    assert f"line {line}, column {col}" in str(info.value)


def test_missing_experiment_is_an_error():
    with pytest.raises(ConfigError):
        parse_config("dim = 2\n")


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\nexperiment = perimeter  # trailing\nresolution = 50\n")
    assert cfg == ExperimentConfig(experiment="perimeter", resolution=50)


_num = st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3))
_pos = st.floats(0.1, 3, allow_nan=False).map(lambda v: round(v, 3))
_sets = st.one_of(
    st.builds(lambda d, c: f"halfspace(dir=[{d[0]}, {d[1] + 10}], c={c})", st.tuples(_num, _num), _num),
    st.builds(lambda c, r: f"ball(center=[{c[0]}, {c[1]}], r={r})", st.tuples(_num, _num), _pos),
    st.builds(lambda a, w: f"box([{a}, {a + w}] x [-inf, {a + 2 * w}])", _num, _pos),
)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(EXPERIMENTS), st.one_of(st.none(), _sets), st.one_of(st.none(), st.integers(1, 60)),
       st.one_of(st.none(), st.lists(_pos, min_size=1, max_size=5).map(tuple)),
       st.one_of(st.none(), st.lists(st.lists(st.integers(0, 9), min_size=1, max_size=3).map(tuple),
                                     min_size=1, max_size=3).map(tuple)),
       st.one_of(st.none(), st.integers(0, 2**31)), st.one_of(st.none(), _pos))
def test_config_round_trip(exp, set_text, dim, grid, frames, seed, t0):
    cfg = ExperimentConfig(experiment=exp, set=None if set_text is None else canonical_set_text(set_text),
                           dim=dim, t_grid=grid, frames=frames, seed=seed, t0=t0)
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_example_configs_parse_and_are_canonical(exp):
    text = example_config(exp)
    assert serialize_config(parse_config(text)) == text


def test_canonical_json_is_stable():
    a = canonical_json({"b": np.float64(0.1) + np.float64(0.2), "a": [np.int64(3), float("nan"), float("inf")]})
    assert a == canonical_json(json.loads(a))
    assert json.loads(a) == {"a": [3, "nan", "inf"], "b": 0.3}


def test_runs_are_byte_identical(tmp_path):
    cfg = parse_config(example_config("representation"))
    r1 = run(cfg, tmp_path / "a")
    r2 = run(cfg, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if not p.name.endswith(".time.json"))
    assert names == ["representation.json", "representation_pairs.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    assert r1.passed and r2.passed
    other, _ = execute(cfg, seed=7)
    assert other["seed"] == 7


def test_half_deviation_table_has_one_row_per_time(tmp_path):
    res = run(parse_config(example_config("theorem1")), tmp_path)
    rows = list(csv.reader(io.StringIO((tmp_path / "theorem1_J.csv").read_text())))
    assert rows[0] == ["t", "J", "error"] and len(rows) == 6
    record = json.loads((tmp_path / "theorem1.json").read_text())
    assert record["passed"] == res.passed


def _write(tmp_path, text):
    p = tmp_path / "cfg.txt"
    p.write_text(text)
    return str(p)


def test_cli_exit_codes(tmp_path, capsys):
    ok = _write(tmp_path, example_config("union"))
    assert main(["run", ok, "--out", str(tmp_path / "u")]) == 0
    bad = _write(tmp_path, "experiment = union\nset = ball(center=[0, 0], r=)\n")
    assert main(["run", bad]) == 2
    assert "line 2, column 29" in capsys.readouterr().err
    # J(t) for the square is not monotone, so the run completes with a failed check
    box = _write(tmp_path, example_config("theorem1"))
    assert main(["run", box, "--out", str(tmp_path / "t")]) == 1
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["print-example-config", "nope"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    assert main(["verify", "--suite", "medium"]) == 2


def test_cli_threads_validation(tmp_path, monkeypatch):
    ok = _write(tmp_path, example_config("perimeter"))
    monkeypatch.setenv("GAUSSGMT_THREADS", "zero")
    assert main(["run", ok, "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("GAUSSGMT_THREADS", "1")
    assert main(["run", ok, "--out", str(tmp_path)]) == 0


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_print_example_config(exp, capsys):
    assert main(["print-example-config", exp]) == 0
    out = capsys.readouterr().out
    assert out.startswith(f"experiment = {exp}\n")


def test_console_entry_point(tmp_path):
    cp = subprocess.run([sys.executable, "-m", "gaussgmt.lab.cli", "print-example-config", "perimeter"],
                        capture_output=True, text=True)
    assert cp.returncode == 0 and "experiment = perimeter" in cp.stdout
