import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacflow.cli import main
from evacflow.errors import RangeViolation, ScenarioSyntaxError, ValidationError
from evacflow.library import BUILTINS, builtin, strip_mask
from evacflow.pipeline import read_scalar_csv, run_pipeline, write_scalar_csv
from evacflow.scenario import emit_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
MIN_TEXT = "hx = 0.125\nhy = 0.125\n```mask\n" + "\n".join(strip_mask(8)) + "\n```\n"


def test_minimal_scenario_defaults():
    sc = parse_scenario(MIN_TEXT)
    assert sc.nx == 9 and sc.ny == 4
    assert sc.delta == 0.5 and sc.theta == 0.1 and sc.cfl == 0.4
    assert sc.rho0_kind == "uniform" and sc.rho0_value == 0.5


def test_rho_out_of_range():
    with pytest.raises(ValidationError) as e:
        parse_scenario("rho0 = UNIFORM 1.5\nr_max = 1.0\n" + MIN_TEXT)
    assert [r for r, _ in e.value.violations] == ["RhoOutOfRange"]


def test_delta_zero():
    with pytest.raises(ValidationError) as e:
        parse_scenario("delta = 0\n" + MIN_TEXT)
    assert e.value.violations[0][0] == "DeltaPositive"


def test_all_violations_reported_at_once():
    text = "delta = -1\ntheta = 0\ncfl = 1.5\npath = 5.0, 5.0\nhx = 0.1\nhy = 0.1\n```mask\n....\n```\n"
    with pytest.raises(ValidationError) as e:
        parse_scenario(text)
    rules = {r for r, _ in e.value.violations}
    assert {"DeltaPositive", "ThetaPositive", "CflRange", "NoExit", "PathOutside"} <= rules


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("hx = 0.1\nhy = 1x\n", 2, 6),
        ("hx = 0.1\nbogus = 3\n", 2, 1),
        ("hx 0.1\n", 1, 1),
        ("hx = 0.1\nhx = 0.2\n", 2, 1),
        ("hx = 0.1\n```mask\n.E\n", 2, 1),
        ("rho0 = gaussian 3\n", 1, 8),
    ],
)
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(ScenarioSyntaxError) as e:
        parse_scenario(text)
    assert (e.value.line, e.value.column) == (line, col)


def test_overrides():
    sc = parse_scenario(MIN_TEXT, ["delta=0.25", "path=0.5,0.25", "path=0.1,0.1"])
    assert sc.delta == 0.25 and sc.paths == ((0.5, 0.25), (0.1, 0.1))
    with pytest.raises(ScenarioSyntaxError):
        parse_scenario(MIN_TEXT, ["delta"])


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.scn")), ids=lambda p: p.stem)
def test_shipped_scenarios_round_trip(path):
    sc = parse_scenario(path.read_text())
    assert parse_scenario(emit_scenario(sc)) == sc


floats = st.floats(1e-3, 10.0, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(BUILTINS), floats, st.floats(0.01, 2.0), st.floats(0.05, 0.95),
    st.lists(st.tuples(st.floats(0.07, 0.3), st.floats(0.01, 0.3)), max_size=3),
    st.one_of(st.none(), st.integers(1, 10_000)), st.booleans(),
)
def test_round_trip_property(name, delta, theta, cfl, paths, max_iter, custom):
    kw = dict(delta=delta, theta=theta, cfl=cfl, paths=tuple(paths), cg_max_iter=max_iter,
              output_times=(0.5, 1.5))
    if custom:
        kw.update(speed_law="custom", speed_table=((0.0, 1.0), (theta / 4, 0.7), (1.0, 0.0)))
    sc = builtin(name, **kw)
    assert parse_scenario(emit_scenario(sc)) == sc


def test_field_stage_outputs(tmp_path):
    sc = builtin("strip", 16)
    summary, _ = run_pipeline(sc, {"field"}, tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["exit_flux.csv", "phi.csv", "summary.txt", "u.csv", "w.csv"]
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "i,j,x,y,value"
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == "i,j,x,y,wx,wy"
    assert "evacuation_time" not in summary.values
    assert summary["exit_flux_within_bounds"] is True


def test_simulate_implies_field(tmp_path):
    sc = builtin("strip", 16, t_end=3.0)
    summary, state = run_pipeline(sc, {"simulate"}, tmp_path)
    assert summary.stages == ("field", "simulate")
    assert (tmp_path / "u.csv").exists() and (tmp_path / "evolution.csv").exists()
    assert np.isfinite(summary["evacuation_time"])
    head = (tmp_path / "evolution.csv").read_text().splitlines()[0]
    assert head == "t,mass,outflow,tv,rho_max"


def test_report_outputs(tmp_path):
    sc = builtin("square_room", 16, t_end=2.0, output_times=(0.5,), paths=((0.2, 0.5),))
    summary, _ = run_pipeline(sc, {"field", "simulate", "trace"}, tmp_path)
    assert (tmp_path / "rho_t0.5.csv").exists()
    assert (tmp_path / "path_000.csv").read_text().splitlines()[0] == "t,x,y,phi,wnorm"
    assert (tmp_path / "evacuation_map.csv").read_text().splitlines()[0] == "i,j,x,y,outcome,T"
    text = (tmp_path / "summary.txt").read_text()
    for key in ("scenario_digest", "varpi", "exit_flux", "exit_flux_lower", "map.exited_fraction",
                "param.theta", "param.cg_tol", "time.field"):
        assert f"\n{key} = " in "\n" + text


def test_byte_reproducible_and_isolated(tmp_path):
    sc = builtin("pillar_room", 16, t_end=1.0, paths=((0.5, 0.2),))
    for d in ("a", "b"):
        run_pipeline(sc, {"simulate", "trace"}, tmp_path / d)
    run_pipeline(sc, {"field"}, tmp_path / "c")
    for p in (tmp_path / "a").glob("*.csv"):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()
    for name in ("u.csv", "phi.csv", "w.csv", "exit_flux.csv"):
        assert (tmp_path / "c" / name).read_bytes() == (tmp_path / "a" / name).read_bytes()


def test_rho0_from_csv(tmp_path):
    sc = builtin("strip", 16)
    summary, state = run_pipeline(sc, {"field"}, None)
    g = state.grid
    x, _ = g.centers
    write_scalar_csv(tmp_path / "rho0.csv", np.where(x < 0.5, 0.9, 0.1), g)
    assert np.array_equal(read_scalar_csv(tmp_path / "rho0.csv", g)[g.inside], np.where(x < 0.5, 0.9, 0.1)[g.inside])
    text = emit_scenario(sc.replace(rho0_kind="csv", rho0_path="rho0.csv", rho0_value=0.5, t_end=0.5))
    (tmp_path / "s.scn").write_text(text)
    assert main(["simulate", str(tmp_path / "s.scn"), "--out", str(tmp_path / "out")]) == 0
    bad = tmp_path / "bad.csv"
    write_scalar_csv(bad, np.where(x < 0.5, 1.5, 0.1), g)
    (tmp_path / "s2.scn").write_text(text.replace("rho0.csv", "bad.csv"))
    assert main(["simulate", str(tmp_path / "s2.scn"), "--out", str(tmp_path / "out2")]) == 3


def test_exit_codes(tmp_path, monkeypatch, capsys):
    good = SCENARIOS / "strip.scn"
    (tmp_path / "syntax.scn").write_text("hx = ?\n")
    (tmp_path / "invalid.scn").write_text(MIN_TEXT.replace("E", "#"))
    out = str(tmp_path / "o")
    assert main(["field", str(good), "--out", out]) == 0
    assert main(["field", str(tmp_path / "syntax.scn")]) == 2
    assert main(["field", str(tmp_path / "missing.scn")]) == 2
    assert main(["field", str(tmp_path / "invalid.scn")]) == 3
    assert main(["field", str(good), "--out", out, "--override", "cg_max_iter=2"]) == 4
    with pytest.raises(SystemExit) as e:
        main(["explode"])
    assert e.value.code == 2

    import evacflow.pipeline as pl

    def boom(*a, **k):
        raise RangeViolation("density left the admissible range")

    monkeypatch.setattr(pl, "run_pipeline", boom)
    assert main(["simulate", str(good), "--out", out]) == 5
    err = capsys.readouterr().err
    assert "RangeViolation" in err and "NoExit" in err


def test_verify_command(tmp_path, capsys):
    assert main(["verify", "--case", "transform", "--case", "round_trip", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    assert "2/2 cases passed" in capsys.readouterr().out
    csv_text = (tmp_path / "verify_report.csv").read_text().splitlines()
    assert csv_text[0].startswith("name,kind,certifies,passed")
    assert main(["verify", "--case", "nope"]) == 3


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "evacflow.cli", "trace", str(SCENARIOS / "two_exit_room.scn"),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert "path_000.outcome = STALLED" in out.stdout
