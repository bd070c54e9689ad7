import math
import re
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlp import cli, harness
from mvlp.closure import Closure, ClosureConfig, PhaseGrid
from mvlp.grids import MomentField, RandomGrid, SpatialGrid
from mvlp.harness import (
    EMIT_FLAGS,
    ConvergenceRow,
    RunConfig,
    compare_entropies,
    convergence_rates,
    convergence_study,
    emit_outputs,
    execute,
    l1_error,
    parse_config_text,
    read_table_csv,
    write_measure_csv,
    write_table_csv,
)
from mvlp.models import burgers_model
from mvlp.schemes import evaluate_closure

NUM = r"-?\d\.\d{16}e[+-]\d{2}"


def small(**kw):
    base = dict(scenario="burgers-step-xi", n_x=20, n_xi=2, t_final=0.05)
    base.update(kw)
    return RunConfig(**base)


def test_l1_examples():
    sg, rg = SpatialGrid(0.0, 1.0, 10), RandomGrid(0.0, 1.0, 10)
    a = MomentField(np.zeros((10, 10, 1)))
    assert l1_error(a, a, sg, rg) == 0.0
    b = a.copy()
    b.values[3, 4, 0] = 1.0
    assert l1_error(a, b, sg, rg) == pytest.approx(0.01)
    e = l1_error(MomentField(np.zeros((10, 10, 2))), MomentField(np.ones((10, 10, 2))), sg, rg)
    np.testing.assert_allclose(e, [1.0, 1.0])
    with pytest.raises(ValueError):
        l1_error(a, MomentField(np.zeros((10, 9, 1))), sg, rg)
    with pytest.raises(ValueError):
        l1_error(a, a, SpatialGrid(0.0, 1.0, 12), rg)


def test_rate_formula():
    rows = convergence_rates([40, 60], [1.0, 0.5])
    assert rows[0].rate is None
    assert rows[1].rate == pytest.approx(math.log(2) / math.log(1.5))


def test_study_preconditions():
    with pytest.raises(ValueError):
        convergence_study("x", [40, 40], small())
    with pytest.raises(ValueError):
        convergence_study("x", [60, 40], small())
    with pytest.raises(ValueError):
        convergence_study("t", [40, 60], small())


def test_study_and_table_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv("MVLP_THREADS", "1")
    rows = convergence_study("x", [10, 20, 40], small())
    assert [r.n for r in rows] == [10, 20, 40]
    assert rows[0].rate is None and all(r.rate is not None for r in rows[1:])
    path = write_table_csv(tmp_path / "t.csv", rows)
    text = path.read_bytes().decode()
    assert text.startswith("N,error,rate\n") and "\r" not in text
    assert text.splitlines()[1].endswith(",")
    back = read_table_csv(path)
    for a, b in zip(rows, back):
        assert a.n == b.n and a.error == b.error
        if a.rate is not None:
            assert b.rate == pytest.approx(a.rate, rel=1e-15)
    # rates recomputed from the file agree with the in-memory ones
    again = convergence_rates([r.n for r in back], [r.error for r in back])
    for a, b in zip(rows[1:], again[1:]):
        assert b.rate == pytest.approx(a.rate, rel=1e-14)


def test_parallel_study_matches_serial(monkeypatch):
    monkeypatch.setenv("MVLP_THREADS", "1")
    serial = convergence_study("xi", [2, 4], small())
    monkeypatch.setenv("MVLP_THREADS", "2")
    parallel = convergence_study("xi", [2, 4], small())
    assert serial == parallel


def test_worker_count(monkeypatch):
    monkeypatch.setenv("MVLP_THREADS", "3")
    assert harness.worker_count() == 3
    monkeypatch.setenv("MVLP_THREADS", "0")
    assert harness.worker_count() >= 1


def test_config_validation():
    for bad in (dict(lambda_f=1.5), dict(lambda_f=0.0), dict(cfl=0.0), dict(cfl=1.2),
                dict(n_x=2), dict(n_u=0), dict(t_final=-1.0), dict(entropy="tsallis"),
                dict(scenario="nope"), dict(scheme="weno"), dict(cfl_rule="fast"),
                dict(boundary="wall"), dict(emit={"png"})):
        with pytest.raises(ValueError):
            RunConfig(**bad)


configs = st.builds(
    RunConfig,
    scenario=st.sampled_from(["burgers-step-xi", "burgers-sin", "euler-riemann", "dflux-step"]),
    n_x=st.none() | st.integers(3, 1000),
    n_xi=st.none() | st.integers(1, 300),
    n_u=st.none() | st.integers(1, 200),
    lambda_f=st.none() | st.floats(1e-3, 1.0),
    cfl=st.floats(1e-3, 1.0),
    t_final=st.none() | st.floats(1e-3, 10.0),
    entropy=st.none() | st.sampled_from(["quadratic", "unit", "abs:0.5", "kinetic-euler"]),
    relax_band=st.booleans(),
    boundary=st.none() | st.sampled_from(["free", "periodic"]),
    scheme=st.sampled_from(["mv", "collocation", "both"]),
    cfl_rule=st.none() | st.sampled_from(["global", "per-step", "measure"]),
    exact_projection=st.booleans(),
    out=st.none() | st.sampled_from(["out", "/tmp/run 1"]),
    emit=st.frozensets(st.sampled_from(EMIT_FLAGS)),
)


@settings(max_examples=200, deadline=None)
@given(configs)
def test_config_text_round_trip(cfg):
    assert parse_config_text(cfg.to_text()) == cfg


def test_config_file_comments_and_errors():
    cfg = parse_config_text("# comment\nscenario = burgers-sin\nlambda-f = 0.5  # trailing\n")
    assert cfg.scenario == "burgers-sin" and cfg.lambda_f == 0.5
    with pytest.raises(ValueError):
        parse_config_text("bogus = 1\n")
    with pytest.raises(ValueError):
        parse_config_text("scenario\n")
    with pytest.raises(ValueError):
        parse_config_text("relax_band = maybe\n")


def test_field_csv_format(tmp_path):
    cfg = small(out=str(tmp_path), emit={"field_csv", "trace_csv"})
    p, res = execute(cfg)
    files = emit_outputs(p, res, cfg)
    assert sorted(f.name for f in files) == ["field_collocation.csv", "field_mv.csv", "trace.csv"]
    text = (tmp_path / "field_mv.csv").read_bytes().decode()
    lines = text.split("\n")
    assert lines[0] == "x,xi,component,value" and lines[-1] == ""
    assert len(lines) - 2 == 20 * 2
    assert re.fullmatch(rf"{NUM},{NUM},0,{NUM}", lines[1])
    # j outer, i inner
    x = [float(l.split(",")[0]) for l in lines[1:-1]]
    xi = [float(l.split(",")[1]) for l in lines[1:-1]]
    assert x[0] == x[1] and xi[0] != xi[1]
    values = np.array([float(l.split(",")[3]) for l in lines[1:-1]]).reshape(20, 2).T
    np.testing.assert_array_equal(values, res.mv.values[..., 0])

    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "step,t,dt,total_entropy,wall_ms"
    assert len(trace) - 1 == len(res.trace)


def test_measure_csv_dirac_rows(tmp_path):
    model = burgers_model()
    grid = PhaseGrid.for_model(model, 10)
    sg, rg = SpatialGrid(0.0, 1.0, 7), RandomGrid(-1.0, 1.0, 3)
    rng = np.random.default_rng(0)
    vals = grid.points[rng.integers(0, 10, size=(3, 7)), 0][..., None]
    state = evaluate_closure(Closure(model, grid, ClosureConfig()), vals, sg)
    path = write_measure_csv(tmp_path / "m.csv", state, sg, rg)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,xi,u1,weight"
    assert len(lines) - 1 == 3 * 7
    w = np.array([float(l.split(",")[3]) for l in lines[1:]])
    np.testing.assert_allclose(w, 1.0 / grid.du)


def test_measure_csv_two_components(tmp_path):
    cfg = RunConfig(scenario="euler-riemann", n_x=10, n_xi=2, n_u=6, t_final=0.01,
                    scheme="mv", out=str(tmp_path), emit={"measure_csv"})
    p, res = execute(cfg)
    (path,) = emit_outputs(p, res, cfg)
    assert path.read_text().splitlines()[0] == "x,xi,u1,u2,weight"


def test_empty_emit_writes_nothing(tmp_path):
    cfg = small(out=str(tmp_path / "o"), emit=set())
    p, res = execute(cfg)
    assert emit_outputs(p, res, cfg) == []
    assert not (tmp_path / "o").exists()
    assert cli.main(["run", "--nx", "10", "--nxi", "2", "--t-final", "0.01",
                     "--out", str(tmp_path / "c"), "--emit", ""]) == 0
    assert not (tmp_path / "c").exists()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = small(out=str(blocker / "sub"), emit={"trace_csv"})
    p, res = execute(cfg)
    with pytest.raises(OSError, match="sub"):
        emit_outputs(p, res, cfg)


def test_compare_entropies():
    cfg = RunConfig(scenario="dflux-step", n_x=20, t_final=0.2)
    same = compare_entropies(cfg, ["quadratic", "quadratic"])
    assert list(same) == ["quadratic"]
    twice = compare_entropies(cfg, ["quadratic"])
    assert same["quadratic"][1].mv.values.tobytes() == twice["quadratic"][1].mv.values.tobytes()
    # one entropy is a plain mv run
    _, plain = execute(replace(cfg, entropy="quadratic", scheme="mv"))
    assert plain.mv.values.tobytes() == twice["quadratic"][1].mv.values.tobytes()
    with pytest.raises(ValueError):
        compare_entropies(RunConfig(scenario="euler-riemann", n_x=5, t_final=0.01), ["unit"])


def test_cli_errors(capsys):
    assert cli.main(["run", "--lambda-f", "1.5"]) != 0
    err = capsys.readouterr().err.strip()
    assert err.count("\n") == 0 and "lambda_f" in err
    assert cli.main(["run", "--entropy", "tsallis"]) != 0
    assert "tsallis" in capsys.readouterr().err
    assert cli.main(["converge-x", "--resolutions", "40,40", "--t-final", "0.01"]) != 0
    with pytest.raises(SystemExit) as exit_info:
        cli.main(["run", "--scheme", "weno"])
    assert exit_info.value.code != 0


def test_cli_defaults_and_overrides(tmp_path, capsys):
    args = cli.build_parser().parse_args(["run", "--scenario", "burgers-sin"])
    cfg = cli.config_from_args(args)
    p = harness.prepare(cfg)
    assert (p.sgrid.n_x, p.rgrid.n_xi, p.grid.counts, p.t_final) == (100, 10, (100,), 0.25)
    assert cfg.cfl == 0.75

    conf = tmp_path / "c.txt"
    conf.write_text("scenario = burgers-sin\nn_x = 50\ncfl = 0.5\n")
    args = cli.build_parser().parse_args(["run", "--config", str(conf), "--nx", "30"])
    cfg = cli.config_from_args(args)
    assert (cfg.scenario, cfg.n_x, cfg.cfl) == ("burgers-sin", 30, 0.5)


def test_cli_commands(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MVLP_THREADS", "1")
    assert cli.main(["list-scenarios"]) == 0
    assert "euler-riemann" in capsys.readouterr().out
    out = tmp_path / "x"
    assert cli.main(["converge-x", "--resolutions", "10,20", "--nxi", "2", "--t-final", "0.05",
                     "--out", str(out), "--emit", "table_csv"]) == 0
    rows = read_table_csv(out / "table_x.csv")
    assert [r.n for r in rows] == [10, 20]
    assert cli.main(["compare-entropy", "--nx", "20", "--t-final", "0.1",
                     "--out", str(tmp_path / "e")]) == 0
    names = sorted(f.name for f in (tmp_path / "e").iterdir())
    assert names == ["abs_0.5_field_mv.csv", "abs_0.5_measure.csv",
                     "quadratic_field_mv.csv", "quadratic_measure.csv"]
    assert "l1 distance" in capsys.readouterr().out
