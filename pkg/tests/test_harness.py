import json
import math
from pathlib import Path

import numpy as np
import pytest

import published
import studies
from fracdiff.harness import REGISTRY, ConfigError, ExperimentFailed, load_config, parse_config, run_experiment
from fracdiff.harness.cli import main
from fracdiff.harness.convergence import (
    NonNestedError,
    lq_error,
    observed_orders,
    shared_strides,
    space_convergence,
    time_convergence,
)
from fracdiff.harness.io import CSV_SCHEMA_VERSION, TRAJECTORY_COLUMNS, read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

DECAY = """
experiment = decay   # short run
q = 1.5
theta = 0.25
L = 1.0
h = 0.1
dt = 0.01
T = 0.5
initial = bump
"""


# ---- configuration --------------------------------------------------------


def test_parse_config():
    cfg = parse_config(DECAY)
    assert cfg.experiment == "decay" and cfg.q == 1.5 and cfg.L == 1.0 and cfg.T == 0.5
    assert cfg.steps_for(cfg.dt) == 50
    assert cfg.epsilon == 1e-7 and cfg.seed == 0


@pytest.mark.parametrize(
    "text,path",
    [
        ("q = 1.5", "config.experiment"),
        ("experiment = decay\nfoo = 1", "config.foo"),
        ("experiment = decay\nq = abc", "config.q"),
        ("experiment = decay\nq = 0.5", "config.q"),
        ("experiment = decay\ntheta = 1.5", "config.theta"),
        ("experiment = decay\ntheta = 0.25\nq = 4.5", "config.q"),
        ("experiment = decay\nL = 1\nh = 0.3", "config.h"),
        ("experiment = decay\nL = 1\nh = 1", "config.h"),
        ("experiment = decay\ndt = -1", "config.dt"),
        ("experiment = convergence\nrefinement = 0.1, -0.1", "config.refinement[1]"),
    ],
)
def test_config_errors_name_the_field(text, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.path == path


def test_keys_are_case_sensitive():
    with pytest.raises(ConfigError) as exc:
        parse_config("experiment = decay\nl = 1")
    assert exc.value.path == "config.l"


def test_shipped_configs_parse():
    names = sorted(p.name for p in CONFIGS.glob("*.cfg"))
    assert names
    for p in CONFIGS.glob("*.cfg"):
        cfg = load_config(p)
        assert cfg.experiment in REGISTRY, p


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/cfg")


# ---- experiments ----------------------------------------------------------


def test_registry_has_the_five_families():
    assert set(REGISTRY) == {"decay", "convergence", "extinction", "asymptotics", "explicit"}


def test_decay_experiment_outputs(tmp_path):
    summary = run_experiment(parse_config(DECAY), tmp_path)
    assert summary["status"] == "ok"
    assert json.loads((tmp_path / "summary.json").read_text())["result"]["audit"]["hard_ok"] is True
    text = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert text[0] == f"# fracdiff trajectory csv schema v{CSV_SCHEMA_VERSION}"
    header, rows = read_csv(tmp_path / "trajectory.csv")
    assert tuple(header) == TRAJECTORY_COLUMNS and len(rows) == 51
    lq = np.array([float(r[2]) for r in rows])
    a = np.array([float(r[4]) for r in rows[1:]])
    assert np.all(np.diff(lq) < 0)
    assert np.all(lq[1:] <= a * (1 + 1e-8))
    # 17 significant digits round-trip exactly
    assert float(rows[3][2]) == float(format(float(rows[3][2]), ".17g"))


def test_outputs_are_deterministic(tmp_path):
    cfg = parse_config(DECAY)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    for name in ("trajectory.csv",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unknown_experiment_lists_registry(tmp_path):
    with pytest.raises(ExperimentFailed) as exc:
        run_experiment(parse_config("experiment = nope"), tmp_path)
    rec = json.loads((tmp_path / "failure.json").read_text())
    assert rec["field"] == "config.experiment"
    for name in REGISTRY:
        assert name in rec["message"]
    assert exc.value.record["status"] == "failed"


def test_missing_physics_parameter_fails_with_record(tmp_path):
    with pytest.raises(ExperimentFailed) as exc:
        run_experiment(parse_config("experiment = decay\nq = 1.5\ntheta = 0.25\nL = 1\nh = 0.1\ninitial = bump"), tmp_path)
    assert exc.value.record["field"] == "config.dt"


def test_explicit_experiment(tmp_path):
    cfg = parse_config(
        "experiment = explicit\nq = 1.5\ntheta = 0.5\nL = 1\nh = 0.04\ninitial = bump\nn_steps = 200"
    )
    rec = run_experiment(cfg, tmp_path)["result"]
    assert rec["dt"] == rec["cfl_dt_max"] and rec["monotone_decay"] and not rec["instability"]
    with pytest.raises(ExperimentFailed) as exc:
        run_experiment(parse_config("experiment = explicit\nq = 2.4\ntheta = 0.5\nL = 1\nh = 0.04\ninitial = bump\nn_steps = 5"), tmp_path)
    assert exc.value.record["field"] == "config.dt"


def test_convergence_experiment(tmp_path):
    cfg = parse_config(
        "experiment = convergence\nkind = time\nq = 1.5\ntheta = 0.5\nL = 1\nh = 0.1\nT = 0.5\n"
        "initial = bump\nrefinement = 0.1, 0.05\ndt_ref = 0.01"
    )
    rec = run_experiment(cfg, tmp_path)["result"]
    assert rec["kind"] == "time" and len(rec["cells"]) == 1
    header, rows = read_csv(tmp_path / "convergence.csv")
    assert header == ["q", "theta", "level", "error", "observed_order"] and len(rows) == 2


def test_asymptotics_experiment(tmp_path):
    cfg = parse_config(
        "experiment = asymptotics\nq = 2.4\ntheta = 0.75\nL = 1\nh = 0.1\nds = 0.02\nepsilon = 1e-5\n"
        "s_max = 6\ninitial = shifted_bump_wide"
    )
    rec = run_experiment(cfg, tmp_path)["result"]
    assert rec["profile_alignment"] > 0.999
    header, rows = read_csv(tmp_path / "profile.csv")
    assert header == ["x_i", "f_i"] and len(rows) == 19
    assert all(float(r[1]) > 0 for r in rows)


# ---- CLI ------------------------------------------------------------------


def test_cli_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == sorted(REGISTRY)


def test_cli_run_and_subcommand(tmp_path, capsys):
    p = tmp_path / "d.cfg"
    p.write_text(DECAY)
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    assert json.loads(capsys.readouterr().out)["audit"]["hard_ok"]
    assert main(["decay", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    capsys.readouterr()
    assert main(["explicit", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "config.experiment"


def test_cli_failure_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("experiment = decay\ntheta = 0.25\nq = 7")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    rec = json.loads(capsys.readouterr().err)
    assert rec["status"] == "failed" and rec["field"] == "config.q"
    assert main(["run", "--config", str(p), "--threads", "0"]) == 2


def test_extinction_experiment_on_shipped_config(tmp_path):
    rec = run_experiment(load_config(CONFIGS / "extinction.cfg"), tmp_path)["result"]
    assert rec["t_star"] == pytest.approx(0.92355, abs=5e-3)
    header, rows = read_csv(tmp_path / "dichotomy.csv")
    assert header[:3] == ["probe", "t1", "t2"] and len(rows) == rec["probes"]


# ---- convergence helpers --------------------------------------------------


def test_observed_orders_and_errors():
    assert observed_orders([0.1, 0.05, 0.025], [4.0, 1.0, 0.25]) == [None, 2.0, 2.0]
    a = np.array([[0.0, 1.0], [0.0, 2.0]])
    assert lq_error(a, a, 0.5, 2.0) == 0.0
    assert lq_error(a, np.zeros_like(a), 0.5, 2.0) == pytest.approx(math.sqrt(2.0))


def test_shared_strides():
    assert shared_strides(0.03, 0.02, 1.2) == (2, 3, 20)
    with pytest.raises(NonNestedError):
        shared_strides(0.03, 0.02, 1.0)


def test_self_comparison_is_zero():
    rows = time_convergence(1.5, 0.5, 1.0, 0.1, 0.2, "bump", [0.02, 0.01], 0.01)
    assert rows[-1].error == 0.0 and rows[0].error > 0
    rows = space_convergence(1.5, 0.5, 1.0, 0.05, 0.2, "bump", [0.2, 0.1], 0.1)
    assert rows[-1].error == 0.0 and rows[0].error > 0


def test_interpolated_and_shared_comparisons_agree_on_nested_levels():
    a = time_convergence(2.4, 0.5, 1.0, 0.1, 0.4, "bump", [0.04, 0.02], 0.01)
    b = time_convergence(2.4, 0.5, 1.0, 0.1, 0.4, "bump", [0.04, 0.02], 0.01, compare="shared")
    for x, y in zip(a, b):
        assert x.error == pytest.approx(y.error, rel=1e-12)


def test_non_nested_levels_are_rejected():
    with pytest.raises(NonNestedError):
        space_convergence(1.5, 0.5, 1.0, 0.05, 0.2, "bump", [0.25], 0.1)
    with pytest.raises(NonNestedError):
        time_convergence(1.5, 0.5, 1.0, 0.1, 0.2, "bump", [0.03], 0.01)
    with pytest.raises(ValueError):
        time_convergence(1.5, 0.5, 1.0, 0.1, 0.2, "bump", [0.02], 0.01, compare="nearest")


def test_parallel_levels_match_serial():
    a = time_convergence(1.5, 0.5, 1.0, 0.1, 0.2, "bump", [0.04, 0.02], 0.01)
    b = time_convergence(1.5, 0.5, 1.0, 0.1, 0.2, "bump", [0.04, 0.02], 0.01, threads=2)
    assert [r.error for r in a] == [r.error for r in b]


# ---- published convergence tables -----------------------------------------

CELLS = [(q, th) for q in (1.5, 2.4) for th in (0.25, 0.5, 0.75)]


@pytest.mark.parametrize("index", range(6))
def test_time_convergence_matches_published_tables(index):
    q, theta = CELLS[index]
    table = published.time_table(q, theta)
    rows = studies.time_study(q, theta, 5e-5, studies.TIME_LEVELS_FULL)
    assert [r.level for r in rows] == pytest.approx([t for t, _ in table], rel=1e-12)
    for r, (_, e) in zip(rows, table):
        assert r.error == pytest.approx(e, rel=0.02), r.level
