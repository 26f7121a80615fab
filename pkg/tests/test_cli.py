import json
import sys
from pathlib import Path

import numpy as np
import pytest

import operator_fixtures as ops
from opevo import cli
from opevo import problems as P
from opevo import sandbox as sb
from opevo.util import derive_seed


def write_mock_fixtures(root: Path, **kinds):
    for kind, texts in kinds.items():
        d = root / kind
        d.mkdir(parents=True, exist_ok=True)
        for i, text in enumerate(texts):
            (d / f"{i:02d}.txt").write_text(text, encoding="utf-8")
    return root


def small_mokp_suite(n_instances=1, n_items=15, seed=5):
    rng = np.random.default_rng(seed)
    instances = [
        P.generate_mokp(n_items, 2, rng, instance_id=f"val-{i:02d}") for i in range(n_instances)
    ]
    return P.SuiteSpec(category=P.MOKP, role="validation", instances=instances)


def write_config(path: Path, **overrides):
    config = {
        "schema_version": 1,
        "category": P.MOKP,
        "seed": 3,
        "evolution": {
            "n_ev": 2,
            "g_ev": 2,
            "population_size": 10,
            "generations": 3,
            "n_trial": 1,
            "max_attempts": 2,
        },
        "backend": {"kind": "mock", "fixture_dir": "fixtures"},
        "worker": {"command": [sys.executable, str(Path(__file__).parent / "stub_worker.py")]},
        "suite": {"path": "suite"},
    }
    config.update(overrides)
    path.write_text(json.dumps(config, indent=2))
    return config


@pytest.fixture
def run_setup(tmp_path):
    """Config + fixtures + suite for a tiny end-to-end evolve."""
    write_mock_fixtures(
        tmp_path / "fixtures",
        initialization=[ops.wrap_reply(ops.VALID_OPERATOR)] * 2,
        crossover=[ops.wrap_reply(ops.VALID_OPERATOR)] * 4,
        mutation=[ops.wrap_reply(ops.VALID_OPERATOR)] * 4,
        repair=[ops.wrap_reply(ops.VALID_OPERATOR)] * 4,
    )
    cli.save_suite(small_mokp_suite(), tmp_path / "suite")
    write_config(tmp_path / "config.json")
    return tmp_path


# ---------------------------------------------------------------------------
# suite directories
# ---------------------------------------------------------------------------


def test_suite_directory_roundtrip(tmp_path):
    suite = small_mokp_suite(n_instances=3)
    cli.save_suite(suite, tmp_path / "s")
    loaded = cli.load_suite(tmp_path / "s")
    assert loaded.category == suite.category and loaded.role == suite.role
    assert [i.id for i in loaded.instances] == [i.id for i in suite.instances]
    assert np.array_equal(loaded.instances[0].weights, suite.instances[0].weights)
    assert loaded.instances[0].capacity == suite.instances[0].capacity


def test_load_suite_requires_header(tmp_path):
    with pytest.raises(cli.CliError):
        cli.load_suite(tmp_path)


# ---------------------------------------------------------------------------
# exit codes and error lines
# ---------------------------------------------------------------------------


def test_no_subcommand_is_usage_error(capsys):
    assert cli.main([]) == 1
    assert capsys.readouterr().err.startswith("error[usage]:")


def test_unknown_flag_is_usage_error(capsys):
    assert cli.main(["report", "--bogus", "x"]) == 1
    assert capsys.readouterr().err.startswith("error[usage]:")


def test_unknown_algorithm_is_usage_error(tmp_path, capsys):
    cli.save_suite(small_mokp_suite(), tmp_path / "s")
    code = cli.main(
        ["baseline", "--algorithm", "sa", "--suite", str(tmp_path / "s"), "--out", str(tmp_path / "o")]
    )
    assert code == 1
    assert capsys.readouterr().err.startswith("error[usage]:")


def test_malformed_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text('{\n  "schema_version": 1,\n  "category": \n}\n')
    assert cli.main(["evolve", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error[config]:")
    assert "line 4 column 1" in err


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    write_config(cfg, typo_key=1)
    assert cli.main(["evolve", "--config", str(cfg)]) == 2
    assert "typo_key" in capsys.readouterr().err


def test_bad_schema_version_rejected(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    write_config(cfg, schema_version=99)
    assert cli.main(["evolve", "--config", str(cfg)]) == 2
    assert "schema_version" in capsys.readouterr().err


def test_bad_evolution_value_reports_path(tmp_path, capsys):
    write_mock_fixtures(tmp_path / "fixtures", initialization=[])
    cli.save_suite(small_mokp_suite(), tmp_path / "suite")
    cfg = tmp_path / "config.json"
    write_config(cfg, evolution={"n_ev": 1})
    assert cli.main(["evolve", "--config", str(cfg)]) == 2
    assert "evolution" in capsys.readouterr().err


def test_missing_fixture_dir_rejected(tmp_path, capsys):
    cli.save_suite(small_mokp_suite(), tmp_path / "suite")
    cfg = tmp_path / "config.json"
    write_config(cfg)  # fixtures/ never created
    assert cli.main(["evolve", "--config", str(cfg)]) == 2
    assert "fixture_dir" in capsys.readouterr().err


def test_http_backend_without_key_is_backend_error(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("OPEVO_TEST_KEY", raising=False)
    cli.save_suite(small_mokp_suite(), tmp_path / "suite")
    cfg = tmp_path / "config.json"
    write_config(
        cfg,
        backend={
            "kind": "http",
            "endpoint_url": "https://example.invalid/v1/chat",
            "model": "m",
            "api_key_env": "OPEVO_TEST_KEY",
        },
    )
    assert cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "run")]) == 3
    err = capsys.readouterr().err
    assert err.startswith("error[backend]:")
    assert "OPEVO_TEST_KEY" in err


# ---------------------------------------------------------------------------
# gen-instances
# ---------------------------------------------------------------------------


def test_gen_instances_writes_loadable_suite(tmp_path, capsys):
    out = tmp_path / "suite"
    assert cli.main(
        ["gen-instances", "--category", P.MOKP, "--role", "validation", "--seed", "0", "--out", str(out)]
    ) == 0
    suite = cli.load_suite(out)
    assert suite.category == P.MOKP and len(suite) == 10
    assert "10" in capsys.readouterr().out


def test_gen_instances_deterministic(tmp_path):
    for name in ("a", "b"):
        cli.main(["gen-instances", "--category", P.MOTSP, "--seed", "4", "--out", str(tmp_path / name)])
    a = sorted((tmp_path / "a").glob("*.json"))
    b = sorted((tmp_path / "b").glob("*.json"))
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pc in zip(a, b):
        assert pa.read_bytes() == pc.read_bytes()


# ---------------------------------------------------------------------------
# evolve end-to-end
# ---------------------------------------------------------------------------


def test_evolve_writes_complete_run_record(run_setup, capsys):
    out = run_setup / "run"
    code = cli.main(["evolve", "--config", str(run_setup / "config.json"), "--out", str(out)])
    assert code == 0
    assert "run complete" in capsys.readouterr().out

    assert (out / "config.json").is_file()
    assert (out / "suite" / "suite.json").is_file()

    scores = [json.loads(l) for l in (out / "scores.jsonl").read_text().splitlines()]
    assert len(scores) == 2 + 2 * 2  # n_ev initial + g_ev * n_ev offspring
    by_gen = {}
    for rec in scores:
        by_gen.setdefault(rec["generation"], []).append(rec)
    assert sorted(by_gen) == [0, 1, 2]

    conv = (out / "convergence.csv").read_text().splitlines()
    assert conv[0] == "generation,best_score"
    assert len(conv) == 1 + 3  # header + (g_ev + 1) rows
    best = [float(line.split(",")[1]) for line in conv[1:]]
    assert all(b >= a for a, b in zip(best, best[1:]))

    # every scored artifact has a persisted source + meta with matching id
    metas = sorted((out / "operators").glob("gen_*/op_*.meta.json"))
    stored = {}
    for meta_path in metas:
        meta = json.loads(meta_path.read_text())
        assert meta_path.with_suffix("").with_suffix(".src").is_file()
        stored[meta["id"]] = meta
    for rec in scores:
        assert rec["operator"] in stored
        assert stored[rec["operator"]]["scored"] is True
    # lineage of persisted artifacts resolves inside the record
    for meta in stored.values():
        for parent in meta["parents"]:
            assert parent in stored


def test_evolve_scores_are_replayable(run_setup):
    out = run_setup / "run"
    cli.main(["evolve", "--config", str(run_setup / "config.json"), "--out", str(out)])
    config = json.loads((out / "config.json").read_text())
    suite = cli.load_suite(out / "suite")
    records = [json.loads(l) for l in (out / "scores.jsonl").read_text().splitlines()]
    rec = records[-1]
    meta_paths = (out / "operators").glob("gen_*/op_*.meta.json")
    src = None
    for meta_path in meta_paths:
        if json.loads(meta_path.read_text())["id"] == rec["operator"]:
            src = meta_path.with_suffix("").with_suffix(".src").read_text()
    assert src is not None
    artifact = sb.OperatorArtifact(id=rec["operator"], source=src, origin="init")
    instance = suite.instances[0]
    worker = sb.WorkerSpec(command=config["worker"]["command"])
    ps, _front, info = sb.evaluate_operator(
        artifact,
        instance,
        worker,
        population_size=config["evolution"]["population_size"],
        generations=config["evolution"]["generations"],
        seed=derive_seed(config["seed"], artifact.id, instance.id),
    )
    assert info["status"] == "ok"
    assert ps == pytest.approx(rec["per_problem"][instance.id], abs=1e-12)


def test_evolve_rerun_is_byte_identical(run_setup):
    cfg = str(run_setup / "config.json")
    cli.main(["evolve", "--config", cfg, "--out", str(run_setup / "run-a")])
    cli.main(["evolve", "--config", cfg, "--out", str(run_setup / "run-b")])
    conv_a = (run_setup / "run-a" / "convergence.csv").read_bytes()
    conv_b = (run_setup / "run-b" / "convergence.csv").read_bytes()
    assert conv_a == conv_b
    scores_a = (run_setup / "run-a" / "scores.jsonl").read_bytes()
    scores_b = (run_setup / "run-b" / "scores.jsonl").read_bytes()
    assert scores_a == scores_b


def test_evolve_refuses_nonempty_out(run_setup, capsys):
    out = run_setup / "run"
    out.mkdir()
    (out / "junk.txt").write_text("x")
    assert cli.main(["evolve", "--config", str(run_setup / "config.json"), "--out", str(out)]) == 2
    assert "not empty" in capsys.readouterr().err


def test_evolve_initialization_abort_exits_4(tmp_path, capsys):
    write_mock_fixtures(
        tmp_path / "fixtures",
        initialization=["no code at all", "still none"],
    )
    cli.save_suite(small_mokp_suite(), tmp_path / "suite")
    write_config(tmp_path / "config.json")
    code = cli.main(
        ["evolve", "--config", str(tmp_path / "config.json"), "--out", str(tmp_path / "run")]
    )
    assert code == 4
    assert capsys.readouterr().err.startswith("error[aborted]:")
    events = (tmp_path / "run" / "events.jsonl").read_text()
    assert "aborted" in events


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def test_report_recomputes_convergence(run_setup, capsys):
    out = run_setup / "run"
    cli.main(["evolve", "--config", str(run_setup / "config.json"), "--out", str(out)])
    assert cli.main(["report", "--run", str(out)]) == 0
    report_conv = (out / "report" / "convergence.csv").read_bytes()
    assert report_conv == (out / "convergence.csv").read_bytes()

    inst_csvs = list((out / "report" / "instances").glob("*.csv"))
    assert len(inst_csvs) == 1
    rows = inst_csvs[0].read_text().splitlines()
    assert len(rows) == 1 + 3  # header + g_ev + 1
    values = [float(r.split(",")[1]) for r in rows[1:]]
    assert all(b >= a for a, b in zip(values, values[1:]))

    first = (out / "report" / "convergence.csv").read_bytes()
    cli.main(["report", "--run", str(out)])
    assert (out / "report" / "convergence.csv").read_bytes() == first


def test_report_needs_run_directory(tmp_path, capsys):
    assert cli.main(["report", "--run", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error[config]:")


# ---------------------------------------------------------------------------
# metric tables: eval-operator and baseline
# ---------------------------------------------------------------------------


def test_eval_operator_writes_matrix(tmp_path, stub_worker_cmd, capsys):
    cli.save_suite(small_mokp_suite(n_instances=2), tmp_path / "suite")
    op_file = tmp_path / "my_operator.py"
    op_file.write_text(ops.VALID_OPERATOR)
    code = cli.main(
        [
            "eval-operator",
            "--operator-file", str(op_file),
            "--suite", str(tmp_path / "suite"),
            "--seeds", "2",
            "--population", "10",
            "--generations", "2",
            "--worker-cmd", *stub_worker_cmd,
            "--out", str(tmp_path / "table"),
        ]
    )
    assert code == 0
    assert "metric:" in capsys.readouterr().out
    rows = (tmp_path / "table" / "scores.csv").read_text().splitlines()
    assert rows[0] == "instance,seed_0,seed_1,mean,best_seed"
    assert len(rows) == 3  # header + one row per instance
    for row in rows[1:]:
        cells = row.split(",")
        values = list(map(float, cells[1:4]))
        assert all(np.isfinite(values))
        assert int(cells[4]) in (0, 1)
    assert (tmp_path / "table" / "scores.txt").is_file()


def test_baseline_writes_matrix(tmp_path, capsys):
    suite = P.SuiteSpec(
        category=P.CMOP,
        role="validation",
        instances=[P.make_cmop("zdt1", n_var=10, instance_id="zdt1-small")],
    )
    cli.save_suite(suite, tmp_path / "suite")
    code = cli.main(
        [
            "baseline",
            "--suite", str(tmp_path / "suite"),
            "--seeds", "2",
            "--population", "20",
            "--generations", "5",
            "--out", str(tmp_path / "table"),
        ]
    )
    assert code == 0
    rows = (tmp_path / "table" / "scores.csv").read_text().splitlines()
    assert len(rows) == 2
    cells = rows[1].split(",")
    assert cells[0] == "zdt1-small"
    igd_values = list(map(float, cells[1:3]))
    assert all(v > 0 for v in igd_values)
    assert "igd" in capsys.readouterr().out


def test_metric_table_best_direction(tmp_path):
    matrix = np.array([[0.2, 0.1]])
    cli.write_metric_table(tmp_path / "cmop", P.CMOP, ["a"], matrix)
    assert (tmp_path / "cmop" / "scores.csv").read_text().splitlines()[1].endswith(",1")
    cli.write_metric_table(tmp_path / "motsp", P.MOTSP, ["a"], matrix)
    assert (tmp_path / "motsp" / "scores.csv").read_text().splitlines()[1].endswith(",0")

    text = cli.write_metric_table(tmp_path / "nan", P.CMOP, ["a"], np.array([[np.nan, np.nan]]))
    assert (tmp_path / "nan" / "scores.csv").read_text().splitlines()[1].endswith(",-1")
    assert text.splitlines()[-1].rstrip().endswith("-")
