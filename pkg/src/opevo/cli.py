"""Command-line interface: runs, persistence, and report generation.

Subcommands:
  gen-instances  write a benchmark suite directory
  evolve         run the operator-evolution loop from a JSON config
  eval-operator  score a stored operator source over a suite with many seeds
  baseline       same table for the reference NSGA-II solver
  report         derive convergence CSVs from a finished run directory

Exit codes: 0 success, 1 usage, 2 config, 3 backend, 4 run aborted.
Every error path prints a single line `error[<kind>]: <reason>` to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
from pathlib import Path

import numpy as np

from . import baseline as bl
from . import evolution as ev
from . import llm
from . import metrics as mt
from . import problems as pb
from . import sandbox as sb
from .util import derive_seed

SCHEMA_VERSION = 1
DEFAULT_WORKER_COMMAND = [sys.executable, "-m", "opevo_worker"]
DEFAULT_API_KEY_ENV = "OPEVO_API_KEY"

_EXIT_CODES = {"usage": 1, "config": 2, "backend": 3, "aborted": 4}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.code = _EXIT_CODES[kind]


# ---------------------------------------------------------------------------
# Suite directories
# ---------------------------------------------------------------------------


def save_suite(suite: pb.SuiteSpec, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = {
        "category": suite.category,
        "role": suite.role,
        "instances": [inst.id for inst in suite.instances],
    }
    (out / "suite.json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    for inst in suite.instances:
        pb.save_instance(inst, out / f"{inst.id}.json")
    return out


def load_suite(path: str | Path) -> pb.SuiteSpec:
    root = Path(path)
    header_path = root / "suite.json"
    if not header_path.is_file():
        raise CliError("config", f"suite directory {root} has no suite.json")
    header = json.loads(header_path.read_text())
    instances = [pb.load_instance(root / f"{iid}.json") for iid in header["instances"]]
    return pb.SuiteSpec(category=header["category"], role=header["role"], instances=instances)


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise CliError("config", f"{path}: unknown keys {unknown}")


def load_config(path: str | Path) -> dict:
    """Parse and schema-check a run config; diagnostics carry the location."""
    p = Path(path)
    if not p.is_file():
        raise CliError("config", f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(
            "config", f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise CliError("config", f"{p}: top level must be an object")
    _check_keys(
        raw,
        {"schema_version", "category", "seed", "evolution", "backend", "worker", "suite", "out"},
        "config",
    )
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise CliError(
            "config", f"schema_version: expected {SCHEMA_VERSION}, got {raw.get('schema_version')!r}"
        )
    for key in ("category", "backend", "suite"):
        if key not in raw:
            raise CliError("config", f"config: missing required key {key!r}")
    raw.setdefault("seed", 0)
    raw.setdefault("evolution", {})
    raw.setdefault("worker", {})
    raw["_base_dir"] = str(p.resolve().parent)
    return raw


def build_evolution_config(raw: dict) -> ev.EvolutionConfig:
    section = raw["evolution"]
    allowed = {
        "n_ev",
        "g_ev",
        "n_max",
        "temperature",
        "max_t",
        "n_trial",
        "population_size",
        "generations",
        "max_attempts",
        "eval_workers",
    }
    _check_keys(section, allowed, "evolution")
    try:
        return ev.EvolutionConfig(category=raw["category"], seed=raw["seed"], **section)
    except (TypeError, ValueError) as exc:
        raise CliError("config", f"evolution: {exc}") from exc


def build_worker_spec(raw: dict, evo: ev.EvolutionConfig) -> sb.WorkerSpec:
    section = raw["worker"]
    _check_keys(section, {"command", "call_timeout"}, "worker")
    command = section.get("command", DEFAULT_WORKER_COMMAND)
    if not isinstance(command, list) or not all(isinstance(c, str) for c in command):
        raise CliError("config", "worker.command: must be a list of strings")
    try:
        return sb.WorkerSpec(
            command=list(command),
            call_timeout=float(section.get("call_timeout", 10.0)),
            max_t=evo.max_t,
        )
    except ValueError as exc:
        raise CliError("config", f"worker: {exc}") from exc


def build_backend(raw: dict):
    section = raw["backend"]
    kind = section.get("kind")
    if kind == "mock":
        _check_keys(section, {"kind", "fixture_dir"}, "backend")
        if "fixture_dir" not in section:
            raise CliError("config", "backend: mock backend needs fixture_dir")
        fixture_dir = Path(raw["_base_dir"]) / section["fixture_dir"]
        if not fixture_dir.is_dir():
            raise CliError("config", f"backend.fixture_dir: no such directory {fixture_dir}")
        return llm.MockBackend(fixture_dir)
    if kind == "http":
        _check_keys(
            section,
            {"kind", "endpoint_url", "model", "api_key_env", "timeout", "max_retries"},
            "backend",
        )
        for key in ("endpoint_url", "model"):
            if key not in section:
                raise CliError("config", f"backend: http backend needs {key!r}")
        env_name = section.get("api_key_env", DEFAULT_API_KEY_ENV)
        api_key = os.environ.get(env_name)
        if not api_key:
            raise CliError("backend", f"missing API key: environment variable {env_name} is unset")
        return llm.HttpChatBackend(
            endpoint_url=section["endpoint_url"],
            model=section["model"],
            api_key=api_key,
            timeout=float(section.get("timeout", 60.0)),
            max_retries=int(section.get("max_retries", 2)),
        )
    raise CliError("config", f"backend.kind: expected 'mock' or 'http', got {kind!r}")


def build_suite(raw: dict) -> pb.SuiteSpec:
    section = raw["suite"]
    _check_keys(section, {"path", "role", "seed"}, "suite")
    if "path" in section:
        suite = load_suite(Path(raw["_base_dir"]) / section["path"])
    else:
        role = section.get("role", "validation")
        suite = pb.make_suite(raw["category"], role, np.random.default_rng(section.get("seed", 0)))
    if suite.category != raw["category"]:
        raise CliError(
            "config", f"suite: category {suite.category!r} does not match config {raw['category']!r}"
        )
    return suite


# ---------------------------------------------------------------------------
# Run persistence
# ---------------------------------------------------------------------------


class RunWriter:
    """Serialized writer for one run directory (the recorder protocol)."""

    def __init__(self, out_dir: str | Path, config_snapshot: dict, suite: pb.SuiteSpec):
        self.out = Path(out_dir)
        if self.out.exists() and any(self.out.iterdir()):
            raise CliError("config", f"output directory {self.out} already exists and is not empty")
        self.out.mkdir(parents=True, exist_ok=True)
        snapshot = dict(config_snapshot)
        snapshot.pop("_base_dir", None)
        snapshot["run_id"] = self.out.name
        (self.out / "config.json").write_text(
            json.dumps(snapshot, indent=2, sort_keys=True) + "\n"
        )
        save_suite(suite, self.out / "suite")
        (self.out / "operators").mkdir()
        self._lock = threading.Lock()
        self._scores = open(self.out / "scores.jsonl", "w", encoding="utf-8")
        self._events = open(self.out / "events.jsonl", "w", encoding="utf-8")
        self._counters: dict[int, int] = {}

    def on_artifact(self, generation: int, artifact: sb.OperatorArtifact, scored: bool) -> None:
        with self._lock:
            index = self._counters.get(generation, 0)
            self._counters[generation] = index + 1
            gen_dir = self.out / "operators" / f"gen_{generation:02d}"
            gen_dir.mkdir(exist_ok=True)
            stem = f"op_{index:02d}"
            (gen_dir / f"{stem}.src").write_text(artifact.source + "\n")
            meta = {
                "id": artifact.id,
                "origin": artifact.origin,
                "parents": list(artifact.parents),
                "created_generation": artifact.created_generation,
                "scored": scored,
            }
            (gen_dir / f"{stem}.meta.json").write_text(
                json.dumps(meta, indent=2, sort_keys=True) + "\n"
            )

    def on_score(self, generation: int, artifact_id: str, report: mt.ScoreReport) -> None:
        record = {
            "generation": generation,
            "operator": artifact_id,
            "per_problem": {k: float(v) for k, v in report.per_problem.items()},
            "aggregate": float(report.aggregate),
        }
        with self._lock:
            self._scores.write(json.dumps(record, sort_keys=True) + "\n")
            self._scores.flush()

    def on_event(self, payload: dict) -> None:
        with self._lock:
            self._events.write(json.dumps(payload, sort_keys=True, default=str) + "\n")
            self._events.flush()

    def finalize(self, trace: list[float]) -> None:
        with self._lock:
            write_convergence_csv(self.out / "convergence.csv", trace)
            self._scores.close()
            self._events.close()


def write_convergence_csv(path: Path, trace: list[float]) -> None:
    lines = ["generation,best_score"]
    lines += [f"{g},{float(score)!r}" for g, score in enumerate(trace)]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Metric tables (rows = instances, columns = seeds)
# ---------------------------------------------------------------------------

_METRIC_LABELS = {
    pb.CMOP: "igd (lower is better)",
    pb.MOKP: "hv of the unattained region (lower is better)",
    pb.MOTSP: "hv (higher is better)",
}


def _best_index(values: list[float], category: str) -> int:
    arr = np.asarray(values, dtype=float)
    finite = np.isfinite(arr)
    if not finite.any():
        return -1
    if category == pb.MOTSP:  # the only higher-is-better table metric
        arr = np.where(finite, arr, -np.inf)
        return int(np.argmax(arr))
    arr = np.where(finite, arr, np.inf)
    return int(np.argmin(arr))


def write_metric_table(
    out_dir: Path, category: str, instance_ids: list[str], matrix: np.ndarray
) -> str:
    """Persist scores.csv / scores.txt; returns the text rendering."""
    out_dir.mkdir(parents=True, exist_ok=True)
    n_seeds = matrix.shape[1]
    header = ["instance"] + [f"seed_{s}" for s in range(n_seeds)] + ["mean", "best_seed"]
    csv_lines = [",".join(header)]
    width = max([len(i) for i in instance_ids] + [8])
    txt_lines = [f"metric: {_METRIC_LABELS[category]}"]
    txt_lines.append(
        " ".join([f"{'instance':<{width}}"] + [f"{f'seed_{s}':>12}" for s in range(n_seeds)] + [f"{'mean':>12}", "best"])
    )
    for iid, row in zip(instance_ids, matrix):
        mean = float(np.mean(row)) if np.isfinite(row).all() else float("nan")
        best = _best_index(list(row), category)
        csv_lines.append(
            ",".join([iid] + [f"{float(v)!r}" for v in row] + [f"{mean!r}", str(best)])
        )
        txt_lines.append(
            " ".join(
                [f"{iid:<{width}}"]
                + [f"{v:>12.6g}" for v in row]
                + [f"{mean:>12.6g}", f"seed_{best}" if best >= 0 else "-"]
            )
        )
    (out_dir / "scores.csv").write_text("\n".join(csv_lines) + "\n")
    text = "\n".join(txt_lines) + "\n"
    (out_dir / "scores.txt").write_text(text)
    return text


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen_instances(args) -> None:
    if args.category not in pb.CATEGORIES:
        raise CliError("usage", f"unknown category {args.category!r}")
    suite = pb.make_suite(args.category, args.role, np.random.default_rng(args.seed))
    out = save_suite(suite, args.out)
    print(f"wrote {len(suite)} {args.category} {args.role} instances to {out}")


def cmd_evolve(args) -> None:
    raw = load_config(args.config)
    evo = build_evolution_config(raw)
    worker = build_worker_spec(raw, evo)
    backend = build_backend(raw)
    suite = build_suite(raw)
    out = args.out or raw.get("out")
    if not out:
        raise CliError("config", "no output directory: pass --out or set 'out' in the config")
    out = Path(raw["_base_dir"]) / out if not Path(out).is_absolute() else Path(out)
    writer = RunWriter(out, raw, suite)
    try:
        result = ev.evolve(evo, suite, backend, worker, recorder=writer)
    except ev.InitializationError as exc:
        writer.on_event({"event": "aborted", "reason": str(exc)})
        writer.finalize([])
        raise CliError("aborted", str(exc)) from exc
    writer.finalize(result.trace)
    print(
        f"run complete: best={result.best.artifact.id} "
        f"score={result.best.score!r} dir={out}"
    )


def _metric_cell(instance: pb.ProblemInstance, front) -> float:
    if front is None:
        return float("nan")
    return mt.front_metric(instance, front)


def cmd_eval_operator(args) -> None:
    source_path = Path(args.operator_file)
    if not source_path.is_file():
        raise CliError("config", f"operator file not found: {source_path}")
    source = source_path.read_text()
    artifact = sb.OperatorArtifact(id=source_path.stem, source=source, origin="init")
    suite = load_suite(args.suite)
    worker = sb.WorkerSpec(command=args.worker_cmd or DEFAULT_WORKER_COMMAND)
    matrix = np.full((len(suite), args.seeds), np.nan)
    for i, instance in enumerate(suite.instances):
        for s in range(args.seeds):
            seed = derive_seed(s, artifact.id, instance.id)
            _ps, front, _info = sb.evaluate_operator(
                artifact,
                instance,
                worker,
                population_size=args.population,
                generations=args.generations,
                seed=seed,
            )
            matrix[i, s] = _metric_cell(instance, front)
    text = write_metric_table(
        Path(args.out), suite.category, [i.id for i in suite.instances], matrix
    )
    print(text, end="")


def cmd_baseline(args) -> None:
    if args.algorithm != "nsga2":
        raise CliError("usage", f"unknown algorithm {args.algorithm!r}")
    suite = load_suite(args.suite)
    solver = bl.SolverConfig(population_size=args.population, generations=args.generations)
    matrix = np.full((len(suite), args.seeds), np.nan)
    for i, instance in enumerate(suite.instances):
        for s in range(args.seeds):
            rng = np.random.default_rng(derive_seed(s, "nsga2", instance.id))
            front, _trace = bl.nsga2_run(instance, solver, rng)
            matrix[i, s] = mt.front_metric(instance, front)
    text = write_metric_table(
        Path(args.out), suite.category, [i.id for i in suite.instances], matrix
    )
    print(text, end="")


def cmd_report(args) -> None:
    run_dir = Path(args.run)
    scores_path = run_dir / "scores.jsonl"
    if not scores_path.is_file():
        raise CliError("config", f"{run_dir} is not a run directory (no scores.jsonl)")
    records = [json.loads(line) for line in scores_path.read_text().splitlines() if line]
    if not records:
        raise CliError("config", f"{scores_path} holds no evaluations")
    out = run_dir / "report"
    out.mkdir(exist_ok=True)
    last_gen = max(r["generation"] for r in records)

    best_by_gen: list[float] = []
    running = -np.inf
    for g in range(last_gen + 1):
        here = [r["aggregate"] for r in records if r["generation"] == g]
        running = max([running] + here)
        best_by_gen.append(running)
    write_convergence_csv(out / "convergence.csv", best_by_gen)

    instance_ids = sorted({iid for r in records for iid in r["per_problem"]})
    inst_dir = out / "instances"
    inst_dir.mkdir(exist_ok=True)
    for iid in instance_ids:
        running = -np.inf
        rows = []
        for g in range(last_gen + 1):
            here = [r["per_problem"][iid] for r in records if r["generation"] == g and iid in r["per_problem"]]
            running = max([running] + here)
            rows.append(running)
        write_convergence_csv(inst_dir / f"{iid}.csv", rows)
    print(f"report written to {out} ({last_gen + 1} generations, {len(instance_ids)} instances)")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise CliError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opevo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-instances", help="write a benchmark suite directory")
    p.add_argument("--category", required=True)
    p.add_argument("--role", choices=("validation", "testing"), default="validation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_instances)

    p = sub.add_parser("evolve", help="run operator evolution from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="run directory (overrides config 'out')")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("eval-operator", help="score a stored operator over a suite")
    p.add_argument("--operator-file", required=True)
    p.add_argument("--suite", required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--worker-cmd", nargs="+", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_operator)

    p = sub.add_parser("baseline", help="score the reference solver over a suite")
    p.add_argument("--algorithm", default="nsga2")
    p.add_argument("--suite", required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="emit convergence CSVs for a run directory")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except CliError as err:
        print(f"error[{err.kind}]: {err}", file=sys.stderr)
        return err.code
    except llm.BackendError as err:
        print(f"error[backend]: {err}", file=sys.stderr)
        return _EXIT_CODES["backend"]


if __name__ == "__main__":
    sys.exit(main())
