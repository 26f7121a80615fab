"""Isolated execution of candidate operators: pilot runs, repair, scoring.

A candidate operator is a piece of Python source defining `next_generation`.
It never runs inside this process: a worker subprocess hosts it and speaks a
line-delimited JSON protocol over stdin/stdout (load → ready/error,
step → offspring/error, shutdown). This module owns the orchestrator side:

- pilot_run: a quick miniature evolution on toy problems under a wall-clock
  budget; any error is captured as text, a budget overrun kills the worker
  process tree and reports an *empty* error (the "unknown failure" branch).
- repair_loop: up to N_trial rounds of pilot → error-driven LLM repair.
- evaluate_operator: the full scored evaluation on one instance; every
  failure mode maps to PS = 0 for that instance rather than an exception.

The orchestrator evaluates objectives and performs survival selection
(nondominated sorting + crowding); the worker only produces offspring.
"""

from __future__ import annotations

import json
import os
import queue
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import llm
from . import problems as pb
from .baseline import nds_survival, rand_weight_repair
from .metrics import FrontApproximation, score_front
from .util import derive_seed

STDERR_CAP = 20000
PILOT_POPULATION = 20
PILOT_GENERATIONS = 5


class WorkerLaunchError(RuntimeError):
    """The worker command could not be started (configuration problem)."""


class ProtocolError(RuntimeError):
    """The worker sent something outside the wire protocol."""


class WorkerTimeoutError(RuntimeError):
    """The worker did not answer within its time budget."""


class OperatorStepError(RuntimeError):
    """The worker reported a structured load/step error for the operator."""


@dataclass(frozen=True)
class OperatorArtifact:
    id: str
    source: str
    origin: str  # "init" | "crossover" | "mutation" | "repair"
    parents: tuple[str, ...] = ()
    created_generation: int = 0

    def __post_init__(self):
        if not self.source:
            raise ValueError("operator source must be nonempty")
        if self.origin not in ("init", "crossover", "mutation", "repair"):
            raise ValueError(f"unknown origin {self.origin!r}")
        object.__setattr__(self, "parents", tuple(self.parents))


@dataclass(frozen=True)
class PilotOutcome:
    state: bool
    error: str
    elapsed: float

    def __post_init__(self):
        if self.state and self.error:
            raise ValueError("a passing pilot cannot carry an error")


@dataclass
class WorkerSpec:
    """How to launch and time-limit operator workers."""

    command: list[str]
    call_timeout: float = 10.0  # per step message during full evaluation
    max_t: float = 2000.0  # aggregate pilot wall-clock budget

    def __post_init__(self):
        if self.max_t <= 0:
            raise ValueError("max_t must be positive")
        if not self.command:
            raise ValueError("worker command must be nonempty")


def worker_meta(instance: pb.ProblemInstance) -> dict:
    """The problem_meta payload shipped to the worker on load."""
    meta = {
        "category": instance.category,
        "encoding": instance.encoding,
        "n_var": instance.n_var,
        "k": instance.k,
    }
    if instance.encoding == pb.REAL:
        meta["lower"] = instance.lower.tolist()
        meta["upper"] = instance.upper.tolist()
    if instance.category == pb.MOKP:
        meta["weights"] = instance.weights.tolist()
        meta["capacity"] = instance.capacity
    if instance.category == pb.MOTSP:
        meta["closed_tour"] = instance.closed_tour
    return meta


class WorkerClient:
    """One worker subprocess with line-JSON messaging and hard kill."""

    def __init__(self, command: list[str]):
        try:
            self.proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
                start_new_session=True,  # own process group, killable as a tree
            )
        except OSError as exc:
            raise WorkerLaunchError(f"cannot launch worker {command!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._stderr_chunks: list[str] = []
        self._stderr_len = 0
        self._reader = threading.Thread(target=self._pump_stdout, daemon=True)
        self._errder = threading.Thread(target=self._pump_stderr, daemon=True)
        self._reader.start()
        self._errder.start()

    def _pump_stdout(self):
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        except ValueError:
            pass
        finally:
            self._lines.put(None)

    def _pump_stderr(self):
        try:
            for line in self.proc.stderr:
                if self._stderr_len < STDERR_CAP:
                    self._stderr_chunks.append(line[: STDERR_CAP - self._stderr_len])
                    self._stderr_len += len(line)
        except ValueError:
            pass

    def stderr_text(self) -> str:
        return "".join(self._stderr_chunks)

    def send(self, message: dict) -> None:
        try:
            self.proc.stdin.write(json.dumps(message) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise ProtocolError(f"worker stdin closed: {exc}") from exc

    def recv(self, timeout: float) -> dict:
        if timeout <= 0:
            raise WorkerTimeoutError("time budget exhausted before reply")
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise WorkerTimeoutError(f"no reply within {timeout:.3f}s") from None
        if line is None:
            raise ProtocolError("worker closed its stdout")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"non-JSON line from worker: {line[:200]!r}") from exc
        if not isinstance(msg, dict) or "type" not in msg:
            raise ProtocolError(f"malformed message from worker: {line[:200]!r}")
        return msg

    def kill(self) -> None:
        """SIGKILL the whole process group and reap the worker."""
        if self.proc.poll() is None:
            try:
                os.killpg(os.getpgid(self.proc.pid), signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            pass
        for stream in (self.proc.stdin, self.proc.stdout, self.proc.stderr):
            try:
                stream.close()
            except OSError:
                pass
        self._reader.join(timeout=1)
        self._errder.join(timeout=1)

    def shutdown(self) -> None:
        try:
            self.send({"type": "shutdown"})
        except ProtocolError:
            pass
        self.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.kill()
        return False


# ---------------------------------------------------------------------------
# Toy battery
# ---------------------------------------------------------------------------


def toy_suite(category: str, seed: int = 0) -> pb.SuiteSpec:
    """The pilot battery: one small instance of the run's category."""
    rng = np.random.default_rng(seed)
    if category == pb.CMOP:
        instances = [pb.make_cmop("zdt1", n_var=10, instance_id="toy-zdt1")]
    elif category == pb.MOKP:
        instances = [pb.generate_mokp(20, 2, rng, instance_id="toy-mokp")]
    elif category == pb.MOTSP:
        instances = [pb.generate_motsp(10, 2, rng, instance_id="toy-motsp")]
    else:
        raise ValueError(f"unknown category {category!r}")
    return pb.SuiteSpec(category=category, role="validation", instances=instances)


# ---------------------------------------------------------------------------
# Orchestrated operator session
# ---------------------------------------------------------------------------


def _parse_offspring(instance: pb.ProblemInstance, msg: dict, expected: int) -> np.ndarray:
    genomes = msg.get("genomes")
    if not isinstance(genomes, list) or len(genomes) != expected:
        got = len(genomes) if isinstance(genomes, list) else type(genomes).__name__
        raise ProtocolError(f"expected {expected} offspring genomes, got {got}")
    rows = []
    for g in genomes:
        try:
            rows.append(pb.validate_genome(instance, np.asarray(g)))
        except (pb.EncodingMismatchError, ValueError, TypeError) as exc:
            raise ProtocolError(f"malformed offspring genome: {exc}") from exc
    return np.stack(rows)


def _step_error_text(msg: dict, client: WorkerClient) -> str:
    text = str(msg.get("message", "")) or "worker error"
    tb = msg.get("traceback")
    if tb:
        text = f"{text}\n{tb}"
    stderr = client.stderr_text()
    if stderr:
        text = f"{text}\nstderr:\n{stderr}"
    return text[: STDERR_CAP + 4000]


def _run_session(
    client: WorkerClient,
    artifact: OperatorArtifact,
    instance: pb.ProblemInstance,
    population_size: int,
    generations: int,
    seed: int,
    call_timeout: float | None,
    deadline: float | None,
    on_generation=None,
) -> np.ndarray:
    """Drive one load + full generation loop; returns final native objectives.

    Raises WorkerTimeoutError / ProtocolError / OperatorStepError: the caller
    translates those into its own failure contract.
    """

    def budget() -> float:
        limits = [call_timeout] if call_timeout is not None else []
        if deadline is not None:
            limits.append(deadline - time.monotonic())
        if not limits:
            raise ValueError("either call_timeout or deadline is required")
        return min(limits)

    client.send(
        {"type": "load", "operator_source": artifact.source, "problem_meta": worker_meta(instance)}
    )
    reply = client.recv(budget())
    if reply["type"] == "error":
        raise OperatorStepError(_step_error_text(reply, client))
    if reply["type"] != "ready":
        raise ProtocolError(f"expected ready, got {reply['type']!r}")

    rng = np.random.default_rng(derive_seed(seed, instance.id, "population"))
    X = []
    for _ in range(population_size):
        g = pb.random_genome(instance, rng)
        if instance.category == pb.MOKP:
            g = rand_weight_repair(instance, g, rng)
        X.append(g)
    X = np.stack(X)
    F = pb.evaluate_batch(instance, X)

    for gen in range(generations):
        step_seed = derive_seed(seed, instance.id, "step", gen)
        client.send(
            {
                "type": "step",
                "seed": step_seed,
                "parents": X.tolist(),
                "parent_objectives": F.tolist(),
            }
        )
        reply = client.recv(budget())
        if reply["type"] == "error":
            raise OperatorStepError(_step_error_text(reply, client))
        if reply["type"] != "offspring":
            raise ProtocolError(f"expected offspring, got {reply['type']!r}")
        KX = _parse_offspring(instance, reply, len(X))
        if instance.category == pb.MOKP:
            KX = np.stack([rand_weight_repair(instance, g, rng) for g in KX])
        KF = pb.evaluate_batch(instance, KX)
        MX = np.concatenate([X, KX])
        MF = np.concatenate([F, KF])
        MF_min = -MF if instance.orientation == "maximize" else MF
        keep = nds_survival(MF_min, population_size)
        X, F = MX[keep], MF[keep]
        if on_generation is not None:
            on_generation(gen, X, F)
    return F


# ---------------------------------------------------------------------------
# Pilot run (Alg.-5 inner test)
# ---------------------------------------------------------------------------


def pilot_run(
    artifact: OperatorArtifact, toy_problems: pb.SuiteSpec, spec: WorkerSpec
) -> PilotOutcome:
    """Miniature evolution on each toy problem under the MaxT wall clock."""
    if len(toy_problems) == 0:
        raise ValueError("toy battery must be nonempty")
    start = time.monotonic()
    deadline = start + spec.max_t
    for instance in toy_problems:
        client = WorkerClient(spec.command)
        try:
            _run_session(
                client,
                artifact,
                instance,
                population_size=PILOT_POPULATION,
                generations=PILOT_GENERATIONS,
                seed=derive_seed("pilot", artifact.id, instance.id),
                call_timeout=None,
                deadline=deadline,
            )
        except WorkerTimeoutError:
            return PilotOutcome(state=False, error="", elapsed=time.monotonic() - start)
        except (OperatorStepError, ProtocolError) as exc:
            return PilotOutcome(state=False, error=str(exc), elapsed=time.monotonic() - start)
        finally:
            client.kill()
    return PilotOutcome(state=True, error="", elapsed=time.monotonic() - start)


# ---------------------------------------------------------------------------
# Repair loop (Alg. 5)
# ---------------------------------------------------------------------------


@dataclass
class RepairResult:
    artifact: OperatorArtifact | None
    pilots: int = 0
    repair_calls: int = 0
    events: list[dict] = field(default_factory=list)
    created: list[OperatorArtifact] = field(default_factory=list)  # full repair chain

    @property
    def success(self) -> bool:
        return self.artifact is not None


def repair_loop(
    artifact: OperatorArtifact,
    toy_problems: pb.SuiteSpec,
    spec: WorkerSpec,
    backend,
    n_trial: int,
    ctx: llm.PromptContext | None = None,
    transcript: llm.ChatTranscript | None = None,
) -> RepairResult:
    """Validate-or-repair per the bounded trial loop.

    Each trial pilots the current candidate; a pass returns it, a captured
    error triggers one LLM repair, and an *empty* error (timeout/unknown)
    fails immediately with no repair. A failed repair call (backend or
    extraction) consumes the trial and its diagnostic becomes the next
    error, without re-piloting the unchanged candidate.
    """
    if n_trial < 1:
        raise ValueError("n_trial must be >= 1")
    ctx = ctx or llm.PromptContext.for_category(
        toy_problems.category, toy_problems.instances[0].encoding
    )
    result = RepairResult(artifact=None)
    current = artifact
    pending_error: str | None = None
    repairs = 0
    for _ in range(n_trial):
        if pending_error is None:
            outcome = pilot_run(current, toy_problems, spec)
            result.pilots += 1
            result.events.append(
                {
                    "event": "pilot",
                    "operator": current.id,
                    "state": outcome.state,
                    "elapsed": outcome.elapsed,
                    "error": outcome.error[:500],
                }
            )
            if outcome.state:
                result.artifact = current
                return result
            if not outcome.error:
                return result  # timeout / unknown failure: no repair possible
            error_text = outcome.error
        else:
            error_text, pending_error = pending_error, None

        ctx.error_text = error_text
        result.repair_calls += 1
        repairs += 1
        try:
            transcript = llm.render_repair(ctx, transcript)
            response = llm.complete(transcript, backend)
            transcript.append("assistant", response)
            source = llm.extract_operator(response)
            current = OperatorArtifact(
                id=f"{artifact.id}.r{repairs}",
                source=source,
                origin="repair",
                parents=(current.id,),
                created_generation=current.created_generation,
            )
            result.created.append(current)
            result.events.append(
                {"event": "repair", "operator": current.id, "parent": current.parents[0]}
            )
        except (llm.BackendError, llm.ExtractionError, llm.RenderError) as exc:
            pending_error = f"{type(exc).__name__}: {exc}"
            result.events.append({"event": "repair_failed", "diagnostic": pending_error[:500]})
    return result


# ---------------------------------------------------------------------------
# Full scored evaluation
# ---------------------------------------------------------------------------


def evaluate_operator(
    artifact: OperatorArtifact,
    instance: pb.ProblemInstance,
    spec: WorkerSpec,
    population_size: int,
    generations: int,
    seed: int,
    on_generation=None,
):
    """PS value and front for one (operator, instance) pair.

    Never raises for operator misbehavior: crashes, timeouts, and protocol
    violations all yield PS = 0 with the reason recorded.
    """
    start = time.monotonic()
    client = WorkerClient(spec.command)
    try:
        F = _run_session(
            client,
            artifact,
            instance,
            population_size=population_size,
            generations=generations,
            seed=seed,
            call_timeout=spec.call_timeout,
            deadline=None,
            on_generation=on_generation,
        )
    except (WorkerTimeoutError, ProtocolError, OperatorStepError) as exc:
        info = {
            "status": "failed",
            "reason": f"{type(exc).__name__}: {exc}"[:2000],
            "elapsed": time.monotonic() - start,
        }
        return 0.0, None, info
    finally:
        client.kill()
    front = FrontApproximation.from_objectives(instance, F)
    ps = score_front(instance, front)
    return ps, front, {"status": "ok", "reason": None, "elapsed": time.monotonic() - start}
