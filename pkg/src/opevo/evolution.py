"""The outer loop that evolves operator programs with an LLM.

A population of N_ev validated operator candidates is kept under elitist
selection. Each generation performs N_ev iterations of: softmax parent
selection over scores, LLM crossover of the selected parents' sources, an
occasional LLM mutation (probability 1/N_ev), validation/repair in the
sandbox, full scored evaluation on the validation suite, and an elitist
population update. Every LLM-facing chain is attempt-capped with logged
fallbacks so a misbehaving backend can never hang a run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import llm
from . import problems as pb
from .metrics import ScoreReport
from .sandbox import OperatorArtifact, RepairResult, WorkerSpec, evaluate_operator, repair_loop, toy_suite
from .util import derive_seed

PROBABILITY_FLOOR = 1e-6


class InitializationError(RuntimeError):
    """A population slot could not be filled within the attempt cap."""


@dataclass
class OperatorCandidate:
    artifact: OperatorArtifact
    score_report: ScoreReport
    generation_admitted: int

    @property
    def score(self) -> float:
        return self.score_report.aggregate


@dataclass
class EvolutionConfig:
    category: str = pb.CMOP
    seed: int = 0
    n_ev: int = 10
    g_ev: int = 10
    n_max: int | None = None  # default floor(n_ev / 2), never below 2
    temperature: float = 0.5
    max_t: float = 2000.0
    n_trial: int = 2
    population_size: int = 100
    generations: int = 200
    max_attempts: int = 10
    eval_workers: int | None = None  # default: one per suite instance

    def __post_init__(self):
        if self.category not in pb.CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.n_ev < 2:
            raise ValueError("n_ev must be >= 2")
        if self.g_ev < 1:
            raise ValueError("g_ev must be >= 1")
        if self.n_max is None:
            self.n_max = max(2, self.n_ev // 2)
        if not 2 <= self.n_max <= self.n_ev:
            raise ValueError("n_max must satisfy 2 <= n_max <= n_ev")
        if self.n_trial < 1 or self.max_attempts < 1:
            raise ValueError("n_trial and max_attempts must be >= 1")
        if self.population_size < 4 or self.generations < 1:
            raise ValueError("inner evaluation budget is too small")


class NullRecorder:
    """Persistence no-op; the CLI provides a real writer with this shape."""

    def on_artifact(self, generation: int, artifact: OperatorArtifact, scored: bool) -> None:
        pass

    def on_score(self, generation: int, artifact_id: str, report: ScoreReport) -> None:
        pass

    def on_event(self, payload: dict) -> None:
        pass


# ---------------------------------------------------------------------------
# Selection (softmax over scores)
# ---------------------------------------------------------------------------


def selection_probabilities(scores) -> np.ndarray:
    """Softmax of the score vector, overflow-safe, floored away from zero."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("scores must be nonempty")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    weights = np.exp(s - s.max())
    weights = np.maximum(weights, PROBABILITY_FLOOR)
    return weights / weights.sum()


def sample_parents(population: list, probs, n_s: int, rng: np.random.Generator) -> list:
    """Draw n_s distinct members without replacement, renormalizing as we go."""
    if not 2 <= n_s <= len(population):
        raise ValueError(f"need 2 <= n_s <= {len(population)}, got {n_s}")
    p = np.asarray(probs, dtype=float).copy()
    if p.shape != (len(population),):
        raise ValueError("probability vector does not match the population")
    if np.any(p <= 0):
        raise ValueError("selection probabilities must be strictly positive")
    chosen: list[int] = []
    for _ in range(n_s):
        p_norm = p / p.sum()
        idx = int(rng.choice(len(population), p=p_norm))
        chosen.append(idx)
        p[idx] = 0.0
    return [population[i] for i in chosen]


# ---------------------------------------------------------------------------
# LLM-driven generation steps
# ---------------------------------------------------------------------------


def _generate_and_validate(
    render,
    make_artifact,
    ctx: llm.PromptContext,
    backend,
    worker: WorkerSpec,
    config: EvolutionConfig,
    battery: pb.SuiteSpec,
    recorder,
    generation: int,
) -> OperatorArtifact | None:
    """One render → complete → extract → repair chain. None on failure."""
    try:
        transcript = render(ctx)
        response = llm.complete(transcript, backend)
        transcript.append("assistant", response)
        source = llm.extract_operator(response)
    except (llm.RenderError, llm.ExtractionError, llm.BackendError) as exc:
        recorder.on_event(
            {"event": "generation_failed", "diagnostic": f"{type(exc).__name__}: {exc}"[:500]}
        )
        return None
    artifact = make_artifact(source)
    result: RepairResult = repair_loop(
        artifact, battery, worker, backend, config.n_trial, ctx=ctx, transcript=transcript
    )
    for event in result.events:
        recorder.on_event(dict(event, generation=generation))
    if not result.success:
        recorder.on_event({"event": "validation_failed", "operator": artifact.id})
        return None
    # Keep the persisted lineage graph closed: store the pre-repair original
    # and intermediate repairs; the caller stores the final artifact itself.
    for intermediate in [artifact, *result.created]:
        if intermediate.id != result.artifact.id:
            recorder.on_artifact(generation, intermediate, scored=False)
    return result.artifact


def initialize_population(
    config: EvolutionConfig,
    suite: pb.SuiteSpec,
    backend,
    worker: WorkerSpec,
    recorder=None,
) -> list[OperatorCandidate]:
    """Fill and score all N_ev slots, bounding the retry loop per slot."""
    recorder = recorder or NullRecorder()
    if len(suite) == 0:
        raise ValueError("validation suite must be nonempty")
    ctx = llm.PromptContext.for_category(
        config.category, suite.instances[0].encoding, temperature=config.temperature
    )
    battery = toy_suite(config.category)
    population: list[OperatorCandidate] = []
    for slot in range(config.n_ev):
        artifact = None
        for attempt in range(config.max_attempts):
            artifact = _generate_and_validate(
                llm.render_initialization,
                lambda source, s=slot, a=attempt: OperatorArtifact(
                    id=f"init-{s:02d}" + (f".a{a}" if a else ""),
                    source=source,
                    origin="init",
                ),
                ctx,
                backend,
                worker,
                config,
                battery,
                recorder,
                generation=0,
            )
            if artifact is not None:
                break
        if artifact is None:
            raise InitializationError(
                f"slot {slot}: no valid operator after {config.max_attempts} attempts"
            )
        recorder.on_artifact(0, artifact, scored=True)
        report = parallel_evaluate(artifact, suite, config, worker, recorder=recorder)
        recorder.on_score(0, artifact.id, report)
        population.append(
            OperatorCandidate(artifact=artifact, score_report=report, generation_admitted=0)
        )
    return population


def crossover_step(
    parents: list[OperatorCandidate],
    backend,
    worker: WorkerSpec,
    config: EvolutionConfig,
    generation: int,
    iteration: int,
    recorder=None,
) -> OperatorArtifact:
    """LLM recombination of the parents; falls back to cloning the best."""
    recorder = recorder or NullRecorder()
    if len(parents) < 2:
        raise ValueError("crossover needs at least two parents")
    ctx = llm.PromptContext.for_category(
        config.category, _encoding_for(config.category), temperature=config.temperature
    )
    ctx.selected_operators = [(c.artifact.source, c.score) for c in parents]
    ctx.n_selected = len(parents)
    parent_ids = tuple(c.artifact.id for c in parents)
    battery = toy_suite(config.category)
    base_id = f"g{generation:02d}-i{iteration:02d}-x"
    for attempt in range(config.max_attempts):
        artifact = _generate_and_validate(
            llm.render_crossover,
            lambda source, a=attempt: OperatorArtifact(
                id=base_id + (f".a{a}" if a else ""),
                source=source,
                origin="crossover",
                parents=parent_ids,
                created_generation=generation,
            ),
            ctx,
            backend,
            worker,
            config,
            battery,
            recorder,
            generation,
        )
        if artifact is not None:
            return artifact
    best = max(parents, key=lambda c: c.score)
    recorder.on_event(
        {"event": "crossover_fallback", "generation": generation, "cloned": best.artifact.id}
    )
    return OperatorArtifact(
        id=base_id + ".clone",
        source=best.artifact.source,
        origin="crossover",
        parents=(best.artifact.id,),
        created_generation=generation,
    )


def mutation_step(
    artifact: OperatorArtifact,
    backend,
    worker: WorkerSpec,
    config: EvolutionConfig,
    rng: np.random.Generator,
    generation: int = 0,
    recorder=None,
) -> OperatorArtifact:
    """With probability 1/N_ev, ask the LLM to refine the operator."""
    recorder = recorder or NullRecorder()
    if rng.random() >= 1.0 / config.n_ev:
        return artifact
    ctx = llm.PromptContext.for_category(
        config.category, _encoding_for(config.category), temperature=config.temperature
    )
    ctx.operator_source = artifact.source
    battery = toy_suite(config.category)
    for attempt in range(config.max_attempts):
        mutated = _generate_and_validate(
            llm.render_mutation,
            lambda source, a=attempt: OperatorArtifact(
                id=f"{artifact.id}-m" + (f".a{a}" if a else ""),
                source=source,
                origin="mutation",
                parents=(artifact.id,),
                created_generation=generation,
            ),
            ctx,
            backend,
            worker,
            config,
            battery,
            recorder,
            generation,
        )
        if mutated is not None:
            return mutated
    recorder.on_event(
        {"event": "mutation_fallback", "generation": generation, "kept": artifact.id}
    )
    return artifact


def _encoding_for(category: str) -> str:
    return {pb.CMOP: pb.REAL, pb.MOKP: pb.BITSTRING, pb.MOTSP: pb.PERMUTATION}[category]


# ---------------------------------------------------------------------------
# Scoring and population update
# ---------------------------------------------------------------------------


def parallel_evaluate(
    artifact: OperatorArtifact,
    suite: pb.SuiteSpec,
    config: EvolutionConfig,
    worker: WorkerSpec,
    recorder=None,
) -> ScoreReport:
    """Score the operator on every suite instance concurrently."""
    recorder = recorder or NullRecorder()

    def one(instance: pb.ProblemInstance):
        seed = derive_seed(config.seed, artifact.id, instance.id)
        ps, _front, info = evaluate_operator(
            artifact,
            instance,
            worker,
            population_size=config.population_size,
            generations=config.generations,
            seed=seed,
        )
        return instance.id, ps, info

    workers = config.eval_workers or max(1, len(suite))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, suite.instances))
    per_problem = {}
    for instance_id, ps, info in results:
        per_problem[instance_id] = ps
        if info["status"] != "ok":
            recorder.on_event(
                {
                    "event": "evaluation_failed",
                    "operator": artifact.id,
                    "instance": instance_id,
                    "reason": info["reason"],
                }
            )
    return ScoreReport.from_per_problem(per_problem)


def elitist_update(
    population: list[OperatorCandidate], candidate: OperatorCandidate, n_ev: int
) -> list[OperatorCandidate]:
    """Union, stable-sort by score descending, truncate; incumbents win ties."""
    merged = list(population) + [candidate]
    ranked = sorted(merged, key=lambda c: -c.score)  # stable: ties keep order
    return ranked[:n_ev]


# ---------------------------------------------------------------------------
# The full loop
# ---------------------------------------------------------------------------


@dataclass
class EvolutionResult:
    best: OperatorCandidate
    trace: list[float]  # best score after init, then after each generation
    population: list[OperatorCandidate] = field(default_factory=list)


def evolve(
    config: EvolutionConfig,
    suite: pb.SuiteSpec,
    backend,
    worker: WorkerSpec,
    recorder=None,
) -> EvolutionResult:
    """Run the full operator-evolution loop and return the best candidate."""
    recorder = recorder or NullRecorder()
    if suite.category != config.category:
        raise ValueError(
            f"suite category {suite.category!r} does not match config {config.category!r}"
        )
    rng = np.random.default_rng(derive_seed(config.seed, "evolve"))
    population = initialize_population(config, suite, backend, worker, recorder=recorder)
    best = max(population, key=lambda c: c.score)
    trace = [best.score]
    recorder.on_event({"event": "generation_done", "generation": 0, "best": best.score})
    for generation in range(1, config.g_ev + 1):
        for iteration in range(config.n_ev):
            probs = selection_probabilities([c.score for c in population])
            n_s = int(rng.integers(2, config.n_max + 1))  # uniform over {2..n_max}
            parents = sample_parents(population, probs, n_s, rng)
            child = crossover_step(
                parents, backend, worker, config, generation, iteration, recorder=recorder
            )
            mutated = mutation_step(
                child, backend, worker, config, rng, generation, recorder=recorder
            )
            if mutated.id != child.id:
                recorder.on_artifact(generation, child, scored=False)
            recorder.on_artifact(generation, mutated, scored=True)
            report = parallel_evaluate(mutated, suite, config, worker, recorder=recorder)
            recorder.on_score(generation, mutated.id, report)
            candidate = OperatorCandidate(
                artifact=mutated, score_report=report, generation_admitted=generation
            )
            population = elitist_update(population, candidate, config.n_ev)
            if candidate.score > best.score:
                best = candidate
        trace.append(max(c.score for c in population))
        recorder.on_event(
            {"event": "generation_done", "generation": generation, "best": trace[-1]}
        )
    return EvolutionResult(best=best, trace=trace, population=population)
