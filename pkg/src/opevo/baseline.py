"""Reference NSGA-II solver with encoding-matched variation operators.

Used both as the comparison baseline and as the source of the survival
rule (nondominated sorting + crowding truncation) shared with operator
evaluation. Operator pairing mirrors the conventional per-encoding choices:

- real: simulated binary crossover + polynomial mutation
- bitstring: two-point crossover + bitflip (plus weight repair on MOKP)
- permutation: order crossover + inversion mutation
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import problems as pb
from .metrics import FrontApproximation, front_metric, nondominated_filter


@dataclass
class SolverConfig:
    population_size: int = 100
    generations: int = 200
    sbx_eta: float = 15.0
    pm_eta: float = 20.0
    pm_rate: float | None = None  # defaults to 1/n_var
    crossover_prob: float = 0.9
    bitflip_rate: float | None = None  # defaults to 1/n_var

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")


# ---------------------------------------------------------------------------
# Ranking and survival
# ---------------------------------------------------------------------------


def fast_nondominated_sort(objectives: np.ndarray) -> list[list[int]]:
    """Partition row indices into successive nondominated fronts (minimize)."""
    F = np.asarray(objectives, dtype=float)
    n = len(F)
    if n == 0:
        return []
    le = (F[:, None, :] <= F[None, :, :]).all(axis=2)
    lt = (F[:, None, :] < F[None, :, :]).any(axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0).astype(int)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        idx = np.flatnonzero(remaining & (counts == 0))
        fronts.append(idx.tolist())
        remaining[idx] = False
        counts -= dom[idx].sum(axis=0)
    return fronts


def crowding_distance(objectives: np.ndarray) -> np.ndarray:
    """Crowding distances of the given front rows (boundaries infinite)."""
    F = np.asarray(objectives, dtype=float)
    n, k = F.shape
    d = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(k):
        order = np.argsort(F[:, j], kind="stable")
        span = F[order[-1], j] - F[order[0], j]
        d[order[0]] = d[order[-1]] = np.inf
        if span > 0:
            d[order[1:-1]] += (F[order[2:], j] - F[order[:-2], j]) / span
    return d


def rank_and_crowding(objectives: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-individual front rank (0 = best) and crowding distance."""
    F = np.asarray(objectives, dtype=float)
    rank = np.empty(len(F), dtype=int)
    crowd = np.empty(len(F))
    for r, front in enumerate(fast_nondominated_sort(F)):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return rank, crowd


def nds_survival(objectives: np.ndarray, n_survivors: int) -> np.ndarray:
    """Indices kept by nondominated sorting with crowding truncation."""
    F = np.asarray(objectives, dtype=float)
    chosen: list[int] = []
    for front in fast_nondominated_sort(F):
        if len(chosen) + len(front) <= n_survivors:
            chosen.extend(front)
            continue
        crowd = crowding_distance(F[front])
        order = np.lexsort((front, -crowd))  # crowded first, ties by index
        take = n_survivors - len(chosen)
        chosen.extend(int(front[i]) for i in order[:take])
        break
    return np.asarray(chosen, dtype=int)


def binary_tournament(rank: np.ndarray, crowd: np.ndarray, n_picks: int, rng: np.random.Generator) -> np.ndarray:
    """Winners of n_picks random binary tournaments on (rank, crowding, index)."""
    n = len(rank)
    a = rng.integers(0, n, n_picks)
    b = rng.integers(0, n, n_picks)
    a_wins = (rank[a] < rank[b]) | (
        (rank[a] == rank[b]) & ((crowd[a] > crowd[b]) | ((crowd[a] == crowd[b]) & (a <= b)))
    )
    return np.where(a_wins, a, b)


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------


def sbx(a, b, eta: float, lower, upper, rng: np.random.Generator, prob: float = 0.9):
    """Bounded simulated binary crossover; returns two children."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c1, c2 = a.copy(), b.copy()
    if rng.random() > prob:
        return c1, c2
    y1 = np.minimum(a, b)
    y2 = np.maximum(a, b)
    cross = (rng.random(len(a)) <= 0.5) & (y2 - y1 > 1e-14)
    if cross.any():
        yl, yu = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
        u = rng.random(len(a))
        delta = y2 - y1

        def _child(beta_edge, sign):
            beta = 1.0 + 2.0 * beta_edge / delta
            alpha = 2.0 - beta ** -(eta + 1.0)
            betaq = np.where(
                u <= 1.0 / alpha,
                (u * alpha) ** (1.0 / (eta + 1.0)),
                (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0)),
            )
            return 0.5 * ((y1 + y2) + sign * betaq * delta)

        with np.errstate(divide="ignore", invalid="ignore"):
            lo_child = _child(y1 - yl, -1.0)
            hi_child = _child(yu - y2, +1.0)
        lo_child = np.clip(lo_child, yl, yu)
        hi_child = np.clip(hi_child, yl, yu)
        swap = rng.random(len(a)) <= 0.5
        c1[cross] = np.where(swap, hi_child, lo_child)[cross]
        c2[cross] = np.where(swap, lo_child, hi_child)[cross]
    return c1, c2


def polynomial_mutation(x, eta: float, rate: float, lower, upper, rng: np.random.Generator):
    """Bounded polynomial mutation applied per gene with probability `rate`."""
    y = np.asarray(x, dtype=float).copy()
    yl, yu = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    span = yu - yl
    mutate = rng.random(len(y)) < rate
    if not mutate.any():
        return y
    u = rng.random(len(y))
    d1 = (y - yl) / span
    d2 = (yu - y) / span
    mpow = 1.0 / (eta + 1.0)
    low_side = u < 0.5
    with np.errstate(invalid="ignore"):
        val_lo = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)) ** mpow - 1.0
        val_hi = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)) ** mpow
    delta = np.where(low_side, val_lo, val_hi)
    y[mutate] = np.clip(y + delta * span, yl, yu)[mutate]
    return y


def two_point_crossover(a, b, rng: np.random.Generator):
    """Swap the segment between two cut points; returns two children."""
    a = np.asarray(a).copy()
    b = np.asarray(b).copy()
    n = len(a)
    i, j = sorted(rng.integers(0, n + 1, 2))
    a[i:j], b[i:j] = b[i:j].copy(), a[i:j].copy()
    return a, b


def bitflip(x, rate: float, rng: np.random.Generator):
    y = np.asarray(x).copy()
    flip = rng.random(len(y)) < rate
    y[flip] = 1 - y[flip]
    return y


def order_crossover(a, b, rng: np.random.Generator):
    """Keep a random slice of `a`, fill the rest in the order they appear in `b`."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    i, j = sorted(rng.integers(0, n + 1, 2))
    child = np.full(n, -1, dtype=a.dtype)
    child[i:j] = a[i:j]
    fill = b[~np.isin(b, child[i:j])]
    child[:i] = fill[:i]
    child[j:] = fill[i:]
    return child


def inversion_mutation(x, rng: np.random.Generator):
    y = np.asarray(x).copy()
    i, j = sorted(rng.integers(0, len(y) + 1, 2))
    y[i:j] = y[i:j][::-1]
    return y


def rand_weight_repair(instance: pb.ProblemInstance, x, rng: np.random.Generator):
    """Drop uniformly-random selected items until the knapsack fits."""
    if instance.category != pb.MOKP:
        raise ValueError("weight repair applies to MOKP instances only")
    y = np.asarray(x).copy()
    weight = float(instance.weights @ y)
    while weight > instance.capacity:
        selected = np.flatnonzero(y == 1)
        drop = int(rng.choice(selected))
        y[drop] = 0
        weight -= float(instance.weights[drop])
    return y


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def _variate(instance: pb.ProblemInstance, pa, pb_, cfg: SolverConfig, rng: np.random.Generator):
    n = instance.n_var
    if instance.encoding == pb.REAL:
        c1, c2 = sbx(pa, pb_, cfg.sbx_eta, instance.lower, instance.upper, rng, cfg.crossover_prob)
        rate = cfg.pm_rate if cfg.pm_rate is not None else 1.0 / n
        c1 = polynomial_mutation(c1, cfg.pm_eta, rate, instance.lower, instance.upper, rng)
        c2 = polynomial_mutation(c2, cfg.pm_eta, rate, instance.lower, instance.upper, rng)
    elif instance.encoding == pb.BITSTRING:
        if rng.random() <= cfg.crossover_prob:
            c1, c2 = two_point_crossover(pa, pb_, rng)
        else:
            c1, c2 = np.asarray(pa).copy(), np.asarray(pb_).copy()
        rate = cfg.bitflip_rate if cfg.bitflip_rate is not None else 1.0 / n
        c1, c2 = bitflip(c1, rate, rng), bitflip(c2, rate, rng)
    else:
        c1 = inversion_mutation(order_crossover(pa, pb_, rng), rng)
        c2 = inversion_mutation(order_crossover(pb_, pa, rng), rng)
    if instance.category == pb.MOKP:
        c1 = rand_weight_repair(instance, c1, rng)
        c2 = rand_weight_repair(instance, c2, rng)
    return c1, c2


def _to_min(instance: pb.ProblemInstance, F: np.ndarray) -> np.ndarray:
    return -F if instance.orientation == "maximize" else F


def nsga2_run(
    instance: pb.ProblemInstance,
    config: SolverConfig | None = None,
    rng: np.random.Generator | None = None,
    on_generation=None,
):
    """Run NSGA-II; returns (final FrontApproximation, per-generation metric trace).

    The trace has ``generations + 1`` entries: index g holds the population
    metric after g generations (index 0 = the evaluated initial population).
    ``on_generation(gen, metric, population, objectives)`` is invoked at the
    same points when provided.
    """
    cfg = config or SolverConfig()
    rng = rng if rng is not None else np.random.default_rng()
    n_pop = cfg.population_size

    pop = []
    for _ in range(n_pop):
        g = pb.random_genome(instance, rng)
        if instance.category == pb.MOKP:
            g = rand_weight_repair(instance, g, rng)
        pop.append(g)
    X = np.stack(pop)
    F_nat = pb.evaluate_batch(instance, X)

    def trace_metric():
        return front_metric(instance, FrontApproximation.from_objectives(instance, F_nat))

    trace = [trace_metric()]
    if on_generation is not None:
        on_generation(0, trace[0], X, F_nat)

    for gen in range(1, cfg.generations + 1):
        F_min = _to_min(instance, F_nat)
        rank, crowd = rank_and_crowding(F_min)
        parents = binary_tournament(rank, crowd, n_pop, rng)
        kids = []
        for i in range(0, n_pop, 2):
            c1, c2 = _variate(instance, X[parents[i]], X[parents[i + 1]], cfg, rng)
            kids.extend((c1, c2))
        KX = np.stack(kids[:n_pop])
        KF = pb.evaluate_batch(instance, KX)
        MX = np.concatenate([X, KX])
        MF = np.concatenate([F_nat, KF])
        keep = nds_survival(_to_min(instance, MF), n_pop)
        X, F_nat = MX[keep], MF[keep]
        trace.append(trace_metric())
        if on_generation is not None:
            on_generation(gen, trace[gen], X, F_nat)

    front = FrontApproximation.from_objectives(instance, F_nat)
    return front, trace
