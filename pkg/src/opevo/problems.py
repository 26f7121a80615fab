"""Benchmark problem families, instance generators and suite builders.

Three categories of multi-objective problems are supported, each with its
own genome encoding:

- CMOP: continuous benchmarks (ZDT1-6, DTLZ1-7), real-vector genomes
  (ZDT5 is the one bitstring-encoded family), k objectives minimized.
- MOKP: multi-objective 0/1 knapsack, bitstring genomes, profit objectives
  f_i(x) = sum_j p_ij * x_j maximized subject to sum_j w_j * x_j <= C.
- MOTSP: multi-objective traveling salesman, permutation genomes, distance
  objectives f_i(pi) = sum of d_i over consecutive cities, minimized. Tours
  are open paths by default; set closed_tour for the conventional cycle.

Genomes are plain numpy arrays (float for real, 0/1 ints for bitstring,
ints for permutation). All randomness flows through explicit
``numpy.random.Generator`` streams.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CMOP = "CMOP"
MOKP = "MOKP"
MOTSP = "MOTSP"
CATEGORIES = (CMOP, MOKP, MOTSP)

REAL = "real"
BITSTRING = "bitstring"
PERMUTATION = "permutation"

# x1 value minimizing ZDT6's first objective on [0, 1] (front left endpoint).
_ZDT6_F1_MIN = 0.2807753191919937


class EncodingMismatchError(ValueError):
    """Genome does not match the instance's declared encoding."""


class EvaluationError(RuntimeError):
    """Objective evaluation produced a non-finite value."""


class UnknownFamilyError(ValueError):
    """CMOP family name not in the registry."""


@dataclass(frozen=True)
class ProblemInstance:
    """One benchmark problem with encoding, payload and normalization bounds.

    ``ideal``/``nadir`` are per-objective normalization anchors in
    minimization orientation (MOKP objectives are negated first), with
    ideal[i] < nadir[i].
    """

    id: str
    category: str
    encoding: str
    n_var: int
    k: int
    ideal: np.ndarray
    nadir: np.ndarray
    family: str | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    weights: np.ndarray | None = None
    profits: np.ndarray | None = None
    capacity: float | None = None
    distances: np.ndarray | None = None
    closed_tour: bool = False
    seed: int | None = None

    def __post_init__(self):
        for name in ("ideal", "nadir", "lower", "upper", "weights", "profits", "distances"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not np.all(self.ideal < self.nadir):
            raise ValueError(f"{self.id}: ideal must be strictly below nadir")
        if self.category == MOKP:
            if self.capacity < float(self.weights.max()):
                raise ValueError(f"{self.id}: capacity below heaviest item")
            if self.capacity > float(self.weights.sum()):
                raise ValueError(f"{self.id}: capacity exceeds total weight")
        if self.category == MOTSP:
            for d in self.distances:
                if not np.allclose(d, d.T) or np.any(np.diag(d) != 0):
                    raise ValueError(f"{self.id}: distance matrix not symmetric with zero diagonal")

    @property
    def orientation(self) -> str:
        return "maximize" if self.category == MOKP else "minimize"


@dataclass
class SuiteSpec:
    """A named group of instances used for validation or testing."""

    category: str
    role: str  # "validation" | "testing"
    instances: list[ProblemInstance] = field(default_factory=list)

    def __post_init__(self):
        ids = [inst.id for inst in self.instances]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate instance ids in suite")

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)


# ---------------------------------------------------------------------------
# CMOP family definitions (batch evaluation on an (m, n_var) matrix)
# ---------------------------------------------------------------------------


def _zdt1(X):
    f1 = X[:, 0]
    g = 1.0 + 9.0 * X[:, 1:].sum(axis=1) / (X.shape[1] - 1)
    f2 = g * (1.0 - np.sqrt(f1 / g))
    return np.column_stack([f1, f2])


def _zdt2(X):
    f1 = X[:, 0]
    g = 1.0 + 9.0 * X[:, 1:].sum(axis=1) / (X.shape[1] - 1)
    f2 = g * (1.0 - (f1 / g) ** 2)
    return np.column_stack([f1, f2])


def _zdt3(X):
    f1 = X[:, 0]
    g = 1.0 + 9.0 * X[:, 1:].sum(axis=1) / (X.shape[1] - 1)
    f2 = g * (1.0 - np.sqrt(f1 / g) - (f1 / g) * np.sin(10.0 * np.pi * f1))
    return np.column_stack([f1, f2])


def _zdt4(X):
    f1 = X[:, 0]
    rest = X[:, 1:]
    g = 1.0 + 10.0 * rest.shape[1] + (rest**2 - 10.0 * np.cos(4.0 * np.pi * rest)).sum(axis=1)
    f2 = g * (1.0 - np.sqrt(f1 / g))
    return np.column_stack([f1, f2])


def _zdt5_groups(n_var: int) -> list[int]:
    # First block is 30 bits, the remainder splits into 5-bit blocks.
    if n_var < 35 or (n_var - 30) % 5 != 0:
        raise ValueError("zdt5 needs n_var = 30 + 5*m for some m >= 1")
    return [30] + [5] * ((n_var - 30) // 5)


def _zdt5(X):
    groups = _zdt5_groups(X.shape[1])
    u1 = X[:, :30].sum(axis=1)
    f1 = 1.0 + u1
    g = np.zeros(len(X))
    offset = 30
    for size in groups[1:]:
        u = X[:, offset : offset + size].sum(axis=1)
        g += np.where(u < size, 2.0 + u, 1.0)
        offset += size
    f2 = g / f1
    return np.column_stack([f1, f2])


def _zdt6(X):
    f1 = 1.0 - np.exp(-4.0 * X[:, 0]) * np.sin(6.0 * np.pi * X[:, 0]) ** 6
    g = 1.0 + 9.0 * (X[:, 1:].sum(axis=1) / (X.shape[1] - 1)) ** 0.25
    f2 = g * (1.0 - (f1 / g) ** 2)
    return np.column_stack([f1, f2])


def _dtlz_g1(Xm):
    return 100.0 * (
        Xm.shape[1] + ((Xm - 0.5) ** 2 - np.cos(20.0 * np.pi * (Xm - 0.5))).sum(axis=1)
    )


def _dtlz_shape(theta, g):
    """Cos/sin product objectives shared by DTLZ2-6; theta is (m, k-1)."""
    m, km1 = theta.shape
    k = km1 + 1
    F = np.empty((m, k))
    cos = np.cos(theta)
    sin = np.sin(theta)
    for i in range(k):
        f = np.ones(m)
        f *= cos[:, : k - 1 - i].prod(axis=1)
        if i > 0:
            f *= sin[:, k - 1 - i]
        F[:, i] = (1.0 + g) * f
    return F


def _dtlz1(X, k):
    Xp, Xm = X[:, : k - 1], X[:, k - 1 :]
    g = _dtlz_g1(Xm)
    m = len(X)
    F = np.empty((m, k))
    for i in range(k):
        f = 0.5 * np.ones(m)
        f *= Xp[:, : k - 1 - i].prod(axis=1)
        if i > 0:
            f *= 1.0 - Xp[:, k - 1 - i]
        F[:, i] = f * (1.0 + g)
    return F


def _dtlz2(X, k):
    Xp, Xm = X[:, : k - 1], X[:, k - 1 :]
    g = ((Xm - 0.5) ** 2).sum(axis=1)
    return _dtlz_shape(Xp * np.pi / 2.0, g)


def _dtlz3(X, k):
    Xp, Xm = X[:, : k - 1], X[:, k - 1 :]
    return _dtlz_shape(Xp * np.pi / 2.0, _dtlz_g1(Xm))


def _dtlz4(X, k, alpha=100.0):
    Xp, Xm = X[:, : k - 1], X[:, k - 1 :]
    g = ((Xm - 0.5) ** 2).sum(axis=1)
    return _dtlz_shape((Xp**alpha) * np.pi / 2.0, g)


def _dtlz5_theta(Xp, g):
    theta = np.empty_like(Xp)
    theta[:, 0] = Xp[:, 0] * np.pi / 2.0
    gg = g[:, None]
    theta[:, 1:] = np.pi / (4.0 * (1.0 + gg)) * (1.0 + 2.0 * gg * Xp[:, 1:])
    return theta


def _dtlz5(X, k):
    Xp, Xm = X[:, : k - 1], X[:, k - 1 :]
    g = ((Xm - 0.5) ** 2).sum(axis=1)
    return _dtlz_shape(_dtlz5_theta(Xp, g), g)


def _dtlz6(X, k):
    Xp, Xm = X[:, : k - 1], X[:, k - 1 :]
    g = (Xm**0.1).sum(axis=1)
    return _dtlz_shape(_dtlz5_theta(Xp, g), g)


def _dtlz7(X, k):
    Xp, Xm = X[:, : k - 1], X[:, k - 1 :]
    g = 1.0 + 9.0 * Xm.mean(axis=1)
    h = k - (Xp / (1.0 + g[:, None]) * (1.0 + np.sin(3.0 * np.pi * Xp))).sum(axis=1)
    return np.column_stack([Xp, (1.0 + g) * h])


def _simplex_lattice(k: int, n_points: int) -> np.ndarray:
    """Largest Das-Dennis lattice on the unit simplex with <= n_points rows."""

    def count(h):
        out = 1
        for i in range(1, k):
            out = out * (h + i) // i
        return out

    h = 1
    while count(h + 1) <= n_points:
        h += 1

    rows = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for v in range(remaining + 1):
            rec(prefix + [v], remaining - v, slots - 1)

    rec([], h, k)
    return np.asarray(rows, dtype=float) / h


def _front_2d(t, f2):
    return np.column_stack([t, f2])


def _zdt3_front(n_points):
    # The front is the nondominated part of the g=1 curve, which lives on
    # five disconnected parameter intervals; recover it from a dense sample
    # with a running-min filter (f1 = t is strictly increasing).
    t = np.linspace(0.0, 1.0, 16 * n_points)
    f2 = 1.0 - np.sqrt(t) - t * np.sin(10.0 * np.pi * t)
    run_min = np.minimum.accumulate(f2)
    keep = np.ones(len(t), dtype=bool)
    keep[1:] = f2[1:] < run_min[:-1]
    t, f2 = t[keep], f2[keep]
    idx = np.linspace(0, len(t) - 1, n_points).round().astype(int)
    return _front_2d(t[idx], f2[idx])


def _zdt5_front(n_var, n_points):
    groups = _zdt5_groups(n_var)
    f1 = np.arange(1, 32, dtype=float)
    f2 = (len(groups) - 1) / f1
    pts = _front_2d(f1, f2)
    if n_points < len(pts):
        idx = np.linspace(0, len(pts) - 1, n_points).round().astype(int)
        pts = pts[np.unique(idx)]
    return pts


def _dtlz5_front(k, n_points):
    t = np.linspace(0.0, np.pi / 2.0, n_points)
    theta = np.column_stack([t] + [np.full_like(t, np.pi / 4.0)] * (k - 2))
    return _dtlz_shape(theta, np.zeros(n_points))


def _dtlz7_front(k, n_points):
    # Dense grid over the free objectives, then keep the nondominated part.
    side = max(2, int(np.ceil((4 * n_points) ** (1.0 / (k - 1)))))
    axes = np.meshgrid(*[np.linspace(0.0, 1.0, side)] * (k - 1))
    Xp = np.column_stack([a.ravel() for a in axes])
    h = k - (Xp / 2.0 * (1.0 + np.sin(3.0 * np.pi * Xp))).sum(axis=1)
    pts = np.column_stack([Xp, 2.0 * h])
    from .metrics import nondominated_filter

    pts = nondominated_filter(pts)
    if len(pts) > n_points:
        idx = np.linspace(0, len(pts) - 1, n_points).round().astype(int)
        pts = pts[np.unique(idx)]
    return pts


_ZDT_DEFAULT_NVAR = {"zdt1": 30, "zdt2": 30, "zdt3": 30, "zdt4": 10, "zdt5": 80, "zdt6": 10}
# DTLZ uses k-1 position variables plus a family-specific distance tail.
_DTLZ_TAIL = {"dtlz1": 5, "dtlz2": 10, "dtlz3": 10, "dtlz4": 10, "dtlz5": 10, "dtlz6": 10, "dtlz7": 20}

FAMILY_NAMES = tuple(_ZDT_DEFAULT_NVAR) + tuple(_DTLZ_TAIL)


def default_n_var(family: str, k: int) -> int:
    if family in _ZDT_DEFAULT_NVAR:
        return _ZDT_DEFAULT_NVAR[family]
    if family in _DTLZ_TAIL:
        return (k - 1) + _DTLZ_TAIL[family]  # k-1 position + family-specific distance tail
    raise UnknownFamilyError(family)


def _family_eval(family: str, X: np.ndarray, k: int) -> np.ndarray:
    zdt = {"zdt1": _zdt1, "zdt2": _zdt2, "zdt3": _zdt3, "zdt4": _zdt4, "zdt5": _zdt5, "zdt6": _zdt6}
    if family in zdt:
        return zdt[family](X)
    dtlz = {"dtlz1": _dtlz1, "dtlz2": _dtlz2, "dtlz3": _dtlz3, "dtlz4": _dtlz4,
            "dtlz5": _dtlz5, "dtlz6": _dtlz6, "dtlz7": _dtlz7}
    if family in dtlz:
        return dtlz[family](X, k)
    raise UnknownFamilyError(family)


def family_front(family: str, k: int, n_var: int, n_points: int) -> np.ndarray:
    """Sample the analytic Pareto front of a CMOP family (cached, read-only)."""
    pts = _family_front(family, k, n_var, n_points)
    pts.setflags(write=False)
    return pts


@functools.lru_cache(maxsize=128)
def _family_front(family: str, k: int, n_var: int, n_points: int) -> np.ndarray:
    if family in ("zdt1", "zdt4"):
        t = np.linspace(0.0, 1.0, n_points)
        return _front_2d(t, 1.0 - np.sqrt(t))
    if family == "zdt2":
        t = np.linspace(0.0, 1.0, n_points)
        return _front_2d(t, 1.0 - t**2)
    if family == "zdt3":
        return _zdt3_front(n_points)
    if family == "zdt5":
        return _zdt5_front(n_var, n_points)
    if family == "zdt6":
        t = np.linspace(_ZDT6_F1_MIN, 1.0, n_points)
        return _front_2d(t, 1.0 - t**2)
    if family == "dtlz1":
        return 0.5 * _simplex_lattice(k, n_points)
    if family in ("dtlz2", "dtlz3", "dtlz4"):
        w = _simplex_lattice(k, n_points)
        return w / np.linalg.norm(w, axis=1, keepdims=True)
    if family in ("dtlz5", "dtlz6"):
        return _dtlz5_front(k, n_points)
    if family == "dtlz7":
        return _dtlz7_front(k, n_points)
    raise UnknownFamilyError(family)


def make_cmop(family: str, n_var: int | None = None, instance_id: str | None = None) -> ProblemInstance:
    """Build a CMOP instance; ZDT families are 2-objective, DTLZ 3-objective."""
    family = family.lower()
    if family not in FAMILY_NAMES:
        raise UnknownFamilyError(family)
    k = 2 if family.startswith("zdt") else 3
    if n_var is None:
        n_var = default_n_var(family, k)
    if family == "zdt5":
        _zdt5_groups(n_var)  # validates the block structure
        encoding, lower, upper = BITSTRING, None, None
    else:
        encoding = REAL
        lower = np.zeros(n_var)
        upper = np.ones(n_var)
        if family == "zdt4":
            lower[1:], upper[1:] = -5.0, 5.0
    front = family_front(family, k, n_var, 1000)
    ideal = front.min(axis=0)
    nadir = front.max(axis=0)
    degenerate = nadir - ideal < 1e-9
    nadir = np.where(degenerate, ideal + 1.0, nadir)
    return ProblemInstance(
        id=instance_id or f"cmop-{family}-n{n_var}",
        category=CMOP,
        encoding=encoding,
        n_var=n_var,
        k=k,
        ideal=ideal,
        nadir=nadir,
        family=family,
        lower=lower,
        upper=upper,
    )


# ---------------------------------------------------------------------------
# Evaluation, feasibility, sampling
# ---------------------------------------------------------------------------


def validate_genome(instance: ProblemInstance, genome: np.ndarray) -> np.ndarray:
    """Check a genome against the instance encoding; returns it as an array."""
    g = np.asarray(genome)
    if g.ndim != 1 or g.shape[0] != instance.n_var:
        raise EncodingMismatchError(
            f"expected {instance.n_var} genes, got shape {g.shape}"
        )
    if instance.encoding == REAL:
        g = g.astype(float, copy=False)
        if not np.all(np.isfinite(g)):
            raise EncodingMismatchError("real genome contains non-finite values")
        if np.any(g < instance.lower - 1e-9) or np.any(g > instance.upper + 1e-9):
            raise EncodingMismatchError("real genome outside variable bounds")
    elif instance.encoding == BITSTRING:
        g = g.astype(int, copy=False)
        if not np.isin(g, (0, 1)).all():
            raise EncodingMismatchError("bitstring genome has values outside {0,1}")
    elif instance.encoding == PERMUTATION:
        g = g.astype(int, copy=False)
        if not np.array_equal(np.sort(g), np.arange(instance.n_var)):
            raise EncodingMismatchError("not a permutation of 0..n-1")
    else:
        raise EncodingMismatchError(f"unknown encoding {instance.encoding!r}")
    return g


def evaluate_batch(instance: ProblemInstance, X: np.ndarray) -> np.ndarray:
    """Objective values for a (m, n_var) matrix of genomes, problem-native scale."""
    X = np.asarray(X)
    if instance.category == CMOP:
        F = _family_eval(instance.family, X.astype(float), instance.k)
        if not np.all(np.isfinite(F)):
            raise EvaluationError(f"{instance.id}: non-finite objective value")
        return F
    if instance.category == MOKP:
        return X.astype(float) @ instance.profits.T
    if instance.category == MOTSP:
        P = X.astype(int)
        F = np.empty((len(P), instance.k))
        for i, d in enumerate(instance.distances):
            F[:, i] = d[P[:, :-1], P[:, 1:]].sum(axis=1)
            if instance.closed_tour:
                F[:, i] += d[P[:, -1], P[:, 0]]
        return F
    raise ValueError(f"unknown category {instance.category!r}")


def evaluate(instance: ProblemInstance, genome: np.ndarray) -> np.ndarray:
    """Objective vector of one genome (Pareto orientation per instance)."""
    g = validate_genome(instance, genome)
    return evaluate_batch(instance, g[None, :])[0]


def feasible(instance: ProblemInstance, genome: np.ndarray) -> bool:
    """MOKP capacity check; every non-MOKP instance is unconstrained."""
    if instance.category != MOKP:
        return True
    g = validate_genome(instance, genome)
    return float(instance.weights @ g) <= instance.capacity


def random_genome(instance: ProblemInstance, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample over the instance's encoding space."""
    if instance.encoding == REAL:
        return rng.uniform(instance.lower, instance.upper)
    if instance.encoding == BITSTRING:
        return rng.integers(0, 2, instance.n_var)
    return rng.permutation(instance.n_var)


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------


def generate_mokp(n_items: int, k: int, rng: np.random.Generator, instance_id: str | None = None) -> ProblemInstance:
    """Random knapsack: integer weights/profits in [10, 100], capacity ~50% of total weight."""
    if n_items < 2 or k < 2:
        raise ValueError("need n_items >= 2 and k >= 2")
    weights = rng.integers(10, 101, n_items).astype(float)
    profits = rng.integers(10, 101, (k, n_items)).astype(float)
    capacity = float(max(round(0.5 * weights.sum()), weights.max()))
    full = profits.sum(axis=1)
    return ProblemInstance(
        id=instance_id or f"mokp-n{n_items}",
        category=MOKP,
        encoding=BITSTRING,
        n_var=n_items,
        k=k,
        ideal=-full,  # minimization orientation: negated full-sum profits
        nadir=np.zeros(k),
        weights=weights,
        profits=profits,
        capacity=capacity,
    )


def generate_motsp(n_cities: int, k: int, rng: np.random.Generator, instance_id: str | None = None) -> ProblemInstance:
    """Random TSP with one Euclidean unit-square point set per objective."""
    if n_cities < 3 or k < 2:
        raise ValueError("need n_cities >= 3 and k >= 2")
    mats = []
    for _ in range(k):
        pts = rng.random((n_cities, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        mats.append(np.sqrt((diff**2).sum(axis=2)))
    return ProblemInstance(
        id=instance_id or f"motsp-n{n_cities}",
        category=MOTSP,
        encoding=PERMUTATION,
        n_var=n_cities,
        k=k,
        ideal=np.zeros(k),
        nadir=np.full(k, (n_cities - 1) * np.sqrt(2.0)),
        distances=np.stack(mats),
    )


def reference_front(instance: ProblemInstance, n_points: int = 1000) -> np.ndarray:
    """Analytic Pareto-front sample of a CMOP instance."""
    if instance.category != CMOP:
        raise ValueError("reference fronts exist only for CMOP instances")
    return family_front(instance.family, instance.k, instance.n_var, n_points)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def make_suite(category: str, role: str, rng: np.random.Generator, k: int = 2) -> SuiteSpec:
    """Validation/testing instance groups.

    CMOP validation uses every family at default dimensions, testing at 50
    variables. MOKP and MOTSP draw random instances in the size ranges of
    their groups.
    """
    if role not in ("validation", "testing"):
        raise ValueError(f"unknown role {role!r}")
    tag = "val" if role == "validation" else "test"
    instances: list[ProblemInstance] = []
    if category == CMOP:
        for family in FAMILY_NAMES:
            n_var = None if role == "validation" else 50
            instances.append(make_cmop(family, n_var=n_var, instance_id=f"cmop-{tag}-{family}"))
    elif category == MOKP:
        low = 50 if role == "validation" else 100
        for i in range(10):
            n = int(rng.integers(low, 201))
            inst = generate_mokp(n, k, rng, instance_id=f"mokp-{tag}-{i:02d}")
            instances.append(_with_seed(inst, None))
    elif category == MOTSP:
        if role == "validation":
            sizes = [30] * 20
        else:
            sizes = [int(rng.integers(100, 201)) for _ in range(10)]
        for i, n in enumerate(sizes):
            instances.append(generate_motsp(n, k, rng, instance_id=f"motsp-{tag}-{i:02d}"))
    else:
        raise ValueError(f"unknown category {category!r}")
    return SuiteSpec(category=category, role=role, instances=instances)


def _with_seed(inst: ProblemInstance, seed: int | None) -> ProblemInstance:
    if seed is None:
        return inst
    return instance_from_dict({**instance_to_dict(inst), "seed": seed})


# ---------------------------------------------------------------------------
# Serialization (lossless JSON round-trip)
# ---------------------------------------------------------------------------


def instance_to_dict(inst: ProblemInstance) -> dict:
    d = {
        "id": inst.id,
        "category": inst.category,
        "encoding": inst.encoding,
        "n_var": inst.n_var,
        "k": inst.k,
        "ideal": inst.ideal.tolist(),
        "nadir": inst.nadir.tolist(),
        "seed": inst.seed,
    }
    if inst.category == CMOP:
        d["family"] = inst.family
    elif inst.category == MOKP:
        d["weights"] = inst.weights.tolist()
        d["profits"] = inst.profits.tolist()
        d["capacity"] = inst.capacity
    else:
        d["distances"] = inst.distances.tolist()
        d["closed_tour"] = inst.closed_tour
    return d


def instance_from_dict(d: dict) -> ProblemInstance:
    common = dict(
        id=d["id"],
        category=d["category"],
        encoding=d["encoding"],
        n_var=int(d["n_var"]),
        k=int(d["k"]),
        ideal=np.asarray(d["ideal"], dtype=float),
        nadir=np.asarray(d["nadir"], dtype=float),
        seed=d.get("seed"),
    )
    if d["category"] == CMOP:
        template = make_cmop(d["family"], n_var=int(d["n_var"]), instance_id=d["id"])
        return ProblemInstance(
            **common, family=d["family"], lower=template.lower, upper=template.upper
        )
    if d["category"] == MOKP:
        return ProblemInstance(
            **common,
            weights=np.asarray(d["weights"], dtype=float),
            profits=np.asarray(d["profits"], dtype=float),
            capacity=float(d["capacity"]),
        )
    return ProblemInstance(
        **common,
        distances=np.asarray(d["distances"], dtype=float),
        closed_tour=bool(d.get("closed_tour", False)),
    )


def save_instance(inst: ProblemInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst)), encoding="utf-8")


def load_instance(path: str | Path) -> ProblemInstance:
    return instance_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
