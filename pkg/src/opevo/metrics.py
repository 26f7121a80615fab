"""Quality indicators and scoring for multi-objective solution sets.

All functions here take points in *minimization* orientation; maximization
objectives (MOKP profits) are negated on the way in by
:meth:`FrontApproximation.from_objectives`.

Per-category performance score (PS):

- CMOP:  PS = 1 - IGD            (IGD on the problem's native scale)
- MOKP:  PS = 1 - HV             (HV of the profit-normalized front, where a
                                  better front covers *less* volume)
- MOTSP: PS = HV                 (HV of the normalized front vs (1, ..., 1))

An operator's aggregate score over a suite is mean(PS) - population-std(PS),
so it rewards both average quality and consistency across instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .problems import CMOP, MOKP, MOTSP, ProblemInstance, reference_front


def nondominated_filter(points: np.ndarray) -> np.ndarray:
    """Subset of rows not Pareto-dominated (minimize) by any other row.

    Duplicates of a retained point are all retained.
    """
    F = np.asarray(points, dtype=float)
    if F.ndim != 2:
        raise ValueError(f"expected a (m, k) matrix, got shape {F.shape}")
    m = len(F)
    keep = np.ones(m, dtype=bool)
    for start in range(0, m, 256):
        chunk = F[start : start + 256]  # candidates being tested
        le = (F[:, None, :] <= chunk[None, :, :]).all(axis=2)
        lt = (F[:, None, :] < chunk[None, :, :]).any(axis=2)
        dominated = (le & lt).any(axis=0)
        keep[start : start + 256] &= ~dominated
    return F[keep]


def igd(reference: np.ndarray, approx: np.ndarray) -> float:
    """Mean distance from each reference point to its nearest approx point."""
    R = np.asarray(reference, dtype=float)
    A = np.asarray(approx, dtype=float)
    if R.size == 0 or A.size == 0:
        raise ValueError("igd needs nonempty reference and approximation sets")
    if R.shape[1] != A.shape[1]:
        raise ValueError("reference/approx dimension mismatch")
    return float(cdist(R, A).min(axis=1).mean())


def _hv2d(F: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((F[:, 1], F[:, 0]))
    F = F[order]
    hv = 0.0
    prev_y = ref[1]
    for x, y in F:
        if y < prev_y:
            hv += (ref[0] - x) * (prev_y - y)
            prev_y = y
    return hv


def _hv3d(F: np.ndarray, ref: np.ndarray) -> float:
    # Dimension sweep: integrate the 2D union area over slabs of the third axis.
    order = np.argsort(F[:, 2], kind="stable")
    F = F[order]
    zs = F[:, 2]
    hv = 0.0
    i = 0
    while i < len(F):
        z = zs[i]
        j = i + 1
        while j < len(F) and zs[j] == z:
            j += 1
        z_next = zs[j] if j < len(F) else ref[2]
        if z_next > z:
            hv += _hv2d(F[:j, :2], ref[:2]) * (z_next - z)
        i = j
    return hv


def hypervolume(points: np.ndarray, ref_point: np.ndarray) -> float:
    """Exact volume dominated by `points` and bounded by `ref_point`.

    Points that do not strictly dominate the reference point contribute
    nothing. Supports 2 and 3 objectives.
    """
    F = np.atleast_2d(np.asarray(points, dtype=float))
    ref = np.asarray(ref_point, dtype=float)
    if ref.ndim != 1 or F.shape[1] != ref.shape[0]:
        raise ValueError("reference point dimension mismatch")
    k = ref.shape[0]
    if k not in (2, 3):
        raise ValueError(f"hypervolume supports 2 or 3 objectives, got {k}")
    F = F[(F < ref).all(axis=1)]
    if len(F) == 0:
        return 0.0
    return _hv2d(F, ref) if k == 2 else _hv3d(F, ref)


def normalize(points: np.ndarray, ideal: np.ndarray, nadir: np.ndarray) -> np.ndarray:
    """Affine map of each objective to [0, 1] by (ideal, nadir) anchors.

    Values beyond the anchors are clamped into [0, 2] so an underestimated
    nadir cannot blow up downstream hypervolumes.
    """
    ideal = np.asarray(ideal, dtype=float)
    nadir = np.asarray(nadir, dtype=float)
    if not np.all(ideal < nadir):
        raise ValueError("degenerate normalization bounds (need ideal < nadir)")
    z = (np.asarray(points, dtype=float) - ideal) / (nadir - ideal)
    return np.clip(z, 0.0, 2.0)


def problem_score(category: str, metric_value: float) -> float:
    """Per-instance PS from the category's headline metric."""
    if category == CMOP:
        return 1.0 - metric_value
    if category == MOKP:
        return 1.0 - metric_value
    if category == MOTSP:
        return float(metric_value)
    raise ValueError(f"unknown category {category!r}")


def aggregate_score(per_problem) -> float:
    """Mean minus population standard deviation of the PS values."""
    v = np.asarray(list(per_problem), dtype=float)
    if v.size == 0:
        raise ValueError("aggregate_score needs at least one PS value")
    return float(v.mean() - v.std(ddof=0))


@dataclass
class FrontApproximation:
    """Nondominated objective vectors of one run, minimization orientation."""

    instance_id: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise ValueError("front contains non-finite objective values")
        self.points = pts

    @classmethod
    def from_objectives(cls, instance: ProblemInstance, objectives: np.ndarray) -> "FrontApproximation":
        """Convert native-orientation objective rows into a stored front."""
        F = np.atleast_2d(np.asarray(objectives, dtype=float))
        if instance.orientation == "maximize":
            F = -F
        return cls(instance_id=instance.id, points=nondominated_filter(F))


def front_metric(instance: ProblemInstance, front: FrontApproximation) -> float:
    """The category's headline metric for a front approximation.

    CMOP reports raw-scale IGD against the analytic reference front. MOKP
    and MOTSP report hypervolume of the normalized front against reference
    point (1, ..., 1); the MOKP front is reflected through the normalized
    ideal first so that richer profit fronts enclose *less* volume (the
    knapsack convention in which lower HV is better).
    """
    if instance.category == CMOP:
        return igd(reference_front(instance), front.points)
    z = normalize(front.points, instance.ideal, instance.nadir)
    if instance.category == MOKP:
        z = np.clip(1.0 - z, 0.0, None)
    return hypervolume(z, np.ones(instance.k))


def score_front(instance: ProblemInstance, front: FrontApproximation) -> float:
    """Per-instance PS of a front approximation."""
    return problem_score(instance.category, front_metric(instance, front))


@dataclass
class ScoreReport:
    """Per-instance PS values plus their aggregate for one operator."""

    per_problem: dict[str, float] = field(default_factory=dict)
    aggregate: float = 0.0

    @classmethod
    def from_per_problem(cls, per_problem: dict[str, float]) -> "ScoreReport":
        return cls(per_problem=dict(per_problem), aggregate=aggregate_score(per_problem.values()))

    def to_dict(self) -> dict:
        return {"per_problem": dict(self.per_problem), "aggregate": self.aggregate}

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreReport":
        return cls(per_problem=dict(d["per_problem"]), aggregate=float(d["aggregate"]))
