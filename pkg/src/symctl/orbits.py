"""Orbit point clouds, local dimension estimates, and bracket-span ranks."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

DEFAULT_RADIUS = 0.25
DEFAULT_SV_CUTOFF = 0.1
ABS_FLOOR = 1e-9
MAX_CHECK_POINTS = 32
MIN_NEIGHBOURS = 5


class InsufficientSamplesError(ValueError):
    pass


@dataclass
class OrbitSample:
    """Cloud of points reached from ``base_point``, each tagged with its flow word."""

    base_point: np.ndarray
    words: list
    points: np.ndarray
    model: object
    dropped: int = 0

    def __post_init__(self):
        self.base_point = np.asarray(self.base_point, dtype=np.float64).reshape(-1)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(len(self.words), self.base_point.size)

    def __len__(self) -> int:
        return len(self.words)

    def max_violation(self) -> float:
        return max((self.model.violation(x) for x in self.points), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["word_id"] + [f"x{j + 1}" for j in range(self.points.shape[1])])
        for i, x in enumerate(self.points):
            w.writerow([i] + [repr(float(v)) for v in x])
        return buf.getvalue()

    def words_json(self) -> str:
        return json.dumps({str(i): w.to_json() for i, w in enumerate(self.words)}, indent=1)


def _local_svd(points: np.ndarray, center, radius: float) -> np.ndarray:
    center = np.asarray(center, dtype=np.float64).reshape(-1)
    d = np.linalg.norm(points - center, axis=1)
    local = points[d <= radius]
    if local.shape[0] < 2:
        raise InsufficientSamplesError(
            f"only {local.shape[0]} cloud point(s) within radius {radius} of {center.tolist()}")
    return np.linalg.svd(local - local.mean(axis=0), compute_uv=False)


def _rank(sv: np.ndarray, cutoff: float) -> int:
    if sv.size == 0 or sv[0] <= ABS_FLOOR:
        return 0
    return int(np.sum(sv > cutoff * sv[0]))


def estimate_dimension(cloud, center, radius: float = DEFAULT_RADIUS,
                       sv_cutoff: float = DEFAULT_SV_CUTOFF) -> int:
    """Local PCA rank of the cloud points within ``radius`` of ``center``."""
    pts = cloud.points if isinstance(cloud, OrbitSample) else np.asarray(cloud, dtype=np.float64)
    return _rank(_local_svd(pts, center, radius), sv_cutoff)


def tangent_span_rank(family, x, bracket_depth: int = 2, rel_cutoff: float = 1e-8) -> int:
    """Rank at x of the family fields together with their iterated brackets.

    Depth 1 is the fields alone; depth k adds brackets of length up to k.
    """
    from .smooth import bracket_field

    if bracket_depth < 1:
        raise ValueError("bracket_depth must be at least 1")
    fields = list(family)
    if bracket_depth > 1 and not all(f.is_polynomial for f in fields):
        raise TypeError("brackets beyond depth 1 need polynomial fields")
    level = fields
    columns = [f(x) for f in fields]
    for _ in range(bracket_depth - 1):
        nxt = [bracket_field(a, b) for a, b in product(fields, level)]
        level = [b for b in nxt if not b.poly.is_zero()]
        columns += [b(x) for b in level]
        if not level:
            break
    M = np.column_stack(columns)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] <= 1e-12:
        return 0
    return int(np.sum(sv > rel_cutoff * sv[0]))


@dataclass
class DimensionReport:
    per_point: list = field(default_factory=list)
    global_dim: int | str = 0
    radius: float = DEFAULT_RADIUS
    sv_cutoff: float = DEFAULT_SV_CUTOFF
    max_violation: float = 0.0
    offending: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "global_dim": self.global_dim,
            "parameters": {"radius": self.radius, "sv_cutoff": self.sv_cutoff},
            "max_membership_residual": self.max_violation,
            "per_point": [{"point": p, "local_dim": d, "singular_values": sv}
                          for p, d, sv in self.per_point],
            "offending": self.offending,
        }


def farthest_points(points: np.ndarray, k: int, seed: int = 0) -> list[int]:
    """Greedy farthest-point subsample, started from a seeded random index."""
    if len(points) == 0:
        return []
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(points)))]
    d = np.linalg.norm(points - points[chosen[0]], axis=1)
    while len(chosen) < min(k, len(points)):
        i = int(np.argmax(d))
        if d[i] == 0.0:
            break
        chosen.append(i)
        d = np.minimum(d, np.linalg.norm(points - points[i], axis=1))
    return chosen


def verify_orbit_manifold(cloud: OrbitSample, radius: float = DEFAULT_RADIUS,
                          sv_cutoff: float = DEFAULT_SV_CUTOFF, seed: int = 0,
                          min_neighbours: int = MIN_NEIGHBOURS) -> DimensionReport:
    """Local dimension at up to 32 well-spread cloud points and their common value.

    Check points are drawn from cloud points with at least ``min_neighbours``
    others inside ``radius``, so that sparse fringe points do not masquerade
    as low-dimensional. A cloud with no such point is too thin to judge.
    """
    pts = cloud.points
    if len(pts) == 0:
        raise InsufficientSamplesError("empty cloud")
    dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    counts = (dists <= radius).sum(axis=1) - 1
    core = np.flatnonzero(counts >= min_neighbours)
    if core.size == 0:
        raise InsufficientSamplesError(
            f"no cloud point has {min_neighbours} neighbours within radius {radius}")
    picks = core[farthest_points(pts[core], MAX_CHECK_POINTS, seed)]
    report = DimensionReport(radius=radius, sv_cutoff=sv_cutoff, max_violation=cloud.max_violation())
    for i in sorted(int(i) for i in picks):
        sv = _local_svd(pts, pts[i], radius)
        report.per_point.append((pts[i].tolist(), _rank(sv, sv_cutoff), sv.tolist()))
    dims = {d for _, d, _ in report.per_point}
    if len(dims) == 1:
        report.global_dim = dims.pop()
    else:
        report.global_dim = "inconsistent"
        values = [d for _, d, _ in report.per_point]
        mode = max(set(values), key=values.count)
        report.offending = [p for p, d, _ in report.per_point if d != mode]
    return report
