"""Control systems on trivial bundles M x U, feedback sections, closed-loop families,
accessible-set sampling, and intertwining residuals."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .flow import EscapedError, FlowWord, IntegratorConfig, flow_word_apply
from .orbits import OrbitSample
from .poly import Polynomial
from .smooth import (DimensionError, SmoothMap, SubsetModel, VectorField, evaluate)

log = logging.getLogger(__name__)


class ControlRangeError(ValueError):
    """A feedback law produced a control value outside the control set."""

    def __init__(self, message: str, witness):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class Box:
    """Control set prod_i [lower_i, upper_i]; None or +-inf means unbounded."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(-np.inf if v is None else float(v) for v in self.lower)
        hi = tuple(np.inf if v is None else float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise DimensionError("box bounds must be non-empty and of equal length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= np.array(self.lower) - tol) and np.all(u <= np.array(self.upper) + tol))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        lo = np.where(np.isfinite(self.lower), self.lower, -1.0)
        hi = np.where(np.isfinite(self.upper), self.upper, 1.0)
        lo = np.minimum(lo, hi)
        return rng.uniform(lo, hi, size=(k, self.dim))

    def to_json(self) -> dict:
        enc = lambda v: None if not np.isfinite(v) else v  # noqa: E731
        return {"box": {"lower": [enc(v) for v in self.lower], "upper": [enc(v) for v in self.upper]}}


@dataclass(frozen=True)
class FiniteSet:
    points: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        pts = tuple(tuple(float(v) for v in p) for p in self.points)
        if not pts or len({len(p) for p in pts}) != 1:
            raise DimensionError("finite control set needs points of one common dimension")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return any(np.max(np.abs(u - np.array(p))) <= tol for p in self.points)

    def sample(self, rng, k: int) -> np.ndarray:
        return np.array(self.points)

    def to_json(self) -> dict:
        return {"finite": [list(p) for p in self.points]}


def control_model_from_json(data: dict):
    if "box" in data:
        return Box(tuple(data["box"]["lower"]), tuple(data["box"]["upper"]))
    if "finite" in data:
        return FiniteSet(tuple(tuple(p) for p in data["finite"]))
    raise ValueError("control model must be {'box': ...} or {'finite': ...}")


@dataclass(frozen=True)
class ControlSystem:
    """Dynamics phi(x, u) on M x U; inputs ordered state then control."""

    state_model: SubsetModel
    control_model: Box | FiniteSet
    dynamics: SmoothMap

    def __post_init__(self):
        n, m = self.state_model.ambient_dim, self.control_model.dim
        if self.dynamics.domain_dim != n + m or self.dynamics.codomain_dim != n:
            raise DimensionError(
                f"dynamics must map R^{n + m} -> R^{n}, got "
                f"R^{self.dynamics.domain_dim} -> R^{self.dynamics.codomain_dim}")

    @property
    def n(self) -> int:
        return self.state_model.ambient_dim

    @property
    def m(self) -> int:
        return self.control_model.dim

    def phi(self, x, u) -> np.ndarray:
        return evaluate(self.dynamics, np.concatenate([np.ravel(x), np.ravel(u)]))


@dataclass(frozen=True)
class Section:
    """Feedback law sigma: R^n -> R^m defined on ``domain``."""

    map: SmoothMap
    domain: SubsetModel
    label: str

    def __call__(self, x) -> np.ndarray:
        return evaluate(self.map, x)


class FieldFamily:
    """Labeled closed-loop fields sharing one ambient space."""

    def __init__(self, fields: Iterable[VectorField]):
        fields = list(fields)
        if not fields:
            raise ValueError("a field family needs at least one field")
        labels = [f.label for f in fields]
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        if dupes:
            raise ValueError(f"duplicate field labels: {dupes}")
        if len({f.dim for f in fields}) != 1:
            raise DimensionError("fields of a family must share the ambient dimension")
        self.fields = tuple(fields)
        self._by_label = {f.label: f for f in fields}

    def __getitem__(self, label: str) -> VectorField:
        return self._by_label[label]

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    @property
    def labels(self) -> list[str]:
        return [f.label for f in self.fields]

    @property
    def dim(self) -> int:
        return self.fields[0].dim

    @property
    def domain(self) -> SubsetModel:
        return self.fields[0].domain


def _probe_points(model: SubsetModel, k: int, seed: int, scale: float = 2.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-scale, scale, size=(8 * k, model.ambient_dim))
    return np.array([p for p in pts if model.contains(p)][:k]).reshape(-1, model.ambient_dim)


def closed_loop_field(sys: ControlSystem, sec: Section, check_points: Sequence | None = None) -> VectorField:
    """X(x) = phi(x, sigma(x)), symbolic when both maps are polynomial.

    Control values are checked against the control set on ``check_points``
    (default: random points of the section domain).
    """
    n, m = sys.n, sys.m
    if sec.map.domain_dim != n or sec.map.codomain_dim != m:
        raise DimensionError(f"section {sec.label!r} must map R^{n} -> R^{m}")
    pts = _probe_points(sec.domain, 64, seed=0) if check_points is None else np.asarray(check_points, float)
    for x in pts.reshape(-1, n):
        if not sys.state_model.contains(x):
            log.warning("section %s domain point %s lies outside the state model", sec.label, x.tolist())
        u = sec(x)
        if not sys.control_model.contains(u):
            raise ControlRangeError(
                f"section {sec.label!r} gives control {u.tolist()} outside the control set at x={x.tolist()}",
                x.tolist())
    if sys.dynamics.is_polynomial and sec.map.is_polynomial:
        identity = Polynomial.stack([Polynomial.variable(j, n) for j in range(n)])
        inner = Polynomial.stack([identity, sec.map.body])
        body = sys.dynamics.body.compose(inner)
        return VectorField(SmoothMap.poly(body), sec.domain, sec.label)

    def closed(x, _sys=sys, _sec=sec):
        return _sys.phi(x, _sec(x))

    return VectorField(SmoothMap.blackbox(closed, n, n), sec.domain, sec.label)


def build_family(sys: ControlSystem, sections: Sequence[Section]) -> FieldFamily:
    if not sections:
        raise ValueError("at least one section is required")
    labels = [s.label for s in sections]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate section labels: {labels}")
    grid = _probe_points(sys.state_model, 64, seed=1)
    uncovered = [x for x in grid if not any(s.domain.contains(x) for s in sections)]
    if uncovered:
        log.warning("%d of %d probe points are not covered by any section domain", len(uncovered), len(grid))
    return FieldFamily(closed_loop_field(sys, s) for s in sections)


@dataclass(frozen=True)
class Sampler:
    word_count: int = 200
    max_letters: int = 4
    time_scale: float = 1.0
    seed: int = 0
    durations: tuple[float, ...] | None = None

    def to_json(self) -> dict:
        d = {"word_count": self.word_count, "max_letters": self.max_letters,
             "time_scale": self.time_scale, "seed": self.seed}
        if self.durations is not None:
            d["durations"] = list(self.durations)
        return d

    @classmethod
    def from_json(cls, data: dict | None) -> "Sampler":
        data = dict(data or {})
        if "durations" in data and data["durations"] is not None:
            data["durations"] = tuple(float(t) for t in data["durations"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown sampler keys: {sorted(unknown)}")
        return cls(**data)


def random_words(labels: Sequence[str], sampler: Sampler) -> list[FlowWord]:
    """Words with uniform letter choice and durations uniform in [-time_scale, time_scale]
    (or uniform over ``sampler.durations`` when given)."""
    rng = np.random.default_rng(sampler.seed)
    words = []
    for _ in range(sampler.word_count):
        k = int(rng.integers(1, sampler.max_letters + 1))
        idx = rng.integers(0, len(labels), size=k)
        if sampler.durations is not None:
            ts = np.asarray(sampler.durations)[rng.integers(0, len(sampler.durations), size=k)]
        else:
            ts = rng.uniform(-sampler.time_scale, sampler.time_scale, size=k)
        words.append(FlowWord(tuple((labels[i], float(t)) for i, t in zip(idx, ts))))
    return words


def accessible_sample(family: FieldFamily, x0, sampler: Sampler | None = None,
                      cfg: IntegratorConfig | None = None, verify: bool = True) -> OrbitSample:
    """Point cloud of the accessible set through x0 from random flow words.

    The empty word is always included. Words that leave the subset model
    are dropped and counted. The cloud is sorted by word, then endpoint.
    """
    sampler = sampler or Sampler()
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    if x0.shape[0] != family.dim:
        raise DimensionError("base point dimension does not match the family")
    if not family.domain.contains(x0):
        raise ValueError(f"base point {x0.tolist()} is outside the state model")
    entries = [(FlowWord(), x0.copy())]
    dropped = 0
    for word in random_words(family.labels, sampler):
        try:
            x, _ = flow_word_apply(word, x0, family, cfg)
        except EscapedError:
            dropped += 1
            continue
        entries.append((word, x))
    entries.sort(key=lambda e: (e[0].sort_key(), tuple(e[1])))
    sample = OrbitSample(x0, [w for w, _ in entries], np.array([x for _, x in entries]),
                         family.domain, dropped=dropped)
    if verify:
        worst = replay_residual(sample, family, cfg)
        if worst > 1e-6:
            raise RuntimeError(f"replay residual {worst:.3g} exceeds 1e-6")
    return sample


def replay_residual(sample: OrbitSample, family: FieldFamily, cfg: IntegratorConfig | None = None) -> float:
    """Largest distance between a cloud point and a fresh replay of its word."""
    worst = 0.0
    for word, x in zip(sample.words, sample.points):
        y, _ = flow_word_apply(word, sample.base_point, family, cfg)
        worst = max(worst, float(np.max(np.abs(y - x))) if y.size else 0.0)
    return worst


def _group_matrices(action) -> list[np.ndarray]:
    return [np.asarray(g, dtype=float) for g in action.elements()]


def equivariance_residual(sys: ControlSystem, action, group_samples: Sequence | None = None,
                          state_samples: Sequence | None = None,
                          control_samples: Sequence | None = None) -> float:
    """max |phi(g x, u) - g phi(x, u)| over the samples (linear actions, Theta = (g, id))."""
    gs = _group_matrices(action) if group_samples is None else [np.asarray(g, float) for g in group_samples]
    xs = _probe_points(sys.state_model, 16, seed=2) if state_samples is None else np.asarray(state_samples, float)
    us = sys.control_model.sample(np.random.default_rng(3), 8) if control_samples is None \
        else np.asarray(control_samples, float)
    n, m = sys.n, sys.m
    worst = 0.0
    for g in gs:
        if g.shape != (n, n):
            raise DimensionError(f"group element of shape {g.shape} does not act on R^{n}")
        for x in np.asarray(xs, float).reshape(-1, n):
            for u in np.asarray(us, float).reshape(-1, m):
                r = sys.phi(g @ x, u) - g @ sys.phi(x, u)
                worst = max(worst, float(np.linalg.norm(r)))
    return worst


def section_invariance_residual(sec: Section, action, samples: Sequence | None = None,
                                group_samples: Sequence | None = None) -> float:
    """max |sigma(g x) - sigma(x)|; raises if g x leaves the section domain."""
    gs = _group_matrices(action) if group_samples is None else [np.asarray(g, float) for g in group_samples]
    n = sec.map.domain_dim
    xs = _probe_points(sec.domain, 16, seed=4) if samples is None else np.asarray(samples, float)
    worst = 0.0
    for x in np.asarray(xs, float).reshape(-1, n):
        for g in gs:
            gx = g @ x
            if not sec.domain.contains(gx):
                raise ValueError(f"g.x = {gx.tolist()} leaves the domain of section {sec.label!r}")
            worst = max(worst, float(np.linalg.norm(sec(gx) - sec(x))))
    return worst
