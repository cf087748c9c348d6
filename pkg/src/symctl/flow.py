"""Integral curves, flow words, and the open-domain test for derivations."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .smooth import NonFiniteError, VectorField, evaluate

TIME_LIMIT = "time-limit"
ESCAPED = "escaped-subset"
BLOW_UP = "blow-up"

_STATUS = {kernels.TIME_LIMIT: TIME_LIMIT, kernels.ESCAPED: ESCAPED, kernels.BLOW_UP: BLOW_UP}

VECTOR_FIELD = "vector-field"
DERIVATION_ONLY = "derivation-only"
INCONCLUSIVE = "inconclusive"


class IntegrationError(RuntimeError):
    pass


class DomainError(ValueError):
    """Initial point outside the field's subset model."""


class EscapedError(RuntimeError):
    """A flow word left the subset model before finishing a letter."""

    def __init__(self, index: int, label: str, curve: "IntegralCurve"):
        super().__init__(f"letter {index} ({label}) escaped the subset at t={curve.endpoint_time:.6g}")
        self.index = index
        self.label = label
        self.curve = curve


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "adaptive-RK45"
    step: float = 1e-3
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_time: float = 10.0
    escape_tol: float = 1e-8
    blowup: float = 1e12
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("adaptive-RK45", "fixed-RK4"):
            raise ValueError(f"unknown method {self.method!r}")
        for name in ("step", "rel_tol", "abs_tol", "max_time", "escape_tol", "blowup"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite")

    @property
    def method_code(self) -> int:
        return kernels.RK4 if self.method == "fixed-RK4" else kernels.DOPRI45

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json(cls, data: dict | None) -> "IntegratorConfig":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown integrator keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class IntegralCurve:
    ts: np.ndarray
    xs: np.ndarray
    t_minus: float = 0.0
    t_plus: float = 0.0
    termination_minus: str = TIME_LIMIT
    termination_plus: str = TIME_LIMIT

    @property
    def endpoint_time(self) -> float:
        """The end of the curve in the direction that was integrated."""
        return self.t_plus if self.t_plus != 0.0 or self.t_minus == 0.0 else self.t_minus

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.ts - t)))
        return self.xs[i]

    @property
    def start(self) -> np.ndarray:
        return self.at(0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{j + 1}" for j in range(self.xs.shape[1])])
        for t, x in zip(self.ts, self.xs):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        return buf.getvalue()


def _empty_poly(n):
    return (np.zeros(0), np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=np.int64), 0)


def _poly_data(p, n):
    if p is None:
        return _empty_poly(n)
    return p.arrays() + (p.nout,)


class _Stepper:
    """Backend dispatch for one field on one subset model."""

    def __init__(self, X: VectorField):
        self.n = X.dim
        self.X = X
        self.fast = X.is_polynomial and X.domain.is_polynomial
        if self.fast:
            eq, ineq = X.domain.constraint_polys()
            self.field = _poly_data(X.poly, self.n)
            self.eq = _poly_data(eq, self.n)
            self.ineq = _poly_data(ineq, self.n)

    def _rhs(self, x):
        y = evaluate(self.X.map, x)
        if not np.all(np.isfinite(y)):
            raise NonFiniteError(f"field {self.X.label!r} is not finite at {x.tolist()}")
        return y

    def run(self, x0, T, cfg: IntegratorConfig):
        args = (x0, float(T), cfg.method_code, cfg.step, cfg.rel_tol, cfg.abs_tol,
                cfg.escape_tol, cfg.blowup, cfg.max_steps)
        if self.fast:
            return kernels.integrate_poly(self.field, self.eq, self.ineq, *args)
        dom = self.X.domain
        eq = (lambda x: dom.residuals(x)[0]) if dom.equalities else None
        ineq = (lambda x: dom.residuals(x)[1]) if dom.inequalities else None
        return kernels.drive(self._rhs, eq, ineq, *args)

    def step(self, x, h, cfg: IntegratorConfig):
        if self.fast:
            return kernels.step_poly(self.field, x, h, cfg.method_code)
        return kernels.single_step(self._rhs, np.asarray(x, dtype=np.float64), h, cfg.method_code)


def _bisect_exit(stepper: _Stepper, x_last, h_out: float, cfg: IntegratorConfig, t_last: float):
    """Largest fraction of the failing step that stays in the set; returns (tau, x)."""
    dom = stepper.X.domain
    lo, hi = 0.0, h_out
    x_lo = np.asarray(x_last, dtype=np.float64)
    res = 1e-12 * max(1.0, abs(t_last))
    while abs(hi - lo) > res:
        mid = 0.5 * (lo + hi)
        x_mid = stepper.step(x_last, mid, cfg)
        if np.all(np.isfinite(x_mid)) and dom.violation(x_mid) <= cfg.escape_tol:
            lo, x_lo = mid, x_mid
        else:
            hi = mid
    return lo, x_lo


def integrate(X: VectorField, x0, t_target: float, cfg: IntegratorConfig | None = None) -> IntegralCurve:
    """Integral curve of X through x0 toward t_target (either sign).

    The run ends at ``t_target``, when the state leaves ``X.domain`` by more
    than ``cfg.escape_tol`` (the exit time is then refined by bisection), or
    when ``max|x|`` passes ``cfg.blowup``. The side not integrated keeps
    endpoint 0 with termination ``time-limit``.
    """
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    if x0.shape[0] != X.dim:
        raise DomainError(f"initial point has dimension {x0.shape[0]}, field lives in R^{X.dim}")
    if not X.domain.contains(x0, max(X.domain.membership_tol, cfg.escape_tol)):
        raise DomainError(f"initial point {x0.tolist()} is not in the domain of {X.label!r}")
    if not np.all(np.isfinite(evaluate(X.map, x0))):
        raise NonFiniteError(f"field {X.label!r} is not finite at {x0.tolist()}")

    stepper = _Stepper(X)
    ts, xs, status, h_last = stepper.run(x0, t_target, cfg)
    if status == kernels.NON_FINITE:
        raise NonFiniteError(f"non-finite state integrating {X.label!r} near t={ts[-1]:.6g}")
    if status == kernels.MAX_STEPS:
        raise IntegrationError(f"step budget exhausted integrating {X.label!r} at t={ts[-1]:.6g}")
    ts = np.asarray(ts, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64).reshape(len(ts), X.dim)
    if status == kernels.ESCAPED:
        tau, x_exit = _bisect_exit(stepper, xs[-1], h_last, cfg, ts[-1])
        if tau != 0.0:
            ts = np.append(ts, ts[-1] + tau)
            xs = np.vstack([xs, x_exit])

    if status == kernels.TIME_LIMIT and ts[-1] != t_target:
        # targets below the kernel's time resolution never take a step
        ts = np.append(ts, float(t_target))
        xs = np.vstack([xs, xs[-1]])

    termination = _STATUS[status]
    if t_target >= 0:
        return IntegralCurve(ts, xs, 0.0, float(ts[-1]), TIME_LIMIT, termination)
    return IntegralCurve(ts[::-1].copy(), xs[::-1].copy(), float(ts[-1]), 0.0, termination, TIME_LIMIT)


@dataclass(frozen=True)
class FlowWord:
    """Composite flow: letters applied left to right, each (field label, duration)."""

    letters: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple((str(l), float(t)) for l, t in self.letters))

    def __len__(self):
        return len(self.letters)

    def sort_key(self):
        return self.letters

    def to_json(self) -> list:
        return [[label, t] for label, t in self.letters]

    @classmethod
    def from_json(cls, data) -> "FlowWord":
        return cls(tuple((label, t) for label, t in data))


def flow_word_apply(word: FlowWord, x0, family, cfg: IntegratorConfig | None = None):
    """Apply each letter's flow in order; returns (endpoint, curves).

    ``family`` is anything indexable by field label. Raises
    :class:`EscapedError` if a letter stops before its full duration.
    """
    cfg = cfg or IntegratorConfig()
    x = np.asarray(x0, dtype=np.float64).reshape(-1).copy()
    curves = []
    for i, (label, t) in enumerate(word.letters):
        try:
            X = family[label]
        except KeyError:
            raise KeyError(f"flow word letter {i} refers to unknown field {label!r}") from None
        curve = integrate(X, x, t, cfg)
        curves.append(curve)
        end = curve.t_plus if t >= 0 else curve.t_minus
        term = curve.termination_plus if t >= 0 else curve.termination_minus
        if term != TIME_LIMIT or end != t:
            raise EscapedError(i, label, curve)
        x = curve.at(t).copy()
    return x, curves


@dataclass
class ProbeEvidence:
    probe: list
    t_minus: float
    t_plus: float
    termination_minus: str
    termination_plus: str
    verdict: str
    note: str = ""

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Classification:
    verdict: str
    evidence: list[ProbeEvidence] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "evidence": [e.to_json() for e in self.evidence]}


def _oscillates(stepper: _Stepper, x0, direction: float, cfg: IntegratorConfig) -> bool:
    """Does membership along the first instants flip more than once?"""
    dom = stepper.X.domain
    window = 20 * cfg.escape_tol
    states = []
    for k in range(1, 17):
        x = stepper.step(x0, direction * window * k / 16, cfg)
        states.append(dom.violation(x) <= cfg.escape_tol)
    flips = sum(a != b for a, b in zip(states, states[1:]))
    return flips > 1


def classify_derivation(X: VectorField, probes: Sequence, cfg: IntegratorConfig | None = None) -> Classification:
    """Decide whether X generates a local flow on its subset model.

    Integrates through every probe for ``cfg.max_time`` in both directions.
    A maximal curve that stops because it would leave the set has a closed
    endpoint inside the set, so its domain is not open: the field is then
    only a derivation. Blow-up and running out the clock are consistent with
    an open domain.
    """
    cfg = cfg or IntegratorConfig()
    if len(probes) == 0:
        raise ValueError("classify_derivation needs at least one probe")
    stepper = _Stepper(X)
    evidence = []
    for p in probes:
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        fwd = integrate(X, p, cfg.max_time, cfg)
        bwd = integrate(X, p, -cfg.max_time, cfg)
        verdict = VECTOR_FIELD
        note = ""
        for t_end, term, sign in ((bwd.t_minus, bwd.termination_minus, -1.0),
                                  (fwd.t_plus, fwd.termination_plus, 1.0)):
            if term != ESCAPED:
                continue
            if abs(t_end) <= 10 * cfg.escape_tol and _oscillates(stepper, p, sign, cfg):
                if verdict != DERIVATION_ONLY:
                    verdict = INCONCLUSIVE
                    note = "membership oscillates at the initial instant"
                continue
            verdict = DERIVATION_ONLY
            side = "forward" if sign > 0 else "backward"
            when = "immediately" if abs(t_end) <= 10 * cfg.escape_tol else f"at t={t_end:.6g}"
            note = f"{side} curve leaves the set {when}; maximal domain is closed there"
        evidence.append(ProbeEvidence(p.tolist(), bwd.t_minus, fwd.t_plus,
                                      bwd.termination_minus, fwd.termination_plus, verdict, note))
    verdicts = {e.verdict for e in evidence}
    if DERIVATION_ONLY in verdicts:
        overall = DERIVATION_ONLY
    elif INCONCLUSIVE in verdicts:
        overall = INCONCLUSIVE
    else:
        overall = VECTOR_FIELD
    return Classification(overall, evidence)
