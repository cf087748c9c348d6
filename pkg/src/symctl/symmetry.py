"""Linear group actions, invariant maps, reduction of invariant fields to the
orbit space, and horizontal lifts at free points."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .flow import TIME_LIMIT, IntegratorConfig, integrate
from .poly import Polynomial, express_in
from .smooth import DimensionError, SmoothMap, SubsetModel, VectorField, evaluate, jacobian

DEFAULT_DEGREE_BOUND = 6
INVARIANCE_TOL = 1e-6


class NotInvariantError(ValueError):
    def __init__(self, message: str, witnesses=()):
        super().__init__(message)
        self.witnesses = [list(map(float, w)) for w in witnesses]


class DegreeBoundError(ValueError):
    pass


class NonFreeError(ValueError):
    pass


def _default_params() -> tuple[float, ...]:
    return tuple(np.linspace(-np.pi, np.pi, 8))


@dataclass(frozen=True, eq=False)
class GroupAction:
    """A finite matrix group or a one-parameter group t -> expm(t A) acting linearly on R^n."""

    kind: str
    matrices: tuple = ()
    generator: np.ndarray | None = None
    sample_params: tuple[float, ...] = field(default_factory=_default_params)
    name: str = ""

    def __post_init__(self):
        if self.kind == "finite":
            mats = tuple(np.array(g, dtype=float) for g in self.matrices)
            if not mats:
                raise ValueError("finite group needs at least one matrix")
            n = mats[0].shape[0]
            if any(g.shape != (n, n) for g in mats):
                raise DimensionError("group matrices must be square and of one size")
            object.__setattr__(self, "matrices", mats)
            self._check_closure()
        elif self.kind == "one-parameter":
            A = np.array(self.generator, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise DimensionError("generator must be a square matrix")
            object.__setattr__(self, "generator", A)
            object.__setattr__(self, "sample_params", tuple(float(t) for t in self.sample_params))
            self._check_one_parameter()
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @classmethod
    def finite(cls, matrices, name: str = "") -> "GroupAction":
        return cls("finite", matrices=tuple(matrices), name=name)

    @classmethod
    def one_parameter(cls, generator, sample_params=None, name: str = "") -> "GroupAction":
        params = _default_params() if sample_params is None else tuple(sample_params)
        return cls("one-parameter", generator=generator, sample_params=params, name=name)

    def _find(self, g, tol=1e-10) -> bool:
        return any(np.max(np.abs(g - h)) <= tol for h in self.matrices)

    def _check_closure(self):
        n = self.dim
        if not self._find(np.eye(n)):
            raise ValueError("finite group must contain the identity")
        for a in self.matrices:
            if not self._find(np.linalg.inv(a)):
                raise ValueError("finite group is not closed under inverses")
            for b in self.matrices:
                if not self._find(a @ b):
                    raise ValueError("finite group is not closed under products")

    def _check_one_parameter(self):
        n = self.dim
        if np.max(np.abs(self.element(0.0) - np.eye(n))) > 1e-12:
            raise ValueError("element(0) is not the identity")
        for s in self.sample_params:
            for t in self.sample_params:
                d = self.element(s) @ self.element(t) - self.element(s + t)
                if np.max(np.abs(d)) > 1e-9:
                    raise ValueError("element(s) element(t) != element(s + t)")

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0] if self.kind == "finite" else self.generator.shape[0]

    def element(self, t: float) -> np.ndarray:
        if self.kind != "one-parameter":
            raise TypeError("element(t) is only defined for one-parameter groups")
        return expm(t * self.generator)

    def elements(self) -> list[np.ndarray]:
        if self.kind == "finite":
            return list(self.matrices)
        return [self.element(t) for t in self.sample_params]

    def generator_vectors(self, x) -> np.ndarray:
        """Infinitesimal generators at x as columns (n x 0 for finite groups)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "finite":
            return np.zeros((self.dim, 0))
        return (self.generator @ x).reshape(-1, 1)

    def stabilizer_nontrivial(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        scale = max(1.0, float(np.max(np.abs(x))))
        if self.kind == "one-parameter":
            return float(np.linalg.norm(self.generator @ x)) <= tol * scale
        I = np.eye(self.dim)
        return any(np.max(np.abs(g - I)) > 1e-10 and np.max(np.abs(g @ x - x)) <= tol * scale
                   for g in self.matrices)

    def to_json(self) -> dict:
        if self.kind == "finite":
            return {"matrices": [g.tolist() for g in self.matrices]}
        return {"generator": self.generator.tolist(), "sample_params": list(self.sample_params)}


@dataclass(frozen=True, eq=False)
class QuotientModel:
    """Orbit space as a semialgebraic subset of invariant coordinates."""

    model: SubsetModel

    @property
    def dim(self) -> int:
        return self.model.ambient_dim

    def contains(self, s, tol=None) -> bool:
        return self.model.contains(s, tol)


def _sample_points(n: int, k: int = 24, seed: int = 0, scale: float = 2.0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-scale, scale, size=(k, n))


@dataclass(frozen=True, eq=False)
class InvariantMap:
    """Polynomial invariants rho: R^n -> R^k with the image model they cut out."""

    rho: SmoothMap
    action: GroupAction
    image_model: QuotientModel

    def __post_init__(self):
        if self.rho.domain_dim != self.action.dim:
            raise DimensionError("rho and the action act on different spaces")
        if self.rho.codomain_dim != self.image_model.dim:
            raise DimensionError("rho's codomain does not match the quotient model")
        pts = _sample_points(self.action.dim)
        worst = max(float(np.max(np.abs(self(g @ x) - self(x))))
                    for x in pts for g in self.action.elements())
        if worst > 1e-9:
            raise NotInvariantError(f"rho is not invariant (residual {worst:.3g})")
        for x in pts:
            s = self(x)
            if not self.image_model.contains(s):
                raise ValueError(f"rho({x.tolist()}) = {s.tolist()} is outside the quotient model")

    def __call__(self, x) -> np.ndarray:
        return evaluate(self.rho, x)

    def jacobian(self, x) -> np.ndarray:
        return jacobian(self.rho, x)


@dataclass(frozen=True, eq=False)
class ReducedVectorField:
    field: VectorField
    provenance: str
    closed_form: Polynomial | None = None

    @property
    def numeric_only(self) -> bool:
        return self.closed_form is None

    def __call__(self, s) -> np.ndarray:
        return self.field(s)

    def describe(self) -> list[str]:
        if self.closed_form is None:
            return ["numeric-only"]
        names = ["s"] if self.closed_form.nvars == 1 else [f"s{j + 1}" for j in range(self.closed_form.nvars)]
        return self.closed_form.to_str(names)


def _matrices(action: GroupAction, group_samples) -> list[np.ndarray]:
    if group_samples is None:
        return action.elements()
    return [np.asarray(g, dtype=float) for g in group_samples]


def field_invariance_residual(X: VectorField, action: GroupAction, samples, group_samples=None) -> float:
    """max |g X(x) - X(g x)| over sampled group elements and points."""
    if X.dim != action.dim:
        raise DimensionError("field and action live on different spaces")
    worst = 0.0
    for x in np.asarray(samples, dtype=float).reshape(-1, X.dim):
        for g in _matrices(action, group_samples):
            worst = max(worst, float(np.linalg.norm(g @ X(x) - X(g @ x))))
    return worst


def _pushforward(X: VectorField, inv: InvariantMap, x) -> np.ndarray:
    return inv.jacobian(x) @ X(x)


def _preimage(inv: InvariantMap, s, seeds: np.ndarray, tol: float = 1e-12, iters: int = 60) -> np.ndarray:
    """Some x with rho(x) = s, by Gauss-Newton from the closest seed."""
    s = np.asarray(s, dtype=float)
    vals = np.array([inv(x) for x in seeds])
    x = seeds[int(np.argmin(np.linalg.norm(vals - s, axis=1)))].copy()
    scale = max(1.0, float(np.max(np.abs(s))))
    for _ in range(iters):
        r = inv(x) - s
        if float(np.max(np.abs(r))) <= tol * scale:
            return x
        step, *_ = np.linalg.lstsq(inv.jacobian(x), r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        x = x - step
    r = inv(x) - s
    if float(np.max(np.abs(r))) > 1e-8 * scale:
        raise ValueError(f"no preimage found for {s.tolist()} (residual {np.max(np.abs(r)):.3g})")
    return x


def reduce_field(X: VectorField, inv: InvariantMap, witness_samples,
                 degree_bound: int = DEFAULT_DEGREE_BOUND, strict: bool = False) -> ReducedVectorField:
    """Push an invariant field down to the orbit space: Xbar(rho(x)) = Drho(x) X(x).

    Tries a closed polynomial form in the invariant coordinates first (exact
    rational linear algebra up to ``degree_bound``). Otherwise the reduced
    field is evaluated numerically through preimages of rho, flagged
    numeric-only; with ``strict=True`` that case raises DegreeBoundError.
    """
    W = np.asarray(witness_samples, dtype=float).reshape(-1, X.dim)
    res = field_invariance_residual(X, inv.action, W)
    if res > INVARIANCE_TOL:
        bad = [x for x in W if field_invariance_residual(X, inv.action, [x]) > INVARIANCE_TOL]
        raise NotInvariantError(
            f"field {X.label!r} is not invariant (residual {res:.3g} > {INVARIANCE_TOL:g})", bad)

    pts = np.vstack([W] + [W @ g.T for g in inv.action.elements()])
    rho = np.array([inv(x) for x in pts])
    push = np.array([_pushforward(X, inv, x) for x in pts])
    for i in range(len(pts)):
        close = np.max(np.abs(rho - rho[i]), axis=1) <= 1e-8
        diff = np.max(np.abs(push[close] - push[i]), axis=1)
        if np.any(diff > 1e-5):
            j = int(np.flatnonzero(close)[int(np.argmax(diff))])
            raise NotInvariantError(
                "pushforward is not well defined: same orbit, different reduced vectors",
                [pts[i], pts[j]])

    quotient = inv.image_model.model
    label = f"{X.label}/G"
    if X.is_polynomial and inv.rho.is_polynomial:
        target = inv.rho.body.directional(X.poly)
        q = express_in(target, inv.rho.body, degree_bound)
        if q is not None:
            q = q.chop(1e-12)
            field_ = VectorField(SmoothMap.poly(q), quotient, label)
            return ReducedVectorField(field_, X.label, q)
    if strict:
        raise DegreeBoundError(f"no polynomial reduced form of degree <= {degree_bound}")

    seeds = pts.copy()

    def reduced(s, _X=X, _inv=inv, _seeds=seeds):
        return _pushforward(_X, _inv, _preimage(_inv, s, _seeds))

    field_ = VectorField(SmoothMap.blackbox(reduced, inv.rho.codomain_dim, inv.rho.codomain_dim),
                         quotient, label)
    return ReducedVectorField(field_, X.label, None)


def commutation_rows(X: VectorField, inv: InvariantMap, x0, t_grid: Sequence[float],
                     cfg: IntegratorConfig | None = None, Xbar: ReducedVectorField | None = None):
    """Per-t rows (t, residual or None, note) for |rho(exp(tX) x0) - exp(t Xbar) rho(x0)|."""
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if Xbar is None:
        Xbar = reduce_field(X, inv, _sample_points(X.dim, 16, seed=5, scale=1.5))
    s0 = inv(x0)
    rows = []
    for t in t_grid:
        t = float(t)
        if t == 0.0:
            rows.append((t, 0.0, ""))
            continue
        up = integrate(X, x0, t, cfg)
        down = integrate(Xbar.field, s0, t, cfg)
        notes = []
        for name, c in (("upstairs", up), ("reduced", down)):
            end = c.t_plus if t > 0 else c.t_minus
            term = c.termination_plus if t > 0 else c.termination_minus
            if term != TIME_LIMIT or end != t:
                notes.append(f"{name} flow stopped at t={end:.6g} ({term})")
        if notes:
            rows.append((t, None, "; ".join(notes)))
            continue
        r = inv(up.at(t)) - down.at(t)
        rows.append((t, float(np.max(np.abs(r))), ""))
    return rows


def reduction_commutation_residual(X: VectorField, inv: InvariantMap, x0, t_grid: Sequence[float],
                                   cfg: IntegratorConfig | None = None,
                                   Xbar: ReducedVectorField | None = None) -> float:
    """Max over the grid (where both flows exist) of |rho(exp(tX) x0) - exp(t Xbar)(rho(x0))|."""
    rows = commutation_rows(X, inv, x0, t_grid, cfg, Xbar)
    vals = [r for _, r, _ in rows if r is not None]
    return max(vals, default=0.0)


def horizontal_lift(Xbar: ReducedVectorField, inv: InvariantMap, x) -> np.ndarray:
    """The v with Drho(x) v = Xbar(rho(x)) and v orthogonal to the orbit through x.

    Raises NonFreeError at points with nontrivial stabilizer.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if inv.action.stabilizer_nontrivial(x):
        raise NonFreeError(f"the action is not free at {x.tolist()}")
    T = inv.action.generator_vectors(x)
    D = inv.jacobian(x)
    A = np.vstack([D, T.T])
    b = np.concatenate([Xbar(inv(x)), np.zeros(T.shape[1])])
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.size < x.size or sv[x.size - 1] <= 1e-12 * max(1.0, sv[0]):
        raise NonFreeError(f"orbit map is degenerate at {x.tolist()}; no unique lift")
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.max(np.abs(A @ v - b))) if b.size else 0.0
    if resid > 1e-10 * max(1.0, float(np.max(np.abs(b)))):
        raise ValueError(f"reduced vector is not tangent to the image of rho at {x.tolist()}")
    return v


def _scalar(terms: dict, n: int) -> SmoothMap:
    return SmoothMap.poly(Polynomial(n, [terms]))


CATALOG = ("z2-line", "so2-plane", "z2-plane")


def catalog_action(name: str) -> tuple[GroupAction, InvariantMap]:
    if name == "z2-line":
        action = GroupAction.finite([[[1.0]], [[-1.0]]], name=name)
        rho = Polynomial(1, [{(2,): 1.0}])
        quotient = SubsetModel(1, (), (_scalar({(1,): 1.0}, 1),))
    elif name == "so2-plane":
        action = GroupAction.one_parameter([[0.0, -1.0], [1.0, 0.0]], name=name)
        rho = Polynomial(2, [{(2, 0): 1.0, (0, 2): 1.0}])
        quotient = SubsetModel(1, (), (_scalar({(1,): 1.0}, 1),))
    elif name == "z2-plane":
        action = GroupAction.finite([np.eye(2), -np.eye(2)], name=name)
        rho = Polynomial(2, [{(2, 0): 1.0}, {(1, 1): 1.0}, {(0, 2): 1.0}])
        relation = _scalar({(1, 0, 1): 1.0, (0, 2, 0): -1.0}, 3)
        quotient = SubsetModel(3, (relation,), (_scalar({(1, 0, 0): 1.0}, 3), _scalar({(0, 0, 1): 1.0}, 3)))
    else:
        raise KeyError(f"unknown catalog action {name!r}; known: {', '.join(CATALOG)}")
    return action, InvariantMap(SmoothMap.poly(rho), action, QuotientModel(quotient))
