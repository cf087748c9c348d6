"""Smooth maps, semialgebraic subset models, vector fields and brackets on R^n."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .poly import Polynomial

DEFAULT_H_REL = 1e-6
DEFAULT_MEMBERSHIP_TOL = 1e-9


class DimensionError(ValueError):
    pass


class NonFiniteError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """A map R^domain_dim -> R^codomain_dim.

    ``body`` is a :class:`Polynomial` (exact derivatives, serializable) or a
    plain callable evaluated in-process (central-difference derivatives).
    """

    domain_dim: int
    codomain_dim: int
    body: Polynomial | Callable[[np.ndarray], np.ndarray]
    h_rel: float = DEFAULT_H_REL

    def __post_init__(self):
        if self.domain_dim <= 0:
            raise DimensionError("domain_dim must be positive")
        if self.codomain_dim <= 0:
            raise DimensionError("zero-dimensional codomains are not allowed")
        if isinstance(self.body, Polynomial):
            if self.body.nvars != self.domain_dim or self.body.nout != self.codomain_dim:
                raise DimensionError(
                    f"polynomial is R^{self.body.nvars}->R^{self.body.nout}, "
                    f"declared R^{self.domain_dim}->R^{self.codomain_dim}")
        elif not callable(self.body):
            raise TypeError("body must be a Polynomial or a callable")

    @classmethod
    def poly(cls, p: Polynomial) -> "SmoothMap":
        return cls(p.nvars, p.nout, p)

    @classmethod
    def blackbox(cls, fn, domain_dim: int, codomain_dim: int, h_rel: float = DEFAULT_H_REL) -> "SmoothMap":
        return cls(domain_dim, codomain_dim, fn, h_rel)

    @property
    def is_polynomial(self) -> bool:
        return isinstance(self.body, Polynomial)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


def _point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {x.shape[0]}")
    return x


def evaluate(m: SmoothMap, x) -> np.ndarray:
    x = _point(x, m.domain_dim)
    if m.is_polynomial:
        return m.body(x)
    y = np.asarray(m.body(x), dtype=np.float64).reshape(-1)
    if y.shape[0] != m.codomain_dim:
        raise DimensionError(f"blackbox returned {y.shape[0]} values, declared {m.codomain_dim}")
    return y


def jacobian(m: SmoothMap, x) -> np.ndarray:
    """codomain_dim x domain_dim derivative matrix at x."""
    x = _point(x, m.domain_dim)
    if m.is_polynomial:
        return m.body.jacobian_map()(x).reshape(m.codomain_dim, m.domain_dim)
    return fd_jacobian(lambda z: evaluate(m, z), x, m.h_rel)


def fd_jacobian(fn, x: np.ndarray, h_rel: float = DEFAULT_H_REL) -> np.ndarray:
    """Central differences with step max(1, |x_j|) * h_rel per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(x.shape[0]):
        h = max(1.0, abs(x[j])) * h_rel
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.asarray(fn(xp), dtype=np.float64)
        fm = np.asarray(fn(xm), dtype=np.float64)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteError(f"non-finite evaluation near {x.tolist()}")
        cols.append((fp - fm) / (2 * h))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class SubsetModel:
    """Semialgebraic subset {x : eq_i(x) = 0, ineq_j(x) >= 0} of R^n, up to a tolerance."""

    ambient_dim: int
    equalities: tuple[SmoothMap, ...] = ()
    inequalities: tuple[SmoothMap, ...] = ()
    membership_tol: float = DEFAULT_MEMBERSHIP_TOL

    def __post_init__(self):
        object.__setattr__(self, "equalities", tuple(self.equalities))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        if self.ambient_dim <= 0:
            raise DimensionError("ambient_dim must be positive")
        if self.membership_tol <= 0:
            raise ValueError("membership_tol must be positive")
        for g in self.equalities + self.inequalities:
            if g.domain_dim != self.ambient_dim or g.codomain_dim != 1:
                raise DimensionError("constraints must be scalar functions on the ambient space")

    @classmethod
    def ambient(cls, n: int, membership_tol: float = DEFAULT_MEMBERSHIP_TOL) -> "SubsetModel":
        return cls(n, (), (), membership_tol)

    @property
    def is_ambient(self) -> bool:
        return not self.equalities and not self.inequalities

    @property
    def is_polynomial(self) -> bool:
        return all(g.is_polynomial for g in self.equalities + self.inequalities)

    def residuals(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = _point(x, self.ambient_dim)
        eq = np.array([evaluate(g, x)[0] for g in self.equalities])
        ineq = np.array([evaluate(g, x)[0] for g in self.inequalities])
        return eq, ineq

    def violation(self, x) -> float:
        """Largest constraint violation: max(|eq_i|, -ineq_j, 0)."""
        eq, ineq = self.residuals(x)
        v = 0.0
        if eq.size:
            v = max(v, float(np.max(np.abs(eq))))
        if ineq.size:
            v = max(v, float(np.max(-ineq)))
        return v

    def contains(self, x, tol: float | None = None) -> bool:
        return self.violation(x) <= (self.membership_tol if tol is None else tol)

    def constraint_polys(self) -> tuple[Polynomial | None, Polynomial | None]:
        """Equalities and inequalities stacked into polynomial maps (None when empty)."""
        eq = Polynomial.stack([g.body for g in self.equalities]) if self.equalities else None
        ineq = Polynomial.stack([g.body for g in self.inequalities]) if self.inequalities else None
        return eq, ineq

    def to_json(self) -> dict:
        if not self.is_polynomial:
            raise TypeError("only polynomial subset models serialize")
        return {
            "dim": self.ambient_dim,
            "equalities": [g.body.to_json()[0] for g in self.equalities],
            "inequalities": [g.body.to_json()[0] for g in self.inequalities],
            "tol": self.membership_tol,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SubsetModel":
        n = int(data["dim"])

        def scalar(terms):
            return SmoothMap.poly(Polynomial.from_json([terms], nvars=n))

        return cls(
            n,
            tuple(scalar(t) for t in data.get("equalities", [])),
            tuple(scalar(t) for t in data.get("inequalities", [])),
            float(data.get("tol", DEFAULT_MEMBERSHIP_TOL)),
        )


@dataclass(frozen=True, eq=False)
class VectorField:
    """An assignment x -> map(x) in R^n on a subset model.

    Being a vector field in the strict sense (flows with open domains) is not
    assumed; see :func:`symctl.flow.classify_derivation`.
    """

    map: SmoothMap
    domain: SubsetModel
    label: str = "X"

    def __post_init__(self):
        if self.map.domain_dim != self.map.codomain_dim:
            raise DimensionError("a vector field maps R^n to R^n")
        if self.map.domain_dim != self.domain.ambient_dim:
            raise DimensionError("field and domain have different ambient dimensions")

    @classmethod
    def from_poly(cls, p: Polynomial, domain: SubsetModel | None = None, label: str = "X") -> "VectorField":
        return cls(SmoothMap.poly(p), domain or SubsetModel.ambient(p.nvars), label)

    @classmethod
    def from_fn(cls, fn, n: int, domain: SubsetModel | None = None, label: str = "X") -> "VectorField":
        return cls(SmoothMap.blackbox(fn, n, n), domain or SubsetModel.ambient(n), label)

    @property
    def dim(self) -> int:
        return self.map.domain_dim

    @property
    def is_polynomial(self) -> bool:
        return self.map.is_polynomial

    @property
    def poly(self) -> Polynomial:
        if not self.is_polynomial:
            raise TypeError(f"field {self.label!r} is not polynomial")
        return self.map.body

    def __call__(self, x) -> np.ndarray:
        return evaluate(self.map, x)

    def relabel(self, label: str) -> "VectorField":
        return VectorField(self.map, self.domain, label)


def apply_derivation(X: VectorField, f: SmoothMap, x) -> float:
    """X . f at x, i.e. grad f(x) . X(x)."""
    if f.codomain_dim != 1:
        raise DimensionError("f must be scalar-valued")
    if f.domain_dim != X.dim:
        raise DimensionError("f and X live on different spaces")
    return float(jacobian(f, x)[0] @ X(x))


def derivation_poly(X: VectorField, f: Polynomial) -> Polynomial:
    """X . f as a polynomial (both polynomial)."""
    return f.directional(X.poly)


def lie_bracket(X: VectorField, Y: VectorField, x) -> np.ndarray:
    """[X, Y](x) = DY(x) X(x) - DX(x) Y(x)."""
    if X.dim != Y.dim:
        raise DimensionError("fields live on different spaces")
    return jacobian(Y.map, x) @ X(x) - jacobian(X.map, x) @ Y(x)


def bracket_field(X: VectorField, Y: VectorField, label: str | None = None) -> VectorField:
    """[X, Y] as a polynomial vector field, computed symbolically."""
    if X.dim != Y.dim:
        raise DimensionError("fields live on different spaces")
    p = Y.poly.directional(X.poly) - X.poly.directional(Y.poly)
    return VectorField.from_poly(p, X.domain, label or f"[{X.label},{Y.label}]")


def as_points(xs: Sequence, dim: int) -> np.ndarray:
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, dim) if dim > 1 else arr.reshape(-1, 1)
    if arr.shape[1] != dim:
        raise DimensionError(f"points must have dimension {dim}")
    return arr
