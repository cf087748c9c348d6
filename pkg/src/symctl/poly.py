"""Sparse multivariate polynomial maps.

A :class:`Polynomial` is a vector-valued polynomial map ``R^n -> R^m``. Each
output coordinate is a dict from exponent tuples to float coefficients. The
class is immutable; arithmetic returns new instances.

Serialized form (one list per output coordinate)::

    [[{"c": 2.0, "e": [1, 0]}, {"c": -1.0, "e": [0, 1]}], ...]
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]
Component = dict[Exponent, float]

ZERO_TOL = 0.0


def _clean(comp: Mapping[Exponent, float]) -> Component:
    return {e: float(c) for e, c in comp.items() if c != 0.0}


def _add(a: Component, b: Component, scale: float = 1.0) -> Component:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0.0) + scale * c
    return _clean(out)


def _mul(a: Component, b: Component) -> Component:
    out: dict[Exponent, float] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(i + j for i, j in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return _clean(out)


def _deriv(a: Component, j: int) -> Component:
    out: dict[Exponent, float] = {}
    for e, c in a.items():
        k = e[j]
        if k == 0:
            continue
        e2 = e[:j] + (k - 1,) + e[j + 1:]
        out[e2] = out.get(e2, 0.0) + c * k
    return _clean(out)


def _const(value: float, nvars: int) -> Component:
    return _clean({(0,) * nvars: value})


def _pow(a: Component, k: int, nvars: int) -> Component:
    result = _const(1.0, nvars)
    base = a
    while k:
        if k & 1:
            result = _mul(result, base)
        k >>= 1
        if k:
            base = _mul(base, base)
    return result


class Polynomial:
    """Vector-valued polynomial map with exact derivatives."""

    __slots__ = ("nvars", "components", "_arrays", "_jac")

    def __init__(self, nvars: int, components: Iterable[Mapping[Sequence[int], float]]):
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        comps = []
        for comp in components:
            clean = {}
            for e, c in comp.items():
                e = tuple(int(k) for k in e)
                if len(e) != nvars:
                    raise ValueError(f"exponent {e} has wrong length for {nvars} variables")
                if any(k < 0 for k in e):
                    raise ValueError(f"negative exponent {e}")
                clean[e] = clean.get(e, 0.0) + float(c)
            comps.append(_clean(clean))
        if not comps:
            raise ValueError("polynomial map needs at least one output coordinate")
        self.nvars = nvars
        self.components: tuple[Component, ...] = tuple(comps)
        self._arrays = None
        self._jac = None

    # construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, nvars: int, nout: int = 1) -> "Polynomial":
        return cls(nvars, [{} for _ in range(nout)])

    @classmethod
    def constant(cls, values: Sequence[float], nvars: int) -> "Polynomial":
        return cls(nvars, [_const(v, nvars) for v in values])

    @classmethod
    def variable(cls, j: int, nvars: int) -> "Polynomial":
        e = [0] * nvars
        e[j] = 1
        return cls(nvars, [{tuple(e): 1.0}])

    @classmethod
    def linear(cls, matrix) -> "Polynomial":
        """The map x -> A x."""
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        m, n = A.shape
        comps = []
        for i in range(m):
            comp = {}
            for j in range(n):
                if A[i, j] != 0.0:
                    e = [0] * n
                    e[j] = 1
                    comp[tuple(e)] = A[i, j]
            comps.append(comp)
        return cls(n, comps)

    @classmethod
    def stack(cls, polys: Sequence["Polynomial"]) -> "Polynomial":
        nvars = {p.nvars for p in polys}
        if len(nvars) != 1:
            raise ValueError("cannot stack polynomials in different variable counts")
        return cls(nvars.pop(), [c for p in polys for c in p.components])

    # basic properties -------------------------------------------------------

    @property
    def nout(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        degs = [sum(e) for comp in self.components for e in comp]
        return max(degs) if degs else 0

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for comp in self.components for c in comp.values())

    def __getitem__(self, i: int) -> "Polynomial":
        return Polynomial(self.nvars, [self.components[i]])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.components == other.components

    def __hash__(self):
        return hash((self.nvars, tuple(tuple(sorted(c.items())) for c in self.components)))

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {self.to_json()!r})"

    # arithmetic ----------------------------------------------------------------

    def _check(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars or self.nout != other.nout:
            raise ValueError("polynomial shape mismatch")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        return Polynomial(self.nvars, [_add(a, b) for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        return Polynomial(self.nvars, [_add(a, b, -1.0) for a, b in zip(self.components, other.components)])

    def __neg__(self) -> "Polynomial":
        return self.scale(-1.0)

    def scale(self, k: float) -> "Polynomial":
        return Polynomial(self.nvars, [{e: k * c for e, c in comp.items()} for comp in self.components])

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        """Componentwise product; a scalar polynomial broadcasts."""
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        if self.nvars != other.nvars:
            raise ValueError("polynomial shape mismatch")
        if other.nout == 1 and self.nout != 1:
            return Polynomial(self.nvars, [_mul(a, other.components[0]) for a in self.components])
        if self.nout == 1 and other.nout != 1:
            return Polynomial(self.nvars, [_mul(self.components[0], b) for b in other.components])
        self._check(other)
        return Polynomial(self.nvars, [_mul(a, b) for a, b in zip(self.components, other.components)])

    __rmul__ = __mul__

    def dot(self, other: "Polynomial") -> "Polynomial":
        """Scalar polynomial sum_i self_i * other_i."""
        self._check(other)
        acc: Component = {}
        for a, b in zip(self.components, other.components):
            acc = _add(acc, _mul(a, b))
        return Polynomial(self.nvars, [acc])

    def pow(self, k: int) -> "Polynomial":
        return Polynomial(self.nvars, [_pow(c, k, self.nvars) for c in self.components])

    def diff(self, j: int) -> "Polynomial":
        return Polynomial(self.nvars, [_deriv(c, j) for c in self.components])

    def jacobian(self) -> list[list["Polynomial"]]:
        """Matrix of scalar polynomials J[i][j] = d(self_i)/dx_j."""
        return [[Polynomial(self.nvars, [_deriv(c, j)]) for j in range(self.nvars)]
                for c in self.components]

    def jacobian_map(self) -> "Polynomial":
        """All partials stacked row-major into one map with nout * nvars outputs."""
        if self._jac is None:
            self._jac = Polynomial(self.nvars, [_deriv(c, j) for c in self.components
                                                for j in range(self.nvars)])
        return self._jac

    def directional(self, field: "Polynomial") -> "Polynomial":
        """J(x) . field(x) as a polynomial map (field has nout == nvars)."""
        if field.nvars != self.nvars or field.nout != self.nvars:
            raise ValueError("field must map R^n to R^n with the same n")
        comps = []
        for c in self.components:
            acc: Component = {}
            for j in range(self.nvars):
                d = _deriv(c, j)
                if d:
                    acc = _add(acc, _mul(d, field.components[j]))
            comps.append(acc)
        return Polynomial(self.nvars, comps)

    def compose(self, inner: "Polynomial") -> "Polynomial":
        """self o inner; inner.nout must equal self.nvars."""
        if inner.nout != self.nvars:
            raise ValueError(f"inner map has {inner.nout} outputs, need {self.nvars}")
        n = inner.nvars
        cache: dict[tuple[int, int], Component] = {}

        def power(j: int, k: int) -> Component:
            if (j, k) not in cache:
                cache[(j, k)] = _pow(inner.components[j], k, n)
            return cache[(j, k)]

        comps = []
        for comp in self.components:
            acc: Component = {}
            for e, c in comp.items():
                term = _const(c, n)
                for j, k in enumerate(e):
                    if k:
                        term = _mul(term, power(j, k))
                acc = _add(acc, term)
            comps.append(acc)
        return Polynomial(n, comps)

    def embed(self, nvars: int, positions: Sequence[int]) -> "Polynomial":
        """Re-express in a larger variable set; variable j goes to slot positions[j]."""
        comps = []
        for comp in self.components:
            new = {}
            for e, c in comp.items():
                e2 = [0] * nvars
                for j, k in enumerate(e):
                    e2[positions[j]] += k
                new[tuple(e2)] = c
            comps.append(new)
        return Polynomial(nvars, comps)

    def chop(self, tol: float = 1e-12) -> "Polynomial":
        return Polynomial(self.nvars, [{e: c for e, c in comp.items() if abs(c) > tol}
                                       for comp in self.components])

    # evaluation --------------------------------------------------------------

    def arrays(self):
        """Flat (coef, exps, rows) arrays consumed by the numeric kernels."""
        if self._arrays is None:
            coefs, exps, rows = [], [], []
            for i, comp in enumerate(self.components):
                for e, c in sorted(comp.items()):
                    coefs.append(c)
                    exps.append(e)
                    rows.append(i)
            self._arrays = (
                np.asarray(coefs, dtype=np.float64),
                np.asarray(exps, dtype=np.int64).reshape(len(coefs), self.nvars),
                np.asarray(rows, dtype=np.int64),
            )
        return self._arrays

    def __call__(self, x) -> np.ndarray:
        from . import kernels

        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.nvars:
            raise ValueError(f"expected a point of dimension {self.nvars}, got {x.shape[0]}")
        coef, exps, rows = self.arrays()
        out = np.zeros(self.nout)
        kernels.poly_eval(coef, exps, rows, x, out)
        return out

    # serialization -----------------------------------------------------------

    def to_json(self) -> list[list[dict]]:
        return [[{"c": c, "e": list(e)} for e, c in sorted(comp.items())]
                for comp in self.components]

    @classmethod
    def from_json(cls, data, nvars: int | None = None) -> "Polynomial":
        if not isinstance(data, list) or not data:
            raise ValueError("polynomial must be a non-empty list of term lists")
        comps = []
        for comp in data:
            if not isinstance(comp, list):
                raise ValueError("each output coordinate must be a list of terms")
            d: dict = {}
            for term in comp:
                e = tuple(int(k) for k in term["e"])
                if nvars is None:
                    nvars = len(e)
                d[e] = d.get(e, 0.0) + float(term["c"])
            comps.append(d)
        if nvars is None:
            raise ValueError("cannot infer variable count from an all-zero polynomial")
        return cls(nvars, comps)

    def to_str(self, names: Sequence[str] | None = None) -> list[str]:
        """Human-readable rendering of each coordinate, e.g. ``2·s``."""
        if names is None:
            names = ["x"] if self.nvars == 1 else [f"x{j + 1}" for j in range(self.nvars)]
        out = []
        for comp in self.components:
            parts = []
            for e, c in sorted(comp.items(), key=lambda t: (-sum(t[0]), tuple(-k for k in t[0]))):
                mono = "·".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k)
                coef = repr(float(abs(c))).removesuffix(".0")
                if not mono:
                    body = coef
                elif abs(c) == 1.0:
                    body = mono
                else:
                    body = f"{coef}·{mono}"
                sign = "-" if c < 0 else "+"
                parts.append((sign, body))
            if not parts:
                out.append("0")
                continue
            s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
            for sign, body in parts[1:]:
                s += f" {sign} {body}"
            out.append(s)
        return out


def monomials(nvars: int, max_degree: int) -> list[Exponent]:
    """All exponent tuples of total degree <= max_degree, graded order."""
    out = []
    for d in range(max_degree + 1):
        for combo in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for j in combo:
                e[j] += 1
            out.append(tuple(e))
    return out


def solve_exact(columns: list[dict], rhs: dict) -> list[Fraction] | None:
    """Exact solution of sum_k a_k * columns[k] == rhs over the rationals.

    Columns and rhs are sparse vectors (dict row-key -> float). Floats are
    converted to exact fractions. Returns one solution (free variables set to
    zero) or None if the system is inconsistent.
    """
    keys = sorted({k for col in columns for k in col} | set(rhs))
    index = {k: i for i, k in enumerate(keys)}
    ncols = len(columns)
    rows = [[Fraction(0)] * (ncols + 1) for _ in keys]
    for j, col in enumerate(columns):
        for k, v in col.items():
            rows[index[k]][j] = Fraction(v)
    for k, v in rhs.items():
        rows[index[k]][ncols] = Fraction(v)

    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        p = rows[r][c]
        rows[r] = [v / p for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    for i in range(r, len(rows)):
        if rows[i][ncols] != 0:
            return None
    sol = [Fraction(0)] * ncols
    for i, c in enumerate(pivots):
        sol[c] = rows[i][ncols]
    return sol


def express_in(target: Polynomial, basis: Polynomial, max_degree: int,
               passthrough: Sequence[int] = ()) -> Polynomial | None:
    """Find q with target(x) == q(basis(x), x[passthrough]) identically.

    ``basis`` and ``target`` live in the same variables. The result ``q`` has
    ``basis.nout + len(passthrough)`` variables and degree <= max_degree, or
    None when no such polynomial exists. Coefficients are solved exactly.
    """
    if basis.nvars != target.nvars:
        raise ValueError("basis and target must share variables")
    nv = target.nvars
    gens = list(basis.components)
    for j in passthrough:
        e = [0] * nv
        e[j] = 1
        gens.append({tuple(e): 1.0})
    k = len(gens)
    monos = monomials(k, max_degree)
    cols = []
    pow_cache: dict[tuple[int, int], Component] = {}
    for alpha in monos:
        col = _const(1.0, nv)
        for i, a in enumerate(alpha):
            if a:
                if (i, a) not in pow_cache:
                    pow_cache[(i, a)] = _pow(gens[i], a, nv)
                col = _mul(col, pow_cache[(i, a)])
        cols.append(col)
    out = []
    for comp in target.components:
        sol = solve_exact(cols, comp)
        if sol is None:
            return None
        out.append({alpha: float(v) for alpha, v in zip(monos, sol) if v != 0})
    return Polynomial(k, out)
