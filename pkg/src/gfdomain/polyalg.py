"""Truncated multivariate polynomials and polynomial maps.

Coefficients are stored densely over all monomials of total degree <= order in
graded-lexicographic order (degree ascending, then lexicographically
descending exponents). Index tables are cached per ``(nvars, order)``.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .interval import Box, Interval, up

__all__ = [
    "ArityMismatch",
    "NonzeroConstantPart",
    "SingularLinearPart",
    "MonomialIndex",
    "monomial_index",
    "MultivarPoly",
    "PolyMap",
    "poly_arith",
    "poly_compose",
    "poly_calculus",
    "invert_truncated_map",
    "poly_bound",
    "DEFAULT_ORDER",
    "MAX_ORDER",
]

DEFAULT_ORDER = 7
MAX_ORDER = 12
CLEANUP = 1e-300


class ArityMismatch(ValueError):
    pass


class NonzeroConstantPart(ValueError):
    pass


class SingularLinearPart(np.linalg.LinAlgError):
    pass


def _exponents(nvars: int, order: int) -> np.ndarray:
    rows: list[tuple[int, ...]] = []
    for d in range(order + 1):
        block = []
        # stars and bars: compositions of d into nvars parts
        for cuts in itertools.combinations(range(d + nvars - 1), nvars - 1):
            bounds = (-1,) + cuts + (d + nvars - 1,)
            block.append(tuple(bounds[i + 1] - bounds[i] - 1 for i in range(nvars)))
        block.sort(reverse=True)
        rows.extend(block)
    return np.array(rows, dtype=np.int32).reshape(-1, nvars)


class MonomialIndex:
    """Monomial bookkeeping for ``nvars`` variables truncated at ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        self.exps = _exponents(nvars, order)
        self.size = len(self.exps)
        self.degree = self.exps.sum(axis=1).astype(np.int32)
        self.starts = np.searchsorted(self.degree, np.arange(order + 2)).astype(np.int64)
        self.lookup = {tuple(int(x) for x in e): i for i, e in enumerate(self.exps)}
        self.even = np.all(self.exps % 2 == 0, axis=1)
        self._base = order + 1
        self._keys = self._encode(self.exps)
        self._key_order = np.argsort(self._keys)
        self._sorted_keys = self._keys[self._key_order]
        self._subst: dict[int, np.ndarray] = {}

    def __repr__(self) -> str:
        return f"MonomialIndex(nvars={self.nvars}, order={self.order}, size={self.size})"

    def _encode(self, exps: np.ndarray) -> np.ndarray:
        weights = self._base ** np.arange(self.nvars - 1, -1, -1, dtype=np.int64)
        return exps.astype(np.int64) @ weights

    def find(self, exps: np.ndarray) -> np.ndarray:
        """Indices of the given exponent rows (all must have degree <= order)."""
        keys = self._encode(np.atleast_2d(exps))
        pos = np.searchsorted(self._sorted_keys, keys)
        return self._key_order[pos].astype(np.int32)

    def subst_table(self, var: int) -> np.ndarray:
        """Position of each monomial with the exponent of ``var`` zeroed."""
        if var not in self._subst:
            e = self.exps.copy()
            e[:, var] = 0
            self._subst[var] = self.find(e)
        return self._subst[var]

    def index(self, exps: Sequence[int]) -> int:
        return self.lookup[tuple(int(e) for e in exps)]

    def degree_slice(self, d: int) -> slice:
        return slice(int(self.starts[d]), int(self.starts[d + 1]))

    @cached_property
    def mul_pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ia, ib, ik = [], [], []
        for i in range(self.size):
            room = self.order - int(self.degree[i])
            js = np.arange(int(self.starts[room + 1]), dtype=np.int32)
            ia.append(np.full(js.size, i, dtype=np.int32))
            ib.append(js)
            ik.append(self.find(self.exps[i] + self.exps[js]))
        return (np.concatenate(ia), np.concatenate(ib), np.concatenate(ik))

    @cached_property
    def max_terms_per_coeff(self) -> int:
        return int(np.bincount(self.mul_pairs[2], minlength=self.size).max())

    @cached_property
    def parent(self) -> tuple[np.ndarray, np.ndarray]:
        """For each monomial of degree >= 1: (index with one factor removed, that variable)."""
        par = np.zeros(self.size, dtype=np.int32)
        var = np.zeros(self.size, dtype=np.int32)
        for k in range(1, self.size):
            j = int(np.nonzero(self.exps[k])[0][0])
            e = self.exps[k].copy()
            e[j] -= 1
            par[k] = self.lookup[tuple(int(x) for x in e)]
            var[k] = j
        return par, var

    @lru_cache(maxsize=None)
    def deriv_table(self, var: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = np.nonzero(self.exps[:, var] > 0)[0].astype(np.int32)
        e = self.exps[src].copy()
        fac = e[:, var].astype(np.float64)
        e[:, var] -= 1
        return src, self.find(e), fac

    @lru_cache(maxsize=None)
    def antideriv_table(self, var: int):
        """(src, dst, factor) for terms staying within order, plus src of overflow terms."""
        keep = np.nonzero(self.degree < self.order)[0].astype(np.int32)
        over = np.nonzero(self.degree == self.order)[0].astype(np.int32)
        e = self.exps[keep].copy()
        e[:, var] += 1
        fac = 1.0 / e[:, var].astype(np.float64)
        return keep, self.find(e), fac, over

    @lru_cache(maxsize=None)
    def embed_into(self, other: "MonomialIndex") -> np.ndarray:
        """Positions of this index's monomials inside a larger index.

        ``other`` must have at least as many variables (new ones appended) and
        at least this order.
        """
        if other.nvars < self.nvars or other.order < self.order:
            raise ArityMismatch(f"cannot embed {self} into {other}")
        e = np.zeros((self.size, other.nvars), dtype=np.int32)
        e[:, : self.nvars] = self.exps
        return other.find(e)


@lru_cache(maxsize=None)
def monomial_index(nvars: int, order: int) -> MonomialIndex:
    return MonomialIndex(nvars, order)


def abs_sum_up(x: np.ndarray) -> float:
    """Upper bound on sum(|x|) (fsum is correctly rounded)."""
    if x.size == 0:
        return 0.0
    return up(math.fsum(np.abs(x)))


class MultivarPoly:
    """Polynomial in ``nvars`` variables truncated at total degree ``order``."""

    __slots__ = ("index", "coeffs")

    def __init__(self, index: MonomialIndex, coeffs: np.ndarray | None = None):
        self.index = index
        if coeffs is None:
            coeffs = np.zeros(index.size)
        else:
            coeffs = np.asarray(coeffs, dtype=np.float64)
            if coeffs.shape != (index.size,):
                raise ArityMismatch(f"expected {index.size} coefficients, got {coeffs.shape}")
        self.coeffs = coeffs

    # ---- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, nvars: int, order: int = DEFAULT_ORDER) -> "MultivarPoly":
        return cls(monomial_index(nvars, order))

    @classmethod
    def constant(cls, c: float, nvars: int, order: int = DEFAULT_ORDER) -> "MultivarPoly":
        p = cls.zero(nvars, order)
        p.coeffs[0] = c
        return p

    @classmethod
    def variable(cls, i: int, nvars: int, order: int = DEFAULT_ORDER) -> "MultivarPoly":
        if not 0 <= i < nvars:
            raise IndexError(f"variable {i} out of range for {nvars} variables")
        p = cls.zero(nvars, order)
        if order >= 1:
            e = [0] * nvars
            e[i] = 1
            p.coeffs[p.index.index(e)] = 1.0
        return p

    @classmethod
    def from_terms(cls, terms: Mapping[Sequence[int], float], nvars: int,
                   order: int = DEFAULT_ORDER) -> "MultivarPoly":
        """Build from ``{exponents: coefficient}``; terms above ``order`` are dropped."""
        p = cls.zero(nvars, order)
        for e, c in terms.items():
            if len(e) != nvars:
                raise ArityMismatch(f"exponent {e} has wrong length")
            if sum(e) <= order:
                p.coeffs[p.index.index(e)] += c
        return p

    # ---- basic properties -------------------------------------------------
    @property
    def nvars(self) -> int:
        return self.index.nvars

    @property
    def order(self) -> int:
        return self.index.order

    def copy(self) -> "MultivarPoly":
        return MultivarPoly(self.index, self.coeffs.copy())

    def terms(self) -> Iterable[tuple[tuple[int, ...], float]]:
        """Nonzero terms in graded-lex order."""
        for k in np.nonzero(np.abs(self.coeffs) > CLEANUP)[0]:
            yield tuple(int(x) for x in self.index.exps[k]), float(self.coeffs[k])

    def coeff(self, exps: Sequence[int]) -> float:
        return float(self.coeffs[self.index.index(exps)])

    @property
    def constant_term(self) -> float:
        return float(self.coeffs[0])

    def homogeneous(self, d: int) -> "MultivarPoly":
        out = MultivarPoly(self.index)
        if d <= self.order:
            sl = self.index.degree_slice(d)
            out.coeffs[sl] = self.coeffs[sl]
        return out

    def truncate(self, order: int) -> "MultivarPoly":
        """Drop terms above ``order`` but keep the same index."""
        out = self.copy()
        out.coeffs[self.index.starts[min(order, self.order) + 1]:] = 0.0
        return out

    def with_order(self, order: int) -> "MultivarPoly":
        """Re-index at a different truncation order (drops or pads terms)."""
        idx = monomial_index(self.nvars, order)
        out = MultivarPoly(idx)
        n = min(idx.size, self.index.size)
        out.coeffs[:n] = self.coeffs[:n]
        return out

    def embed(self, nvars: int, order: int | None = None) -> "MultivarPoly":
        """Same polynomial viewed in a space with extra trailing variables."""
        idx = monomial_index(nvars, self.order if order is None else order)
        out = MultivarPoly(idx)
        out.coeffs[self.index.embed_into(idx)] = self.coeffs
        return out

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def _same(self, other: "MultivarPoly") -> None:
        if self.index is not other.index:
            if (self.nvars, self.order) != (other.nvars, other.order):
                raise ArityMismatch(
                    f"({self.nvars} vars, order {self.order}) vs ({other.nvars}, {other.order})")

    # ---- arithmetic -------------------------------------------------------
    def __add__(self, other) -> "MultivarPoly":
        if isinstance(other, MultivarPoly):
            self._same(other)
            return MultivarPoly(self.index, self.coeffs + other.coeffs)
        out = self.copy()
        out.coeffs[0] += float(other)
        return out

    __radd__ = __add__

    def __neg__(self) -> "MultivarPoly":
        return MultivarPoly(self.index, -self.coeffs)

    def __sub__(self, other) -> "MultivarPoly":
        return self + (-other)

    def __rsub__(self, other) -> "MultivarPoly":
        return (-self) + other

    def __mul__(self, other) -> "MultivarPoly":
        if isinstance(other, MultivarPoly):
            return self.mul(other)
        return MultivarPoly(self.index, self.coeffs * float(other))

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "MultivarPoly":
        return MultivarPoly(self.index, self.coeffs / float(c))

    def __pow__(self, k: int) -> "MultivarPoly":
        out = MultivarPoly.constant(1.0, self.nvars, self.order)
        for _ in range(int(k)):
            out = out.mul(self)
        return out

    def mul(self, other: "MultivarPoly") -> "MultivarPoly":
        self._same(other)
        ia, ib, ik = self.index.mul_pairs
        return MultivarPoly(self.index, kernels.mul_trunc(self.coeffs, other.coeffs, ia, ib, ik,
                                                          self.index.size))

    def mul_full(self, other: "MultivarPoly") -> tuple["MultivarPoly", "MultivarPoly"]:
        """Product split into (truncated part, discarded part of orders n+1..2n)."""
        self._same(other)
        n = self.order
        wide = monomial_index(self.nvars, 2 * n)
        a = self.with_order(2 * n)
        b = other.with_order(2 * n)
        full = a.mul(b)
        kept = MultivarPoly(self.index, full.coeffs[: self.index.size].copy())
        full.coeffs[: self.index.size] = 0.0
        return kept, MultivarPoly(wide, full.coeffs)

    # ---- calculus ---------------------------------------------------------
    def derive(self, var: int) -> "MultivarPoly":
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable {var} out of range")
        src, dst, fac = self.index.deriv_table(var)
        out = MultivarPoly(self.index)
        np.add.at(out.coeffs, dst, self.coeffs[src] * fac)
        return out

    def antiderive(self, var: int, promote: bool = False):
        """Antiderivative vanishing on ``x_var = 0``.

        With ``promote=True`` the result is re-indexed at order+1 and exact;
        otherwise returns ``(truncated, overflow)`` where ``overflow`` holds the
        order+1 terms at order+1.
        """
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable {var} out of range")
        wide = MultivarPoly(monomial_index(self.nvars, self.order + 1))
        src, dst, fac = wide.index.antideriv_table(var)[:3]
        n_self = self.index.size
        sel = src < n_self
        wide.coeffs[dst[sel]] = self.coeffs[src[sel]] * fac[sel]
        if promote:
            return wide
        kept = MultivarPoly(self.index, wide.coeffs[:n_self].copy())
        wide.coeffs[:n_self] = 0.0
        return kept, wide

    def substitute(self, var: int, value: float) -> "MultivarPoly":
        """Set ``x_var = value``; the result keeps the same index (no x_var terms)."""
        powers = float(value) ** self.index.exps[:, var].astype(np.float64)
        out = MultivarPoly(self.index)
        np.add.at(out.coeffs, self.index.subst_table(var), self.coeffs * powers)
        return out

    # ---- evaluation and bounds -------------------------------------------
    def __call__(self, *x):
        pts = np.asarray(x[0] if len(x) == 1 else x, dtype=np.float64)
        if pts.ndim == 1:
            return float(self.evaluate(pts[None, :])[0])
        return self.evaluate(pts)

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
        if pts.shape[1] != self.nvars:
            raise ArityMismatch(f"points have {pts.shape[1]} coordinates, need {self.nvars}")
        return kernels.monomial_values(self.index.exps, pts) @ self.coeffs

    def bound(self, domain: Box | None = None) -> Interval:
        return poly_bound(self, domain)

    def to_text(self, title: str = "RDA VARIABLE") -> str:
        lines = [f"  {title}:   NO= {self.order:3d}, NV= {self.nvars:5d}",
                 "     I  COEFFICIENT              ORDER EXPONENTS"]
        for i, (e, c) in enumerate(self.terms(), start=1):
            groups = "  ".join(" ".join(str(x) for x in e[j:j + 2]) for j in range(0, len(e), 2))
            lines.append(f"{i:6d}  {c!r:<24} {sum(e):4d}   {groups}")
        lines.append("  " + "-" * 46)
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "MultivarPoly":
        lines = text.strip("\n").splitlines()
        head = lines[0]
        order = int(head.split("NO=")[1].split(",")[0])
        nvars = int(head.split("NV=")[1].split()[0])
        terms: dict[tuple[int, ...], float] = {}
        for line in lines[2:]:
            parts = line.split()
            if not parts or not parts[0].isdigit():
                break
            c = float(parts[1].replace("D", "E"))
            e = tuple(int(x) for x in parts[3:3 + nvars])
            terms[e] = terms.get(e, 0.0) + c
        return cls.from_terms(terms, nvars, order)

    def __repr__(self) -> str:
        body = " + ".join(f"{c:.6g}*x^{e}" for e, c in itertools.islice(self.terms(), 6))
        return f"MultivarPoly(v={self.nvars}, n={self.order}: {body or '0'})"


def poly_arith(p: MultivarPoly, q: MultivarPoly, op: str):
    """``op`` in {add, sub, mul}; returns ``(result, truncation)``."""
    p._same(q)
    if op == "mul":
        return p.mul_full(q)
    empty = MultivarPoly(monomial_index(p.nvars, 2 * p.order))
    if op == "add":
        return p + q, empty
    if op == "sub":
        return p - q, empty
    raise ValueError(f"unknown op {op!r}")


def poly_calculus(p: MultivarPoly, var: int, op: str):
    if op == "derive":
        return p.derive(var)
    if op == "antiderive":
        return p.antiderive(var, promote=True)
    raise ValueError(f"unknown op {op!r}")


def poly_bound(p: MultivarPoly, domain: Box | None = None) -> Interval:
    """Interval enclosure of ``p`` over ``domain`` (default ``[-1, 1]^v``)."""
    if domain is None:
        return _bound_unit(p)
    if domain.dim != p.nvars:
        raise ArityMismatch(f"box of dimension {domain.dim} for {p.nvars} variables")
    # interval power tables; even powers come out nonnegative
    powers = [[c.pow_int(k) for k in range(p.order + 1)] for c in domain]
    total = Interval(0.0)
    for e, c in p.terms():
        term = Interval(c)
        for j, ej in enumerate(e):
            if ej:
                term = term * powers[j][ej]
        total = total + term
    return total


def _bound_unit(p: MultivarPoly) -> Interval:
    c = p.coeffs
    rest = c[1:]
    ev = p.index.even[1:]
    lo_terms = np.where(ev, np.minimum(rest, 0.0), -np.abs(rest))
    hi_terms = np.where(ev, np.maximum(rest, 0.0), np.abs(rest))
    # fsum is correctly rounded: one ulp outward is rigorous
    lo = math.fsum(np.concatenate(([c[0]], lo_terms)))
    hi = math.fsum(np.concatenate(([c[0]], hi_terms)))
    return Interval._out(lo, hi)


class PolyMap:
    """Vector of polynomials sharing variables and order; maps R^v -> R^w."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[MultivarPoly]):
        comps = list(components)
        if not comps:
            raise ArityMismatch("a map needs at least one component")
        first = comps[0]
        for c in comps[1:]:
            first._same(c)
        self.components = comps

    @classmethod
    def identity(cls, nvars: int, order: int = DEFAULT_ORDER) -> "PolyMap":
        return cls([MultivarPoly.variable(i, nvars, order) for i in range(nvars)])

    @classmethod
    def linear(cls, matrix, order: int = DEFAULT_ORDER) -> "PolyMap":
        m = np.asarray(matrix, dtype=np.float64)
        ident = cls.identity(m.shape[1], order)
        return ident.apply_matrix(m)

    @property
    def nvars(self) -> int:
        return self.components[0].nvars

    @property
    def order(self) -> int:
        return self.components[0].order

    @property
    def dim_out(self) -> int:
        return len(self.components)

    @property
    def index(self) -> MonomialIndex:
        return self.components[0].index

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def coeff_matrix(self) -> np.ndarray:
        return np.stack([c.coeffs for c in self.components])

    @classmethod
    def from_matrix(cls, index: MonomialIndex, mat: np.ndarray) -> "PolyMap":
        return cls([MultivarPoly(index, row.copy()) for row in mat])

    def __add__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap([a + b for a, b in zip(self.components, other.components, strict=True)])

    def __sub__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap([a - b for a, b in zip(self.components, other.components, strict=True)])

    def __neg__(self) -> "PolyMap":
        return PolyMap([-a for a in self.components])

    def with_order(self, order: int) -> "PolyMap":
        return PolyMap([c.with_order(order) for c in self.components])

    def apply_matrix(self, matrix) -> "PolyMap":
        """The map ``x -> matrix @ self(x)``."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape[1] != self.dim_out:
            raise ArityMismatch(f"matrix {m.shape} cannot act on {self.dim_out} components")
        return PolyMap.from_matrix(self.index, m @ self.coeff_matrix())

    def constant_part(self) -> np.ndarray:
        return self.coeff_matrix()[:, 0].copy()

    def linear_part(self) -> np.ndarray:
        """Jacobian at the origin, shape (w, v)."""
        idx = self.index
        cols = [idx.index(tuple(int(i == j) for i in range(self.nvars))) for j in range(self.nvars)]
        if idx.order < 1:
            return np.zeros((self.dim_out, self.nvars))
        return self.coeff_matrix()[:, cols]

    def nonlinear_part(self) -> "PolyMap":
        mat = self.coeff_matrix()
        mat[:, : int(self.index.starts[2])] = 0.0
        return PolyMap.from_matrix(self.index, mat)

    def jacobian(self) -> list[list[MultivarPoly]]:
        return [[c.derive(j) for j in range(self.nvars)] for c in self.components]

    def evaluate(self, pts) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
        mono = kernels.monomial_values(self.index.exps, pts)
        return mono @ self.coeff_matrix().T

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = self.evaluate(x)
        return out[0] if x.ndim == 1 else out

    def jacobian_at(self, pts) -> np.ndarray:
        """Float Jacobians at points, shape (npts, w, v)."""
        pts = np.atleast_2d(pts)
        jac = self.jacobian()
        out = np.empty((pts.shape[0], self.dim_out, self.nvars))
        for i, row in enumerate(jac):
            for j, d in enumerate(row):
                out[:, i, j] = d.evaluate(pts)
        return out

    def compose(self, inner: "PolyMap") -> "PolyMap":
        return poly_compose(self, inner)

    def inverse(self) -> "PolyMap":
        return invert_truncated_map(self)

    def to_text(self) -> str:
        return "\n".join(c.to_text(title=f"COMPONENT {i + 1}") for i, c in enumerate(self.components))


def poly_compose(outer: PolyMap, inner: PolyMap) -> PolyMap:
    """Truncated composition ``outer o inner`` (inner must fix the origin)."""
    if outer.nvars != inner.dim_out:
        raise ArityMismatch(f"outer takes {outer.nvars} inputs, inner gives {inner.dim_out}")
    if np.any(inner.constant_part() != 0.0):
        raise NonzeroConstantPart("composition is only defined about a zero constant part")
    idx_in = inner.index
    idx_out = outer.index
    order = min(idx_out.order, idx_in.order)
    vals = np.zeros((idx_out.size, idx_in.size))
    vals[0, 0] = 1.0
    par, var = idx_out.parent
    ia, ib, ik = idx_in.mul_pairs
    stop = int(idx_out.starts[order + 1])
    for k in range(1, stop):
        vals[k] = kernels.mul_trunc(vals[par[k]], inner.components[var[k]].coeffs, ia, ib, ik,
                                    idx_in.size)
    mat = outer.coeff_matrix()[:, :stop] @ vals[:stop]
    return PolyMap.from_matrix(idx_in, mat)


def invert_truncated_map(m: PolyMap, cond_limit: float = 1e13) -> PolyMap:
    """Order-by-order inverse of an origin-preserving square map."""
    if m.nvars != m.dim_out:
        raise ArityMismatch("only square maps can be inverted")
    if np.any(m.constant_part() != 0.0):
        raise NonzeroConstantPart("map must fix the origin")
    lin = m.linear_part()
    cond = np.linalg.cond(lin)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularLinearPart(f"linear part is singular (condition number {cond:.3g})")
    lin_inv = np.linalg.inv(lin)
    nonlin = m.nonlinear_part()
    ident = PolyMap.identity(m.nvars, m.order)
    g = ident.apply_matrix(lin_inv)
    # each sweep fixes one more order: g = L^-1 (id - N o g)
    for _ in range(m.order - 1):
        g = (ident - poly_compose(nonlin, g)).apply_matrix(lin_inv)
    return g
