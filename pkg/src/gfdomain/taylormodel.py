"""Taylor models: a truncated polynomial plus a rigorous remainder interval.

Every model lives on a physical box ``D`` but its polynomial is written in
scaled variables ``t`` in ``[-1, 1]^v`` with ``x = c + w*t`` (``c`` the box
center, ``w`` the half-widths, rounded outward so the scaled box covers ``D``).
The reference point is the box center.

A function ``f`` is enclosed when ``f(c + w*t) - P(t)`` lies in the remainder
for every ``t`` in the unit box. Floating-point error of every coefficient
operation is bounded a priori and swept into the remainder.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .interval import Box, DomainError, Interval, up
from .polyalg import ArityMismatch, MonomialIndex, MultivarPoly, PolyMap, monomial_index

__all__ = [
    "TaylorModel",
    "TmVector",
    "DomainMismatch",
    "RangeTouchesSingularity",
    "tm_arith",
    "tm_intrinsic",
    "tm_antiderive",
    "tm_bound",
    "tm_compose",
    "unit_bound",
    "tm_compose_many",
    "restrict_all",
]

_U = 2.0 ** -53
_TINY = 2.0 ** -1074


class DomainMismatch(ValueError):
    pass


class RangeTouchesSingularity(DomainError):
    pass


def _gamma(k: int) -> float:
    return up(k * _U / (1.0 - k * _U))


def _abs_sum(x: np.ndarray) -> float:
    # recursive/pairwise summation error is below gamma(n) * sum
    s = float(np.sum(np.abs(x)))
    return up(s * (1.0 + _gamma(x.size + 1)))


def _order_sums(coeffs: np.ndarray, index: MonomialIndex) -> np.ndarray:
    """Upper bounds on sum |c| per degree."""
    raw = np.add.reduceat(np.abs(coeffs), index.starts[:-1].astype(np.intp))
    return raw * (1.0 + _gamma(index.size + 1)) + _TINY


def _rounding(coeffs: np.ndarray) -> float:
    """Error of one rounding per coefficient, summed over the unit box."""
    return up(_U * _abs_sum(coeffs) + coeffs.size * _TINY)


def unit_bound(coeffs: np.ndarray, index: MonomialIndex) -> Interval:
    """Enclosure of a polynomial over ``[-1, 1]^v`` (even monomials in [0, 1])."""
    rest = coeffs[1:]
    ev = index.even[1:]
    a = np.abs(rest)
    lo_terms = np.where(ev, np.minimum(rest, 0.0), -a)
    hi_terms = np.where(ev, np.maximum(rest, 0.0), a)
    slack = up(_gamma(coeffs.size + 1) * (abs(coeffs[0]) + float(np.sum(a))) + _TINY)
    lo = float(coeffs[0] + np.sum(lo_terms))
    hi = float(coeffs[0] + np.sum(hi_terms))
    return Interval._out(lo - slack, hi + slack)


_SCALING_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _scaling(domain: Box) -> tuple[np.ndarray, np.ndarray]:
    key = tuple((iv.lo, iv.hi) for iv in domain)
    hit = _SCALING_CACHE.get(key)
    if hit is None:
        c = np.array([float(iv.mid) for iv in domain])
        w = np.array([_half(iv, float(m)) for iv, m in zip(domain, c)])
        c.flags.writeable = False
        w.flags.writeable = False
        if len(_SCALING_CACHE) > 4096:
            _SCALING_CACHE.clear()
        hit = _SCALING_CACHE[key] = (c, w)
    return hit


def _half(iv: Interval, m: float) -> float:
    # round up only when a subtraction was inexact
    a, b = iv.hi - m, m - iv.lo
    exact = Fraction(iv.hi) - Fraction(m) == Fraction(a) and Fraction(m) - Fraction(iv.lo) == Fraction(b)
    return max(a, b) if exact else up(max(a, b))


class TaylorModel:
    """Scalar Taylor model; see the module docstring for conventions."""

    __slots__ = ("poly", "rem", "domain")

    def __init__(self, poly: MultivarPoly, rem: Interval | None, domain: Box):
        if poly.nvars != domain.dim:
            raise ArityMismatch(f"{poly.nvars} variables on a {domain.dim}-dimensional box")
        self.poly = poly
        self.rem = Interval(0.0) if rem is None else rem
        self.domain = domain

    # ---- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float | Interval, domain: Box, order: int) -> "TaylorModel":
        p = MultivarPoly(monomial_index(domain.dim, order))
        if isinstance(c, Interval):
            p.coeffs[0] = c.mid
            return cls(p, Interval(-c.rad, c.rad), domain)
        p.coeffs[0] = float(c)
        return cls(p, None, domain)

    @classmethod
    def variable(cls, i: int, domain: Box, order: int) -> "TaylorModel":
        """The physical coordinate ``x_i = c_i + w_i * t_i``."""
        if not 0 <= i < domain.dim:
            raise IndexError(f"variable {i} out of range")
        c, w = _scaling(domain)
        p = MultivarPoly.variable(i, domain.dim, order) * float(w[i])
        p.coeffs[0] = c[i]
        return cls(p, None, domain)

    @classmethod
    def scaled_variable(cls, i: int, domain: Box, order: int) -> "TaylorModel":
        """The scaled coordinate ``t_i`` in [-1, 1]."""
        return cls(MultivarPoly.variable(i, domain.dim, order), None, domain)

    # ---- properties -------------------------------------------------------
    @property
    def index(self) -> MonomialIndex:
        return self.poly.index

    @property
    def order(self) -> int:
        return self.poly.order

    @property
    def nvars(self) -> int:
        return self.poly.nvars

    @property
    def ref_point(self) -> list[float]:
        return self.domain.center

    @property
    def scaling(self) -> tuple[np.ndarray, np.ndarray]:
        return _scaling(self.domain)

    def __repr__(self) -> str:
        return f"TaylorModel({self.poly!r}, rem={self.rem})"

    def _like(self, coeffs: np.ndarray, rem: Interval) -> "TaylorModel":
        return TaylorModel(MultivarPoly(self.poly.index, coeffs), rem, self.domain)

    def _check(self, other: "TaylorModel") -> None:
        if self.domain is not other.domain and self.domain != other.domain:
            raise DomainMismatch("Taylor models live on different boxes")
        if self.poly.index is not other.poly.index:
            self.poly._same(other.poly)

    def poly_bound(self) -> Interval:
        return unit_bound(self.poly.coeffs, self.poly.index)

    def bound(self) -> Interval:
        return self.poly_bound() + self.rem

    # ---- arithmetic -------------------------------------------------------
    def __add__(self, other) -> "TaylorModel":
        if isinstance(other, TaylorModel):
            self._check(other)
            c = self.poly.coeffs + other.poly.coeffs
            return self._like(c, (self.rem + other.rem).inflate(_rounding(c)))
        if isinstance(other, Interval):
            return self + TaylorModel.constant(other, self.domain, self.order)
        c = self.poly.coeffs.copy()
        c[0] += float(other)
        return self._like(c, self.rem.inflate(up(_U * abs(c[0]))))

    __radd__ = __add__

    def __neg__(self) -> "TaylorModel":
        return self._like(-self.poly.coeffs, -self.rem)

    def __sub__(self, other) -> "TaylorModel":
        return self + (-other)

    def __rsub__(self, other) -> "TaylorModel":
        return (-self) + other

    def scale(self, a: float) -> "TaylorModel":
        a = float(a)
        c = self.poly.coeffs * a
        return self._like(c, (self.rem * a).inflate(_rounding(c)))

    def __mul__(self, other) -> "TaylorModel":
        if isinstance(other, TaylorModel):
            return self.mul(other)
        if isinstance(other, Interval):
            m, r = other.mid, other.rad
            out = self.scale(m)
            if r:
                spread = self.bound() * Interval(-r, r)
                out = TaylorModel(out.poly, out.rem + spread, self.domain)
            return out
        return self.scale(other)

    __rmul__ = __mul__

    def mul(self, other: "TaylorModel") -> "TaylorModel":
        self._check(other)
        idx = self.poly.index
        a, b = self.poly.coeffs, other.poly.coeffs
        ia, ib, ik = idx.mul_pairs
        c = kernels.mul_trunc(a, b, ia, ib, ik, idx.size)
        n = idx.order
        sa, sb = _order_sums(a, idx), _order_sums(b, idx)
        outer = np.outer(sa, sb)
        deg = np.add.outer(np.arange(n + 1), np.arange(n + 1))
        fudge = 1.0 + _gamma(2 * (n + 1) ** 2 + 2)
        trunc = up(float(np.sum(outer[deg > n])) * fudge)
        kept = up(float(np.sum(outer[deg <= n])) * fudge)
        err = up(_gamma(idx.max_terms_per_coeff + 1) * kept + ia.size * _TINY)
        pa, pb = self.poly_bound(), other.poly_bound()
        rem = (pa * other.rem + pb * self.rem + self.rem * other.rem
               + Interval(-trunc, trunc)).inflate(err)
        return self._like(c, rem)

    def __truediv__(self, other) -> "TaylorModel":
        if isinstance(other, TaylorModel):
            return self.mul(other.recip())
        if isinstance(other, Interval):
            return self * other.recip()
        return self * (Interval(1.0) / Interval(float(other)))

    def __rtruediv__(self, other) -> "TaylorModel":
        return self.recip() * other

    def __pow__(self, k: int) -> "TaylorModel":
        k = int(k)
        if k < 0:
            return (self ** (-k)).recip()
        out = TaylorModel.constant(1.0, self.domain, self.order)
        base = self
        while k:
            if k & 1:
                out = out.mul(base)
            k >>= 1
            if k:
                base = base.mul(base)
        return out

    # ---- intrinsics -------------------------------------------------------
    def _split(self) -> tuple[float, "TaylorModel", Interval]:
        c0 = float(self.poly.coeffs[0])
        h = self - c0
        return c0, h, h.bound()

    def exp(self) -> "TaylorModel":
        c0, h, hb = self._split()
        n = self.order
        e0 = Interval(c0).exp()
        coeffs = [e0 / math.factorial(k) for k in range(n + 1)]
        lag = e0 * hb.hull(0.0).exp() * hb.pow_int(n + 1) / math.factorial(n + 1)
        return _series(h, coeffs, lag)

    def sin(self) -> "TaylorModel":
        return self._trig(0)

    def cos(self) -> "TaylorModel":
        return self._trig(1)

    def _trig(self, shift: int) -> "TaylorModel":
        c0, h, hb = self._split()
        n = self.order
        x0 = Interval(c0)
        s, c = x0.sin(), x0.cos()
        cycle = [s, c, -s, -c]
        coeffs = [cycle[(k + shift) % 4] / math.factorial(k) for k in range(n + 1)]
        xi = x0 + hb.hull(0.0)
        dn = [xi.sin(), xi.cos(), -xi.sin(), -xi.cos()][(n + 1 + shift) % 4]
        lag = dn * hb.pow_int(n + 1) / math.factorial(n + 1)
        return _series(h, coeffs, lag)

    def sqrt(self) -> "TaylorModel":
        c0, h, hb = self._split()
        n = self.order
        x0 = Interval(c0)
        xi = x0 + hb.hull(0.0)
        if xi.lo <= 0.0:
            raise RangeTouchesSingularity(f"sqrt over range {x0 + hb} reaching 0")
        binom = Interval(1.0)
        coeffs = []
        root = x0.sqrt()
        for k in range(n + 1):
            coeffs.append(binom * root / x0.pow_int(k))
            binom = binom * (Interval(0.5) - k) / (k + 1)
        lag = binom * xi.sqrt() / xi.pow_int(n + 1) * hb.pow_int(n + 1)
        return _series(h, coeffs, lag)

    def recip(self) -> "TaylorModel":
        c0, h, hb = self._split()
        n = self.order
        x0 = Interval(c0)
        xi = x0 + hb.hull(0.0)
        if xi.lo <= 0.0 <= xi.hi:
            raise RangeTouchesSingularity(f"reciprocal over range {x0 + hb} containing 0")
        coeffs = [(-1.0) ** k / x0.pow_int(k + 1) for k in range(n + 1)]
        # exact geometric tail: (-h/c0)^(n+1) / (c0 + h)
        lag = (-hb / x0).pow_int(n + 1) / (x0 + hb)
        return _series(h, coeffs, lag)

    # ---- calculus ---------------------------------------------------------
    def antiderive(self, var: int, from_lower: bool = False, scaled: bool = False) -> "TaylorModel":
        """Primitive with respect to ``x_var``.

        Vanishes on the hyperplane through the reference point, or on the lower
        face of the box when ``from_lower``. With ``scaled`` the integration is
        with respect to ``t_var`` instead of the physical coordinate.
        """
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable {var} out of range")
        kept, over = self.poly.antiderive(var)
        rem_factor = Interval(-1.0, 1.0)
        if from_lower:
            kept = kept - kept.substitute(var, -1.0)
            over = over - over.substitute(var, -1.0)
            rem_factor = Interval(0.0, 2.0)
        trunc = unit_bound(over.coeffs, over.index)
        # coefficients were multiplied by a rounded 1/k: two roundings each
        err = 2 * (_rounding(kept.coeffs) + _rounding(over.coeffs))
        if from_lower:
            g = _gamma(self.order + 4)
            err = up(err + 2 * g * (_abs_sum(kept.coeffs) + _abs_sum(over.coeffs)))
        rem = (self.rem * rem_factor + trunc).inflate(err)
        out = TaylorModel(kept, rem, self.domain)
        if scaled:
            return out
        return out * float(_scaling(self.domain)[1][var])

    def derive_poly(self, var: int) -> MultivarPoly:
        """Derivative of the polynomial part only (no remainder information)."""
        return self.poly.derive(var)

    def substitute(self, var: int, value: float) -> "TaylorModel":
        """Fix scaled variable ``t_var = value`` (|value| <= 1); same index."""
        if abs(value) > 1.0:
            raise ValueError("substitution point outside the unit box")
        p = self.poly.substitute(var, value)
        err = up(_gamma(2 * self.order + 4) * _abs_sum(self.poly.coeffs))
        return TaylorModel(p, self.rem.inflate(err), self.domain)

    # ---- pointwise --------------------------------------------------------
    def enclose_at_scaled(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Rigorous (lo, hi) of ``P(t) + R`` at scaled points ``t`` (shape (m, v))."""
        t = np.ascontiguousarray(np.atleast_2d(t), dtype=np.float64)
        mono = kernels.monomial_values(self.poly.index.exps, t)
        val = mono @ self.poly.coeffs
        mag = np.abs(mono) @ np.abs(self.poly.coeffs)
        k = self.poly.index.size + self.order + 2
        err = mag * (2 * _gamma(k)) + k * _TINY
        return val - err + self.rem.lo - np.abs(val) * 4 * _U, \
            val + err + self.rem.hi + np.abs(val) * 4 * _U

    def eval_scaled(self, t: np.ndarray) -> np.ndarray:
        return self.poly.evaluate(t)

    def to_scaled(self, x: np.ndarray) -> np.ndarray:
        c, w = _scaling(self.domain)
        return (np.atleast_2d(x) - c) / w

    # ---- domain changes ---------------------------------------------------
    def restrict(self, sub: Box) -> "TaylorModel":
        return restrict_all([self], sub)[0]

    def with_order(self, order: int) -> "TaylorModel":
        """Re-index at another order; dropped terms move into the remainder."""
        if order >= self.order:
            return TaylorModel(self.poly.with_order(order), self.rem, self.domain)
        idx = self.poly.index
        tail = self.poly.coeffs.copy()
        tail[: idx.starts[order + 1]] = 0.0
        return TaylorModel(self.poly.with_order(order),
                           self.rem + unit_bound(tail, idx), self.domain)

    # ---- text form --------------------------------------------------------
    def to_text(self) -> str:
        c, w = _scaling(self.domain)
        lines = [self.poly.to_text(),
                 "  VAR    REFERENCE POINT                  DOMAIN INTERVAL"]
        for i, iv in enumerate(self.domain):
            lines.append(f"  {i + 1:3d}  {float(c[i])!r:<24}  [{iv.lo!r} , {iv.hi!r} ]")
        lines.append("  ORDER                    BOUND INTERVAL")
        for d in range(1, self.order + 1):
            part = self.poly.homogeneous(d)
            if part.is_zero():
                continue
            b = unit_bound(part.coeffs, part.index)
            lines.append(f"  {d:3d}     [{b.lo!r} , {b.hi!r} ]")
        lines.append(f"    R     [{self.rem.lo!r} , {self.rem.hi!r} ]")
        lines.append("  " + "*" * 57)
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "TaylorModel":
        from .interval import parse_down, parse_up

        head, _, rest = text.partition("VAR    REFERENCE POINT")
        poly = MultivarPoly.from_text(head)
        comps, rem = [], Interval(0.0)
        for line in rest.splitlines():
            if "[" not in line:
                continue
            label = line.split()[0]
            lo_s, hi_s = line[line.index("[") + 1: line.index("]")].split(",")
            if label == "R":
                rem = Interval._raw(parse_down(lo_s.strip()), parse_up(hi_s.strip()))
            elif len(comps) < poly.nvars and len(line.split()) >= 4 and "." in line.split()[1]:
                comps.append(Interval._raw(parse_down(lo_s.strip()), parse_up(hi_s.strip())))
        return cls(poly, rem, Box(comps))


def _series(h: TaylorModel, coeffs: Sequence[Interval], lagrange: Interval) -> TaylorModel:
    """``sum coeffs[k] * h^k + lagrange`` by Horner's scheme."""
    acc = TaylorModel.constant(coeffs[-1], h.domain, h.order)
    for ck in reversed(coeffs[:-1]):
        acc = acc.mul(h) + ck
    return TaylorModel(acc.poly, acc.rem + lagrange, h.domain)


class TmVector(list):
    """Sequence of Taylor models sharing one box and order."""

    def __init__(self, comps: Sequence[TaylorModel] = ()):
        super().__init__(comps)
        if len(self) > 1:
            for c in self[1:]:
                self[0]._check(c)

    @classmethod
    def identity(cls, domain: Box, order: int) -> "TmVector":
        return cls(TaylorModel.variable(i, domain, order) for i in range(domain.dim))

    @property
    def domain(self) -> Box:
        return self[0].domain

    @property
    def order(self) -> int:
        return self[0].order

    def polymap(self) -> PolyMap:
        return PolyMap([c.poly for c in self])

    def remainders(self) -> list[Interval]:
        return [c.rem for c in self]

    def max_remainder_width(self) -> float:
        return max(c.rem.width for c in self)

    def bounds(self) -> list[Interval]:
        return [c.bound() for c in self]

    def to_text(self) -> str:
        return "\n".join(c.to_text() for c in self)


def tm_arith(a: TaylorModel, b: TaylorModel, op: str) -> TaylorModel:
    a._check(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a.mul(b)
    raise ValueError(f"unknown op {op!r}")


_INTRINSICS: dict[str, Callable[[TaylorModel], TaylorModel]] = {
    "exp": TaylorModel.exp,
    "sin": TaylorModel.sin,
    "cos": TaylorModel.cos,
    "sqrt": TaylorModel.sqrt,
    "recip": TaylorModel.recip,
}


def tm_intrinsic(a: TaylorModel, f: str) -> TaylorModel:
    try:
        return _INTRINSICS[f](a)
    except KeyError:
        raise ValueError(f"unknown intrinsic {f!r}") from None


def tm_antiderive(a: TaylorModel, var: int) -> TaylorModel:
    return a.antiderive(var)


def tm_bound(a: TaylorModel) -> Interval:
    return a.bound()


def tm_compose(outer: MultivarPoly, args: Sequence[TaylorModel]) -> TaylorModel:
    """Rigorous evaluation of ``outer`` (float coefficients) at Taylor-model arguments."""
    return tm_compose_many([outer], args)[0]


def tm_compose_many(outers: Sequence[MultivarPoly], args: Sequence[TaylorModel]) -> list[TaylorModel]:
    """``tm_compose`` for several polynomials sharing one table of monomial values."""
    idx = outers[0].index
    for o in outers:
        if o.nvars != len(args):
            raise ArityMismatch(f"polynomial in {o.nvars} variables, {len(args)} arguments")
        outers[0]._same(o)
    coef = np.stack([o.coeffs for o in outers])
    nz = np.nonzero(np.any(coef != 0.0, axis=0))[0]
    last = int(nz.max()) if nz.size else 0
    par, var = idx.parent
    one = TaylorModel.constant(1.0, args[0].domain, args[0].order)
    vals = [one]
    for k in range(1, last + 1):
        vals.append(vals[par[k]].mul(args[var[k]]))
    tidx = one.index
    vmat = np.stack([v.poly.coeffs for v in vals])
    vlo = np.array([v.rem.lo for v in vals])
    vhi = np.array([v.rem.hi for v in vals])
    a = coef[:, : last + 1]
    out_c = a @ vmat
    # dot-product rounding over the unit box
    mag = (np.abs(a) @ np.abs(vmat)).sum(axis=1)
    err = mag * (2 * _gamma(last + 2)) + tidx.size * _TINY
    r_lo = np.where(a >= 0, a * vlo[None, :], a * vhi[None, :]).sum(axis=1)
    r_hi = np.where(a >= 0, a * vhi[None, :], a * vlo[None, :]).sum(axis=1)
    r_err = (np.abs(a) * np.maximum(np.abs(vlo), np.abs(vhi))[None, :]).sum(axis=1) * 2 * _gamma(last + 2)
    res = []
    for i in range(len(outers)):
        rem = Interval._out(float(r_lo[i]), float(r_hi[i])).inflate(up(float(err[i] + r_err[i])))
        res.append(TaylorModel(MultivarPoly(tidx, out_c[i]), rem, one.domain))
    return res


def restrict_all(tms: Sequence[TaylorModel], sub: Box) -> list[TaylorModel]:
    """Re-express Taylor models on a sub-box (rigorous affine change of variables)."""
    dom = tms[0].domain
    if not sub.subset(dom):
        raise DomainMismatch("restriction box is not inside the model's domain")
    c, w = _scaling(dom)
    c2, w2 = _scaling(sub)
    order = tms[0].order
    args = []
    for i in range(dom.dim):
        # t_i = (c2 - c)/w + (w2/w) t'_i, with interval coefficients
        shift = (Interval(float(c2[i])) - float(c[i])) / float(w[i])
        ratio = Interval(float(w2[i])) / float(w[i])
        ti = TaylorModel.scaled_variable(i, sub, order) * ratio + shift
        args.append(ti)
    out = []
    for tm in tms:
        r = tm_compose(tm.poly, args)
        out.append(TaylorModel(r.poly, r.rem + tm.rem, sub))
    return out
