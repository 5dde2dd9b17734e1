"""Outward-rounded interval arithmetic on machine doubles.

Endpoints are computed in round-to-nearest and then pushed one ulp outward
(two for the transcendental functions), which keeps everything free of global
FPU state. Every enclosure in the package ultimately rests on this module.
"""

from __future__ import annotations

import math
from decimal import Decimal
from typing import Iterable, Sequence

__all__ = [
    "Interval",
    "Box",
    "IntervalError",
    "DivisionByZeroInterval",
    "DomainError",
    "Unbounded",
    "EmptyIntersection",
    "down",
    "up",
    "PI",
]

_INF = math.inf


class IntervalError(ArithmeticError):
    pass


class DivisionByZeroInterval(IntervalError, ZeroDivisionError):
    pass


class DomainError(IntervalError, ValueError):
    pass


class Unbounded(IntervalError, OverflowError):
    pass


class EmptyIntersection(IntervalError):
    pass


def down(x: float, n: int = 1) -> float:
    for _ in range(n):
        x = math.nextafter(x, -_INF)
    return x


def up(x: float, n: int = 1) -> float:
    for _ in range(n):
        x = math.nextafter(x, _INF)
    return x


def _check(lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        if math.isnan(lo) or math.isnan(hi):
            raise IntervalError("NaN endpoint")
        raise Unbounded(f"interval endpoint overflow: [{lo}, {hi}]")


class Interval:
    """Closed interval ``[lo, hi]`` with finite float endpoints.

    Instances are immutable. Arithmetic with plain numbers promotes them to
    degenerate intervals, so ``Interval(1, 2) * 3`` works as expected.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        _check(lo, hi)
        if lo > hi:
            raise ValueError(f"invalid interval: lo={lo!r} > hi={hi!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    def __reduce__(self):
        return (Interval, (self.lo, self.hi))

    @classmethod
    def _raw(cls, lo: float, hi: float) -> "Interval":
        _check(lo, hi)
        obj = object.__new__(cls)
        object.__setattr__(obj, "lo", lo)
        object.__setattr__(obj, "hi", hi)
        return obj

    @classmethod
    def _out(cls, lo: float, hi: float, n: int = 1) -> "Interval":
        return cls._raw(down(lo, n), up(hi, n))

    @classmethod
    def symmetric(cls, r: float) -> "Interval":
        r = abs(float(r))
        return cls._raw(-r, r)

    @classmethod
    def hull_of(cls, values: Iterable[float]) -> "Interval":
        vals = [float(v) for v in values]
        return cls._raw(min(vals), max(vals))

    # ---- basic properties -------------------------------------------------
    @property
    def width(self) -> float:
        return up(self.hi - self.lo)

    @property
    def mid(self) -> float:
        m = 0.5 * self.lo + 0.5 * self.hi
        return min(max(m, self.lo), self.hi)

    @property
    def rad(self) -> float:
        m = self.mid
        return up(max(m - self.lo, self.hi - m))

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __str__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"

    def __eq__(self, other) -> bool:
        if isinstance(other, Interval):
            return self.lo == other.lo and self.hi == other.hi
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    # ---- set operations ---------------------------------------------------
    def contains(self, x: "float | Interval") -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    __contains__ = contains

    def subset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def interior_subset(self, other: "Interval") -> bool:
        return other.lo < self.lo and self.hi < other.hi

    def hull(self, other: "Interval | float") -> "Interval":
        other = _as_interval(other)
        return Interval._raw(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval") -> "Interval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise EmptyIntersection(f"{self} and {other} are disjoint")
        return Interval._raw(lo, hi)

    def inflate(self, abs_eps: float = 0.0, rel_eps: float = 0.0) -> "Interval":
        r = up(abs_eps + rel_eps * self.mag)
        return Interval._out(self.lo - r, self.hi + r)

    # ---- arithmetic -------------------------------------------------------
    def __neg__(self) -> "Interval":
        return Interval._raw(-self.hi, -self.lo)

    def __pos__(self) -> "Interval":
        return self

    def __add__(self, other) -> "Interval":
        other = _as_interval(other)
        return Interval._out(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        other = _as_interval(other)
        return Interval._out(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other) -> "Interval":
        return _as_interval(other) - self

    def __mul__(self, other) -> "Interval":
        other = _as_interval(other)
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        p = (a * c, a * d, b * c, b * d)
        return Interval._out(min(p), max(p))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        other = _as_interval(other)
        if other.lo <= 0.0 <= other.hi:
            raise DivisionByZeroInterval(f"division by {other}, which contains 0")
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        p = (a / c, a / d, b / c, b / d)
        return Interval._out(min(p), max(p))

    def __rtruediv__(self, other) -> "Interval":
        return _as_interval(other) / self

    def __pow__(self, n: int) -> "Interval":
        return self.pow_int(n)

    def __abs__(self) -> "Interval":
        return Interval._raw(self.mig, self.mag)

    def sqr(self) -> "Interval":
        lo2, hi2 = self.lo * self.lo, self.hi * self.hi
        if self.lo >= 0.0:
            return Interval._raw(max(0.0, down(lo2)), up(hi2))
        if self.hi <= 0.0:
            return Interval._raw(max(0.0, down(hi2)), up(lo2))
        return Interval._raw(0.0, up(max(lo2, hi2)))

    def pow_int(self, n: int) -> "Interval":
        n = int(n)
        if n < 0:
            return self.pow_int(-n).recip()
        if n == 0:
            return Interval._raw(1.0, 1.0)
        if n % 2 == 0:
            base = self.sqr()
            n //= 2
        else:
            base = self
        # base is nonnegative here, or the remaining power is odd: monotone
        lo = _pow_monotone(base.lo, n, -1)
        if base.lo >= 0.0:
            lo = max(lo, 0.0)
        return Interval._raw(lo, _pow_monotone(base.hi, n, +1))

    def recip(self) -> "Interval":
        if self.lo <= 0.0 <= self.hi:
            raise DomainError(f"reciprocal of {self}, which contains 0")
        return Interval._out(1.0 / self.hi, 1.0 / self.lo)

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise DomainError(f"sqrt of {self}, which reaches below 0")
        lo = 0.0 if self.lo == 0.0 else max(0.0, down(math.sqrt(self.lo)))
        return Interval._raw(lo, up(math.sqrt(self.hi)))

    def exp(self) -> "Interval":
        try:
            lo, hi = math.exp(self.lo), math.exp(self.hi)
        except OverflowError as exc:
            raise Unbounded(f"exp overflow on {self}") from exc
        return Interval._raw(max(0.0, down(lo, 2)), up(hi, 2))

    def log(self) -> "Interval":
        if self.lo <= 0.0:
            raise DomainError(f"log of {self}")
        return Interval._out(math.log(self.lo), math.log(self.hi), 2)

    def sin(self) -> "Interval":
        return _trig(self, math.sin, 0.5)

    def cos(self) -> "Interval":
        return _trig(self, math.cos, 0.0)

    # ---- serialization ----------------------------------------------------
    def to_text(self) -> str:
        # repr() round-trips exactly, so printing never tightens
        return f"{self.lo!r} {self.hi!r}"

    @classmethod
    def from_text(cls, text: str) -> "Interval":
        parts = text.replace("[", " ").replace("]", " ").replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"cannot parse interval from {text!r}")
        return cls._raw(parse_down(parts[0]), parse_up(parts[1]))


def parse_down(s: str) -> float:
    x = float(s)
    if math.isfinite(x) and Decimal(x) > Decimal(s):
        x = down(x)
    return x


def parse_up(s: str) -> float:
    x = float(s)
    if math.isfinite(x) and Decimal(x) < Decimal(s):
        x = up(x)
    return x


def _as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(x)


def _pow_monotone(x: float, n: int, direction: int) -> float:
    # repeated squaring, each product rounded once; allow n roundings of slack
    result, base, k, steps = 1.0, x, n, 0
    while k:
        if k & 1:
            result *= base
            steps += 1
        k >>= 1
        if k:
            base *= base
            steps += 1
    if not math.isfinite(result):
        raise Unbounded(f"pow overflow: {x}**{n}")
    if direction < 0:
        # bound on relative error of n roundings is below (steps+1) ulps
        return down(result - abs(result) * steps * 2.3e-16 - steps * 5e-324)
    return up(result + abs(result) * steps * 2.3e-16 + steps * 5e-324)


PI = Interval._raw(3.141592653589793, 3.1415926535897936)
_TWO_PI = PI * 2


def _trig(x: Interval, f, phase: float) -> Interval:
    """Enclosure of ``f`` over ``x`` where ``f`` peaks at (phase + 2k)*pi."""
    if x.hi - x.lo >= 6.283185307179586:
        return Interval._raw(-1.0, 1.0)
    lo = min(f(x.lo), f(x.hi))
    hi = max(f(x.lo), f(x.hi))
    lo, hi = max(-1.0, down(lo, 2)), min(1.0, up(hi, 2))
    # maxima at t = (phase + 2k) pi, minima at t = (phase + 1 + 2k) pi
    if _hits(x, phase):
        hi = 1.0
    if _hits(x, phase + 1.0):
        lo = -1.0
    return Interval._raw(lo, hi)


def _hits(x: Interval, phase: float) -> bool:
    # conservative: does some (phase + 2k)*pi possibly lie in x?
    offset = PI * phase
    k_lo = math.ceil(((x - offset) / _TWO_PI).lo - 1e-9)
    k_hi = math.floor(((x - offset) / _TWO_PI).hi + 1e-9)
    return k_lo <= k_hi


class Box:
    """Cartesian product of intervals."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[Interval | tuple]):
        comps = tuple(c if isinstance(c, Interval) else Interval(*c) for c in components)
        if not comps:
            raise ValueError("a box needs at least one component")
        object.__setattr__(self, "components", comps)

    def __setattr__(self, name, value):
        raise AttributeError("Box is immutable")

    def __reduce__(self):
        return (Box, (self.components,))

    @classmethod
    def symmetric(cls, halfwidths: Sequence[float] | float, dim: int | None = None) -> "Box":
        if dim is not None:
            halfwidths = [float(halfwidths)] * dim
        return cls([Interval(-abs(h), abs(h)) for h in halfwidths])

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "Box":
        return cls([Interval(a, b) for a, b in zip(lo, hi)])

    @property
    def dim(self) -> int:
        return len(self.components)

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __eq__(self, other) -> bool:
        return isinstance(other, Box) and self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    def __repr__(self) -> str:
        return "Box([" + ", ".join(str(c) for c in self.components) + "])"

    @property
    def lo(self) -> list[float]:
        return [c.lo for c in self.components]

    @property
    def hi(self) -> list[float]:
        return [c.hi for c in self.components]

    @property
    def center(self) -> list[float]:
        return [c.mid for c in self.components]

    @property
    def halfwidths(self) -> list[float]:
        return [0.5 * (c.hi - c.lo) for c in self.components]

    def contains(self, point: Sequence[float]) -> bool:
        return all(c.lo <= x <= c.hi for c, x in zip(self.components, point))

    def subset(self, other: "Box") -> bool:
        return all(a.subset(b) for a, b in zip(self.components, other.components))

    def to_text(self) -> str:
        return "\n".join(c.to_text() for c in self.components)
