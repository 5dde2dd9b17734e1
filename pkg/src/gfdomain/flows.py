"""Verified flows of ODEs by Picard iteration on Taylor models.

Right-hand sides are plain Python functions ``rhs(t, x) -> list`` written with
``+ - * /``, integer powers and the helpers :func:`sqrt`, :func:`sin`,
:func:`cos`, :func:`exp` from this module, so one definition serves floats,
intervals, Taylor models and :class:`Jet` (forward-mode derivatives, used for
the variational equations Y' = (df/dx) Y).

One step works on Taylor models in the initial-condition variables plus a
local time variable tau in [0, h]. A polynomial predictor is built by order+1
Picard sweeps; the step is accepted when the Picard operator maps
``P + J`` (J a remainder interval per component) into itself.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .interval import Box, DomainError, Interval, Unbounded
from .polyalg import MultivarPoly, PolyMap, monomial_index
from .taylormodel import RangeTouchesSingularity, TaylorModel, TmVector

__all__ = [
    "InclusionFailed", "StepUnderflow", "SingularityInDomain", "SqrtDomain", "Jet", "sqrt", "sin", "cos", "exp",
    "OdeSystem", "FlowEnclosure", "picard_step", "integrate_flow", "fpu_system",
    "Element", "Beamline", "beamline_system", "element_system", "cell_map", "default_cell", "rk4",
    "proton_brho",
    "fpu_half_period", "growth_system", "oscillator_system",
]


class InclusionFailed(ArithmeticError):
    pass


class StepUnderflow(ArithmeticError):
    pass


class SingularityInDomain(RangeTouchesSingularity):
    pass


class SqrtDomain(SingularityInDomain):
    pass


# ---------------------------------------------------------------------------
# generic scalar helpers

def _is_float(x) -> bool:
    return isinstance(x, (int, float, np.floating))


def _lift(name: str, scalar: Callable, vector: Callable) -> Callable:
    def f(x):
        if _is_float(x):
            return scalar(x)
        if isinstance(x, np.ndarray):
            return vector(x)
        return getattr(x, name)()
    f.__name__ = name
    return f


sqrt = _lift("sqrt", math.sqrt, np.sqrt)
sin = _lift("sin", math.sin, np.sin)
cos = _lift("cos", math.cos, np.cos)
exp = _lift("exp", math.exp, np.exp)


def _recip(x):
    return 1.0 / x if _is_float(x) or isinstance(x, np.ndarray) else x.recip()


class Jet:
    """Value plus tangent vector; arithmetic follows the chain rule."""

    __slots__ = ("val", "tan")

    def __init__(self, val, tan: Sequence):
        self.val = val
        self.tan = list(tan)

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.val + o.val, [a + b for a, b in zip(self.tan, o.tan)])
        return Jet(self.val + o, self.tan)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, [-a for a in self.tan])

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            return Jet(self.val * o.val, [self.val * b + o.val * a for a, b in zip(self.tan, o.tan)])
        return Jet(self.val * o, [a * o for a in self.tan])

    __rmul__ = __mul__

    def recip(self):
        r = _recip(self.val)
        d = -(r * r)
        return Jet(r, [d * a for a in self.tan])

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o.recip()
        return self * _recip(o)

    def __rtruediv__(self, o):
        return self.recip() * o

    def __pow__(self, k: int):
        k = int(k)
        if k == 0:
            return Jet(self.val * 0.0 + 1.0, [a * 0.0 for a in self.tan])
        if k == 1:
            return self
        pk1 = self.val ** (k - 1)
        d = pk1 * float(k)
        return Jet(pk1 * self.val, [d * a for a in self.tan])

    def sqrt(self):
        s = sqrt(self.val)
        d = _recip(s) * 0.5
        return Jet(s, [d * a for a in self.tan])

    def sin(self):
        c = cos(self.val)
        return Jet(sin(self.val), [c * a for a in self.tan])

    def cos(self):
        s = -sin(self.val)
        return Jet(cos(self.val), [s * a for a in self.tan])

    def exp(self):
        e = exp(self.val)
        return Jet(e, [e * a for a in self.tan])


# ---------------------------------------------------------------------------
# systems

@dataclass(frozen=True)
class OdeSystem:
    name: str
    dim: int
    rhs: Callable[[Any, Sequence], list]
    params: dict = field(default_factory=dict)
    hamiltonian: Callable[[Sequence], Any] | None = None

    def __call__(self, t, x):
        return self.rhs(t, x)


@dataclass
class FlowEnclosure:
    """Flow map over the initial box, optional variational enclosure, step log."""

    flow: TmVector
    variational: list[list[TaylorModel]] | None
    t0: float
    tf: float
    steps: list[tuple[float, float, float]] = field(default_factory=list)
    system: str = ""
    wall_time: float = 0.0

    @property
    def domain(self) -> Box:
        return self.flow.domain

    @property
    def order(self) -> int:
        return self.flow.order

    def polymap(self) -> PolyMap:
        return self.flow.polymap()

    def max_remainder(self) -> float:
        return max(c.rem.mag for c in self.flow)

    def physical_polymap(self) -> PolyMap:
        """Polynomial part re-expressed in physical coordinates (centered boxes only)."""
        c, w = self.flow[0].scaling
        if np.any(c != 0.0):
            raise ValueError("physical re-expression needs a box centered at the origin")
        idx = self.flow[0].index
        fac = np.prod(np.power(1.0 / w[None, :], idx.exps), axis=1)
        return PolyMap([MultivarPoly(idx, tm.poly.coeffs * fac) for tm in self.flow])

    def normalized_polymap(self) -> PolyMap:
        """P(t)/w for a centered box of equal half-widths w (symplectic when the flow is)."""
        c, w = self.flow[0].scaling
        if np.any(c != 0.0) or np.any(w != w[0]):
            raise ValueError("normalization needs a centered box with equal half-widths")
        return PolyMap([MultivarPoly(tm.poly.index, tm.poly.coeffs / w[0]) for tm in self.flow])

    def dump(self, path: str | Path | None = None) -> str:
        text = self.flow.to_text()
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


# ---------------------------------------------------------------------------
# Picard step

def _as_tm(x, like: TaylorModel) -> TaylorModel:
    if isinstance(x, TaylorModel):
        return x
    return TaylorModel.constant(x if isinstance(x, Interval) else float(x), like.domain, like.order)


def _aug_rhs(sys: OdeSystem, d: int) -> Callable:
    """RHS of the state plus variational matrix (row-major) as one flat system."""

    def f(t, z):
        x = [Jet(z[i], z[d + i * d: d + (i + 1) * d]) for i in range(d)]
        out = sys.rhs(t, x)
        flat = [None] * (d + d * d)
        for i, o in enumerate(out):
            if isinstance(o, Jet):
                flat[i] = o.val
                flat[d + i * d: d + (i + 1) * d] = o.tan
            else:
                flat[i] = o
                flat[d + i * d: d + (i + 1) * d] = [0.0] * d
        return flat

    return f


def _embed(tm: TaylorModel, box: Box, order: int) -> TaylorModel:
    return TaylorModel(tm.poly.embed(box.dim, order), tm.rem, box)


def _drop_time(tm: TaylorModel, domain: Box) -> TaylorModel:
    """Re-index a time-free model on the initial-condition box."""
    small = monomial_index(domain.dim, tm.order)
    pos = small.embed_into(tm.index)
    return TaylorModel(MultivarPoly(small, tm.poly.coeffs[pos].copy()), tm.rem, domain)


def _pad(r: Interval) -> Interval:
    return Interval(r.lo - r.width - 1e-300, r.hi + r.width + 1e-300)


def _picard_raw(f: Callable, x0: Sequence[TaylorModel], t0: float, h: float,
                max_tries: int = 8, boost: int = 0, refine: int = 1) -> list[TaylorModel]:
    domain = x0[0].domain
    out_order = x0[0].order
    order = out_order + boost
    v = domain.dim
    box = Box(list(domain) + [Interval(0.0, h)])
    init = [_embed(tm, box, order) for tm in x0]
    t = TaylorModel.variable(v, box, order) + t0
    # polynomial predictor
    xs = [TaylorModel(c.poly, None, box) for c in init]
    for _ in range(order + 1):
        rates = f(t, xs)
        xs = [TaylorModel((c + _as_tm(r, c).antiderive(v, from_lower=True)).poly, None, box)
              for c, r in zip(init, rates)]
    # remainder inclusion
    def picard_image(rem):
        trial = [TaylorModel(p.poly, r, box) for p, r in zip(xs, rem)]
        rates = f(t, trial)
        image = [c + _as_tm(r, c).antiderive(v, from_lower=True) for c, r in zip(init, rates)]
        return [im.rem + TaylorModel(im.poly - p.poly, None, box).poly_bound()
                for im, p in zip(image, xs)]

    rem = picard_image([c.rem for c in init])
    rem = [_pad(r) for r in rem]
    for _ in range(max_tries):
        new = picard_image(rem)
        inside = [n.subset(r) for n, r in zip(new, rem)]
        if all(inside):
            # the fixed point lies in P + new, hence also in its Picard image
            for _ in range(refine):
                new = [a.intersect(b) for a, b in zip(picard_image(new), new)]
            out = [TaylorModel(p.poly, n, box).substitute(v, 1.0) for p, n in zip(xs, new)]
            return [_drop_time(o, domain).with_order(out_order) for o in out]
        rem = [r if ok else _pad(r.hull(n)) for r, n, ok in zip(rem, new, inside)]
    raise InclusionFailed(f"no self-inclusion after {max_tries} tries (h = {h:.3g})")


def picard_step(sys: OdeSystem, state: Sequence[TaylorModel], t0: float, h: float,
                variational: Sequence[Sequence[TaylorModel]] | None = None, boost: int = 0):
    """One verified step of length ``h``; returns the end state (and variational data).

    ``boost`` extra orders are carried inside the step so that products of the
    local time with top-degree terms are kept; they are truncated back (into
    the remainder) after the step.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    d = sys.dim
    try:
        if variational is None:
            return TmVector(_picard_raw(sys.rhs, list(state), t0, h, boost=boost))
        z = list(state) + [e for row in variational for e in row]
        out = _picard_raw(_aug_rhs(sys, d), z, t0, h, boost=boost)
    except DomainError as e:
        if isinstance(e, SingularityInDomain):
            raise
        raise SingularityInDomain(str(e)) from e
    except Unbounded as e:  # step too long: the trial enclosure overflowed
        raise InclusionFailed(f"overflow during the step (h = {h:.3g})") from e
    return TmVector(out[:d]), [out[d + i * d: d + (i + 1) * d] for i in range(d)]


def _exact_step(t: float, h: float, tf: float) -> tuple[float, float]:
    """Choose h' close to h with t + h' exactly representable (and h' exact)."""
    if t + h >= tf:
        h = tf - t
    t_new = t + h
    h2 = t_new - t
    if Fraction(t) + Fraction(h2) == Fraction(t_new) and h2 > 0:
        return h2, t_new
    return h, t + h


def integrate_flow(sys: OdeSystem, init: Box | Sequence[TaylorModel], t0: float, tf: float,
                   order: int = 7, with_variational: bool = False,
                   variational: Sequence[Sequence[TaylorModel]] | None = None,
                   h0: float | None = None, h_max: float | None = None,
                   grow: float = 1.2, streak: int = 3, min_rel: float = 2.0 ** -20,
                   boost: int = 0) -> FlowEnclosure:
    """Verified flow from ``t0`` to ``tf`` over a box (or continuing from models).

    Steps start at ``h0`` (default span/100), halve on inclusion failure and
    grow by ``grow`` after ``streak`` accepted steps, up to ``h_max``.
    """
    if not tf > t0:
        raise ValueError("tf must exceed t0")
    wall = time.perf_counter()
    span = tf - t0
    if isinstance(init, Box):
        if init.dim != sys.dim:
            raise ValueError(f"box of dimension {init.dim} for a {sys.dim}-dimensional system")
        state = list(TmVector.identity(init, order))
        dom = init
    else:
        state = list(init)
        dom = state[0].domain
    if with_variational and variational is None:
        variational = [[TaylorModel.constant(float(i == j), dom, state[0].order) for j in range(sys.dim)]
                       for i in range(sys.dim)]
    if not with_variational:
        variational = None
    h = span / 100 if h0 is None else h0
    h_max = span if h_max is None else h_max
    t = t0
    ok_run = 0
    log = []
    while t < tf:
        hs, t_new = _exact_step(t, h, tf)
        if hs < min_rel * span and t_new < tf:
            raise StepUnderflow(f"step {hs:.3g} below {min_rel:.3g} of the span at t = {t}")
        try:
            res = picard_step(sys, state, t, hs, variational, boost)
            new_state, new_var = (res, None) if variational is None else res
        except InclusionFailed:
            h = hs / 2
            ok_run = 0
            if h < min_rel * span:
                raise StepUnderflow(f"step {h:.3g} below {min_rel:.3g} of the span at t = {t}") from None
            continue
        state, variational = list(new_state), new_var
        t = t_new
        log.append((t, hs, max(c.rem.mag for c in state)))
        ok_run += 1
        if ok_run >= streak:
            h = min(hs * grow, h_max)
            ok_run = 0
        else:
            h = max(h, hs) if t_new < tf else h
    return FlowEnclosure(TmVector(state), variational, t0, tf, log, sys.name,
                         time.perf_counter() - wall)


def rk4(sys: OdeSystem, x0: np.ndarray, t0: float, tf: float, steps: int = 2000) -> np.ndarray:
    """Classical RK4 on float arrays (x0 of shape (m, dim)); non-verified reference."""
    x = np.array(x0, dtype=np.float64)
    h = (tf - t0) / steps

    def f(t, y):
        return np.stack(sys.rhs(t, list(y.T)), axis=-1) if y.ndim == 2 else np.array(sys.rhs(t, list(y)))

    t = t0
    for _ in range(steps):
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return x


# ---------------------------------------------------------------------------
# small reference systems

def growth_system() -> OdeSystem:
    """x' = x (flow e^t x)."""
    return OdeSystem("growth", 1, lambda t, x: [x[0]])


def oscillator_system(omega: float = 1.0) -> OdeSystem:
    """q' = p, p' = -omega^2 q."""
    w2 = omega * omega
    return OdeSystem(f"oscillator(omega={omega:g})", 2, lambda t, x: [x[1], x[0] * (-w2)],
                     {"omega": omega}, lambda x: (x[1] * x[1] + x[0] * x[0] * w2) * 0.5)


# ---------------------------------------------------------------------------
# Fermi-Pasta-Ulam chain

def fpu_system(n: int = 2, k: float = 5000.0, pin_last: bool | None = None) -> OdeSystem:
    """FPU chain q_0..q_{2n+1} with walls q_0 = q_{2n+1} = 0.

    Harmonic springs (k/2)(q_{2i} - q_{2i-1})^2, quartic springs
    (q_{2i+1} - q_{2i})^4. With ``pin_last`` (default for n = 2) the mass
    q_{2n} is also held at rest. State is (q_free, p_free).
    """
    if n < 1:
        raise ValueError("chain size must be at least 1")
    pin_last = (n == 2) if pin_last is None else pin_last
    movers = list(range(1, 2 * n + 1))
    if pin_last:
        movers.remove(2 * n)
    m = len(movers)
    slot = {j: i for i, j in enumerate(movers)}
    harmonic = [(2 * i - 1, 2 * i) for i in range(1, n + 1)]
    quartic = [(2 * i, 2 * i + 1) for i in range(0, n + 1)]

    def positions(x):
        return {j: x[slot[j]] for j in movers}

    def diff(q, a, b):
        qa, qb = q.get(a), q.get(b)
        if qa is None and qb is None:
            return None
        if qa is None:
            return qb
        if qb is None:
            return -qa
        return qb - qa

    def rhs(t, x):
        q = positions(x)
        force: dict[int, Any] = {j: None for j in movers}

        def push(j, val):
            if j in force:
                force[j] = val if force[j] is None else force[j] + val

        for a, b in harmonic:
            d = diff(q, a, b)
            if d is not None:
                push(b, d * (-k))
                push(a, d * k)
        for a, b in quartic:
            d = diff(q, a, b)
            if d is not None:
                d3 = d * d * d * 4.0
                push(b, -d3)
                push(a, d3)
        dq = [x[m + i] for i in range(m)]
        dp = [force[j] if force[j] is not None else 0.0 * x[0] for j in movers]
        return dq + dp

    def ham(x):
        q = positions(x)
        e = sum(x[m + i] * x[m + i] for i in range(m)) * 0.5
        for a, b in harmonic:
            d = diff(q, a, b)
            if d is not None:
                e = e + d * d * (k / 2)
        for a, b in quartic:
            d = diff(q, a, b)
            if d is not None:
                e = e + d * d * d * d
        return e

    return OdeSystem(f"fpu(n={n},k={k:g})", 2 * m, rhs, {"n": n, "k": k, "movers": movers}, ham)


def fpu_half_period(k: float = 5000.0) -> float:
    """Half period of the stiff symmetric spring mode, pi / sqrt(2k)."""
    return math.pi / math.sqrt(2 * k)


# ---------------------------------------------------------------------------
# beamline

KINDS = ("drift", "dipole", "quad", "quadsext", "sext")


@dataclass(frozen=True)
class Element:
    kind: str
    length: float
    rho: float = math.inf
    k: float = 0.0
    h: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if not self.length > 0:
            raise ValueError("element length must be positive")
        if self.kind == "dipole" and (self.rho == 0 or not math.isfinite(self.rho)):
            raise ValueError("dipoles need a finite nonzero rho")

    def to_text(self) -> str:
        parts = [self.kind, repr(self.length)]
        if self.kind == "dipole":
            parts.append(f"rho={self.rho!r}")
        if self.kind in ("quad", "quadsext"):
            parts.append(f"k={self.k!r}")
        if self.kind in ("sext", "quadsext"):
            parts.append(f"h={self.h!r}")
        return " ".join(parts)


@dataclass(frozen=True)
class Beamline:
    elements: tuple[Element, ...]

    @classmethod
    def from_text(cls, text: str) -> "Beamline":
        els = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            kw = {}
            for t in tok[2:]:
                key, _, val = t.partition("=")
                kw[key] = float(val)
            els.append(Element(tok[0], float(tok[1]), **kw))
        if not els:
            raise ValueError("empty beamline")
        return cls(tuple(els))

    def to_text(self) -> str:
        return "\n".join(e.to_text() for e in self.elements) + "\n"

    @property
    def length(self) -> float:
        return math.fsum(e.length for e in self.elements)


def default_cell() -> Beamline:
    qs = Element("quadsext", 0.5, k=-0.0085, h=0.06)
    d = Element("drift", 1.0)
    return Beamline((d, qs, d, Element("dipole", 0.5, rho=2.5), d, qs, d))


SEXT_FORMS = ("literal", "standard")


def element_system(e: Element, brho: float | None = None, sext_form: str = "literal") -> OdeSystem:
    """Hamilton's equations in arclength for one element; state (x, y, a, b).

    ``brho`` (T m) divides k and h; None means they are geometric strengths.
    ``sext_form`` picks the sextupole potential (h/3)(x^3 - c x y^2) with
    c = 1 ("literal") or c = 3 ("standard", harmonic).
    """
    if sext_form not in SEXT_FORMS:
        raise ValueError(f"sext_form must be one of {SEXT_FORMS}")
    cy = 1.0 if sext_form == "literal" else 3.0
    scale = 1.0 if brho is None else 1.0 / brho
    k, hs = e.k * scale, e.h * scale
    inv_rho = 1.0 / e.rho if e.kind == "dipole" else 0.0

    def rhs(t, z):
        x, y, a, b = z
        r = sqrt(1.0 - a * a - b * b)
        ir = _recip(r) if not isinstance(r, Jet) else r.recip()
        g = 1.0 + x * inv_rho if inv_rho else None
        xa = a * ir if g is None else g * a * ir
        yb = b * ir if g is None else g * b * ir
        da = 0.0 * x
        db = 0.0 * y
        if inv_rho:
            # -(d/dx)[-(1+x/rho) r + (x+rho)^2/(2 rho^2)]
            da = r * inv_rho - (x * (inv_rho * inv_rho) + inv_rho)
        if k:
            da = da - x * k
            db = db + y * k
        if hs:
            da = da - (x * x - y * y * (cy / 3.0)) * hs
            db = db + x * y * (2.0 * cy * hs / 3.0)
        return [xa, yb, da, db]

    def ham(z):
        x, y, a, b = z
        r = sqrt(1.0 - a * a - b * b)
        out = -r if not inv_rho else -(1.0 + x * inv_rho) * r + (x + e.rho) * (x + e.rho) * (inv_rho * inv_rho / 2)
        if k:
            out = out + (x * x - y * y) * (k / 2)
        if hs:
            out = out + (x * x * x - x * y * y * cy) * (hs / 3)
        return out

    return OdeSystem(f"{e.kind}({e.length:g})", 4, rhs,
                     {"element": e, "brho": brho, "sext_form": sext_form}, ham)


def beamline_system(b: Beamline, brho: float | None = None, sext_form: str = "literal") -> list[OdeSystem]:
    return [element_system(e, brho, sext_form) for e in b.elements]


def proton_brho(kinetic_mev: float = 1.0) -> float:
    """Magnetic rigidity (T m) of a proton with the given kinetic energy."""
    mp = 938.27208816
    pc = math.sqrt(kinetic_mev * (kinetic_mev + 2 * mp))
    return pc / 299.792458


def cell_map(order: int = 8, box: Box | None = None, beamline: Beamline | None = None,
             with_variational: bool = True, brho: float | None = None,
             h0: float | None = None, boost: int = 2, sext_form: str = "literal") -> FlowEnclosure:
    """Flow of the accelerator cell over ``box`` (default [-0.1, 0.1]^4)."""
    box = Box.symmetric([0.1] * 4) if box is None else box
    beamline = default_cell() if beamline is None else beamline
    amax = max(abs(box[2].lo), abs(box[2].hi))
    bmax = max(abs(box[3].lo), abs(box[3].hi))
    if amax * amax + bmax * bmax >= 1.0:
        raise SqrtDomain("box allows a^2 + b^2 >= 1")
    wall = time.perf_counter()
    state: Box | list[TaylorModel] = box
    var = None
    s = 0.0
    log = []
    for e, sys in zip(beamline.elements, beamline_system(beamline, brho, sext_form)):
        fe = integrate_flow(sys, state, 0.0, e.length, order, with_variational, var,
                            h0=e.length if h0 is None else h0, boost=boost)
        state, var = list(fe.flow), fe.variational
        log.extend((s + t, hh, r) for t, hh, r in fe.steps)
        s += e.length
    return FlowEnclosure(TmVector(state), var, 0.0, s, log, "cell", time.perf_counter() - wall)
