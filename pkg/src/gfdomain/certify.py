"""Rigorous invertibility certificates from first derivatives.

A map f is injective on a box B with a C^1 inverse when the matrix whose i-th
row is grad f_i(chi_i) is nonsingular for every choice of independent points
chi_1..chi_v in B. Rows are enclosed by Taylor models over B; row i is read as
a function of its own copy of the box variables.

The determinant is enclosed after right-preconditioning with the inverse of
the midpoint Jacobian P (det(MP) = det(M) det(P), so 0 outside the enclosure of
det(MP) proves det(M) != 0). With MP = I + E,

    det(I + E) = sum over principal minors det(E_S).

Order-1 minors are sums of independent ranges, order-2 minors are bounded as
bilinear forms over disjoint variable sets, and all larger minors together by
prod(1 + rho_i) - 1 - e1(rho) - e2(rho) with rho_i the row 1-norm bounds.
"""

from __future__ import annotations

import functools
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .interval import Box, EmptyIntersection, Interval, up
from .polyalg import PolyMap
from .taylormodel import TaylorModel, TmVector, restrict_all, tm_compose_many

__all__ = [
    "MissingVariationalData", "JacobianRows", "DomainCertificate", "jacobian_rows",
    "rows_from_variational", "certify_invertible", "max_certified_box", "PolyTarget",
    "VariationalTarget", "scaled_box", "CERTIFIED", "UNKNOWN",
]

CERTIFIED = "Certified"
UNKNOWN = "Unknown"
_U = 2.0 ** -53
# stands in for "no information" (intervals are finite by construction)
WHOLE = Interval(-1e300, 1e300)


class MissingVariationalData(ValueError):
    pass


@dataclass
class JacobianRows:
    """Row i, entry j encloses d f_i / d x_j over ``box`` (row-independent points)."""

    rows: list[list[TaylorModel]]
    box: Box
    order: int
    source: str = ""

    @property
    def dim(self) -> int:
        return len(self.rows)

    def interval_matrix(self) -> list[list[Interval]]:
        return [[e.bound() for e in row] for row in self.rows]

    def midpoint(self) -> np.ndarray:
        return np.array([[float(e.poly.coeffs[0]) for e in row] for row in self.rows])


@dataclass
class DomainCertificate:
    target: str
    box: Box
    status: str
    det_enclosure: Interval
    order: int
    wall_time: float
    extra: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def half_widths(self) -> list[float]:
        return [c.rad for c in self.box]

    def to_text(self) -> str:
        lines = [f"target: {self.target}", f"status: {self.status}", f"order: {self.order}"]
        for i, c in enumerate(self.box):
            lines.append(f"box {i + 1}: [{c.lo!r}, {c.hi!r}]")
        lines.append(f"det: [{self.det_enclosure.lo!r}, {self.det_enclosure.hi!r}]")
        for k in sorted(self.extra):
            lines.append(f"{k}: {self.extra[k]!r}")
        lines.append(f"time_s: {self.wall_time:.3f}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DomainCertificate":
        kv: dict[str, str] = {}
        comps = []
        for line in text.splitlines():
            if not line.strip():
                continue
            k, _, v = line.partition(":")
            v = v.strip()
            if k.startswith("box "):
                comps.append(Interval.from_text(v))
            else:
                kv[k.strip()] = v
        return cls(kv["target"], Box(comps), kv["status"], Interval.from_text(kv["det"]),
                   int(kv["order"]), float(kv["time_s"]))


# ---------------------------------------------------------------------------
# rows

def jacobian_rows(f, box: Box, order: int | None = None, source: str = "") -> JacobianRows:
    """Row enclosures for a polynomial map in physical variables.

    Flow maps must go through :func:`rows_from_variational`; passing a bare
    TmVector raises MissingVariationalData.
    """
    if isinstance(f, TmVector) or (isinstance(f, (list, tuple)) and f and isinstance(f[0], TaylorModel)):
        raise MissingVariationalData("flow maps need variational enclosures for their derivatives")
    if not isinstance(f, PolyMap):
        raise TypeError(f"cannot differentiate {type(f).__name__}")
    order = f.order if order is None else order
    args = [TaylorModel.variable(j, box, order) for j in range(box.dim)]
    entries = [d.with_order(order) if d.order != order else d
               for row in f.jacobian() for d in row]
    tms = tm_compose_many(entries, args)
    v = f.nvars
    rows = [tms[i * v:(i + 1) * v] for i in range(f.dim_out)]
    return JacobianRows(rows, box, order, source)


def rows_from_variational(jac: Sequence[Sequence[TaylorModel]], left=None, right=None,
                          box: Box | None = None, source: str = "") -> JacobianRows:
    """Rows of ``left @ Y + right`` for variational enclosures Y (optionally restricted)."""
    d = len(jac)
    flat = [e for row in jac for e in row]
    if box is not None and box != flat[0].domain:
        flat = restrict_all(flat, box)
    y = [flat[i * d:(i + 1) * d] for i in range(d)]
    left = np.eye(d) if left is None else np.asarray(left, dtype=np.float64)
    rows = []
    for i in range(left.shape[0]):
        row = []
        for j in range(d):
            acc = None
            for k in range(d):
                if left[i, k] != 0.0:
                    term = y[k][j].scale(left[i, k])
                    acc = term if acc is None else acc + term
            if acc is None:
                acc = TaylorModel.constant(0.0, y[0][0].domain, y[0][0].order)
            if right is not None and right[i, j] != 0.0:
                acc = acc + float(right[i, j])
            row.append(acc)
        rows.append(row)
    return JacobianRows(rows, y[0][0].domain, y[0][0].order, source)


# ---------------------------------------------------------------------------
# determinant enclosure

def _precondition(rows: list[list[TaylorModel]], p: np.ndarray) -> list[list[TaylorModel]]:
    """E = rows @ P - I as Taylor models."""
    d = len(rows)
    out = []
    for i in range(d):
        r = []
        for j in range(d):
            acc = None
            for k in range(d):
                if p[k, j] != 0.0:
                    t = rows[i][k].scale(p[k, j])
                    acc = t if acc is None else acc + t
            if acc is None:
                acc = TaylorModel.constant(0.0, rows[i][0].domain, rows[i][0].order)
            if i == j:
                acc = acc - 1.0
            r.append(acc)
        out.append(r)
    return out


def _pair_bound(a: TaylorModel, b: TaylorModel, c: TaylorModel, d: TaylorModel, f: float) -> Interval:
    """Range of f*(a(t) + b(s)) + a(t) b(s) - c(t) d(s) over independent t, s in the unit box."""
    even = a.index.even
    ac, bc, cc, dc = a.poly.coeffs, b.poly.coeffs, c.poly.coeffs, d.poly.coeffs
    k = np.outer(ac, bc) - np.outer(cc, dc)
    k[:, 0] += f * ac
    k[0, :] += f * bc
    both_even = np.outer(even, even)
    const = float(k[0, 0])
    k[0, 0] = 0.0
    lo = np.where(both_even, np.minimum(k, 0.0), -np.abs(k))
    hi = np.where(both_even, np.maximum(k, 0.0), np.abs(k))
    sa, sb, sc, sd = (float(np.sum(np.abs(x))) for x in (ac, bc, cc, dc))
    absk = float(np.sum(np.abs(k))) + abs(const)
    # entry rounding (products, difference, scaled linear terms) plus the final sums
    slack = up(4 * _U * (sa * sb + sc * sd + f * (sa + sb)) + (k.size + 2) * _U * absk * 1.01 + 1e-300)
    core = Interval._out(const + float(np.sum(lo)), const + float(np.sum(hi))).inflate(slack)
    pa, pb, pc, pd = a.poly_bound(), b.poly_bound(), c.poly_bound(), d.poly_bound()
    tail = (pa * b.rem + a.rem * pb + a.rem * b.rem) - (pc * d.rem + c.rem * pd + c.rem * d.rem)
    return core + tail + (a.rem + b.rem) * f


def _esym_tail(rho: Sequence[float]) -> float:
    """Upper bound of e_3 + ... + e_v for nonnegative rho."""
    e = [1.0] + [0.0] * len(rho)
    for r in rho:
        for k in range(len(e) - 1, 0, -1):
            e[k] = up(e[k] + up(e[k - 1] * r))
    return up(math.fsum(e[3:]) * (1 + 4 * _U)) if len(e) > 3 else 0.0


def _interval_ge_det(mat: list[list[Interval]]) -> Interval:
    """Product of pivots of interval Gaussian elimination (no pivoting)."""
    a = [row[:] for row in mat]
    n = len(a)
    det = Interval(1.0)
    for k in range(n):
        piv = a[k][k]
        if piv.contains(0.0):
            return WHOLE
        det = det * piv
        for i in range(k + 1, n):
            f = a[i][k] / piv
            for j in range(k + 1, n):
                a[i][j] = a[i][j] - f * a[k][j]
    return det


@functools.lru_cache(maxsize=None)
def _perm_table(d: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(d))), dtype=np.intp)
    signs = np.array([np.linalg.det(np.eye(d)[list(q)]) for q in perms]).round()
    return perms, signs


def _vertex_det(e: list[list[TaylorModel]]) -> Interval:
    """Exact range of det over the product of per-entry hulls, by vertex enumeration.

    det is affine in every entry separately, so over a box of entries its
    extremes sit at vertices. Expanded along the last row: cofactors for every
    vertex combination of the other rows, then one product with the last row's
    vertices. Rounding is bounded through the permanent of |M|.
    """
    d = len(e)
    hulls = [[(x + 1.0).bound() if i == j else x.bound() for j, x in enumerate(r)] for i, r in enumerate(e)]
    lo = np.array([[h.lo for h in r] for r in hulls])
    hi = np.array([[h.hi for h in r] for r in hulls])
    bits = ((np.arange(2 ** d)[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)
    verts = [np.where(bits, hi[i][None, :], lo[i][None, :]) for i in range(d)]
    if d == 1:
        return Interval(lo[0, 0], hi[0, 0])
    grid = np.indices([2 ** d] * (d - 1)).reshape(d - 1, -1).T
    top = np.stack([verts[i][grid[:, i]] for i in range(d - 1)], axis=1)
    perms, signs = _perm_table(d - 1)
    cof = np.empty((grid.shape[0], d))
    pab = np.empty((grid.shape[0], d))
    for j in range(d):
        sub = np.delete(top, j, axis=2)
        terms = np.ones((sub.shape[0], len(perms)))
        for r in range(d - 1):
            terms *= sub[:, r, perms[:, r]]
        cof[:, j] = (-1.0) ** (d - 1 + j) * (terms @ signs)
        pab[:, j] = np.abs(terms).sum(axis=1)
    last = verts[d - 1]
    det = cof @ last.T
    g = _gamma_det(d)
    err = (pab @ np.abs(last).T) * (g * (1 + 2 * g))
    return Interval._out(float(np.min(det - err)), float(np.max(det + err)))


def _gamma_det(d: int) -> float:
    k = d + math.factorial(d) + 2
    return up(k * _U / (1 - k * _U))


def det_enclosure(e: list[list[TaylorModel]], method: str = "auto") -> Interval:
    """Enclosure of det(I + E) for rows of E with independent points.

    ``minors``: pair bilinear forms plus a row-norm tail; ``vertex``: vertex
    enumeration over entry hulls (v <= 4); ``ge``: interval Gaussian
    elimination; ``auto``: intersection of minors and vertex where available.
    """
    d = len(e)
    if method not in ("auto", "minors", "vertex", "ge"):
        raise ValueError(f"unknown determinant method {method!r}")
    if method == "vertex" or (method == "auto" and d <= 4):
        vert = _vertex_det(e) if d <= 4 else WHOLE
        if method == "vertex" or d == 1:
            return vert
        mins = det_enclosure(e, "minors")
        try:
            return vert.intersect(mins)
        except EmptyIntersection:  # both are enclosures; only round-off can separate them
            return vert.hull(mins)
    if method == "ge" or d > 6:
        mat = [[(x + 1.0).bound() if i == j else x.bound() for j, x in enumerate(r)]
               for i, r in enumerate(e)]
        return _interval_ge_det(mat)
    if d == 1:
        return e[0][0].bound() + 1.0
    # order-1 minors are shared out over the pairs so each pair keeps its correlations
    f = 1.0 / (d - 1)
    total = Interval(1.0)
    for i in range(d):
        for j in range(i + 1, d):
            total = total + _pair_bound(e[i][i], e[j][j], e[i][j], e[j][i], f)
    if d >= 3:
        rho = [up(math.fsum(x.bound().mag for x in r) * (1 + (d + 1) * _U)) for r in e]
        h = _esym_tail(rho)
        total = total + Interval(-h, h)
    return total


def _split(box: Box, full: Box) -> tuple[Box, Box]:
    rel = [c.width / f.width if f.width > 0 else 0.0 for c, f in zip(box, full)]
    k = int(np.argmax(rel))
    comps = list(box)
    m = comps[k].mid
    left, right = comps[:], comps[:]
    left[k] = Interval(comps[k].lo, m)
    right[k] = Interval(m, comps[k].hi)
    return Box(left), Box(right)


def _branch_and_bound(e: list[list[TaylorModel]], method: str, max_pieces: int) -> tuple[Interval, int, bool]:
    """Split row boxes until every piece's enclosure excludes 0 or the budget runs out."""
    d = len(e)
    full = e[0][0].domain
    cache: dict[tuple[int, Box], list[TaylorModel]] = {}

    def row_on(i: int, box: Box) -> list[TaylorModel]:
        if box == full:
            return e[i]
        key = (i, box)
        if key not in cache:
            cache[key] = restrict_all(e[i], box)
        return cache[key]

    stack = [tuple([full] * d)]
    hull = None
    pieces = 0
    while stack:
        boxes = stack.pop()
        rows = [row_on(i, b) for i, b in enumerate(boxes)]
        enc = det_enclosure(rows, method)
        pieces += 1
        if not enc.contains(0.0):
            hull = enc if hull is None else hull.hull(enc)
            continue
        if pieces + len(stack) >= max_pieces:
            return enc if hull is None else hull.hull(enc), pieces, False
        spread = [sum(x.bound().width for x in r) for r in rows]
        i = int(np.argmax(spread))
        for half in _split(boxes[i], full):
            nb = list(boxes)
            nb[i] = half
            stack.append(tuple(nb))
    return hull, pieces, True


def certify_invertible(rows: JacobianRows, method: str = "auto", precondition: bool = True,
                       target: str | None = None, max_pieces: int = 1,
                       det_order: int | None = None) -> DomainCertificate:
    """Certified iff 0 is outside the enclosure of det(M P).

    ``max_pieces > 1`` enables branch-and-bound over the row boxes (each row's
    box is split independently, which is valid because rows have their own points).
    ``det_order`` truncates the rows first (dropped terms join the remainders).
    """
    t0 = time.perf_counter()
    if det_order is not None and det_order < rows.order:
        rows = JacobianRows([[x.with_order(det_order) for x in r] for r in rows.rows],
                            rows.box, det_order, rows.source)
    extra: dict = {}
    status = UNKNOWN
    det = WHOLE
    mid = rows.midpoint()
    p = None
    if precondition:
        try:
            if not np.all(np.isfinite(mid)) or np.linalg.cond(mid) > 1e14:
                raise np.linalg.LinAlgError
            p = np.linalg.inv(mid)
        except np.linalg.LinAlgError:
            extra["note"] = "SingularMidpointJacobian"
    else:
        p = np.eye(rows.dim)
    if p is not None and np.all(np.isfinite(p)):
        e = _precondition(rows.rows, p)
        if max_pieces > 1:
            det, pieces, ok = _branch_and_bound(e, method, max_pieces)
            extra["pieces"] = pieces
        else:
            det = det_enclosure(e, method)
            ok = not det.contains(0.0)
        extra["det_p"] = float(np.linalg.det(p))
        if ok:
            status = CERTIFIED
    return DomainCertificate(target or rows.source, rows.box, status, det, rows.order,
                             time.perf_counter() - t0, extra)


# ---------------------------------------------------------------------------
# targets and box search

class PolyTarget:
    """Certification target given by a polynomial map in physical variables."""

    def __init__(self, pm: PolyMap, name: str = "poly", order: int | None = None):
        self.map = pm
        self.name = name
        self.order = pm.order if order is None else order

    def rows(self, box: Box) -> JacobianRows:
        return jacobian_rows(self.map, box, self.order, self.name)


class VariationalTarget:
    """Target ``left @ M + right @ z`` for a flow M with variational enclosures."""

    def __init__(self, jac: Sequence[Sequence[TaylorModel]], left=None, right=None, name: str = "flow"):
        self.jac = jac
        self.left = left
        self.right = right
        self.name = name
        self.domain = jac[0][0].domain
        self.order = jac[0][0].order
        self._restricted: dict[Box, list[list[TaylorModel]]] = {}

    def with_blocks(self, left, right, name: str | None = None) -> "VariationalTarget":
        """Same variational data (and restriction cache), other generator blocks."""
        out = VariationalTarget(self.jac, left, right, self.name if name is None else name)
        out._restricted = self._restricted
        return out

    def rows(self, box: Box) -> JacobianRows:
        if box == self.domain:
            return rows_from_variational(self.jac, self.left, self.right, None, self.name)
        if box not in self._restricted:
            d = len(self.jac)
            flat = restrict_all([e for row in self.jac for e in row], box)
            self._restricted[box] = [flat[i * d:(i + 1) * d] for i in range(d)]
        return rows_from_variational(self._restricted[box], self.left, self.right, None, self.name)


def scaled_box(scale: float, lo_w: Sequence[float], hi_w: Sequence[float],
               center: Sequence[float] | None = None) -> Box:
    center = [0.0] * len(lo_w) if center is None else center
    return Box([Interval(c - scale * a, c + scale * b) for c, a, b in zip(center, lo_w, hi_w)])


def max_certified_box(target, aspect: Sequence[float] | tuple[Sequence[float], Sequence[float]],
                      scale_lo: float = 2.0 ** -10, scale_hi: float = 1.0, iters: int = 12,
                      greedy: bool = False, greedy_factor: float = 1.1, greedy_steps: int = 4,
                      certify: Callable[[JacobianRows], DomainCertificate] | None = None,
                      center: Sequence[float] | None = None) -> DomainCertificate:
    """Largest certified box ``scale * aspect`` found by bisection on the scale.

    ``aspect`` is a list of positive half-widths, or a pair (lower, upper) of
    per-direction extents for asymmetric boxes. Certification is not monotone
    in the scale, so bisection only brackets; the returned certificate is
    always one that was actually obtained.
    """
    t0 = time.perf_counter()
    certify = certify or certify_invertible
    if isinstance(aspect, tuple) and len(aspect) == 2 and np.ndim(aspect[0]) == 1:
        lo_w, hi_w = list(aspect[0]), list(aspect[1])
    else:
        lo_w = hi_w = list(aspect)
    if min(lo_w) <= 0 or min(hi_w) <= 0:
        raise ValueError("aspect weights must be strictly positive")
    name = getattr(target, "name", "target")

    def attempt(lw, hw, s):
        box = scaled_box(s, lw, hw, center)
        return certify(target.rows(box))

    best = attempt(lo_w, hi_w, scale_hi)
    failed = None
    if not best.certified:
        failed = scale_hi
        best = attempt(lo_w, hi_w, scale_lo)
        if not best.certified:
            best.extra.update(scale=scale_lo, failed_scale=scale_lo)
            best.target = name
            return best
        good, bad = scale_lo, scale_hi
        for _ in range(iters):
            mid = 0.5 * (good + bad)
            c = attempt(lo_w, hi_w, mid)
            if c.certified:
                good, best = mid, c
            else:
                bad = mid
        failed = bad
        scale = good
    else:
        scale = scale_hi
    if greedy:
        lw = [scale * x for x in lo_w]
        hw = [scale * x for x in hi_w]
        for _ in range(greedy_steps):
            grew = False
            for side in (0, 1):
                for i in range(len(lw)):
                    trial_l, trial_h = lw[:], hw[:]
                    (trial_l if side == 0 else trial_h)[i] *= greedy_factor
                    c = attempt(trial_l, trial_h, 1.0)
                    if c.certified:
                        lw, hw, best, grew = trial_l, trial_h, c, True
            if not grew:
                break
    best.extra.update(scale=scale, failed_scale=failed)
    best.target = name
    best.wall_time = time.perf_counter() - t0
    return best
