"""Symplectic maps, linear generator types and extended generating functions.

Phase-space coordinates are ordered ``(q_1..q_n, p_1..p_n)`` and
``J = [[0, I], [-I, 0]]``. A generator type is a linear conformal symplectic
map ``alpha`` of R^{4n} with Jacobian blocks ``[[A, B], [C, D]]``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .interval import Box, Interval
from .polyalg import (MultivarPoly, PolyMap,
                      invert_truncated_map, monomial_index, poly_compose)

__all__ = [
    "SingularL", "MuNearZero", "SymmetryDefect", "SingularNCminusA", "WrongDimension",
    "jmat", "jtilde", "SymplecticMapRep", "SymmetricMatrixS", "GeneratorType",
    "GradientMapRep", "build_alpha", "conformal_check", "stack_map", "gradient_target",
    "gradient_map", "potential_from_gradient", "map_from_generator", "exact_gradient_jacobian",
    "example_maps", "analytic_det_2d", "global_conditions_2d", "symplectic_residual",
    "rotation", "write_blocks_csv", "read_blocks_csv", "POLY4D_F",
]

SYMMETRY_TOL = 1e-8


class SingularL(np.linalg.LinAlgError):
    pass


class MuNearZero(ArithmeticError):
    pass


class SymmetryDefect(ValueError):
    pass


class SingularNCminusA(np.linalg.LinAlgError):
    pass


class WrongDimension(ValueError):
    pass


def jmat(n: int) -> np.ndarray:
    """J_{2n} in block form."""
    z, i = np.zeros((n, n)), np.eye(n)
    return np.block([[z, i], [-i, z]])


def jtilde(n: int) -> np.ndarray:
    j = jmat(n)
    z = np.zeros_like(j)
    return np.block([[j, z], [z, -j]])


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


# ---------------------------------------------------------------------------
# polynomial symplecticity

def _poly_jacobian_products(jac: list[list[MultivarPoly]], jm: np.ndarray) -> list[list[MultivarPoly]]:
    """Entries of Jac^T J Jac as truncated polynomials."""
    d = len(jac)
    out = []
    for a in range(d):
        row = []
        for b in range(d):
            acc = MultivarPoly(jac[0][0].index)
            for i in range(d):
                for j in range(d):
                    if jm[i, j] != 0.0:
                        acc = acc + (jac[i][a] * jac[j][b]) * jm[i, j]
            row.append(acc)
        out.append(row)
    return out


def symplectic_residual(m: PolyMap, through: int | None = None) -> float:
    """Max coefficient of Jac^T J Jac - J up to degree ``through`` (default order-1)."""
    d = m.dim_out
    if d % 2 or m.nvars != d:
        raise WrongDimension("symplectic maps are square and even-dimensional")
    through = m.order - 1 if through is None else through
    jm = jmat(d // 2)
    prod = _poly_jacobian_products(m.jacobian(), jm)
    stop = int(m.index.starts[through + 1])
    worst = 0.0
    for a in range(d):
        for b in range(d):
            c = prod[a][b].coeffs[:stop].copy()
            c[0] -= jm[a, b]
            worst = max(worst, float(np.max(np.abs(c))))
    return worst


@dataclass
class SymplecticMapRep:
    map: PolyMap
    name: str = "custom"

    def __post_init__(self):
        if self.map.dim_out != self.map.nvars or self.map.nvars % 2:
            raise WrongDimension("symplectic maps are square and even-dimensional")

    @property
    def phase_dim(self) -> int:
        return self.map.nvars // 2

    @property
    def linear_part(self) -> np.ndarray:
        return self.map.linear_part()

    @property
    def order(self) -> int:
        return self.map.order

    def residual(self) -> float:
        return symplectic_residual(self.map)


class SymmetricMatrixS:
    """Symmetric matrix stored by its upper triangle (row-major)."""

    __slots__ = ("dim", "upper")

    def __init__(self, upper: Sequence[float], dim: int | None = None):
        upper = np.asarray(upper, dtype=np.float64).ravel()
        if dim is None:
            dim = int(round((math.sqrt(8 * upper.size + 1) - 1) / 2))
        if upper.size != dim * (dim + 1) // 2:
            raise WrongDimension(f"{upper.size} entries do not fill the upper triangle of a {dim}x{dim} matrix")
        self.dim = dim
        self.upper = upper

    @classmethod
    def from_matrix(cls, m) -> "SymmetricMatrixS":
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise WrongDimension("S must be square")
        if not np.allclose(m, m.T, rtol=0, atol=0):
            raise ValueError("S must be symmetric")
        return cls(m[np.triu_indices(m.shape[0])], m.shape[0])

    @classmethod
    def zero(cls, dim: int) -> "SymmetricMatrixS":
        return cls(np.zeros(dim * (dim + 1) // 2), dim)

    @classmethod
    def identity(cls, dim: int) -> "SymmetricMatrixS":
        return cls.from_matrix(np.eye(dim))

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, entry_range: float = 1.0) -> "SymmetricMatrixS":
        return cls(rng.uniform(-entry_range, entry_range, dim * (dim + 1) // 2), dim)

    @classmethod
    def from_text(cls, text: str, dim: int | None = None) -> "SymmetricMatrixS":
        vals = []
        for line in text.splitlines():
            line = line.split("#", 1)[0]
            vals.extend(float(t) for t in line.replace(",", " ").split())
        return cls(vals, dim)

    def to_text(self) -> str:
        return " ".join(repr(float(x)) for x in self.upper)

    @property
    def matrix(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim))
        m[np.triu_indices(self.dim)] = self.upper
        return m + np.triu(m, 1).T

    def scaled(self, c: float) -> "SymmetricMatrixS":
        return SymmetricMatrixS(self.upper * c, self.dim)

    def __repr__(self) -> str:
        return f"SymmetricMatrixS({self.matrix.tolist()})"


@dataclass
class GeneratorType:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    S: SymmetricMatrixS | None = None
    L: np.ndarray | None = None
    provenance: str = "custom"

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def jacobian(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    def scaled(self, c: float) -> "GeneratorType":
        return GeneratorType(self.A * c, self.B * c, self.C * c, self.D * c,
                             self.S, self.L, f"{c}*({self.provenance})")


@dataclass
class GradientMapRep:
    map: PolyMap
    defect: float = field(default=0.0)


def build_alpha(S: SymmetricMatrixS, L) -> GeneratorType:
    L = np.asarray(L, dtype=np.float64)
    d = L.shape[0]
    if S.dim != d or d % 2:
        raise WrongDimension(f"S is {S.dim}x{S.dim}, L is {L.shape}")
    try:
        if np.linalg.cond(L) > 1e13:
            raise np.linalg.LinAlgError
        linv = np.linalg.inv(L)
    except np.linalg.LinAlgError:
        raise SingularL("linear part L is not invertible") from None
    j = jmat(d // 2)
    js = j @ S.matrix
    eye = np.eye(d)
    return GeneratorType(A=-j @ linv, B=j.copy(), C=0.5 * (eye + js) @ linv, D=0.5 * (eye - js),
                         S=S, L=L, provenance=f"S={S.to_text()}")


def conformal_check(g: GeneratorType) -> tuple[float, float]:
    """(mu, residual) for Jac^T J_4n Jac = mu * Jtilde, mu by least squares."""
    n = g.dim // 2
    jac = g.jacobian
    k = jac.T @ jmat(2 * n) @ jac
    jt = jtilde(n)
    mask = jt != 0
    mu = float(np.sum(k[mask] * jt[mask]) / np.sum(jt[mask] ** 2))
    if abs(mu) < 1e-12:
        raise MuNearZero(f"fitted mu = {mu:.3g}")
    return mu, float(np.max(np.abs(k - mu * jt)))


def stack_map(m: SymplecticMapRep | PolyMap) -> PolyMap:
    pm = m.map if isinstance(m, SymplecticMapRep) else m
    ident = PolyMap.identity(pm.nvars, pm.order)
    return PolyMap(list(pm.components) + list(ident.components))


def _blocks_apply(x: np.ndarray, y: np.ndarray, pm: PolyMap) -> PolyMap:
    """x @ M + y @ I for a PolyMap M."""
    return pm.apply_matrix(x) + PolyMap.linear(y, pm.order)


def gradient_target(m: SymplecticMapRep | PolyMap, g: GeneratorType) -> PolyMap:
    """alpha_2 o (M; I) = C M + D z."""
    pm = m.map if isinstance(m, SymplecticMapRep) else m
    return _blocks_apply(g.C, g.D, pm)


def _symmetry_defect(pm: PolyMap) -> float:
    """Max Jacobian asymmetry per degree, relative to max(1, largest coefficient of that degree)."""
    jac = pm.jacobian()
    d = len(jac)
    idx = pm.index
    worst = 0.0
    for deg in range(idx.order):
        sl = idx.degree_slice(deg)
        scale = max(1.0, max(float(np.max(np.abs(e.coeffs[sl]))) for row in jac for e in row))
        for i in range(d):
            for j in range(i + 1, d):
                diff = float(np.max(np.abs(jac[i][j].coeffs[sl] - jac[j][i].coeffs[sl])))
                worst = max(worst, diff / scale)
    return worst


def gradient_map(m: SymplecticMapRep | PolyMap, g: GeneratorType, tol: float = SYMMETRY_TOL) -> GradientMapRep:
    """G = (A M + B z) o (C M + D z)^-1 as a truncated polynomial map."""
    pm = m.map if isinstance(m, SymplecticMapRep) else m
    target = gradient_target(pm, g)
    upper = _blocks_apply(g.A, g.B, pm)
    inv = invert_truncated_map(target)
    gmap = poly_compose(upper, inv)
    defect = _symmetry_defect(gmap)
    if defect > tol:
        raise SymmetryDefect(f"Jacobian of the gradient map is not symmetric (defect {defect:.3g})")
    return GradientMapRep(gmap, defect)


def potential_from_gradient(grad: GradientMapRep | PolyMap, tol: float = SYMMETRY_TOL) -> MultivarPoly:
    """F with grad F = G and F(0) = 0, at order n+1."""
    gm = grad.map if isinstance(grad, GradientMapRep) else grad
    defect = _symmetry_defect(gm)
    if defect > tol:
        raise SymmetryDefect(f"not a gradient map (defect {defect:.3g})")
    v = gm.nvars
    f = MultivarPoly(monomial_index(v, gm.order + 1))
    for i, gi in enumerate(gm):
        part = gi
        for k in range(i + 1, v):
            part = part.substitute(k, 0.0)
        f = f + part.antiderive(i, promote=True)
    return f


def exact_gradient_jacobian(jac_m: np.ndarray, g: GeneratorType) -> np.ndarray:
    """N = (A JacM + B)(C JacM + D)^-1 at one point (chain rule)."""
    return (g.A @ jac_m + g.B) @ np.linalg.inv(g.C @ jac_m + g.D)


def map_from_generator(N, g: GeneratorType) -> np.ndarray:
    """Converse formula M = (N C - A)^-1 (B - N D)."""
    N = np.asarray(N, dtype=np.float64)
    lhs = N @ g.C - g.A
    if not np.isfinite(np.linalg.cond(lhs)) or np.linalg.cond(lhs) > 1e13:
        raise SingularNCminusA("N C - A is singular")
    return np.linalg.solve(lhs, g.B - N @ g.D)


# ---------------------------------------------------------------------------
# example maps

POLY4D_F = "1.5 q1 q2 + q1^2 + 2 (q1+q2)^3 + 1.45 (1.1 q1 - 0.5 q2)^4"


def _cubic2d(order: int) -> PolyMap:
    lin = PolyMap.linear(rotation(math.pi / 3), order)
    q, p = lin.components
    s = q + p
    cube = s * s * s
    return PolyMap([q - cube * 3.0, p + cube * 3.0])


def _poly4d_kick_gradient(order: int, nvars: int = 4) -> tuple[MultivarPoly, MultivarPoly]:
    q1 = MultivarPoly.variable(0, nvars, order)
    q2 = MultivarPoly.variable(1, nvars, order)
    u = q1 * 1.1 - q2 * 0.5
    u3 = u * u * u
    s2 = (q1 + q2) * (q1 + q2)
    # df/dq1 and df/dq2 of f = 1.5 q1 q2 + q1^2 + 2 (q1+q2)^3 + 1.45 u^4
    d1 = q2 * 1.5 + q1 * 2.0 + s2 * 6.0 + u3 * (4 * 1.45 * 1.1)
    d2 = q1 * 1.5 + s2 * 6.0 + u3 * (4 * 1.45 * -0.5)
    return d1, d2


def _poly4d(order: int, kick_sign: float = -1.0) -> PolyMap:
    rot = np.zeros((4, 4))
    c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
    # (q1, q2, p1, p2): each (q_i, p_i) plane rotated by pi/3
    for i in range(2):
        rot[i, i], rot[i, i + 2] = c, s
        rot[i + 2, i], rot[i + 2, i + 2] = -s, c
    r = PolyMap.linear(rot, order)
    d1, d2 = _poly4d_kick_gradient(order)
    kick = PolyMap([MultivarPoly.variable(0, 4, order), MultivarPoly.variable(1, 4, order),
                    MultivarPoly.variable(2, 4, order) + d1 * kick_sign,
                    MultivarPoly.variable(3, 4, order) + d2 * kick_sign])
    return poly_compose(kick, r)


def example_maps(name: str, order: int = 7, kick_sign: float = -1.0) -> SymplecticMapRep:
    """``cubic2d`` or ``poly4d`` (kick sign -1 by default, see notes)."""
    if name == "cubic2d":
        return SymplecticMapRep(_cubic2d(order), name)
    if name == "poly4d":
        return SymplecticMapRep(_poly4d(order, kick_sign), name)
    raise KeyError(f"unknown example map {name!r}")


# ---------------------------------------------------------------------------
# closed-form 2D determinant

_R3 = Interval(3.0).sqrt()


def _det_coefficients(S: SymmetricMatrixS) -> tuple[Interval, Interval]:
    s = S.matrix
    s11, s12, s22 = Interval(s[0, 0]), Interval(s[0, 1]), Interval(s[1, 1])
    two_r3 = _R3 + 2.0
    denom = (_R3 + 1.0).sqr() * 8.0
    c1 = (two_r3 * (s12 + 1.0) + s22) * 9.0 / denom
    c2 = (two_r3 * (s12 - 1.0) + (_R3 * 4.0 + 7.0) * s11) * 9.0 / denom
    return c1, c2


def _xform(q: Interval, p: Interval) -> Interval:
    return (Interval(1.0) - _R3) * q + (_R3 + 1.0) * p


def analytic_det_2d(S: SymmetricMatrixS, box: Box, reading: str = "derived") -> Interval:
    """Enclosure of the closed-form row determinant of the 2D cubic map.

    ``box`` is the (q, p) box; the two rows use independent points from it.
    ``reading='derived'`` uses the second row's point in the second term,
    ``reading='printed'`` repeats the first row's point in both terms.
    """
    if S.dim != 2 or box.dim != 2:
        raise WrongDimension("analytic determinant exists only for the 2D cubic map")
    c1, c2 = _det_coefficients(S)
    x = _xform(box[0], box[1]).sqr()
    if reading == "derived":
        return c1 * x + c2 * x + 1.0
    if reading == "printed":
        return (c1 + c2) * x + 1.0
    raise ValueError(f"unknown reading {reading!r}")


def global_conditions_2d(S: SymmetricMatrixS) -> dict[str, bool]:
    """Sufficient conditions for a globally positive determinant.

    ``printed`` are the inequalities as stated with the example; ``derived``
    are the sign conditions of the two coefficients (c1, c2 >= 0).
    """
    s = S.matrix
    s11, s12, s22 = s[0, 0], s[0, 1], s[1, 1]
    r3 = math.sqrt(3.0)
    printed = (s22 <= (2 + r3) * (s12 + 1)) and (s11 <= (2 + r3) / (7 + 4 * r3) * (s12 - 1))
    c1, c2 = _det_coefficients(S)
    return {"printed": bool(printed), "derived": bool(c1.lo >= 0.0 and c2.lo >= 0.0)}


# ---------------------------------------------------------------------------
# CSV of generator blocks

def write_blocks_csv(g: GeneratorType, path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = g.dim
    w.writerow(["block", "row"] + [f"c{j}" for j in range(d)])
    for name in "ABCD":
        for i, row in enumerate(getattr(g, name)):
            w.writerow([name, i] + [repr(float(x)) for x in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_blocks_csv(text: str) -> GeneratorType:
    rows = list(csv.reader(io.StringIO(text)))[1:]
    blocks: dict[str, list[list[float]]] = {k: [] for k in "ABCD"}
    for r in rows:
        if r:
            blocks[r[0]].append([float(x) for x in r[2:]])
    return GeneratorType(*(np.array(blocks[k]) for k in "ABCD"), provenance="csv")
