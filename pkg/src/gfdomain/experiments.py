"""Scenario runners, random-S sweeps, float tracking and text/CSV emission.

The four scenarios are ``cubic2d`` and ``poly4d`` (polynomial maps) and
``fpu`` and ``cell`` (flows of Hamiltonian systems). For flows the box search
runs in the flow's scaled coordinates: scale s means s times the integrated box.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import kernels
from .certify import (DomainCertificate, PolyTarget, VariationalTarget,
                      certify_invertible, max_certified_box, scaled_box)
from .flows import (Beamline, FlowEnclosure, cell_map, fpu_half_period, fpu_system,
                    integrate_flow, proton_brho)
from .interval import Box
from .polyalg import PolyMap
from .symplectic import (SymmetricMatrixS, build_alpha, example_maps, gradient_target)
from .taylormodel import TmVector

SCENARIOS = ("cubic2d", "poly4d", "fpu", "cell")

# printed lower bounds; poly4d row in (q1, q2, p1, p2) order as (lower, upper) extents
TABLE_I = {"0": 0.333, "I": 0.310,
           "S": [0.301, 0.261, 0.258, 0.360, 0.377, 0.109, 0.111, 0.105, 0.090, 0.042]}
TABLE_II_S0 = ([0.02220, 0.02664, 0.01924, 0.05328], [0.03404, 0.03552, 0.01924, 0.05328])
TABLE_II_Q1_LOWER = {"0": 0.02220, "I": 0.03742,
                     "S": [0.01732, 0.01610, 0.02112, 0.04900, 0.00967, 0.01630, 0.01489,
                           0.01186, 0.02064, 0.06874]}

DEFAULTS = {
    "cubic2d": dict(order=7, entry_range=10.0, scale_hi=2.0, target_scale=0.1),
    "poly4d": dict(order=7, entry_range=10.0, scale_hi=4.0, target_scale=0.25),
    "fpu": dict(order=6, entry_range=1.0, scale_hi=1.0, target_scale=0.5, flow_halfwidth=0.05),
    "cell": dict(order=8, entry_range=1.0, scale_hi=1.0, target_scale=1.0, flow_halfwidth=0.1),
}

# larger runs as described for the original study
FULL_SCALE = {"count": 1000, "cell_order": 17}


@dataclass(frozen=True)
class Scenario:
    name: str
    order: int | None = None
    s_kind: str = "zero"  # zero | identity | random | explicit
    s_explicit: tuple = ()
    count: int = 10
    entry_range: float | None = None
    seed: int = 0
    scale_lo: float = 2.0 ** -10
    scale_hi: float | None = None
    iters: int = 14
    max_pieces: int = 1
    det_order: int | None = None
    target_scale: float | None = None
    flow_halfwidth: float | tuple | None = None
    span: float | None = None
    brho: float | None = None
    sext_form: str = "literal"
    beamline: str | None = None  # config text

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}; choose from {SCENARIOS}")
        if self.s_kind not in ("zero", "identity", "random", "explicit"):
            raise ValueError(f"unknown S kind {self.s_kind!r}")
        for key, val in DEFAULTS[self.name].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, val)

    @property
    def phase_dim(self) -> int:
        return {"cubic2d": 2, "poly4d": 4, "fpu": 6, "cell": 4}[self.name]

    def matrices(self) -> list[tuple[str, SymmetricMatrixS]]:
        d = self.phase_dim
        if self.s_kind == "zero":
            return [("0", SymmetricMatrixS.zero(d))]
        if self.s_kind == "identity":
            return [("I", SymmetricMatrixS.identity(d))]
        if self.s_kind == "explicit":
            return [(f"S{i + 1}", s) for i, s in enumerate(self.s_explicit)]
        rng = np.random.default_rng(self.seed)
        return [(f"S{i + 1}", SymmetricMatrixS.random(d, rng, self.entry_range)) for i in range(self.count)]


@dataclass
class Source:
    """What a scenario certifies: a polynomial map or a flow with variational data."""

    name: str
    dim: int
    linear: np.ndarray
    aspect: tuple[list[float], list[float]]
    polymap: PolyMap
    flow: FlowEnclosure | None = None
    _vtarget: VariationalTarget | None = None

    def target(self, S: SymmetricMatrixS):
        g = build_alpha(S, self.linear)
        if self.flow is None:
            return PolyTarget(gradient_target(self.polymap, g), self.name)
        if self._vtarget is None:
            self._vtarget = VariationalTarget(self.flow.variational, None, None, self.name)
        return self._vtarget.with_blocks(g.C, g.D)


_SOURCES: dict[tuple, Source] = {}


def _source_key(sc: Scenario) -> tuple:
    return (sc.name, sc.order, sc.flow_halfwidth, sc.span, sc.brho, sc.sext_form, sc.beamline)


def build_source(sc: Scenario) -> Source:
    key = _source_key(sc)
    if key in _SOURCES:
        return _SOURCES[key]
    if sc.name in ("cubic2d", "poly4d"):
        m = example_maps(sc.name, order=sc.order).map
        if sc.name == "cubic2d":
            aspect = ([1.0, 1.0], [1.0, 1.0])
        else:
            aspect = (list(TABLE_II_S0[0]), list(TABLE_II_S0[1]))
        src = Source(sc.name, m.nvars, m.linear_part(), aspect, m)
    else:
        w = sc.flow_halfwidth
        ws = [float(w)] * sc.phase_dim if np.ndim(w) == 0 else [float(x) for x in w]
        box = Box.symmetric(ws)
        if sc.name == "fpu":
            fe = integrate_flow(fpu_system(), box, 0.0, sc.span or fpu_half_period(),
                                order=sc.order, with_variational=True)
        else:
            bl = Beamline.from_text(sc.beamline) if sc.beamline else None
            fe = cell_map(order=sc.order, box=box, beamline=bl, brho=sc.brho, sext_form=sc.sext_form)
        pm = fe.physical_polymap()
        src = Source(sc.name, sc.phase_dim, pm.linear_part(), (ws, ws), pm, fe)
    _SOURCES[key] = src
    return src


def _certifier(sc: Scenario):
    def run(rows):
        return certify_invertible(rows, max_pieces=sc.max_pieces, det_order=sc.det_order)
    return run


def _one(args) -> DomainCertificate:
    sc, label, S = args
    src = build_source(sc)
    cert = max_certified_box(src.target(S), src.aspect, sc.scale_lo, sc.scale_hi, sc.iters,
                             certify=_certifier(sc))
    cert.target = f"{sc.name}[{label}]"
    cert.extra.update(label=label, S=S.to_text())
    return cert


def run_scenario(sc: Scenario, workers: int = 1) -> list[DomainCertificate]:
    """Largest certified box per S of the scenario (input order preserved)."""
    jobs = [(sc, label, S) for label, S in sc.matrices()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_one, jobs))
    return [_one(j) for j in jobs]


def certify_at(sc: Scenario, S: SymmetricMatrixS, scale: float) -> DomainCertificate:
    """Certificate for one fixed box ``scale * aspect``."""
    src = build_source(sc)
    box = scaled_box(scale, *src.aspect)
    cert = _certifier(sc)(src.target(S).rows(box))
    cert.extra["scale"] = scale
    return cert


def revalidate(sc: Scenario, cert: DomainCertificate) -> bool:
    """Re-run the certification at the emitted box (and the S recorded in it)."""
    S = SymmetricMatrixS.from_text(cert.extra["S"], sc.phase_dim)
    src = build_source(sc)
    return _certifier(sc)(src.target(S).rows(cert.box)).certified


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepResult:
    scenario: str
    scales: np.ndarray
    fractions: np.ndarray
    statuses: np.ndarray  # (count, len(scales)) booleans
    matrices: list[str] = field(default_factory=list)
    target_scale: float = 1.0

    def spearman(self) -> float:
        if np.ptp(self.fractions) == 0:
            return 0.0
        return float(stats.spearmanr(self.scales, self.fractions).statistic)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "fraction"])
        for s, f in zip(self.scales, self.fractions):
            w.writerow([repr(float(s)), repr(float(f))])
        return buf.getvalue()


def _sweep_one(args) -> list[bool]:
    sc, S, scales, box_scale = args
    src = build_source(sc)
    box = scaled_box(box_scale, *src.aspect)
    cert = _certifier(sc)
    return [cert(src.target(S.scaled(c)).rows(box)).certified for c in scales]


def sweep_s(sc: Scenario, count: int = 200, entry_range: float | None = None,
            scales: Sequence[float] | None = None, workers: int = 1) -> SweepResult:
    """Fraction of c * S_i certified over the scenario's fixed target box, per scale c."""
    if count < 1:
        raise ValueError("count must be at least 1")
    scales = np.linspace(0.0, 1.0, 10) if scales is None else np.asarray(scales, dtype=np.float64)
    sc = replace(sc, s_kind="random", count=count,
                 entry_range=sc.entry_range if entry_range is None else entry_range)
    mats = [S for _, S in sc.matrices()]
    jobs = [(sc, S, list(scales), sc.target_scale) for S in mats]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    st = np.array(rows, dtype=bool)
    return SweepResult(sc.name, scales, st.mean(axis=0), st, [S.to_text() for S in mats], sc.target_scale)


# ---------------------------------------------------------------------------
# tracking (float only, never used by the rigorous parts)

@dataclass
class TrackResult:
    final: np.ndarray
    survived: np.ndarray
    turns: int
    launches: np.ndarray
    aperture: float | None = None
    orbits: list[np.ndarray] | None = None

    def orbit_csv(self, i: int) -> str:
        if self.orbits is None:
            raise ValueError("orbits were not recorded")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["turn"] + [f"z{k + 1}" for k in range(self.orbits[i].shape[1])])
        for t, z in enumerate(self.orbits[i]):
            w.writerow([t] + [repr(float(v)) for v in z])
        return buf.getvalue()


def track(pm: PolyMap, initial: np.ndarray, turns: int, escape_radius: float,
          record: int = 0) -> TrackResult:
    """Iterate a polynomial map; a particle escapes when any |z_k| > escape_radius.

    ``record`` > 0 keeps the first ``record`` turns of every orbit.
    """
    if turns < 1:
        raise ValueError("turns must be at least 1")
    start = np.atleast_2d(np.asarray(initial, dtype=np.float64))
    coeffs = np.ascontiguousarray(pm.coeff_matrix())
    exps = np.ascontiguousarray(pm.index.exps, dtype=np.int32)
    orbits = None
    if record:
        z = start.copy()
        hist = [z.copy()]
        for _ in range(min(record, turns)):
            with np.errstate(over="ignore", invalid="ignore"):
                z = kernels.monomial_values(exps, z) @ coeffs.T
            hist.append(z.copy())
        orbits = [np.array([h[i] for h in hist]) for i in range(start.shape[0])]
    final, survived = kernels.track(coeffs, exps, start, int(turns), float(escape_radius))
    return TrackResult(np.asarray(final), np.asarray(survived), turns, start, None, orbits)


def aperture_scan(pm: PolyMap, axis: int, amplitudes: Sequence[float], turns: int,
                  escape_radius: float) -> TrackResult:
    """Launch along one axis; aperture = largest amplitude below which every launch survives."""
    amps = np.sort(np.asarray(amplitudes, dtype=np.float64))
    pts = np.zeros((amps.size, pm.nvars))
    pts[:, axis] = amps
    res = track(pm, pts, turns, escape_radius)
    ok = res.survived >= turns
    ap = 0.0
    for a, good in zip(amps, ok):
        if not good:
            break
        ap = float(a)
    res.aperture = ap
    return res


def scenario_map(sc: Scenario) -> PolyMap:
    return build_source(sc).polymap


def default_escape(sc: Scenario) -> float:
    src = build_source(sc)
    return 10.0 * max(max(src.aspect[0]), max(src.aspect[1])) * (sc.scale_hi if sc.flow_halfwidth is None else 1.0)


# ---------------------------------------------------------------------------
# emission

def interleaved_order(n: int) -> list[int]:
    """Internal (q..., p...) indices listed pairwise as q1, p1, q2, p2, ..."""
    return [k for i in range(n) for k in (i, n + i)]


def _names(sc_name: str, d: int) -> list[str]:
    if sc_name == "cell":
        return ["x", "y", "a", "b"]
    n = d // 2
    return [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]


def table_text(certs: Sequence[DomainCertificate], scenario: str) -> str:
    """One row per S: label and the certified box, pairs listed (q1;p1;q2;p2;...)."""
    if not certs:
        return ""
    d = certs[0].box.dim
    order = interleaved_order(d // 2)
    names = _names(scenario, d)
    head = "[S]  (" + ";".join(names[k] for k in order) + ") lower bounds for the domain of the generator"
    lines = [head]
    for c in certs:
        label = c.extra.get("label", c.target)
        if c.certified:
            body = ";".join(f"[{c.box[k].lo!r},{c.box[k].hi!r}]" for k in order)
        else:
            body = "none certified"
        lines.append(f"{label}  ({body})")
    return "\n".join(lines) + "\n"


def certificates_csv(certs: Sequence[DomainCertificate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = certs[0].box.dim if certs else 0
    w.writerow(["label", "status", "scale"] + [f"lo{k + 1}" for k in range(d)] + [f"hi{k + 1}" for k in range(d)]
               + ["det_lo", "det_hi", "order", "S"])
    for c in certs:
        w.writerow([c.extra.get("label", c.target), c.status, repr(float(c.extra.get("scale", float("nan"))))]
                   + [repr(iv.lo) for iv in c.box] + [repr(iv.hi) for iv in c.box]
                   + [repr(c.det_enclosure.lo), repr(c.det_enclosure.hi), c.order, c.extra.get("S", "")])
    return buf.getvalue()


def emit(results, fmt: str, path: str | Path | None = None, scenario: str = "") -> str:
    """Render results as ``csv``, ``table_text`` or ``tm_dump``; write to ``path`` if given."""
    if fmt == "csv":
        if isinstance(results, SweepResult):
            text = results.to_csv()
        else:
            text = certificates_csv(list(results))
    elif fmt == "table_text":
        text = table_text(list(results), scenario)
    elif fmt == "tm_dump":
        if isinstance(results, FlowEnclosure):
            text = results.dump()
        elif isinstance(results, TmVector):
            text = results.to_text()
        else:
            text = "\n".join(tm.to_text() for tm in results)
        text += "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    return text


# ---------------------------------------------------------------------------
# configuration files

def read_config(path: str | Path) -> dict[str, str]:
    """Plain ``key = value`` (or ``key value``) lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = line.split("=", 1)
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            key, val = parts
        out[key.strip().replace("-", "_")] = val.strip()
    return out


_FIELD_TYPES = {"order": int, "count": int, "seed": int, "iters": int, "max_pieces": int,
                "det_order": int, "entry_range": float, "scale_lo": float, "scale_hi": float,
                "target_scale": float, "flow_halfwidth": float, "span": float, "brho": float,
                "sext_form": str, "s_kind": str}


def scenario_from_config(name: str, cfg: dict[str, str], **overrides) -> Scenario:
    kw = {}
    for key, typ in _FIELD_TYPES.items():
        if key in cfg:
            kw[key] = proton_brho(1.0) if (key, cfg[key]) == ("brho", "proton1MeV") else typ(cfg[key])
    if "beamline" in cfg:
        kw["beamline"] = Path(cfg["beamline"]).read_text()
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return Scenario(name, **kw)


def table3_scenario(order: int = 8) -> Scenario:
    """Cell preset that reproduces the printed Taylor model of x (see notes)."""
    return Scenario("cell", order=order, brho=proton_brho(1.0), sext_form="standard")


TABLE3_HALFWIDTHS = (0.15, 0.15, 0.02, 0.02)  # internal order x, y, a, b


def table3_flow(order: int = 8) -> FlowEnclosure:
    box = Box.symmetric(list(TABLE3_HALFWIDTHS))
    return cell_map(order=order, box=box, with_variational=False, brho=proton_brho(1.0),
                    sext_form="standard")


def relative_remainder(fe: FlowEnclosure) -> float:
    """max over components of remainder width / width of the order-1 bound."""
    worst = 0.0
    for tm in fe.flow:
        lin = tm.poly.homogeneous(1).bound()
        worst = max(worst, tm.rem.width / lin.width if lin.width > 0 else math.inf)
    return worst
