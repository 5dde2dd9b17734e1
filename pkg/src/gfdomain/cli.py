"""Command-line entry point: ``gfdomain [global flags] VERB ...``.

Exit status 0 on success, 2 when a numerical error propagates (failed
inclusion, step underflow, singular linear part, interval domain errors).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .certify import certify_invertible, max_certified_box, scaled_box
from .flows import (Beamline, cell_map, fpu_half_period, fpu_system, growth_system,
                    integrate_flow, oscillator_system, proton_brho)
from .interval import Box
from .symplectic import SymmetricMatrixS

log = logging.getLogger("gfdomain")

NUMERICAL_ERRORS = (ArithmeticError, np.linalg.LinAlgError)
SYSTEMS = ("fpu", "oscillator", "growth", "cell")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _write(args, name: str, text: str) -> None:
    if args.out:
        path = Path(args.out) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        log.info("wrote %s", path)


def _scenario(args, name: str, **kw) -> ex.Scenario:
    cfg = ex.read_config(args.config) if args.config else {}
    kw.setdefault("order", args.order)
    if args.seed is not None:
        kw.setdefault("seed", args.seed)
    if getattr(args, "table3", False):
        if name != "cell":
            raise SystemExit("--table3 applies to the cell scenario only")
        base = ex.table3_scenario()
        kw.setdefault("brho", base.brho)
        kw.setdefault("sext_form", base.sext_form)
        kw.setdefault("flow_halfwidth", ex.TABLE3_HALFWIDTHS)
    return ex.scenario_from_config(name, cfg, **kw)


def _s_spec(args, dim: int) -> dict:
    if args.s_file:
        mats = [SymmetricMatrixS.from_text(line, dim)
                for line in Path(args.s_file).read_text().splitlines()
                if line.split("#", 1)[0].strip()]
        return dict(s_kind="explicit", s_explicit=tuple(mats))
    if args.s_values:
        return dict(s_kind="explicit", s_explicit=(SymmetricMatrixS(_floats(args.s_values), dim),))
    kind = {"0": "zero", "zero": "zero", "I": "identity", "identity": "identity",
            "random": "random"}[args.s]
    return dict(s_kind=kind, count=args.count, entry_range=args.entry_range)


# ---------------------------------------------------------------------------
# verbs

def cmd_certify(args) -> int:
    dim = {"cubic2d": 2, "poly4d": 4, "fpu": 6, "cell": 4}[args.scenario]
    sc = _scenario(args, args.scenario, max_pieces=args.max_pieces, det_order=args.det_order,
                   **_s_spec(args, dim))
    src = ex.build_source(sc)
    aspect = src.aspect
    if args.aspect:
        w = _floats(args.aspect)
        if len(w) != dim:
            raise SystemExit(f"--aspect needs {dim} values")
        aspect = (w, w)

    def run(rows):
        return certify_invertible(rows, method=args.method, max_pieces=sc.max_pieces,
                                  det_order=sc.det_order)

    certs = []
    for label, S in sc.matrices():
        tgt = src.target(S)
        if args.box_scale is not None:
            cert = run(tgt.rows(scaled_box(args.box_scale, *aspect)))
            cert.extra["scale"] = args.box_scale
        else:
            cert = max_certified_box(tgt, aspect, sc.scale_lo, sc.scale_hi, sc.iters, certify=run)
        cert.target = f"{sc.name}[{label}]"
        cert.extra.update(label=label, S=S.to_text())
        certs.append(cert)
    text = ex.emit(certs, args.format, scenario=sc.name)
    sys.stdout.write(text)
    _write(args, f"certify_{sc.name}.{'csv' if args.format == 'csv' else 'txt'}", text)
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario(args, args.scenario, det_order=args.det_order, target_scale=args.target_scale)
    scales = _floats(args.scales) if args.scales else np.linspace(0.0, 1.0, args.grid)
    res = ex.sweep_s(sc, count=args.count, entry_range=args.entry_range, scales=scales,
                     workers=args.workers)
    text = res.to_csv()
    sys.stdout.write(text)
    sys.stdout.write(f"# spearman {res.spearman()!r}\n")
    _write(args, f"sweep_{sc.name}.csv", text)
    return 0


def cmd_track(args) -> int:
    sc = _scenario(args, args.scenario)
    pm = ex.scenario_map(sc)
    escape = args.escape if args.escape is not None else ex.default_escape(sc)
    amps = np.linspace(0.0, args.max_amp, args.launches + 1)[1:]
    axes = range(pm.nvars) if args.axis is None else [args.axis]
    names = ex._names(sc.name, pm.nvars)
    lines = ["axis,aperture"]
    for k in axes:
        res = ex.aperture_scan(pm, k, amps, args.turns, escape)
        lines.append(f"{names[k]},{res.aperture!r}")
        if args.record and args.out:
            rec = ex.track(pm, res.launches, args.turns, escape, record=args.record)
            for i in range(len(amps)):
                _write(args, f"orbits/{names[k]}_{i:03d}.csv", rec.orbit_csv(i))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    _write(args, f"track_{sc.name}.csv", text)
    return 0


def _integrate(args):
    order = args.order or 7
    if args.system == "cell":
        cfg = ex.read_config(args.config) if args.config else {}
        brho = proton_brho(1.0) if cfg.get("brho") == "proton1MeV" else (
            float(cfg["brho"]) if "brho" in cfg else None)
        bl = Beamline.from_text(Path(cfg["beamline"]).read_text()) if "beamline" in cfg else None
        w = args.halfwidth if args.halfwidth else [0.1]
        box = Box.symmetric(w * 4 if len(w) == 1 else w)
        return cell_map(order=order, box=box, beamline=bl, with_variational=args.variational,
                        brho=brho, sext_form=cfg.get("sext_form", "literal"))
    if args.system == "fpu":
        sysm, span, dim, w0 = fpu_system(), fpu_half_period(), 6, 0.05
    elif args.system == "oscillator":
        sysm, span, dim, w0 = oscillator_system(), 2 * math.pi, 2, 0.0
    else:
        sysm, span, dim, w0 = growth_system(), 1.0, 1, 0.0
    span = args.span if args.span is not None else span
    w = args.halfwidth if args.halfwidth else [w0]
    w = w * dim if len(w) == 1 else w
    center = args.center if args.center else [1.0 if args.system != "fpu" and i == 0 else 0.0
                                              for i in range(dim)]
    box = Box([[c - h, c + h] for c, h in zip(center, w)])
    return integrate_flow(sysm, box, 0.0, span, order=order, with_variational=args.variational)


def cmd_integrate(args) -> int:
    fe = _integrate(args)
    text = ex.emit(fe, "tm_dump")
    _write(args, f"flow_{args.system}.tm", text)
    summary = (f"system {fe.system or args.system}\nspan [{fe.t0!r}, {fe.tf!r}]\n"
               f"steps {len(fe.steps)}\nmax_remainder {fe.max_remainder()!r}\n"
               f"relative_remainder {ex.relative_remainder(fe)!r}\n")
    if args.out:
        _write(args, f"flow_{args.system}.summary", summary)
    else:
        sys.stdout.write(text)
    sys.stdout.write(summary)
    return 0


def cmd_dump_tm(args) -> int:
    order = args.order or 8
    if args.what == "table3":
        fe = ex.table3_flow(order)
    else:
        sc = _scenario(args, args.what)
        fe = ex.build_source(sc).flow
    comps = [fe.flow[i] for i in args.component] if args.component else list(fe.flow)
    text = ex.emit(comps, "tm_dump")
    sys.stdout.write(text)
    _write(args, f"{args.what}.tm", text)
    return 0


# ---------------------------------------------------------------------------
# parser

def _global_flags(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--order", type=int, default=default, help="Taylor order (scenario default if omitted)")
    p.add_argument("--seed", type=int, default=default, help="seed for random S")
    p.add_argument("--out", metavar="DIR", default=default, help="write artifacts into DIR")
    p.add_argument("--config", metavar="FILE", default=default, help="plain 'key = value' scenario file")
    p.add_argument("-v", "--verbose", action="store_true", default=False if default is None else default)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gfdomain", description="Verified domains of extended generating functions.")
    _global_flags(p, None)
    # the same flags are accepted after the verb; SUPPRESS keeps the earlier value
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("certify", parents=[common], help="largest certified box per S")
    c.add_argument("scenario", choices=ex.SCENARIOS)
    c.add_argument("--s", default="0", choices=["0", "zero", "I", "identity", "random"])
    c.add_argument("--s-values", default=None, help="upper triangle of one explicit S")
    c.add_argument("--s-file", default=None, help="one upper triangle per line")
    c.add_argument("--count", type=int, default=10)
    c.add_argument("--entry-range", type=float, default=None)
    c.add_argument("--aspect", default=None, help="per-axis half-width ratios")
    c.add_argument("--box-scale", type=float, default=None, help="certify this one scale only")
    c.add_argument("--method", default="auto", choices=["auto", "minors", "vertex", "ge"])
    c.add_argument("--max-pieces", type=int, default=None)
    c.add_argument("--det-order", type=int, default=None)
    c.add_argument("--format", default="table_text", choices=["table_text", "csv"])
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("sweep", parents=[common], help="fraction of c*S certified per scale c")
    s.add_argument("scenario", choices=ex.SCENARIOS)
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--scales", default=None, help="explicit scale grid")
    s.add_argument("--grid", type=int, default=10, help="points of linspace(0, 1)")
    s.add_argument("--entry-range", type=float, default=None)
    s.add_argument("--target-scale", type=float, default=None)
    s.add_argument("--det-order", type=int, default=None)
    s.add_argument("--table3", action="store_true", help="cell with the Table III strengths and box")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("track", parents=[common], help="float tracking and aperture estimates")
    t.add_argument("scenario", choices=ex.SCENARIOS)
    t.add_argument("--turns", type=int, default=10000)
    t.add_argument("--launches", type=int, default=100)
    t.add_argument("--max-amp", type=float, default=0.5)
    t.add_argument("--axis", type=int, default=None)
    t.add_argument("--escape", type=float, default=None)
    t.add_argument("--record", type=int, default=0, help="turns of each orbit to write (needs --out)")
    t.set_defaults(func=cmd_track)

    i = sub.add_parser("integrate", parents=[common], help="verified flow enclosure")
    i.add_argument("system", choices=SYSTEMS)
    i.add_argument("--span", type=float, default=None)
    i.add_argument("--halfwidth", type=float, nargs="+", default=None)
    i.add_argument("--center", type=float, nargs="+", default=None)
    i.add_argument("--variational", action="store_true")
    i.set_defaults(func=cmd_integrate)

    d = sub.add_parser("dump-tm", parents=[common], help="Taylor models of a flow map")
    d.add_argument("what", choices=["cell", "fpu", "table3"])
    d.add_argument("--component", type=int, nargs="+", default=None)
    d.set_defaults(func=cmd_dump_tm)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as e:
        print(f"gfdomain: numerical error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
