"""Command-line interface.

Subcommands: phantom, simulate, reconstruct, roi, sweep, pem-study, scatter.
Results are written as CSV / text files with the resolved config embedded;
a one-line JSON summary goes to stdout.  Failures print a one-line JSON
error record to stderr and exit nonzero.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import dbar_core as dc
from . import io as fio
from . import pipeline as pl
from .conformal import HalfplaneMobiusMap, IdentityMap, MobiusDiskMap, SCMap
from .errors import ConfigError, DbarError
from .phantoms import phantom_from_doc

COMMANDS = ("phantom", "simulate", "reconstruct", "roi", "sweep", "pem-study", "scatter")


def _xy(text):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return [x, y]


def _map_arg(text):
    """``KIND[:p1,p2,...]`` -> map section."""
    kind, _, params = text.partition(":")
    vals = [float(v) for v in params.split(",")] if params else []
    if kind == "mobius":
        return {"kind": kind, "a": (vals + [0.0, 0.0])[:2]}
    if kind == "halfplane":
        out = {"kind": kind}
        if vals:
            out["b"] = vals[0]
        if len(vals) > 1:
            out["xi"] = [0.0, vals[1]] if len(vals) == 2 else vals[1:3]
        return out
    if kind in ("sc", "roi") and len(vals) >= 2:
        return {"kind": kind, "anchor": vals[:2]}
    return {"kind": kind}


def build_parser():
    p = argparse.ArgumentParser(prog="conformal-dbar", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON job config (phantom/map/solver/output sections)")
    p.add_argument("--phantom", help="phantom JSON file or shipped name")
    p.add_argument("--map", type=_map_arg, help="identity | mobius:X,Y | sc | roi | halfplane:B[,XI]")
    p.add_argument("--anchor", type=_xy, help="ROI anchor X,Y")
    p.add_argument("--N", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--auto-trunc", action="store_true", default=None)
    p.add_argument("--kmax", type=float)
    p.add_argument("--kgrid", type=int)
    p.add_argument("--lattice", type=int)
    p.add_argument("--bnodes", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--deterministic", action="store_true", default=None)
    p.add_argument("--route", choices=("direct", "pushforward"))
    p.add_argument("--r", type=float, help="pem-study: Sobolev order of the synthetic current")
    p.add_argument("--mode", type=int, help="pem-study: single Fourier mode instead")
    p.add_argument("--compare", action="store_true", default=None,
                   help="roi: also run the unmagnified pipeline")
    p.add_argument("--data", help="ND matrix file to reconstruct from")
    p.add_argument("--out")
    p.add_argument("--ppm")
    p.add_argument("--print-config", action="store_true")
    return p


def resolve_config(args):
    cfg, problems = fio.merge_config(fio.DEFAULT_CONFIG, {})
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as e:
            raise ConfigError([f"config: {e}"]) from None
        cfg, problems = fio.merge_config(fio.DEFAULT_CONFIG, doc)
    cfg["command"] = args.command
    s = cfg["solver"]
    for name in ("N", "R", "c", "kmax", "kgrid", "lattice", "bnodes", "grid", "noise", "seed",
                 "jobs", "route", "r", "mode"):
        v = getattr(args, name)
        if v is not None:
            s[name] = v
    for name in ("auto_trunc", "deterministic", "compare"):
        v = getattr(args, name)
        if v is not None:
            s[name] = v
    if args.R is not None and args.auto_trunc is None:
        s["auto_trunc"] = False
    if args.phantom:
        cfg["phantom"] = args.phantom
    if args.map:
        cfg["map"] = args.map
    if args.anchor:
        if cfg["map"].get("kind") not in ("roi", "sc"):
            cfg["map"] = {"kind": "roi"}
        cfg["map"]["anchor"] = args.anchor
    if args.command == "roi" and cfg["map"].get("kind") != "roi":
        cfg["map"] = {"kind": "roi", "anchor": cfg["map"].get("anchor", [0.6 * np.cos(np.pi / 8),
                                                                         0.6 * np.sin(np.pi / 8)])}
    if args.command == "sweep":
        if args.N is None and not (args.config and "N" in doc.get("solver", {})):
            s["N"] = 5
        if cfg["phantom"] == fio.DEFAULT_CONFIG["phantom"]:
            cfg["phantom"] = "halfplane3"
    if args.command == "roi" and args.c is None and not args.config:
        s["c"] = 20.0
    for name in ("out", "ppm", "data"):
        v = getattr(args, name)
        if v is not None:
            cfg["output"][name] = v
    if s["deterministic"]:
        s["jobs"] = 1
    elif s["jobs"] is None:
        s["jobs"] = os.cpu_count() or 1
    problems += fio.validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_phantom(cfg):
    ph = cfg["phantom"]
    if isinstance(ph, str) and os.path.exists(ph):
        with open(ph) as fh:
            ph = json.load(fh)
    return phantom_from_doc(ph)


def build_map(cfg, phantom):
    m = cfg["map"]
    kind = m["kind"]
    if phantom.domain == "polygon" and kind == "identity":
        kind = "sc"
    if phantom.domain == "polygon" and kind == "mobius":
        raise ConfigError(["map kind 'mobius' does not apply to polygon domains; use sc or roi"])
    if phantom.domain == "halfplane" and kind != "halfplane" and cfg["command"] != "sweep":
        raise ConfigError(["half-plane phantoms need map kind 'halfplane'"])
    if kind == "identity":
        return IdentityMap()
    if kind == "mobius":
        return MobiusDiskMap(complex(*m.get("a", [0.0, 0.0])))
    if kind == "sc":
        if phantom.domain != "polygon":
            raise ConfigError(["map kind 'sc' needs a polygon phantom"])
        anchor = complex(*m["anchor"]) if "anchor" in m else None
        return SCMap(phantom.vertices, anchor)
    if kind == "roi":
        return pl.roi_map(phantom.domain, complex(*m.get("anchor", [0.0, 0.0])), phantom.vertices)
    xi = m.get("xi", [0.0, 1.2])
    return HalfplaneMobiusMap(m.get("b", 0.0), complex(*xi))


def _trunc(s, c=None):
    mode = "auto" if s["auto_trunc"] else "manual"
    return dc.TruncationParams(R=s["R"], c=c if c is not None else s["c"], mode=mode)


def _grid(phantom, s):
    return pl.midpoint_grid(pl.domain_box(phantom.domain, phantom.vertices), s["grid"])


def _virtual_nd(cfg, phantom, cmap):
    s = cfg["solver"]
    data = cfg["output"].get("data")
    if data:
        return fio.read_matrix(data)
    if phantom.domain == "halfplane":
        raise ConfigError(["half-plane data are produced by the sweep command"])
    if s["route"] == "pushforward":
        R = pl.virtual_nd_pushforward(phantom, cmap, s["N"], s["nystrom"])
    else:
        R = pl.virtual_nd_direct(phantom, cmap, s["N"], s["nystrom"])
    return pl.add_noise(R, s["noise"], s["seed"])


def _emit_grid(cfg, grid, out=None, ppm=None):
    out = out or cfg["output"]["out"]
    ppm = ppm or cfg["output"]["ppm"]
    if out:
        fio.write_grid_csv(out, grid, cfg)
    if ppm:
        vals = grid.sigma[grid.mask]
        lo = cfg["output"]["lo"]
        hi = cfg["output"]["hi"]
        if lo is None or hi is None:
            lo_a, hi_a = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 2.0)
            lo = lo_a if lo is None else lo
            hi = hi_a if hi is None else hi
            if not lo < hi:
                lo, hi = lo - 0.5, hi + 0.5
        with open(ppm, "wb") as fh:
            fh.write(fio.render_image(grid, lo, hi))


def _suffixed(path, tag):
    if not path:
        return None
    if "{b}" in path:
        return path.replace("{b}", tag)
    root, ext = os.path.splitext(path)
    return f"{root}_{tag}{ext}"


def cmd_phantom(cfg, phantom, cmap):
    x, y = _grid(phantom, cfg["solver"])
    Z = x[None, :] + 1j * y[:, None]
    mask = pl.domain_mask(phantom.domain, Z, phantom.vertices)
    sigma = np.where(mask, phantom.sigma(Z), np.nan)
    grid = pl.ReconstructionGrid(x, y, sigma, mask, np.zeros(Z.shape, dtype=int),
                                 {"phantom": phantom.name})
    _emit_grid(cfg, grid)
    return {"nodes": int(mask.sum())}


def cmd_simulate(cfg, phantom, cmap):
    R = _virtual_nd(cfg, phantom, cmap)
    if cfg["output"]["out"]:
        fio.write_matrix(cfg["output"]["out"], R, {
            "domain": phantom.domain, "map": cmap.describe(), "phantom": phantom.name or "custom",
            "route": cfg["solver"]["route"], "noise": fio.FMT % cfg["solver"]["noise"]})
    return {"N": R.spec.N, "max_abs": float(np.abs(R.entries).max())}


def cmd_reconstruct(cfg, phantom, cmap):
    s = cfg["solver"]
    R = _virtual_nd(cfg, phantom, cmap)
    grid = pl.reconstruct_virtual(R, cmap, _grid(phantom, s), _trunc(s), phantom.domain,
                                  phantom.vertices, kgrid=dc.KGrid(s["kmax"], s["kgrid"]),
                                  lattice=s["lattice"], bnodes=s["bnodes"], jobs=s["jobs"])
    _emit_grid(cfg, grid)
    out = {"R": grid.meta["R"], "nonconverged": int((grid.flag[grid.mask] == 1).sum())}
    if not cfg["output"].get("data"):
        out["relative_l2_error"] = pl.roi_error(grid, phantom)
    return out


def cmd_roi(cfg, phantom, cmap):
    s = cfg["solver"]
    anchor = complex(*cfg["map"]["anchor"])
    region = ("circle", anchor, s["roi_radius"])
    kw = dict(kgrid=dc.KGrid(s["kmax"], s["kgrid"]), lattice=s["lattice"], bnodes=s["bnodes"],
              jobs=s["jobs"])
    grid_nodes = _grid(phantom, s)
    R = _virtual_nd(cfg, phantom, cmap)
    g = pl.reconstruct_virtual(R, cmap, grid_nodes, _trunc(s), phantom.domain, phantom.vertices, **kw)
    _emit_grid(cfg, g)
    out = {"R": g.meta["R"], "roi_error": pl.roi_error(g, phantom, region)}
    if s["compare"]:
        base = SCMap(phantom.vertices) if phantom.domain == "polygon" else IdentityMap()
        R0 = _virtual_nd(cfg, phantom, base)
        g0 = pl.reconstruct_virtual(R0, base, grid_nodes, _trunc(s), phantom.domain,
                                    phantom.vertices, **kw)
        out["roi_error_unmagnified"] = pl.roi_error(g0, phantom, region)
    return out


def cmd_sweep(cfg, phantom, cmap):
    s = cfg["solver"]
    if phantom.domain != "halfplane":
        raise ConfigError(["sweep needs a half-plane phantom"])
    xi = complex(*s["xi"])
    box = pl.domain_box("halfplane", window=(min(s["b_list"]) - s["window"],
                                             max(s["b_list"]) + s["window"], s["window"]))
    n = s["grid"]
    grid = pl.midpoint_grid(box, n, max(8, int(round(n * (box[3] - box[2]) / (box[1] - box[0])))))
    grids = pl.halfplane_sweep(phantom, s["b_list"], xi, s["N"], s["window"], s["electrodes"],
                               _trunc(s), grid, dc.KGrid(s["kmax"], s["kgrid"]), s["lattice"],
                               s["nystrom"], s["jobs"])
    rows = []
    for b, g in zip(s["b_list"], grids):
        tag = f"b{b:+g}"
        _emit_grid(cfg, g, _suffixed(cfg["output"]["out"], tag), _suffixed(cfg["output"]["ppm"], tag))
        rows.append({"b": b, "R": g.meta["R"],
                     "contrast": [abs(pl.value_at(g, inc.center) - 1) for inc in phantom.inclusions]})
    return {"sweep": rows}


def cmd_pem_study(cfg, phantom, cmap):
    s = cfg["solver"]
    if s["mode"]:
        modes, coeffs = [s["mode"]], [1.0]
    else:
        modes, coeffs = pl.synthetic_current(s["r"])
    rows = pl.pem_convergence_study(phantom, cmap, modes, coeffs, s["M_list"], s["nystrom"])
    for M, e in rows:
        print(f"{M} {fio.FMT % e}")
    if cfg["output"]["out"]:
        with open(cfg["output"]["out"], "w") as fh:
            fh.write("# config: " + json.dumps(cfg, sort_keys=True) + "\nM error\n")
            fh.write("".join(f"{M} {fio.FMT % e}\n" for M, e in rows))
    return {"slope": pl.fitted_slope(rows)}


def cmd_scatter(cfg, phantom, cmap):
    s = cfg["solver"]
    R = _virtual_nd(cfg, phantom, cmap)
    L = pl.virtual_dn(R)
    raw = dc.scattering_grid(L, dc.KGrid(s["kmax"], s["kgrid"]), quad_nodes=s["bnodes"])
    scat = dc.truncate_scattering(raw, _trunc(s))
    if cfg["output"]["out"]:
        fio.write_scattering(cfg["output"]["out"], scat)
    return {"R": scat.R, "kept": int((~scat.mask).sum()), "flagged": int(raw.flagged.sum())}


HANDLERS = {
    "phantom": cmd_phantom,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "roi": cmd_roi,
    "sweep": cmd_sweep,
    "pem-study": cmd_pem_study,
    "scatter": cmd_scatter,
}


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.print_config:
            print(fio.dump_config(cfg))
            return 0
        phantom = load_phantom(cfg)
        if args.command in ("sweep", "phantom"):
            cmap = IdentityMap()
        else:
            cmap = build_map(cfg, phantom)
        summary = HANDLERS[args.command](cfg, phantom, cmap)
    except ConfigError as e:
        print(json.dumps({"error": "ConfigError", "problems": e.problems}), file=sys.stderr)
        return 2
    except (DbarError, ValueError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, **summary}, sort_keys=True, default=fio._jsonable))
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
