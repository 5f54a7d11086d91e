"""Text and image formats: ND matrices, scattering grids, reconstruction CSV,
binary pixmaps and JSON job configs."""

import copy
import json
import os

import numpy as np

from .dbar_core import KGrid, ScatteringGrid
from .errors import ConfigError, InvalidScaleError
from .fourier_ops import BasisSpec, OperatorMatrix

FMT = "%.17g"


# ------------------------------------------------------------- ND files


def write_matrix(path, mat, header=None):
    """``# key: value`` header, then ``m n re im`` rows in basis order."""
    spec = mat.spec
    head = {"N": spec.N, "role": mat.role, "boundary_length": FMT % spec.boundary_length}
    for k, v in (header or {}).items():
        head[k] = v if isinstance(v, (str, int)) else json.dumps(v, sort_keys=True)
    lines = [f"# {k}: {v}" for k, v in head.items()]
    E = mat.entries
    for i, m in enumerate(spec.indices):
        for j, n in enumerate(spec.indices):
            lines.append(f"{m} {n} {FMT % E[i, j].real} {FMT % E[i, j].imag}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix(path):
    head = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                head[key.strip()] = val.strip()
                continue
            rows.append(line.split())
    if "N" not in head:
        raise ConfigError([f"{path}: missing 'N' header"])
    N = int(head["N"])
    spec = BasisSpec(N, float(head.get("boundary_length", 2 * np.pi)))
    E = np.zeros((spec.size, spec.size), dtype=complex)
    seen = np.zeros(E.shape, dtype=bool)
    for r in rows:
        m, n = int(r[0]), int(r[1])
        i, j = spec.position(m), spec.position(n)
        E[i, j] = float(r[2]) + 1j * float(r[3])
        seen[i, j] = True
    if not seen.all():
        raise ConfigError([f"{path}: {int((~seen).sum())} matrix entries missing"])
    return OperatorMatrix(E, spec, head.get("role", "ND"), head)


# ---------------------------------------------------- scattering grids


def write_scattering(path, scat):
    """Rows ``k1 k2 re im masked`` over the grid (k1 fastest)."""
    g = scat.grid
    mask = scat.mask if scat.mask is not None else np.zeros(scat.t.shape, dtype=bool)
    lines = [f"# kmax: {FMT % g.kmax}", f"# points: {g.points}",
             f"# R: {FMT % scat.R}", f"# c: {FMT % scat.c}"]
    K = g.k
    for r in range(K.shape[0]):
        for c in range(K.shape[1]):
            t = scat.t[r, c]
            lines.append(f"{FMT % K[r, c].real} {FMT % K[r, c].imag} {FMT % t.real} "
                         f"{FMT % t.imag} {int(mask[r, c])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scattering(path):
    head = {}
    data = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                head[key.strip()] = val.strip()
            elif line.strip():
                data.append([float(x) for x in line.split()])
    g = KGrid(float(head["kmax"]), int(head["points"]))
    arr = np.array(data)
    t = (arr[:, 2] + 1j * arr[:, 3]).reshape(g.k.shape)
    mask = arr[:, 4].astype(bool).reshape(g.k.shape)
    return ScatteringGrid(g, t, np.zeros(t.shape, dtype=bool), float(head["R"]),
                          float(head["c"]), mask)


# ----------------------------------------------------------- grid CSV

FLAG_OK, FLAG_NONCONVERGED, FLAG_MASKED = 0, 1, 2


def write_grid_csv(path, grid, config=None):
    """Header ``x,y,sigma,flag``; masked nodes have sigma ``nan`` and flag 2."""
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    if grid.meta:
        lines.append("# meta: " + json.dumps(grid.meta, sort_keys=True, default=_jsonable))
    lines.append("x,y,sigma,flag")
    for r, yv in enumerate(grid.y):
        for c, xv in enumerate(grid.x):
            if grid.mask[r, c]:
                lines.append(f"{FMT % xv},{FMT % yv},{FMT % grid.sigma[r, c]},{int(grid.flag[r, c])}")
            else:
                lines.append(f"{FMT % xv},{FMT % yv},nan,{FLAG_MASKED}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid_csv(path):
    """Returns (x, y, sigma, flag, config) with sigma as an (ny, nx) array."""
    config = None
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# config: "):
                config = json.loads(line[len("# config: "):])
            elif line.startswith("#") or line.startswith("x,"):
                continue
            elif line.strip():
                rows.append(line.strip().split(","))
    arr = np.array([[float(v) for v in r] for r in rows])
    x = np.unique(arr[:, 0])
    y = np.unique(arr[:, 1])
    sigma = arr[:, 2].reshape(len(y), len(x))
    flag = arr[:, 3].astype(int).reshape(len(y), len(x))
    return x, y, sigma, flag, config


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------- pixmap

GRAY = (128, 128, 128)


def colormap(v, lo, hi):
    """Linear blue-white-red; returns uint8 RGB of shape v.shape + (3,)."""
    if not lo < hi:
        raise InvalidScaleError(f"color scale needs lo < hi, got [{lo}, {hi}]")
    s = np.clip((np.asarray(v, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
    lower = s < 0.5
    u = np.where(lower, 2 * s, 2 * s - 1)
    r = np.where(lower, u, 1.0)
    g = np.where(lower, u, 1 - u)
    b = np.where(lower, 1.0, 1 - u)
    return np.round(np.stack([r, g, b], axis=-1) * 255).astype(np.uint8)


def render_image(values, lo, hi, mask=None):
    """Binary P6 bytes; row 0 is the top (largest y) row of the grid."""
    if hasattr(values, "sigma"):
        mask = values.mask if mask is None else mask
        values = values.sigma
    values = np.asarray(values, dtype=float)
    mask = np.ones(values.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not np.all(np.isfinite(values[mask])):
        raise InvalidScaleError("unmasked values must be finite")
    rgb = colormap(np.where(mask, values, lo), lo, hi)
    rgb[~mask] = GRAY
    rgb = rgb[::-1]
    h, w = values.shape
    return f"P6\n{w} {h}\n255\n".encode() + rgb.tobytes()


def read_ppm(data):
    parts = data.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


# --------------------------------------------------------------- config

DEFAULT_CONFIG = {
    "command": "reconstruct",
    "phantom": "disk3",
    "map": {"kind": "identity"},
    "solver": {
        "N": 16, "R": None, "c": 10.0, "auto_trunc": True, "kmax": 12.0, "kgrid": 128,
        "lattice": 128, "bnodes": 256, "grid": 64, "nystrom": 256, "noise": 0.0, "seed": 0,
        "jobs": None, "deterministic": False, "route": "direct",
        "r": 2.0, "mode": None, "M_list": [8, 16, 32, 64, 128],
        "b_list": [-3.0, -1.5, 0.0, 1.5, 3.0], "xi": [0.0, 1.2], "window": 2.5,
        "electrodes": 64, "compare": False, "roi_radius": 0.35,
    },
    "output": {"out": None, "ppm": None, "data": None, "lo": None, "hi": None},
}

MAP_KEYS = {
    "identity": set(),
    "mobius": {"a"},
    "sc": {"anchor"},
    "roi": {"anchor"},
    "halfplane": {"b", "xi"},
}


def merge_config(base, override):
    """Deep merge; keys absent from ``base`` are collected as problems."""
    out = copy.deepcopy(base)
    problems = []
    for key, val in (override or {}).items():
        if key not in base:
            problems.append(f"unknown key {key!r}")
            continue
        if key == "map" or key == "phantom":
            out[key] = copy.deepcopy(val)
        elif isinstance(base[key], dict):
            for k2, v2 in (val or {}).items():
                if k2 not in base[key]:
                    problems.append(f"unknown key {key}.{k2}")
                else:
                    out[key][k2] = v2
        else:
            out[key] = val
    return out, problems


def validate_config(cfg):
    """Every violated invariant, as a list of strings."""
    p = []
    s = cfg["solver"]

    def positive_int(name, lo=1):
        v = s.get(name)
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            p.append(f"solver.{name} must be an integer >= {lo}, got {v!r}")

    for name in ("N", "kgrid", "lattice", "grid", "electrodes"):
        positive_int(name)
    if s.get("jobs") is not None:
        positive_int("jobs")
    positive_int("bnodes", 16)
    positive_int("nystrom", 64)
    if isinstance(s.get("lattice"), int) and s["lattice"] % 2:
        p.append("solver.lattice must be even")
    if not isinstance(s.get("c"), (int, float)) or s["c"] <= 0:
        p.append("solver.c must be positive")
    if not s.get("auto_trunc") and not (isinstance(s.get("R"), (int, float)) and s["R"] > 0):
        p.append("solver.R must be positive unless solver.auto_trunc is set")
    if not isinstance(s.get("kmax"), (int, float)) or s["kmax"] <= 0:
        p.append("solver.kmax must be positive")
    if not isinstance(s.get("noise"), (int, float)) or s["noise"] < 0:
        p.append("solver.noise must be >= 0")
    if s.get("route") not in ("direct", "pushforward"):
        p.append("solver.route must be 'direct' or 'pushforward'")
    if not isinstance(s.get("window"), (int, float)) or s["window"] <= 0:
        p.append("solver.window must be positive")
    m = cfg.get("map")
    if not isinstance(m, dict) or m.get("kind") not in MAP_KEYS:
        p.append(f"map.kind must be one of {sorted(MAP_KEYS)}")
    else:
        extra = set(m) - {"kind"} - MAP_KEYS[m["kind"]]
        if extra:
            p.append(f"map: unknown keys {sorted(extra)} for kind {m['kind']!r}")
    ph = cfg.get("phantom")
    if isinstance(ph, str) and ph.endswith(".json") and not os.path.exists(ph):
        p.append(f"phantom file {ph!r} does not exist")
    data = cfg["output"].get("data")
    if data and not os.path.exists(data):
        p.append(f"data file {data!r} does not exist")
    lo, hi = cfg["output"].get("lo"), cfg["output"].get("hi")
    if lo is not None and hi is not None and not lo < hi:
        p.append("output.lo must be below output.hi")
    return p


def load_config(path):
    with open(path) as fh:
        doc = json.load(fh)
    cfg, problems = merge_config(DEFAULT_CONFIG, doc)
    problems += validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def dump_config(cfg):
    return json.dumps(cfg, sort_keys=True, indent=2)
