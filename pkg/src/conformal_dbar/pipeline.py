"""End-to-end workflows: virtual-disk reconstruction through a conformal map,
ROI magnification, point-electrode convergence study and the half-plane sweep.
"""

from dataclasses import dataclass, field

import numpy as np

from . import dbar_core as dc
from .conformal import HalfplaneMobiusMap, IdentityMap, MobiusDiskMap, SCMap, compose
from .conformal.schwarz_christoffel import Polygon
from .errors import InvalidParameterError, InvalidRegionError
from .faddeev import QUAD_NODES, HhatCache
from .forward_sim import (
    NYSTROM_N,
    ElectrodeArray,
    FourierCurrent,
    PointSources,
    TransmissionSolver,
    nd_matrix,
    pem_currents,
    pem_operator,
    quotient_max_norm,
    solve_relative,
)
from .fourier_ops import (
    BasisSpec,
    OperatorMatrix,
    basis_eval,
    nd_to_dn,
    pushforward_nd,
    transformed_current,
    unit_disk_dn,
    unit_disk_nd,
)

DEFAULTS = {
    "N": 16,
    "N_halfplane": 5,
    "kmax": 12.0,
    "kgrid": 128,
    "lattice": 128,
    "bnodes": 256,
    "grid": 64,
    "c_disk": 10.0,
    "c_roi": 20.0,
    "xi": 1.2j,
    "window": 2.5,
    "electrodes_halfplane": 64,
    "b_list": (-3.0, -1.5, 0.0, 1.5, 3.0),
}


@dataclass
class ReconstructionGrid:
    """Reconstructed conductivity on a rectangular grid of true-domain nodes."""

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    mask: np.ndarray
    flag: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def nodes(self):
        return self.x[None, :] + 1j * self.y[:, None]

    def values(self):
        return self.sigma[self.mask]


@dataclass(frozen=True)
class RoiSpec:
    anchor: complex
    region: object = None  # ("circle", center, radius) or ("polygon", vertices)


# ---------------------------------------------------------------- grids


def domain_box(domain, vertices=None, window=None):
    if domain == "disk":
        return (-1.0, 1.0, -1.0, 1.0)
    if domain == "polygon":
        v = np.asarray(vertices, dtype=complex)
        return (v.real.min(), v.real.max(), v.imag.min(), v.imag.max())
    if domain == "halfplane":
        x0, x1, y1 = window or (-5.5, 5.5, 2.5)
        return (x0, x1, 0.0, y1)
    raise InvalidParameterError(f"unknown domain {domain!r}")


def midpoint_grid(box, nx, ny=None):
    ny = ny or nx
    x0, x1, y0, y1 = box
    x = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    y = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    return x, y


def domain_mask(domain, Z, vertices=None, clearance=0.0):
    if domain == "disk":
        return np.abs(Z) < 1 - clearance
    if domain == "polygon":
        poly = Polygon(vertices)
        return poly.contains(Z) & (poly.boundary_distance(Z) > clearance)
    return Z.imag > clearance


# -------------------------------------------------------- reconstruction


def virtual_dn(R_virtual):
    """L~_sigma from a virtual ND matrix."""
    return nd_to_dn(R_virtual)


def reconstruct_from_dn(L_sigma, disk_points, trunc, kgrid=None, lattice=128, cache=None,
                        bnodes=QUAD_NODES, jobs=1):
    """D-bar reconstruction at virtual-disk points from a DN matrix."""
    N = L_sigma.spec.N
    if cache is None and bnodes != QUAD_NODES:
        cache = HhatCache(quad_nodes=bnodes)
    raw = dc.scattering_grid(L_sigma, kgrid or dc.KGrid(), unit_disk_dn(N), unit_disk_nd(N),
                             cache=cache, quad_nodes=bnodes)
    scat = dc.truncate_scattering(raw, trunc)
    solver = dc.DbarSolver(scat, lattice=lattice)
    rec = dc.reconstruct(disk_points, scat, solver=solver, jobs=jobs)
    return rec, scat


def reconstruct_virtual(R_virtual, cmap, grid, trunc, domain="disk", vertices=None,
                        kgrid=None, lattice=128, L_sigma=None, cache=None, meta=None,
                        bnodes=QUAD_NODES, jobs=1):
    """Reconstruct on the true-domain ``grid`` = (x, y) through ``cmap``.

    ``R_virtual`` is the virtual-disk ND matrix; ``L_sigma`` may be passed
    instead when the DN matrix is built differently (half-plane sweep).
    """
    x, y = grid
    Z = x[None, :] + 1j * y[:, None]
    mask = domain_mask(domain, Z, vertices)
    cmap = cmap or IdentityMap()
    if L_sigma is None:
        L_sigma = virtual_dn(R_virtual)
    W = cmap.forward(Z[mask])
    rec, scat = reconstruct_from_dn(L_sigma, W, trunc, kgrid, lattice, cache, bnodes, jobs)
    sigma = np.full(Z.shape, np.nan)
    sigma[mask] = rec.sigma
    flag = np.zeros(Z.shape, dtype=int)
    flag[mask] = np.where(rec.converged, 0, 1)
    info = {"map": cmap.describe(), "N": L_sigma.spec.N, "R": scat.R, "c": scat.c,
            "kmax": scat.grid.kmax, "kgrid": scat.grid.points, "lattice": lattice,
            "bnodes": bnodes, "grid": [len(x), len(y)],
            "max_imag": float(np.max(np.abs(rec.sigma_complex.imag))) if rec.sigma.size else 0.0}
    info.update(meta or {})
    out = ReconstructionGrid(x, y, sigma, mask, flag, info)
    out.scattering = scat
    return out


# ------------------------------------------------------------ simulation


def virtual_nd_direct(phantom, cmap, N, nystrom_n=NYSTROM_N):
    """Virtual ND matrix from simulating the mapped phantom on the disk."""
    spec = BasisSpec(N)
    if phantom.domain == "disk" and (cmap is None or isinstance(cmap, IdentityMap)):
        return nd_matrix(phantom, spec, nystrom_n=nystrom_n)
    return nd_matrix(phantom, spec, nystrom_n=nystrom_n, cmap=cmap)


def true_domain_measurements(phantom, cmap, N, nystrom_n=NYSTROM_N, quad_nodes=1024):
    """Callable returning potentials of the transformed currents at true-boundary points.

    Disk phantoms are simulated on the true disk with the transformed currents
    themselves.  Polygon phantoms are simulated through the map: the
    potential at a boundary point ``P`` is read from the virtual problem at
    ``Phi(P)``.
    """
    spec = BasisSpec(N)
    if phantom.domain == "disk":
        theta = 2 * np.pi * np.arange(quad_nodes) / quad_nodes
        zt = np.exp(1j * theta)
        cur = np.stack([transformed_current(cmap, n, zt, spec) for n in spec.indices], axis=1)
        src = FourierCurrent.from_samples(cur)
        solver = TransmissionSolver(phantom.curves(nystrom_n), "disk")

        def measured(points):
            return src.boundary_potential(points) + solve_relative(solver, src, points)

        return measured
    solver = TransmissionSolver(phantom.curves(nystrom_n, cmap), "disk")
    src = FourierCurrent.basis(spec)

    def measured(points):
        X = cmap.forward(points)
        return src.boundary_potential(X) + solve_relative(solver, src, X)

    return measured


def virtual_nd_pushforward(phantom, cmap, N, nystrom_n=NYSTROM_N):
    """Virtual ND matrix from true-domain measurements with transformed currents."""
    meas = true_domain_measurements(phantom, cmap, N, nystrom_n)
    return pushforward_nd(meas, cmap, BasisSpec(N))


def add_noise(R, eps, seed=0):
    """Gaussian perturbation of relative size ``eps`` on every entry."""
    if not eps:
        return R
    rng = np.random.default_rng(seed)
    E = R.entries
    pert = eps * np.abs(E).max() * (rng.standard_normal(E.shape) + 1j * rng.standard_normal(E.shape))
    return OperatorMatrix(E + pert, R.spec, R.role, dict(R.meta, noise=eps, seed=seed))


# ------------------------------------------------------------------ ROI


def roi_map(domain, roi, vertices=None):
    """Map sending the ROI anchor to the origin."""
    a = complex(roi.anchor if isinstance(roi, RoiSpec) else roi)
    if domain == "disk":
        if abs(a) >= 1:
            raise InvalidParameterError("anchor must lie inside the unit disk")
        if 1 - abs(a) < 0.02:
            import warnings

            warnings.warn("anchor is very close to the boundary: excessive magnification")
        return IdentityMap() if a == 0 else MobiusDiskMap(a)
    if domain == "polygon":
        sc = SCMap(vertices)
        a2 = complex(sc.forward(np.array([a]))[0])
        return sc if abs(a2) < 1e-15 else compose(MobiusDiskMap(a2), sc)
    raise InvalidParameterError(f"ROI maps are defined for disk and polygon domains, not {domain!r}")


def region_mask(region, Z):
    if region is None:
        return np.ones(Z.shape, dtype=bool)
    if callable(region):
        return np.asarray(region(Z), dtype=bool)
    kind = region[0]
    if kind == "circle":
        return np.abs(Z - complex(region[1])) < float(region[2])
    if kind == "polygon":
        return Polygon(region[1]).contains(Z)
    if kind == "sector":
        r0, r1, a0, a1 = region[1:]
        ang = np.angle(Z)
        return (np.abs(Z) >= r0) & (np.abs(Z) < r1) & (ang >= a0) & (ang < a1)
    raise InvalidRegionError(f"unknown region kind {kind!r}")


def roi_error(grid, truth, region=None):
    """Relative L2 error over ``region`` by midpoint quadrature on the grid."""
    Z = grid.nodes
    sel = grid.mask & region_mask(region, Z)
    if not sel.any():
        raise InvalidRegionError("region contains no grid nodes")
    true_vals = truth.sigma(Z[sel]) if hasattr(truth, "sigma") else np.asarray(truth)[sel]
    diff = grid.sigma[sel] - true_vals
    return float(np.linalg.norm(diff) / np.linalg.norm(true_vals))


# ------------------------------------------------------------ PEM study


def synthetic_current(r, nmax=256, exclude_multiple=8):
    """Fourier coefficients decaying like |n|^-(r + 0.55); modes divisible by 8 omitted."""
    n = np.arange(-nmax, nmax + 1)
    n = n[(n != 0) & (n % exclude_multiple != 0)]
    c = np.abs(n).astype(float) ** (-(r + 0.55))
    return n, c


def pem_convergence_study(phantom, cmap, modes, coeffs, M_list=(8, 16, 32, 64, 128),
                          nystrom_n=NYSTROM_N):
    """Errors between point-electrode data and the continuum relative trace.

    The virtual current is ``sum_n coeffs[n] exp(i n theta)``.  Disk phantoms
    are measured on the true disk at the electrodes ``Psi(z~_m)``; the
    continuum reference comes from the mapped phantom on the virtual disk.
    """
    cmap = cmap or IdentityMap()
    modes = np.asarray(modes)
    coeffs = np.asarray(coeffs, dtype=complex)
    virt = TransmissionSolver(phantom.curves(nystrom_n, None if isinstance(cmap, IdentityMap)
                                             else cmap), "disk")
    true_solver = None
    if phantom.domain == "disk":
        true_solver = TransmissionSolver(phantom.curves(nystrom_n), "disk")
    ref_src = FourierCurrent(modes, coeffs)
    rows = []
    for M in M_list:
        el = ElectrodeArray.from_map(M, cmap)
        zt = el.virtual_positions
        f_samples = np.exp(1j * np.outer(el.virtual_angles, modes)) @ coeffs
        I = pem_currents(f_samples, M)
        if true_solver is not None:
            X = el.true_positions
            v = solve_relative(true_solver, PointSources(X, I), X)[:, 0]
        else:
            A = pem_operator(phantom, el, cmap=cmap, nystrom_n=nystrom_n, solver=virt)
            v = A @ I
        ref = solve_relative(virt, ref_src, zt)[:, 0]
        rows.append((M, quotient_max_norm(v - ref)))
    return rows


def fitted_slope(rows):
    M = np.array([r[0] for r in rows], dtype=float)
    e = np.array([r[1] for r in rows], dtype=float)
    ok = e > 0
    if ok.sum() < 2:
        return -np.inf
    return float(np.polyfit(np.log(M[ok]), np.log(e[ok]), 1)[0])


# ------------------------------------------------------ half-plane sweep


def halfplane_virtual_dn(phantom, b, xi=1.2j, N=5, M=64, window=2.5, nystrom_n=NYSTROM_N,
                         solver=None):
    """L~_sigma for the map M_b from windowed point-electrode data.

    Electrode currents for each virtual basis function are (2 pi / M) times its
    samples; currents and potentials outside [b - window, b + window] are set
    to zero.  The relative ND matrix is approximated by trapezoid pairing of
    the electrode potentials with the basis, added to R~_1 and inverted.
    """
    cmap = HalfplaneMobiusMap(b, xi)
    el = ElectrodeArray.from_map(M, cmap)
    pos = el.true_positions
    keep = np.isfinite(pos) & (np.abs(pos.real - b) <= window)
    solver = solver or TransmissionSolver(phantom.curves(nystrom_n), "halfplane")
    spec = BasisSpec(N)
    ang = el.virtual_angles
    Phi = np.stack([basis_eval(spec, n, ang) for n in spec.indices], axis=1)
    I = (2 * np.pi / M) * Phi * keep[:, None]
    p = pos[keep].real.astype(complex)
    V = np.zeros((M, spec.size), dtype=complex)
    if p.size:
        vk = solve_relative(solver, PointSources(p, I[keep]), p)
        vk = vk - vk.mean(axis=0)
        V[keep] = vk
    dR = (2 * np.pi / M) * (Phi.conj().T @ V)
    # modes the electrode grid cannot resolve carry no information
    band = np.abs(spec.indices) < M / 2
    dR = dR * band[:, None] * band[None, :]
    R = unit_disk_nd(N).entries + dR
    L = nd_to_dn(OperatorMatrix(R, spec, "ND"))
    return L, cmap, {"electrodes_used": int(keep.sum())}


def halfplane_sweep(phantom, b_list=DEFAULTS["b_list"], xi=1.2j, N=5, window=2.5, M=64,
                    trunc=None, grid=None, kgrid=None, lattice=128, nystrom_n=NYSTROM_N, jobs=1):
    """One reconstruction per horizontal shift ``b``, all on a common grid."""
    trunc = trunc or dc.TruncationParams(c=DEFAULTS["c_disk"], mode="auto")
    grid = grid or midpoint_grid(domain_box("halfplane"), 88, 20)
    solver = TransmissionSolver(phantom.curves(nystrom_n), "halfplane")
    out = []
    for b in b_list:
        L, cmap, info = halfplane_virtual_dn(phantom, b, xi, N, M, window, nystrom_n, solver)
        info.update({"b": float(b), "xi": [xi.real, xi.imag], "window": window, "M": M})
        out.append(reconstruct_virtual(None, cmap, grid, trunc, domain="halfplane",
                                       kgrid=kgrid, lattice=lattice, L_sigma=L, meta=info,
                                       jobs=jobs))
    return out


def value_at(grid, z):
    """Reconstructed value at the grid node nearest to ``z``."""
    Z = grid.nodes
    d = np.where(grid.mask, np.abs(Z - z), np.inf)
    i = np.unravel_index(np.argmin(d), Z.shape)
    return float(grid.sigma[i])
