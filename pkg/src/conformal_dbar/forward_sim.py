"""Forward data for piecewise-constant conductivities.

The potential is written as ``u = u0 + sum_j S_j[phi_j]`` where ``u0`` solves
the homogeneous Neumann problem and ``S_j`` is the single layer on inclusion
boundary ``j`` built from the Neumann function of the background domain
(unit disk or upper half-plane).  The densities solve

    (lambda_j I + K*) phi = -du0/dnu,    lambda_j = (sigma_j + 1) / (2 (sigma_j - 1)),

discretized with the trapezoid Nystrom method.  Inclusion boundaries are
smooth closed curves given by equispaced samples of a periodic
parametrization; circles are the common case.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    InvalidCurrentError,
    InvalidGeometryError,
    InvalidParameterError,
    TransmissionSolveError,
)
from .fourier_ops import BasisSpec, OperatorMatrix, project, quad_params

NYSTROM_N = 256
MIN_CLEARANCE = 0.02
SIGMA_RANGE = (0.01, 100.0)


@dataclass(frozen=True)
class Inclusion:
    center: complex
    radius: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass
class Phantom:
    """Circular inclusions with constant levels in a unit background.

    ``domain`` is "disk", "polygon" (``vertices`` required) or "halfplane".
    """

    domain: str = "disk"
    inclusions: tuple = ()
    vertices: tuple = None
    name: str = ""

    def __post_init__(self):
        self.inclusions = tuple(
            inc if isinstance(inc, Inclusion) else Inclusion(*inc) for inc in self.inclusions)
        if self.domain not in ("disk", "polygon", "halfplane"):
            raise InvalidParameterError(f"unknown domain {self.domain!r}")
        if self.domain == "polygon":
            if self.vertices is None:
                raise InvalidParameterError("polygon phantom needs vertices")
            self.vertices = tuple(complex(v) for v in self.vertices)
        problems = self.problems()
        if problems:
            raise InvalidGeometryError("; ".join(problems))

    def boundary_distance(self, z):
        z = np.asarray(z, dtype=complex)
        if self.domain == "disk":
            return 1 - np.abs(z)
        if self.domain == "halfplane":
            return z.imag
        from .conformal.schwarz_christoffel import Polygon

        poly = Polygon(self.vertices)
        d = poly.boundary_distance(z)
        return np.where(poly.contains(z), d, -d)

    def problems(self):
        out = []
        lo, hi = SIGMA_RANGE
        for i, inc in enumerate(self.inclusions):
            if inc.radius <= 0:
                out.append(f"inclusion {i}: radius must be positive")
            if not lo <= inc.sigma <= hi:
                out.append(f"inclusion {i}: level {inc.sigma} outside [{lo}, {hi}]")
            # nearest boundary point of the disk of the inclusion
            ring = inc.center + inc.radius * np.exp(2j * np.pi * np.arange(64) / 64)
            if np.min(self.boundary_distance(ring)) < MIN_CLEARANCE:
                out.append(f"inclusion {i}: closer than {MIN_CLEARANCE} to the boundary")
            for j in range(i):
                other = self.inclusions[j]
                gap = abs(inc.center - other.center) - inc.radius - other.radius
                if gap < MIN_CLEARANCE:
                    out.append(f"inclusions {j} and {i} overlap or are closer than {MIN_CLEARANCE}")
        return out

    def sigma(self, z):
        """Conductivity at ``z`` (background 1)."""
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape)
        for inc in self.inclusions:
            out = np.where(np.abs(z - inc.center) < inc.radius, inc.sigma, out)
        return out

    def inside(self, z):
        return self.boundary_distance(z) >= 0

    def curves(self, n=NYSTROM_N, cmap=None):
        """Inclusion boundaries, optionally pushed through ``cmap.forward``."""
        out = []
        for inc in self.inclusions:
            if inc.sigma == 1.0:
                continue
            if cmap is None:
                out.append(Curve.circle(inc.center, inc.radius, inc.sigma, n))
            else:
                t = 2 * np.pi * np.arange(n) / n
                pts = cmap.forward(inc.center + inc.radius * np.exp(1j * t))
                out.append(Curve.from_samples(pts, inc.sigma))
        return out

    def mirrored(self):
        """Reflection about the imaginary axis."""
        incs = [Inclusion(-inc.center.conjugate(), inc.radius, inc.sigma) for inc in self.inclusions]
        verts = None
        if self.vertices is not None:
            verts = tuple(-v.conjugate() for v in reversed(self.vertices))
        return Phantom(self.domain, tuple(incs), verts, self.name)

    def describe(self):
        d = {"domain": self.domain, "name": self.name,
             "inclusions": [{"center": [i.center.real, i.center.imag], "radius": i.radius,
                             "sigma": i.sigma} for i in self.inclusions]}
        if self.vertices is not None:
            d["vertices"] = [[v.real, v.imag] for v in self.vertices]
        return d


@dataclass
class Curve:
    """Equispaced samples of a smooth, counterclockwise closed curve."""

    z: np.ndarray
    dz: np.ndarray
    ddz: np.ndarray
    sigma: float

    @classmethod
    def circle(cls, c, r, sigma, n=NYSTROM_N):
        t = 2 * np.pi * np.arange(n) / n
        e = np.exp(1j * t)
        return cls(c + r * e, 1j * r * e, -r * e, sigma)

    @classmethod
    def from_samples(cls, z, sigma):
        """Derivatives by FFT differentiation of the periodic samples."""
        z = np.asarray(z, dtype=complex)
        n = len(z)
        k = np.fft.fftfreq(n, 1.0 / n)
        k[n // 2] = 0 if n % 2 == 0 else k[n // 2]
        zh = np.fft.fft(z)
        dz = np.fft.ifft(1j * k * zh)
        ddz = np.fft.ifft(-(k ** 2) * zh)
        return cls(z, dz, ddz, sigma)

    @property
    def n(self):
        return len(self.z)

    @property
    def speed(self):
        return np.abs(self.dz)

    @property
    def normal(self):
        return -1j * self.dz / np.abs(self.dz)

    @property
    def curvature(self):
        return (np.conj(self.dz) * self.ddz).imag / np.abs(self.dz) ** 3

    @property
    def weights(self):
        return self.speed * (2 * np.pi / self.n)


def lam(sigma):
    return (sigma + 1.0) / (2.0 * (sigma - 1.0))


class TransmissionSolver:
    """Factorized Nystrom system for a fixed set of inclusion curves.

    ``background`` is "disk" or "halfplane".
    """

    def __init__(self, curves, background="disk"):
        if background not in ("disk", "halfplane"):
            raise InvalidParameterError(f"unknown background {background!r}")
        self.background = background
        self.curves = [c for c in curves if c.sigma != 1.0]
        self.empty = len(self.curves) == 0
        if self.empty:
            return
        self.y = np.concatenate([c.z for c in self.curves])
        self.nu = np.concatenate([c.normal for c in self.curves])
        self.w = np.concatenate([c.weights for c in self.curves])
        lamv = np.concatenate([np.full(c.n, lam(c.sigma)) for c in self.curves])
        kap = np.concatenate([c.curvature for c in self.curves])
        x = self.y[:, None]
        y = self.y[None, :]
        nu = self.nu[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            free = 1.0 / (x - y)
        np.fill_diagonal(free, 0.0)
        if background == "disk":
            img = -np.conj(y) / (1 - x * np.conj(y))
        else:
            img = 1.0 / (x - np.conj(y))
        K = -(1 / (2 * np.pi)) * (nu * (free + img)).real
        K[np.diag_indices_from(K)] += -kap / (4 * np.pi)
        A = K * self.w[None, :]
        A[np.diag_indices_from(A)] += lamv
        if not np.all(np.isfinite(A)):
            raise TransmissionSolveError("non-finite Nystrom matrix (touching curves?)")
        try:
            self._lu = sla.lu_factor(A, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise TransmissionSolveError(str(exc)) from exc
        self.cond_estimate = None

    def densities(self, dudn):
        """Solve for the layer densities given -du0/dnu at the nodes."""
        if self.empty:
            return np.zeros((0,) + np.shape(dudn)[1:], dtype=complex)
        phi = sla.lu_solve(self._lu, -np.asarray(dudn, dtype=complex))
        if not np.all(np.isfinite(phi)):
            raise TransmissionSolveError("non-finite layer densities")
        return phi

    def layer_potential(self, phi, X):
        """sum_j S_j[phi_j] at boundary points ``X`` (unit circle or real axis)."""
        X = np.asarray(X, dtype=complex)
        if self.empty:
            return np.zeros(X.shape + np.shape(phi)[1:], dtype=complex)
        G = -(1 / np.pi) * np.log(np.abs(X[:, None] - self.y[None, :]))
        return G @ (self.w[:, None] * phi if np.ndim(phi) == 2 else self.w * phi)

    def layer_potential_interior(self, phi, Z):
        """Layer potential at arbitrary points of the background domain."""
        Z = np.asarray(Z, dtype=complex)
        if self.empty:
            return np.zeros(Z.shape + np.shape(phi)[1:], dtype=complex)
        y = self.y[None, :]
        z = Z[:, None]
        if self.background == "disk":
            G = -(1 / (2 * np.pi)) * (np.log(np.abs(z - y)) + np.log(np.abs(1 - z * np.conj(y))))
        else:
            G = -(1 / (2 * np.pi)) * (np.log(np.abs(z - y)) + np.log(np.abs(z - np.conj(y))))
        return G @ (self.w[:, None] * phi if np.ndim(phi) == 2 else self.w * phi)


# ----------------------------------------------------------------- sources


class FourierCurrent:
    """Disk current sum_n c_n exp(i n theta) (columns of ``coeffs`` are currents)."""

    def __init__(self, modes, coeffs):
        self.modes = np.asarray(modes, dtype=int)
        if np.any(self.modes == 0):
            raise InvalidCurrentError("current has a nonzero mean")
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(len(self.modes), -1)

    @classmethod
    def from_samples(cls, samples, tol=1e-10):
        """From samples on equiangular nodes of the unit circle."""
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim == 1:
            samples = samples[:, None]
        Q = samples.shape[0]
        c = np.fft.fft(samples, axis=0) / Q
        scale = max(np.max(np.abs(c)), 1e-300)
        if np.max(np.abs(c[0])) > tol * scale and np.max(np.abs(c[0])) > 1e-14:
            raise InvalidCurrentError("sampled current is not mean-free")
        modes = np.fft.fftfreq(Q, 1.0 / Q).astype(int)
        keep = modes != 0
        return cls(modes[keep], c[keep])

    @classmethod
    def basis(cls, spec):
        """The basis currents phi_n = exp(i n theta) / sqrt(2 pi), one per column."""
        modes = spec.indices
        return cls(modes, np.eye(len(modes)) / np.sqrt(2 * np.pi))

    def grad(self, z):
        """(u0_z, u0_zbar) at interior points for the homogeneous disk."""
        z = np.asarray(z, dtype=complex)
        pos = self.modes > 0
        neg = ~pos
        uz = np.zeros((len(z), self.coeffs.shape[1]), dtype=complex)
        uzb = np.zeros_like(uz)
        if pos.any():
            P = z[:, None] ** (self.modes[pos] - 1)[None, :]
            uz = P @ self.coeffs[pos]
        if neg.any():
            P = np.conj(z)[:, None] ** (-self.modes[neg] - 1)[None, :]
            uzb = P @ self.coeffs[neg]
        return uz, uzb

    def boundary_potential(self, X):
        X = np.asarray(X, dtype=complex)
        theta = np.angle(X)
        E = np.exp(1j * theta[:, None] * self.modes[None, :]) / np.abs(self.modes)[None, :]
        return E @ self.coeffs


class PointSources:
    """Point currents ``sum_m I_m delta_{x_m}`` on the boundary (columns are patterns).

    With a single unit source per column this gives raw, pointwise columns;
    physically meaningful combinations have zero total current.
    """

    def __init__(self, points, weights):
        self.points = np.asarray(points, dtype=complex).ravel()
        self.weights = np.asarray(weights, dtype=complex).reshape(len(self.points), -1)

    def grad(self, z):
        z = np.asarray(z, dtype=complex)
        d = z[:, None] - self.points[None, :]
        uz = (-1 / (2 * np.pi)) * (1.0 / d) @ self.weights
        uzb = (-1 / (2 * np.pi)) * (1.0 / np.conj(d)) @ self.weights
        return uz, uzb

    def boundary_potential(self, X):
        X = np.asarray(X, dtype=complex)
        G = -(1 / np.pi) * np.log(np.abs(X[:, None] - self.points[None, :]))
        return G @ self.weights


def normal_derivative(source, z, nu):
    uz, uzb = source.grad(z)
    return uz * nu[:, None] + uzb * np.conj(nu)[:, None]


def solve_relative(solver, source, X):
    """Relative potential (R_sigma - R_1) f at boundary points ``X``."""
    if solver.empty:
        return np.zeros((len(np.atleast_1d(X)), source.weights.shape[1] if isinstance(
            source, PointSources) else source.coeffs.shape[1]), dtype=complex)
    dudn = normal_derivative(source, solver.y, solver.nu)
    phi = solver.densities(dudn)
    return solver.layer_potential(phi, X)


# ------------------------------------------------------------ public API


def _disk_solver(phantom, nystrom_n, cmap=None):
    if nystrom_n < 64:
        raise InvalidParameterError("nystrom_n must be at least 64")
    if phantom.domain == "halfplane" and cmap is None:
        return TransmissionSolver(phantom.curves(nystrom_n), "halfplane")
    if phantom.domain == "polygon" and cmap is None:
        raise InvalidParameterError("polygon phantoms are simulated through a conformal map")
    return TransmissionSolver(phantom.curves(nystrom_n, cmap), "disk")


def solve_transmission(phantom, current, nystrom_n=NYSTROM_N, points=None, solver=None):
    """Mean-free boundary potential for a sampled current on the unit circle.

    ``current`` holds samples on equiangular nodes (columns are independent
    currents) or is a ``FourierCurrent``/``PointSources`` instance.  The
    potential is returned at the same nodes, or at ``points`` when given.
    """
    if phantom.domain != "disk" and solver is None:
        raise InvalidParameterError("use halfplane_relative_potential for the half-plane")
    src = current
    squeeze = False
    if not isinstance(current, (FourierCurrent, PointSources)):
        arr = np.asarray(current, dtype=complex)
        squeeze = arr.ndim == 1
        src = FourierCurrent.from_samples(arr)
        if points is None:
            Q = arr.shape[0]
            points = np.exp(2j * np.pi * np.arange(Q) / Q)
    if points is None:
        raise InvalidParameterError("evaluation points required")
    solver = solver or _disk_solver(phantom, nystrom_n)
    u = src.boundary_potential(points) + solve_relative(solver, src, points)
    u = u - u.mean(axis=0)
    return u[:, 0] if squeeze else u


def analytic_concentric_nd(rho, sigma0, n):
    """Eigenvalue of R_sigma on phi_n for a centered inclusion of radius ``rho``."""
    if not 0 < rho < 1 or sigma0 <= 0 or n == 0:
        raise InvalidParameterError("need 0 < rho < 1, sigma0 > 0, n != 0")
    n = abs(int(n))
    mu = (1 - sigma0) / (1 + sigma0)
    q = mu * rho ** (2 * n)
    return (1 + q) / (n * (1 - q))


def concentric_nd_fd(rho, sigma0, n, points=10000):
    """Radial finite-difference oracle for ``analytic_concentric_nd``.

    Solves (r sigma u')' = n^2 sigma u / r on (0, 1) with u(0) = 0 and
    u'(1) = 1 by a conservative second-order scheme; returns u(1).
    """
    from scipy.linalg import solve_banded

    n = abs(int(n))
    h = 1.0 / points
    r = h * np.arange(points + 1)
    face = 0.5 * (r[:-1] + r[1:])
    sf = np.where(face < rho, sigma0, 1.0)
    # node conductivity, averaged at an interface node
    sn = np.where(r < rho, sigma0, 1.0)
    sn = np.where(np.abs(r - rho) < 0.5 * h, 0.5 * (sigma0 + 1.0), sn)
    a = face * sf / h ** 2
    N = points
    ab = np.zeros((3, N))
    rhs = np.zeros(N)
    # unknowns u_1 .. u_N
    i = np.arange(1, N + 1)
    main = -(a[i - 1] + np.append(a[i[:-1]], 0.0)) - n * n * sn[i] / r[i]
    # half cell at r = 1 with r sigma u' = 1
    main[-1] = -2 * a[N - 1] - n * n * sn[N] / r[N]
    rhs[-1] = -2.0 / h
    lower = a[i[1:] - 1].copy()
    lower[-1] = 2 * a[N - 1]
    ab[0, 1:] = a[i[:-1]]
    ab[1] = main
    ab[2, :-1] = lower
    u = solve_banded((1, 1), ab, rhs)
    return u[-1]


def nd_matrix(phantom, spec, currents=None, nystrom_n=NYSTROM_N, quad_nodes=256, cmap=None):
    """N-to-D matrix of a phantom on the (virtual) unit disk.

    Default currents are the standard basis on the disk.  For polygon or
    half-plane phantoms pass ``cmap``: the inclusion boundaries are pushed to
    the disk and the virtual ND matrix is returned.
    """
    solver = _disk_solver(phantom, nystrom_n, cmap)
    if currents is None:
        src = FourierCurrent.basis(BasisSpec(spec.N))
    elif isinstance(currents, (FourierCurrent, PointSources)):
        src = currents
    else:
        src = FourierCurrent.from_samples(currents)
    theta, _ = quad_params(BasisSpec(spec.N), quad_nodes)
    X = np.exp(1j * theta)
    u = src.boundary_potential(X) + solve_relative(solver, src, X)
    u = u - u.mean(axis=0)
    R = project(BasisSpec(spec.N), u, quad_nodes)
    return OperatorMatrix(R, BasisSpec(spec.N), "ND",
                          {"phantom": phantom.describe(), "nystrom_n": nystrom_n})


def relative_nd_matrix(phantom, spec, nystrom_n=NYSTROM_N, quad_nodes=256, cmap=None):
    """R_sigma - R_1 in the disk basis (the background part cancels exactly)."""
    solver = _disk_solver(phantom, nystrom_n, cmap)
    src = FourierCurrent.basis(BasisSpec(spec.N))
    theta, _ = quad_params(BasisSpec(spec.N), quad_nodes)
    X = np.exp(1j * theta)
    u = solve_relative(solver, src, X)
    u = u - u.mean(axis=0)
    return OperatorMatrix(project(BasisSpec(spec.N), u, quad_nodes), BasisSpec(spec.N),
                          "relative-ND")


def halfplane_relative_potential(phantom, points, weights, eval_points, nystrom_n=NYSTROM_N,
                                 solver=None):
    """(R_sigma - R_1) f at real-axis points for delta currents ``sum I_m delta_{x_m}``."""
    points = np.asarray(points, dtype=complex).ravel()
    W = np.asarray(weights, dtype=complex).reshape(len(points), -1)
    if np.any(np.abs(W.sum(axis=0)) > 1e-12 * max(1.0, np.abs(W).max())):
        raise InvalidCurrentError("electrode currents must sum to zero")
    if np.any(points.imag != 0) or np.any(np.asarray(eval_points).imag != 0):
        raise InvalidGeometryError("sources and evaluation points must lie on the real axis")
    for inc in phantom.inclusions:
        lo, hi = inc.center.real - inc.radius, inc.center.real + inc.radius
        if inc.center.imag - inc.radius < MIN_CLEARANCE and np.any(
                (points.real > lo) & (points.real < hi)):
            raise InvalidGeometryError("source lies under an inclusion touching the axis")
    solver = solver or TransmissionSolver(phantom.curves(nystrom_n), "halfplane")
    out = solve_relative(solver, PointSources(points, W), np.asarray(eval_points, dtype=complex))
    return out[:, 0] if np.ndim(weights) == 1 else out


@dataclass
class ElectrodeArray:
    """M electrodes at ``Psi`` of equiangular virtual nodes."""

    M: int
    virtual_angles: np.ndarray = field(default=None)
    true_positions: np.ndarray = field(default=None)

    @classmethod
    def from_map(cls, M, cmap=None, offset=0.0):
        if M < 2:
            raise InvalidParameterError("need at least 2 electrodes")
        ang = 2 * np.pi * (np.arange(M) + offset) / M
        zt = np.exp(1j * ang)
        pos = zt if cmap is None else cmap.inverse(zt)
        return cls(M, ang, np.asarray(pos))

    @property
    def virtual_positions(self):
        return np.exp(1j * self.virtual_angles)


def pem_operator(phantom, electrodes, cmap=None, nystrom_n=NYSTROM_N, solver=None):
    """Raw point-electrode relative operator.

    Column ``m`` is the relative potential at every electrode caused by a unit
    point current at electrode ``m``.  Applying it to a zero-sum current vector
    and subtracting the mean gives the class in C^M / C.  Bounded domains are
    handled on the virtual disk (``cmap`` maps the true domain to the disk);
    the half-plane uses the image kernel directly.
    """
    if phantom.domain == "halfplane" and cmap is None:
        pts = np.asarray(electrodes.true_positions, dtype=complex)
        finite = np.isfinite(pts)
        solver = solver or TransmissionSolver(phantom.curves(nystrom_n), "halfplane")
        A = np.zeros((electrodes.M, electrodes.M), dtype=complex)
        p = pts[finite].real.astype(complex)
        A[np.ix_(finite, finite)] = solve_relative(solver, PointSources(p, np.eye(len(p))), p)
        return A
    solver = solver or _disk_solver(phantom, nystrom_n, cmap)
    X = electrodes.virtual_positions if (cmap is not None or phantom.domain == "disk") \
        else electrodes.true_positions
    return solve_relative(solver, PointSources(X, np.eye(len(X))), X)


def pem_currents(f_tilde, M, tol=1e-10):
    """Electrode currents (2 pi / M) f~(z~_m) at equiangular virtual nodes.

    ``f_tilde`` is a callable of the angle or an array of M samples.
    """
    ang = 2 * np.pi * np.arange(M) / M
    vals = np.asarray(f_tilde(ang) if callable(f_tilde) else f_tilde, dtype=complex)
    if vals.shape[0] != M:
        raise InvalidParameterError("need one sample per electrode")
    scale = max(np.max(np.abs(vals)), 1e-300)
    if np.max(np.abs(vals.sum(axis=0))) > tol * M * scale:
        raise InvalidCurrentError("sampled virtual current is not mean-free on the electrode grid")
    return (2 * np.pi / M) * vals


def quotient_max_norm(v):
    """Max norm in C^M / C, approximated by the max after mean subtraction."""
    v = np.asarray(v)
    return float(np.max(np.abs(v - v.mean(axis=0))))
