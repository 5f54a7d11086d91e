"""Schwarz-Christoffel maps from the unit disk onto a polygon.

    Psi(z) = A + C * int_0^z prod_k (1 - s / w_k)^(alpha_k - 1) ds

The prevertices ``w_k = exp(i theta_k)`` are found by matching side-length
ratios and the requirement ``Psi(0) = anchor``; ``theta_0`` is pinned to 0.
Integrals use compound Gauss-Jacobi quadrature: a segment that ends at a
prevertex carries the matching Jacobi weight, and segments are kept shorter
than half the distance to the nearest other prevertex.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.special import roots_jacobi

from ..errors import (
    CornerSingularityError,
    InvalidGeometryError,
    InvalidParameterError,
    InversionError,
    ParameterProblemError,
)

QUAD_ORDER = 24
MAX_VERTICES = 12
MIN_GAP = 1e-8


@dataclass(frozen=True)
class Polygon:
    """Counterclockwise polygon given by its corner points."""

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex).ravel()
        object.__setattr__(self, "vertices", tuple(v))
        if len(v) < 3:
            raise InvalidGeometryError("a polygon needs at least 3 vertices")
        area = 0.5 * np.sum((np.conj(v) * np.roll(v, -1)).imag)
        if area <= 0:
            raise InvalidGeometryError("vertices must be in counterclockwise order")
        if _self_intersects(v):
            raise InvalidGeometryError("polygon is not simple")

    @property
    def v(self):
        return np.array(self.vertices)

    @property
    def alphas(self):
        """Interior angles divided by pi."""
        v = self.v
        turn = np.angle((np.roll(v, -1) - v) / (v - np.roll(v, 1)))
        return 1.0 - turn / np.pi

    @property
    def side_lengths(self):
        v = self.v
        return np.abs(np.roll(v, -1) - v)

    @property
    def perimeter(self):
        return float(self.side_lengths.sum())

    def contains(self, w, tol=0.0):
        """True for points inside or within ``tol`` of the boundary."""
        w = np.asarray(w, dtype=complex)
        v = self.v
        wind = np.zeros(w.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            for a, b in zip(v, np.roll(v, -1)):
                wind += np.nan_to_num(np.angle((b - w) / (a - w)))
        inside = np.abs(wind) > np.pi
        return inside | (self.boundary_distance(w) <= tol)

    def boundary_distance(self, w):
        w = np.asarray(w, dtype=complex)
        v = self.v
        d = np.full(w.shape, np.inf)
        for a, b in zip(v, np.roll(v, -1)):
            t = np.clip(((w - a) * np.conj(b - a)).real / abs(b - a) ** 2, 0, 1)
            d = np.minimum(d, np.abs(w - (a + t * (b - a))))
        return d

    def boundary_points(self, s):
        """Points at arclength ``s`` (mod perimeter) measured from vertex 0."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        v = self.v
        L = self.side_lengths
        cum = np.concatenate([[0.0], np.cumsum(L)])
        j = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(v) - 1)
        t = (s - cum[j]) / L[j]
        return v[j] + t * (np.roll(v, -1)[j] - v[j])


def _self_intersects(v):
    n = len(v)

    def cross(o, a, b):
        return ((a - o).conjugate() * (b - o)).imag

    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = v[j], v[(j + 1) % n]
            d1, d2 = cross(a, b, c), cross(a, b, d)
            d3, d4 = cross(c, d, a), cross(c, d, b)
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    return False


@dataclass
class SCParameters:
    polygon: Polygon
    prevertices: np.ndarray
    C: complex
    A: complex
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def theta(self):
        return np.mod(np.angle(self.prevertices), 2 * np.pi)

    @property
    def betas(self):
        return self.polygon.alphas - 1.0


class _Quad:
    """Gauss-Jacobi rules on [-1, 1] cached by exponent."""

    def __init__(self, order=QUAD_ORDER):
        self.order = order
        self._rules = {}

    def rule(self, beta):
        key = round(float(beta), 14)
        r = self._rules.get(key)
        if r is None:
            # weight (1 + x)^beta
            r = roots_jacobi(self.order, 0.0, key)
            self._rules[key] = r
        return r


_QUAD = _Quad()


def _integrand(z, w, betas, skip=None):
    z = np.asarray(z, dtype=complex)
    out = np.ones(z.shape, dtype=complex)
    for k, (wk, bk) in enumerate(zip(w, betas)):
        if k == skip:
            continue
        out = out * (1 - z / wk) ** bk
    return out


def _regular_segment(za, zb, w, betas):
    x, wt = _QUAD.rule(0.0)
    half = 0.5 * (zb - za)
    pts = za + half * (1 + x)
    return half * np.sum(wt * _integrand(pts, w, betas))


def _march(za, zb, w, betas):
    """Integral over [za, zb] when neither end is a prevertex."""
    total = 0j
    p = complex(za)
    zb = complex(zb)
    for _ in range(10000):
        rem = abs(zb - p)
        if rem == 0:
            break
        clear = np.min(np.abs(w - p))
        h = min(rem, 0.5 * clear)
        q = zb if h >= rem else p + (zb - p) * (h / rem)
        total += _regular_segment(p, q, w, betas)
        p = q
    else:
        raise ParameterProblemError("quadrature path did not terminate")
    return total


def _from_prevertex(k, zb, w, betas):
    """Integral from prevertex ``w[k]`` to ``zb`` (``zb`` not a prevertex)."""
    wk = w[k]
    L = abs(zb - wk)
    others = np.delete(w, k)
    clear = np.min(np.abs(others - wk)) if len(others) else np.inf
    h = min(L, 0.5 * clear)
    q = zb if h >= L else wk + (zb - wk) * (h / L)
    beta = betas[k]
    x, wt = _QUAD.rule(beta)
    half = 0.5 * (q - wk)
    pts = wk + half * (1 + x)
    # (1 - s/w_k)^beta = (1 + x)^beta * (-half / w_k)^beta on this chord
    scale = (-half / wk) ** beta
    seg = half * scale * np.sum(wt * _integrand(pts, w, betas, skip=k))
    if h < L:
        seg += _march(q, zb, w, betas)
    return seg


def sc_integral(za, zb, w, betas, ka=None, kb=None):
    """int_{za}^{zb} f along the chord; ``ka``/``kb`` flag prevertex endpoints."""
    if ka is not None and kb is not None:
        mid = 0.5 * (za + zb)
        return _from_prevertex(ka, mid, w, betas) - _from_prevertex(kb, mid, w, betas)
    if ka is not None:
        return _from_prevertex(ka, zb, w, betas)
    if kb is not None:
        return -_from_prevertex(kb, za, w, betas)
    return _march(za, zb, w, betas)


def _theta_from_vars(y):
    gaps = np.exp(np.concatenate([y, [0.0]]))
    gaps = 2 * np.pi * gaps / gaps.sum()
    return np.concatenate([[0.0], np.cumsum(gaps)[:-1]])


def _vars_from_theta(theta):
    gaps = np.diff(np.concatenate([theta, [2 * np.pi]]))
    return np.log(gaps[:-1] / gaps[-1])


def _residual(y, poly, anchor, betas):
    n = len(betas)
    theta = _theta_from_vars(np.clip(y, -40, 40))
    gaps = np.diff(np.concatenate([theta, [2 * np.pi]]))
    if not np.all(np.isfinite(theta)) or gaps.min() < MIN_GAP:
        return np.full(n - 1, 1e3)
    w = np.exp(1j * theta)
    v = poly.v
    L = poly.side_lengths
    I01 = sc_integral(w[0], w[1], w, betas, 0, 1)
    res = []
    for j in range(1, n - 2):
        Ij = sc_integral(w[j], w[j + 1], w, betas, j, j + 1)
        res.append(np.log(abs(Ij) / abs(I01)) - np.log(L[j] / L[0]))
    I0c = sc_integral(w[0], 0.0, w, betas, 0, None)
    ratio = I0c / I01 - (anchor - v[0]) / (v[1] - v[0])
    res.extend([ratio.real, ratio.imag])
    return np.array(res)


def sc_solve_parameters(polygon, anchor=None, tol=1e-12, maxiter=200):
    """Prevertices, C and A of the map sending 0 to ``anchor``.

    ``anchor`` defaults to the vertex centroid.
    """
    if not isinstance(polygon, Polygon):
        polygon = Polygon(polygon)
    n = len(polygon.vertices)
    if n > MAX_VERTICES:
        raise InvalidParameterError(f"at most {MAX_VERTICES} vertices are supported")
    if anchor is None:
        anchor = complex(np.mean(polygon.v))
    anchor = complex(anchor)
    if not polygon.contains(anchor) or polygon.boundary_distance(anchor) < 1e-6:
        raise InvalidParameterError("anchor must be strictly inside the polygon")
    betas = polygon.alphas - 1.0
    if abs(betas.sum() + 2) > 1e-10:
        raise InvalidGeometryError("turning angles do not sum to 2 pi")

    # trust-region least squares from two starting guesses
    L = polygon.side_lengths
    guesses = [0.5 * (L + np.roll(L, 1)), np.ones(n)]
    best = None
    nfev = 0
    for g in guesses:
        theta0 = np.concatenate([[0.0], np.cumsum(2 * np.pi * g / g.sum())[:-1]])
        sol = least_squares(_residual, _vars_from_theta(theta0), args=(polygon, anchor, betas),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=maxiter)
        nfev += sol.nfev
        resid = float(np.max(np.abs(sol.fun)))
        if best is None or resid < best[1]:
            best = (sol.x, resid)
        if resid < tol:
            break
    y, resid = best
    if not np.isfinite(resid) or resid > 1e-9:
        raise ParameterProblemError(
            f"SC parameter problem did not converge (residual {resid:.2e})", resid)
    theta = _theta_from_vars(y)
    gaps = np.diff(np.concatenate([theta, [2 * np.pi]]))
    if gaps.min() < MIN_GAP:
        raise ParameterProblemError("prevertex crowding: gap below 1e-8", resid)
    w = np.exp(1j * theta)
    I01 = sc_integral(w[0], w[1], w, betas, 0, 1)
    C = (polygon.v[1] - polygon.v[0]) / I01
    return SCParameters(polygon, w, complex(C), anchor, resid, {"nfev": nfev})


def _from_origin(z, w, betas):
    """Vectorized int_0^z f for points strictly away from prevertices.

    Segments shrink geometrically toward the endpoint, so each one is at most
    half as long as its distance to the unit circle.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros(z.shape, dtype=complex)
    x, wt = _QUAD.rule(0.0)
    dist = np.min(np.abs(z[:, None] - w[None, :]), axis=1) if z.size else np.zeros(0)
    r = np.abs(z)
    need = np.maximum(r, 1e-300) / np.maximum(dist, 1e-300)
    J = np.clip(np.ceil(np.log2(np.maximum(2 * need, 1.0))).astype(int) + 1, 1, 60)
    for Jv in np.unique(J):
        sel = J == Jv
        zs = z[sel]
        t = np.concatenate([[0.0], 1 - 0.5 ** np.arange(1, Jv), [1.0]]) if Jv > 1 else np.array([0.0, 1.0])
        acc = np.zeros(zs.shape, dtype=complex)
        for a, b in zip(t[:-1], t[1:]):
            half = 0.5 * (b - a)
            s = a + half * (1 + x)
            pts = zs[:, None] * s[None, :]
            acc += half * (_integrand(pts, w, betas) @ wt)
        out[sel] = acc * zs
    return out


def sc_evaluate(params, z, derivative=False):
    """Psi(z) for ``|z| <= 1``; with ``derivative=True`` also returns Psi'(z)."""
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zf = np.atleast_1d(z).ravel()
    if np.any(np.abs(zf) > 1 + 1e-12):
        raise InvalidParameterError("SC map evaluated outside the closed unit disk")
    w = params.prevertices
    betas = params.betas
    d = np.abs(zf[:, None] - w[None, :])
    hit = d.min(axis=1) < 1e-14
    out = np.empty(zf.shape, dtype=complex)
    if hit.any():
        out[hit] = params.polygon.v[np.argmin(d[hit], axis=1)]
    if (~hit).any():
        out[~hit] = params.A + params.C * _from_origin(zf[~hit], w, betas)
    out = out.reshape(shape)
    if not derivative:
        return out
    if hit.any():
        raise CornerSingularityError("derivative requested at a prevertex")
    dv = (params.C * _integrand(zf, w, betas)).reshape(shape)
    return out, dv


def _coarse_grid(params, nr=24, nt=96):
    r = 1 - np.linspace(1, 0, nr, endpoint=False) ** 2
    r = np.concatenate([[0.0], r[r < 0.995]])
    t = 2 * np.pi * (np.arange(nt) + 0.5) / nt
    Z = (r[:, None] * np.exp(1j * t)[None, :]).ravel()
    Z = np.unique(Z)
    return Z, sc_evaluate(params, Z)


class SCInverter:
    """Inverse of an SC map: damped Newton seeded from a coarse image grid."""

    def __init__(self, params):
        self.params = params
        self.grid_z, self.grid_w = _coarse_grid(params)

    def _boundary_invert(self, w, j):
        p = self.params
        n = len(p.prevertices)
        th = p.theta
        a, b = th[j], th[(j + 1) % n] if j + 1 < n else 2 * np.pi
        va, vb = p.polygon.v[j], p.polygon.v[(j + 1) % n]
        u = np.conj(vb - va) / abs(vb - va) ** 2
        target = ((w - va) * u).real

        def f(t):
            return ((sc_evaluate(p, np.exp(1j * t)) - va) * u).real - target

        if target <= 0:
            return p.prevertices[j]
        if target >= 1:
            return p.prevertices[(j + 1) % n]
        t = brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        return np.exp(1j * t)

    def __call__(self, w, tol=1e-12, maxiter=60):
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        wf = np.atleast_1d(w).ravel()
        poly = self.params.polygon
        scale = max(np.max(np.abs(poly.v - self.params.A)), 1.0)
        if not np.all(poly.contains(wf, tol=1e-9 * scale)):
            raise InvalidParameterError("point outside the polygon")
        out = np.empty(wf.shape, dtype=complex)
        bdist = poly.boundary_distance(wf)
        on_bd = bdist <= 1e-12 * scale
        if on_bd.any():
            v = poly.v
            for i in np.flatnonzero(on_bd):
                # side containing the point
                dj = [np.abs(wf[i] - (a + np.clip(((wf[i] - a) * np.conj(b - a)).real
                                                  / abs(b - a) ** 2, 0, 1) * (b - a)))
                      for a, b in zip(v, np.roll(v, -1))]
                out[i] = self._boundary_invert(wf[i], int(np.argmin(dj)))
        inner = ~on_bd
        if inner.any():
            out[inner] = self._newton(wf[inner], tol, maxiter)
        return out.reshape(shape)

    def _newton(self, w, tol, maxiter):
        p = self.params
        idx = np.argmin(np.abs(w[:, None] - self.grid_w[None, :]), axis=1)
        z = self.grid_z[idx].copy()
        scale = max(np.max(np.abs(p.polygon.v - p.A)), 1.0)
        for _ in range(maxiter):
            f, df = sc_evaluate(p, z, derivative=True)
            res = f - w
            err = np.abs(res)
            act = err > tol * scale
            if not act.any():
                return z
            step = res[act] / df[act]
            za = z[act]
            errA = err[act]
            lam = np.ones(za.shape)
            newz = za - step
            for _ in range(30):
                bad = np.abs(newz) >= 1
                if bad.any():
                    lam[bad] *= 0.5
                    newz = za - lam * step
                    continue
                newerr = np.abs(sc_evaluate(p, newz) - w[act])
                worse = newerr > errA
                if not worse.any():
                    break
                lam[worse] *= 0.5
                newz = np.where(worse, za - lam * step, newz)
            z[act] = newz
        f = sc_evaluate(p, z)
        bad = np.abs(f - w) > 1e-10 * scale
        if bad.any():
            z[bad] = [self._homotopy(wi) for wi in w[bad]]
        return z

    def _homotopy(self, w, steps=64):
        p = self.params
        z = 0j
        for s in np.linspace(0, 1, steps + 1)[1:]:
            target = p.A + s * (w - p.A)
            for _ in range(50):
                f, df = sc_evaluate(p, np.array([z]), derivative=True)
                dz = (f[0] - target) / df[0]
                lam = 1.0
                while abs(z - lam * dz) >= 1 and lam > 1e-6:
                    lam *= 0.5
                z = z - lam * dz
                if abs(dz) < 1e-15:
                    break
        if abs(sc_evaluate(p, np.array([z]))[0] - w) > 1e-9:
            raise InversionError(f"SC inversion failed at w = {w}")
        return z


def sc_invert(params, w):
    inv = params.meta.get("_inverter")
    if inv is None:
        inv = SCInverter(params)
        params.meta["_inverter"] = inv
    return inv(w)
