"""Faddeev Green's function and the boundary operator H^_k on the unit disk.

With ``zeta = -i k z`` the Faddeev function satisfies
``G_k(z) = Re E1(zeta) / (2 pi)`` and ``g_k(z) = exp(-i k z) G_k(z)``.
Subtracting the Laplace fundamental solution ``G_0 = -log|z| / (2 pi)``
leaves ``H_1(w) = (Re Ein(-i w) - gamma) / (2 pi)``, an entire harmonic
function (``Ein`` is the entire part of ``E1``).
"""

import functools
import os

import numpy as np

from . import kernels
from .errors import BranchCutError, InvalidParameterError, SingularArgumentError
from .fourier_ops import BasisSpec, OperatorMatrix, basis_samples, unit_disk_nd

QUAD_NODES = 256
CACHE_ORDER = 16


def expint_e1(z):
    """Principal-branch exponential integral E1.

    Raises ``BranchCutError`` for points on the closed negative real axis.
    """
    arr = np.asarray(z, dtype=complex)
    bad = (arr.imag == 0) & (arr.real <= 0)
    if np.any(bad):
        raise BranchCutError("E1 is undefined on the branch cut (-inf, 0]")
    out = kernels.e1_array(arr.ravel()).reshape(arr.shape)
    return out[()] if out.ndim == 0 else out


def faddeev_green(z, k=1.0):
    """G_k(z) = Re E1(-i k z) / (2 pi)  (real-valued for complex z, k)."""
    w = complex(k) * np.asarray(z, dtype=complex)
    if np.any(w == 0):
        raise SingularArgumentError("G_k is singular at z = 0")
    zeta = -1j * w
    # the cut of E1 only flips the sign of the imaginary part, so Re is safe
    out = kernels.e1_array(zeta.ravel()).real.reshape(zeta.shape) / (2 * np.pi)
    return out[()] if out.ndim == 0 else out


def g1(z):
    """g_1(z) = exp(-i z) G_1(z)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise SingularArgumentError("g_1 is singular at z = 0")
    return np.exp(-1j * z) * faddeev_green(z)


def gk(z, k):
    """g_k(z) = g_1(k z)."""
    return g1(complex(k) * np.asarray(z, dtype=complex))


def laplace_green(z):
    return -np.log(np.abs(z)) / (2 * np.pi)


def h1(w):
    """Harmonic part H_1 = G_1 - G_0; smooth through the origin."""
    w = np.asarray(w, dtype=complex)
    out = kernels.h1_array(w.ravel()).reshape(w.shape)
    return out[()] if out.ndim == 0 else out


def _h1_difference(t):
    # G_1 - G_0 evaluated from the singular pieces, as a black box for extrapolation
    return faddeev_green(t) - laplace_green(t)


def richardson_zero(f, t0=1e-2, levels=4, direction=1.0, even=True):
    """Richardson extrapolation of ``f(direction * t)`` to ``t -> 0``.

    Step ratio 2.  With ``even`` the expansion is assumed to hold only even
    powers of ``t`` (true along the real axis for H_1); otherwise every power
    is eliminated in turn.  Returns the value and the last correction size.
    """
    T = [[complex(f(direction * t0 / 2 ** i))] for i in range(levels)]
    for j in range(1, levels):
        fac = 4.0 ** j if even else 2.0 ** j
        for i in range(j, levels):
            T[i].append((fac * T[i][j - 1] - T[i - 1][j - 1]) / (fac - 1))
    val = T[-1][-1]
    resid = abs(T[-1][-1] - T[-2][-2]) if levels > 1 else 0.0
    return val, resid


@functools.lru_cache(maxsize=None)
def h1_at_zero():
    """H_1(0) by Richardson extrapolation along the positive real axis."""
    val, _ = richardson_zero(_h1_difference)
    return val.real


def _check_k(k):
    k = complex(k)
    if k == 0:
        raise SingularArgumentError("k = 0 is excluded")
    return k


def disk_nodes(quad_nodes=QUAD_NODES):
    return np.exp(2j * np.pi * np.arange(quad_nodes) / quad_nodes)


def hhat_kernel(k, quad_nodes=QUAD_NODES):
    """Nystrom kernel values H^_k(x_i - x_j) on equiangular disk nodes."""
    return kernels.hhat_matrix(_check_k(k), disk_nodes(quad_nodes), h1_at_zero())


def _project_kernel(K, spec, quad_nodes):
    B = basis_samples(spec, quad_nodes)
    h = spec.boundary_length / quad_nodes
    return (h * h) * (B.conj().T @ (K @ B))


def phase_matrix(spec, alpha):
    """(E_alpha)[m, n] = exp(i alpha (m - n)) in row/column basis order."""
    n = spec.indices
    return np.exp(1j * alpha * (n[:, None] - n[None, :]))


class HhatCache:
    """H^_k matrices keyed by |k|; the argument of k enters as a phase factor.

    The stored block has order ``CACHE_ORDER``; lower orders are sub-blocks.
    With ``path`` set, the radial table is read from / written to an ``.npz``
    file.
    """

    def __init__(self, order=CACHE_ORDER, quad_nodes=QUAD_NODES, path=None):
        self.order = order
        self.quad_nodes = quad_nodes
        self.spec = BasisSpec(order)
        self.path = path
        self._table = {}
        self._dirty = False
        if path and os.path.exists(path):
            self.load(path)

    def _key(self, r):
        return float(np.round(r, 13))

    def radial(self, r):
        key = self._key(r)
        mat = self._table.get(key)
        if mat is None:
            mat = _project_kernel(hhat_kernel(key, self.quad_nodes), self.spec, self.quad_nodes)
            self._table[key] = mat
            self._dirty = True
        return mat

    def matrix(self, k, N):
        k = _check_k(k)
        if N > self.order:
            raise InvalidParameterError(f"cache order {self.order} < requested N = {N}")
        full = self.radial(abs(k))
        spec = BasisSpec(N)
        idx = [self.spec.position(n) for n in spec.indices]
        block = full[np.ix_(idx, idx)]
        return phase_matrix(spec, np.angle(k)) * block

    def __len__(self):
        return len(self._table)

    def save(self, path=None):
        path = path or self.path
        if not path:
            return
        keys = np.array(sorted(self._table))
        vals = np.array([self._table[r] for r in keys]) if len(keys) else np.zeros((0,))
        np.savez(path, radii=keys, mats=vals, order=self.order, nodes=self.quad_nodes)
        self._dirty = False

    def load(self, path):
        with np.load(path) as data:
            if int(data["order"]) != self.order or int(data["nodes"]) != self.quad_nodes:
                return
            for r, m in zip(data["radii"], data["mats"]):
                self._table[float(r)] = m


_DEFAULT_CACHE = None


def default_cache():
    global _DEFAULT_CACHE
    if _DEFAULT_CACHE is None:
        _DEFAULT_CACHE = HhatCache(path=os.environ.get("CONFORMAL_DBAR_HCACHE"))
    return _DEFAULT_CACHE


def assemble_hhat(k, spec, quad_nodes=QUAD_NODES, direct=False, cache=None):
    """Matrix of the integral operator with kernel H^_k(x - y) on the unit circle.

    The cached route evaluates the kernel at |k| only and multiplies by the
    phase matrix of arg k; ``direct=True`` assembles at ``k`` itself.
    """
    k = _check_k(k)
    if spec.boundary_length != 2 * np.pi:
        raise InvalidParameterError("H^_k is assembled on the unit disk only")
    if direct or spec.N > CACHE_ORDER or quad_nodes != QUAD_NODES:
        K = hhat_kernel(k, quad_nodes)
        ent = _project_kernel(K, spec, quad_nodes)
    else:
        ent = (cache if cache is not None else default_cache()).matrix(k, spec.N)
    return OperatorMatrix(ent, spec, "generic", {"k": k})


def single_layer(k, spec, **kw):
    """S_k = R_1 / 2 + H^_k on the mean-free space of the unit circle.

    The constant part ``H_1(0) - log|k| / (2 pi)`` of the kernel integrates
    mean-free densities to zero, so it does not appear.
    """
    H = assemble_hhat(k, spec, **kw).entries
    S = H + 0.5 * unit_disk_nd(spec.N).entries
    return OperatorMatrix(S, spec, "single-layer", {"k": complex(k)})
