"""Pure numpy implementation of the exponential-integral kernels.

This is the fallback used when the compiled ``_kernels`` extension is not
available. Both backends implement the same algorithm:

* ``Ein(z) = sum_{k>=1} (-1)^(k+1) z^k / (k k!)`` (entire part) wherever the
  power series is free of cancellation, i.e. ``|z| <= 2`` or
  ``|z| + Re z <= 4``;
* a modified-Lentz evaluation of the continued fraction
  ``E1(z) = exp(-z) / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))`` elsewhere.

Points on the negative real axis get the limit from the upper half-plane.
"""

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_RADIUS = 2.0
SERIES_AXIS_BAND = 4.0
_MAX_TERMS = 600
_TINY = 1e-300


def _series_mask(z):
    r = np.abs(z)
    return (r <= SERIES_RADIUS) | (r + z.real <= SERIES_AXIS_BAND)


def _ein(z):
    z = np.asarray(z, dtype=complex)
    term = z.copy()
    total = z.copy()
    active = np.ones(z.shape, dtype=bool)
    for k in range(2, _MAX_TERMS):
        if not active.any():
            break
        term = np.where(active, -term * z / k, 0.0)
        add = term / k
        total = total + add
        active &= np.abs(add) > 1e-17 * np.abs(total)
    return total


def _e1_cf(z):
    z = np.asarray(z, dtype=complex)
    b = z + 1.0
    c = np.full(z.shape, 1.0 / _TINY, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(z.shape, dtype=bool)
    for i in range(1, _MAX_TERMS * 4):
        if not active.any():
            break
        a = -float(i * i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > 1e-16
    return h * np.exp(-z)


def _upper_limit(z):
    # put points lying on the branch cut onto its upper side
    on_cut = (z.imag == 0.0) & (z.real < 0.0)
    if on_cut.any():
        z = np.where(on_cut, z.real + 0.0j, z)
    return z


def e1_array(z):
    """Principal-branch E1 on an array (cut points take the upper limit)."""
    z = _upper_limit(np.atleast_1d(np.asarray(z, dtype=complex)))
    out = np.empty(z.shape, dtype=complex)
    ser = _series_mask(z)
    if ser.any():
        zs = z[ser]
        out[ser] = -EULER_GAMMA - np.log(zs) + _ein(zs)
    if (~ser).any():
        out[~ser] = _e1_cf(z[~ser])
    return out


def h1_array(w):
    """Harmonic part H1(w) = G1(w) - G0(w) of the Faddeev Green function.

    ``G1(w) = Re E1(-i w) / (2 pi)`` and ``G0(w) = -log|w| / (2 pi)``, so
    ``H1 = (Re Ein(-i w) - gamma) / (2 pi)`` in the series region.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    zeta = -1j * w
    out = np.empty(w.shape, dtype=float)
    ser = _series_mask(zeta)
    if ser.any():
        out[ser] = (_ein(zeta[ser]).real - EULER_GAMMA) / (2 * np.pi)
    if (~ser).any():
        zc = zeta[~ser]
        out[~ser] = (_e1_cf(zc).real + np.log(np.abs(zc))) / (2 * np.pi)
    return out


def hhat_matrix(k, nodes, h1_zero):
    """Kernel matrix ``H1(k (z_i - z_j)) - h1_zero`` with a zero diagonal."""
    nodes = np.asarray(nodes, dtype=complex)
    diff = complex(k) * (nodes[:, None] - nodes[None, :])
    vals = h1_array(diff.ravel()).reshape(diff.shape)
    vals -= h1_zero
    np.fill_diagonal(vals, 0.0)
    return vals
