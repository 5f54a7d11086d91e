"""Disk automorphisms and the half-plane to disk Moebius map."""

import numpy as np

from ..errors import InvalidParameterError


def _check_disk_param(a):
    a = complex(a)
    if not abs(a) < 1:
        raise InvalidParameterError(f"Moebius parameter must satisfy |a| < 1, got {a}")
    return a


def mobius_disk(a, z):
    """M_a(z) = (z - a) / (conj(a) z - 1); an involution of the unit disk with M_a(a) = 0."""
    a = _check_disk_param(a)
    z = np.asarray(z, dtype=complex)
    return (z - a) / (a.conjugate() * z - 1)


def mobius_disk_inverse(a, w):
    # M_a is its own inverse
    return mobius_disk(a, w)


def mobius_disk_deriv(a, z):
    a = _check_disk_param(a)
    z = np.asarray(z, dtype=complex)
    return (abs(a) ** 2 - 1) / (a.conjugate() * z - 1) ** 2


def _check_xi(xi):
    xi = complex(xi)
    if not xi.imag > 0:
        raise InvalidParameterError(f"xi must lie in the upper half-plane, got {xi}")
    return xi


def mobius_halfplane(b, xi, z):
    """((z - b) - xi) / ((z - b) - conj(xi)): upper half-plane onto the unit disk, b + xi -> 0.

    ``z = inf`` (or any non-finite input) maps to 1.
    """
    xi = _check_xi(xi)
    z = np.asarray(z, dtype=complex)
    u = z - float(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = (u - xi) / (u - xi.conjugate())
    return np.where(np.isfinite(z), w, 1.0 + 0j)


def mobius_halfplane_inverse(b, xi, w):
    xi = _check_xi(xi)
    w = np.asarray(w, dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        return float(b) + (xi - w * xi.conjugate()) / (1 - w)


def mobius_halfplane_deriv(b, xi, z):
    xi = _check_xi(xi)
    u = np.asarray(z, dtype=complex) - float(b)
    return (xi - xi.conjugate()) / (u - xi.conjugate()) ** 2
