"""Conformal maps between a true domain and the unit disk.

Every map exposes ``forward`` (Phi: true domain -> disk), ``inverse``
(Psi = Phi^-1) and the derivative moduli ``dphi_abs`` = |Phi'| and
``dpsi_abs`` = |Psi'|.  All methods accept arrays.
"""

import numpy as np

from ..errors import CornerSingularityError, InvalidCompositionError
from . import mobius as mb
from .schwarz_christoffel import Polygon, sc_evaluate, sc_invert, sc_solve_parameters


class ConformalMap:
    kind = "abstract"
    domain = "disk"
    has_corners = False

    def forward(self, z):
        raise NotImplementedError

    def inverse(self, w):
        raise NotImplementedError

    def dphi_abs(self, z):
        raise NotImplementedError

    def dpsi_abs(self, w):
        return 1.0 / self.dphi_abs(self.inverse(w))

    def describe(self):
        return {"kind": self.kind}

    def __call__(self, z):
        return self.forward(z)


class IdentityMap(ConformalMap):
    kind = "identity"

    def forward(self, z):
        return np.asarray(z, dtype=complex)

    def inverse(self, w):
        return np.asarray(w, dtype=complex)

    def dphi_abs(self, z):
        return np.ones(np.shape(z))


class MobiusDiskMap(ConformalMap):
    """Disk automorphism M_a; sends ``a`` to the origin."""

    kind = "disk-mobius"

    def __init__(self, a):
        self.a = mb._check_disk_param(a)

    def forward(self, z):
        return mb.mobius_disk(self.a, z)

    def inverse(self, w):
        return mb.mobius_disk_inverse(self.a, w)

    def dphi_abs(self, z):
        return np.abs(mb.mobius_disk_deriv(self.a, z))

    def dpsi_abs(self, w):
        return np.abs(mb.mobius_disk_deriv(self.a, w))

    def describe(self):
        return {"kind": self.kind, "a": [self.a.real, self.a.imag]}


class HalfplaneMobiusMap(ConformalMap):
    """Upper half-plane onto the disk, ``b + xi`` to the origin."""

    kind = "halfplane-mobius"
    domain = "halfplane"

    def __init__(self, b=0.0, xi=1.2j):
        self.b = float(b)
        self.xi = mb._check_xi(xi)

    def forward(self, z):
        return mb.mobius_halfplane(self.b, self.xi, z)

    def inverse(self, w):
        return mb.mobius_halfplane_inverse(self.b, self.xi, w)

    def dphi_abs(self, z):
        return np.abs(mb.mobius_halfplane_deriv(self.b, self.xi, z))

    def dpsi_abs(self, w):
        w = np.asarray(w, dtype=complex)
        # Psi'(w) = (xi - conj(xi)) / (1 - w)^2
        return np.abs((self.xi - self.xi.conjugate()) / (1 - w) ** 2)

    def describe(self):
        return {"kind": self.kind, "b": self.b, "xi": [self.xi.real, self.xi.imag]}


class SCMap(ConformalMap):
    """Polygon onto the disk via the inverse of a Schwarz-Christoffel map."""

    kind = "schwarz-christoffel"
    domain = "polygon"
    has_corners = True

    def __init__(self, polygon, anchor=None):
        self.polygon = polygon if isinstance(polygon, Polygon) else Polygon(polygon)
        self.params = sc_solve_parameters(self.polygon, anchor)
        self.anchor = self.params.A

    def forward(self, z):
        return sc_invert(self.params, z)

    def inverse(self, w):
        return sc_evaluate(self.params, w)

    def dpsi_abs(self, w):
        w = np.asarray(w, dtype=complex)
        d = np.min(np.abs(np.atleast_1d(w).ravel()[:, None] - self.params.prevertices[None, :]))
        if d < 1e-14:
            raise CornerSingularityError("|Psi'| requested at a prevertex")
        return np.abs(sc_evaluate(self.params, w, derivative=True)[1])

    def dphi_abs(self, z):
        z = np.asarray(z, dtype=complex)
        if np.min(np.abs(np.atleast_1d(z).ravel()[:, None] - self.polygon.v[None, :])) < 1e-14:
            raise CornerSingularityError("|Phi'| is singular at a polygon corner")
        return 1.0 / self.dpsi_abs(self.forward(z))

    def describe(self):
        v = self.polygon.v
        return {"kind": self.kind, "vertices": [[x.real, x.imag] for x in v],
                "anchor": [self.anchor.real, self.anchor.imag]}


class CompositeMap(ConformalMap):
    """Phi = outer.forward o inner.forward."""

    kind = "composition"

    def __init__(self, outer, inner):
        if outer.domain != "disk":
            raise InvalidCompositionError("outer map must be defined on the unit disk")
        self.outer = outer
        self.inner = inner
        self.domain = inner.domain
        self.has_corners = inner.has_corners or outer.has_corners

    def forward(self, z):
        return self.outer.forward(self.inner.forward(z))

    def inverse(self, w):
        return self.inner.inverse(self.outer.inverse(w))

    def dphi_abs(self, z):
        u = self.inner.forward(z)
        return self.outer.dphi_abs(u) * self.inner.dphi_abs(z)

    def dpsi_abs(self, w):
        u = self.outer.inverse(w)
        return self.inner.dpsi_abs(u) * self.outer.dpsi_abs(w)

    def describe(self):
        return {"kind": self.kind, "outer": self.outer.describe(),
                "inner": self.inner.describe()}


def compose(outer, inner):
    """Map ``z -> outer(inner(z))``; ``outer`` must act on the unit disk."""
    if outer.domain != "disk":
        raise InvalidCompositionError("outer map must be defined on the unit disk")
    if isinstance(outer, IdentityMap):
        return inner
    if isinstance(inner, IdentityMap):
        return outer
    return CompositeMap(outer, inner)


def derivative_modulus(cmap, z):
    """|Phi'(z)|."""
    return cmap.dphi_abs(z)


def map_from_description(desc):
    kind = desc["kind"]
    if kind == "identity":
        return IdentityMap()
    if kind == "disk-mobius":
        a = desc.get("a", [0.0, 0.0])
        return MobiusDiskMap(complex(*a) if isinstance(a, (list, tuple)) else complex(a))
    if kind == "halfplane-mobius":
        xi = desc.get("xi", [0.0, 1.2])
        return HalfplaneMobiusMap(desc.get("b", 0.0), complex(*xi))
    if kind == "schwarz-christoffel":
        verts = [complex(x, y) for x, y in desc["vertices"]]
        anchor = desc.get("anchor")
        return SCMap(verts, complex(*anchor) if anchor is not None else None)
    if kind == "composition":
        return compose(map_from_description(desc["outer"]), map_from_description(desc["inner"]))
    raise ValueError(f"unknown map kind {kind!r}")
