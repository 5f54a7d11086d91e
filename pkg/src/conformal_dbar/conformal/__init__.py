"""Conformal maps: disk and half-plane Moebius maps, Schwarz-Christoffel maps, compositions."""

from .maps import (
    CompositeMap,
    ConformalMap,
    HalfplaneMobiusMap,
    IdentityMap,
    MobiusDiskMap,
    SCMap,
    compose,
    derivative_modulus,
    map_from_description,
)
from .mobius import (
    mobius_disk,
    mobius_disk_deriv,
    mobius_disk_inverse,
    mobius_halfplane,
    mobius_halfplane_deriv,
    mobius_halfplane_inverse,
)
from .schwarz_christoffel import (
    Polygon,
    SCInverter,
    SCParameters,
    sc_evaluate,
    sc_integral,
    sc_invert,
    sc_solve_parameters,
)
