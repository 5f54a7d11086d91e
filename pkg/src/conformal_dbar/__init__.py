"""D-bar reconstruction for 2-D EIT on the disk, polygons and the half-plane.

Data on a simply connected domain are pushed to the unit disk by a conformal
map, reconstructed there with the D-bar method and mapped back.
"""

from . import conformal, dbar_core, faddeev, forward_sim, fourier_ops, kernels, pipeline
from .conformal import (
    CompositeMap,
    ConformalMap,
    HalfplaneMobiusMap,
    IdentityMap,
    MobiusDiskMap,
    Polygon,
    SCMap,
    compose,
)
from .dbar_core import (
    DbarSolver,
    KGrid,
    ScatteringGrid,
    TruncationParams,
    reconstruct,
    scattering_grid,
    solve_bie,
    solve_dbar,
    truncate_scattering,
)
from .errors import DbarError
from .faddeev import assemble_hhat, expint_e1, faddeev_green, g1, h1, single_layer
from .forward_sim import Inclusion, Phantom, nd_matrix, relative_nd_matrix
from .fourier_ops import (
    BasisSpec,
    OperatorMatrix,
    nd_to_dn,
    pushforward_nd,
    transformed_current,
    unit_disk_dn,
    unit_disk_nd,
)
from .pipeline import (
    ReconstructionGrid,
    RoiSpec,
    halfplane_sweep,
    pem_convergence_study,
    reconstruct_virtual,
    roi_error,
    roi_map,
)

__version__ = "0.1.0"
