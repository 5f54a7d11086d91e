"""Shipped phantoms and conversion to and from phantom documents."""

import numpy as np

from .errors import ConfigError
from .forward_sim import Inclusion, Phantom

RECTANGLE = (-0.8 - 0.45j, 0.8 - 0.45j, 0.8 + 0.45j, -0.8 + 0.45j)
ROI_ANCHOR = 0.6 * np.exp(1j * np.pi / 8)
ROI_REGION = ("circle", ROI_ANCHOR, 0.35)


def disk_phantom():
    """Three circular inclusions in the unit disk, one resistive, two conductive."""
    return Phantom("disk", (
        Inclusion(-0.05 + 0.05j, 0.2, 3.0),
        Inclusion(0.5 + 0.15j, 0.15, 0.2),
        Inclusion(-0.45 - 0.2j, 0.15, 2.0),
    ), name="disk3")


def rectangle_phantom():
    return Phantom("polygon", (
        Inclusion(-0.4 + 0.1j, 0.2, 3.0),
        Inclusion(0.35 - 0.1j, 0.18, 0.3),
    ), vertices=RECTANGLE, name="rectangle")


def roi_phantom():
    """Small inclusions in the first quadrant near the anchor 0.6 exp(i pi / 8)."""
    return Phantom("disk", (
        Inclusion(0.76 + 0.22j, 0.09, 3.0),
        Inclusion(0.52 + 0.5j, 0.09, 0.3),
        Inclusion(0.38 + 0.12j, 0.08, 2.0),
    ), name="roi")


def halfplane_phantom():
    """Two shallow inclusions at Re z = -3 and 3 and a deeper one below the origin."""
    return Phantom("halfplane", (
        Inclusion(-3 + 0.7j, 0.35, 0.3),
        Inclusion(3 + 0.7j, 0.35, 2.0),
        Inclusion(1.8j, 0.5, 3.0),
    ), name="halfplane3")


def homogeneous(domain="disk", vertices=None):
    return Phantom(domain, (), vertices=vertices, name="homogeneous")


SHIPPED = {
    "disk3": disk_phantom,
    "rectangle": rectangle_phantom,
    "roi": roi_phantom,
    "halfplane3": halfplane_phantom,
    "homogeneous": homogeneous,
    "homogeneous-halfplane": lambda: homogeneous("halfplane"),
    "homogeneous-rectangle": lambda: homogeneous("polygon", RECTANGLE),
}


def _pair(v, what):
    try:
        x, y = v
        return complex(float(x), float(y))
    except (TypeError, ValueError):
        raise ConfigError([f"{what}: expected [x, y], got {v!r}"]) from None


def phantom_from_doc(doc):
    """Build a Phantom from a document or a shipped name.

    Document keys: ``domain``, ``inclusions`` (list of ``{center: [x, y],
    radius, sigma}``), optional ``vertices`` (list of ``[x, y]``) and ``name``.
    """
    if isinstance(doc, str):
        if doc not in SHIPPED:
            raise ConfigError([f"unknown shipped phantom {doc!r}; choose from {sorted(SHIPPED)}"])
        return SHIPPED[doc]()
    problems = []
    unknown = set(doc) - {"domain", "inclusions", "vertices", "name"}
    if unknown:
        problems.append(f"phantom: unknown keys {sorted(unknown)}")
    incs = []
    for i, inc in enumerate(doc.get("inclusions", [])):
        extra = set(inc) - {"center", "radius", "sigma"}
        if extra:
            problems.append(f"phantom.inclusions[{i}]: unknown keys {sorted(extra)}")
        try:
            incs.append(Inclusion(_pair(inc["center"], "center"), float(inc["radius"]),
                                  float(inc["sigma"])))
        except KeyError as e:
            problems.append(f"phantom.inclusions[{i}]: missing {e}")
        except Exception as e:  # noqa: BLE001 - collect every violation
            problems.append(f"phantom.inclusions[{i}]: {e}")
    verts = doc.get("vertices")
    if verts is not None:
        try:
            verts = tuple(_pair(v, "vertex") for v in verts)
        except ConfigError as e:
            problems.extend(e.problems)
    if problems:
        raise ConfigError(problems)
    try:
        ph = Phantom(doc.get("domain", "disk"), tuple(incs), vertices=verts,
                     name=doc.get("name", ""))
    except Exception as e:  # noqa: BLE001
        raise ConfigError([f"phantom: {e}"]) from None
    bad = ph.problems()
    if bad:
        raise ConfigError([f"phantom: {p}" for p in bad])
    return ph


def phantom_to_doc(ph):
    doc = {"domain": ph.domain, "name": ph.name,
           "inclusions": [{"center": [inc.center.real, inc.center.imag], "radius": inc.radius,
                           "sigma": inc.sigma} for inc in ph.inclusions]}
    if ph.vertices is not None:
        doc["vertices"] = [[v.real, v.imag] for v in ph.vertices]
    return doc
