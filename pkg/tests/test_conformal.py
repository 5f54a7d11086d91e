import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from conformal_dbar.conformal import (
    HalfplaneMobiusMap,
    IdentityMap,
    MobiusDiskMap,
    Polygon,
    SCMap,
    compose,
    map_from_description,
    mobius_disk,
    mobius_disk_deriv,
    mobius_disk_inverse,
    mobius_halfplane,
    mobius_halfplane_inverse,
    sc_evaluate,
    sc_invert,
    sc_solve_parameters,
)
from conformal_dbar.errors import (
    CornerSingularityError,
    InvalidCompositionError,
    InvalidGeometryError,
    InvalidParameterError,
)
from conformal_dbar.fourier_ops import BasisSpec, basis_eval, transformed_current

SQUARE = (-1 - 1j, 1 - 1j, 1 + 1j, -1 + 1j)
RECT21 = (-1 - 0.5j, 1 - 0.5j, 1 + 0.5j, -1 + 0.5j)
RECT = (-0.8 - 0.45j, 0.8 - 0.45j, 0.8 + 0.45j, -0.8 + 0.45j)
LSHAPE = (0, 2, 2 + 1j, 1 + 1j, 1 + 2j, 2j)


# ---------------------------------------------------------------- Mobius

def test_mobius_disk_examples():
    assert abs(mobius_disk(0.6, 0.6)) < 1e-15
    assert mobius_disk(0, 0.3 + 0.1j) == pytest.approx(-0.3 - 0.1j)
    assert mobius_disk(0.6, 1.0) == pytest.approx(-1.0)
    assert mobius_disk_inverse(0.6, 0) == pytest.approx(0.6)
    assert mobius_disk_inverse(0, 0.2j) == pytest.approx(-0.2j)
    assert mobius_disk_inverse(0.3j, mobius_disk(0.3j, 0.5)) == pytest.approx(0.5, abs=1e-15)


def test_mobius_disk_rejects_outside_parameter():
    with pytest.raises(InvalidParameterError):
        mobius_disk(1.0, 0.2)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0, 0.95), t=st.floats(0, 2 * np.pi), s=st.floats(0, 2 * np.pi))
def test_mobius_disk_maps_circle_to_circle(r, t, s):
    a = r * np.exp(1j * t)
    assert abs(abs(mobius_disk(a, np.exp(1j * s))) - 1) < 1e-12


def test_mobius_halfplane_examples():
    assert abs(mobius_halfplane(0, 1.2j, 1.2j)) < 1e-15
    assert mobius_halfplane(3, 1.2j, 3.0) == pytest.approx(-1.0)
    assert mobius_halfplane(0, 1.2j, np.inf) == 1.0
    assert abs(mobius_halfplane(0, 1.2j, 1e9) - 1) < 1e-8
    w = mobius_halfplane(-1.5, 1.2j, 0.3 + 0.7j)
    assert mobius_halfplane_inverse(-1.5, 1.2j, w) == pytest.approx(0.3 + 0.7j, abs=1e-14)


def central_diff(f, z, h):
    return (f(z + h) - f(z - h)) / (2 * h)


def test_mobius_derivative_finite_difference():
    d = abs(mobius_disk_deriv(0.6, 1.0))
    fd = abs(central_diff(lambda z: mobius_disk(0.6, z), 1.0, 1e-6))
    assert abs(d - fd) <= 1e-6 * d
    assert np.allclose(IdentityMap().dphi_abs(np.array([0.2, 1j])), 1.0)
    assert np.allclose(MobiusDiskMap(0).dphi_abs(np.array([0.2, 0.9j])), 1.0)


def test_halfplane_map_derivative():
    m = HalfplaneMobiusMap(1.0, 1.2j)
    z = np.array([0.3 + 0.5j, 2.0 + 0j])
    fd = np.abs(central_diff(m.forward, z, 1e-6))
    assert np.allclose(m.dphi_abs(z), fd, rtol=1e-6)


# --------------------------------------------------- Schwarz-Christoffel

def arc_integral(theta, betas, a, b, ka, kb):
    """int over the arc e^{i phi}, phi in [a, b], of prod (1 - s/w_k)^beta_k ds.

    Endpoint singularities at prevertices ``ka`` / ``kb`` are handed to QUADPACK's
    algebraic weight; the remaining factor is smooth.
    """
    wa = betas[ka] if ka is not None else 0.0
    wb = betas[kb] if kb is not None else 0.0

    def ratio(delta, sign):
        # (1 - e^{i delta}) / |delta| without cancellation; sign of delta fixed by the end
        return -1j * np.exp(0.5j * delta) * sign * np.sinc(delta / (2 * np.pi))

    def g(phi, part):
        s = np.exp(1j * phi)
        val = 1j * s
        for k, (tk, bk) in enumerate(zip(theta, betas)):
            if k == ka:
                val *= ratio(phi - a, 1.0) ** bk
            elif k == kb:
                val *= ratio(phi - b, -1.0) ** bk
            else:
                val *= (1 - np.exp(1j * (phi - tk))) ** bk
        return val.real if part == 0 else val.imag

    out = 0j
    for part, unit in ((0, 1), (1, 1j)):
        out += unit * quad(g, a, b, args=(part,), weight="alg", wvar=(wa, wb),
                           epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    return out


def test_square_prevertices_equally_spaced():
    p = sc_solve_parameters(Polygon(SQUARE), 0)
    gaps = np.diff(np.concatenate([p.theta, [2 * np.pi]]))
    assert np.allclose(gaps, np.pi / 2, atol=1e-10)


def test_triangle_prevertices_equally_spaced():
    tri = np.exp(1j * (np.pi / 2 + 2 * np.pi * np.arange(3) / 3))
    p = sc_solve_parameters(Polygon(tri), 0)
    gaps = np.diff(np.concatenate([p.theta, [2 * np.pi]]))
    assert np.allclose(gaps, 2 * np.pi / 3, atol=1e-10)


def test_rectangle_prevertices_match_quadpack_shooting():
    p = sc_solve_parameters(Polygon(RECT21), 0)
    betas = np.full(4, -0.5)

    # central symmetry leaves one unknown angle t: prevertices 0, t, pi, pi + t
    def mismatch(t):
        th = np.array([0, t, np.pi, np.pi + t])
        s0 = abs(arc_integral(th, betas, 0, t, 0, 1))
        s1 = abs(arc_integral(th, betas, t, np.pi, 1, 2))
        return s0 / s1 - 2.0

    t = brentq(mismatch, 0.2, np.pi - 0.2, xtol=1e-13)
    ref = np.array([0, t, np.pi, np.pi + t])
    assert np.max(np.abs(p.theta - ref)) <= 1e-6


def test_square_arc_midpoint_matches_quadpack():
    p = sc_solve_parameters(Polygon(SQUARE), 0)
    th = p.theta
    betas = p.betas
    side = arc_integral(th, betas, th[0], th[1], 0, 1)
    C = (SQUARE[1] - SQUARE[0]) / side
    mid = 0.5 * (th[0] + th[1])
    ref = SQUARE[0] + C * arc_integral(th, betas, th[0], mid, 0, None)
    got = sc_evaluate(p, np.exp(1j * mid))
    assert abs(got - ref) <= 1e-8
    assert abs(got - (-1j)) <= 1e-8


def test_sc_normalization_and_vertices():
    p = sc_solve_parameters(Polygon(LSHAPE), 0.5 + 0.5j)
    assert abs(sc_evaluate(p, 0) - (0.5 + 0.5j)) < 1e-12
    assert np.allclose(sc_evaluate(p, p.prevertices), np.array(LSHAPE), atol=1e-12)
    sides = np.abs(np.diff(sc_evaluate(p, p.prevertices), append=LSHAPE[0]))
    assert np.allclose(sides, Polygon(LSHAPE).side_lengths, atol=1e-9)


def test_sc_boundary_lies_on_polygon():
    p = sc_solve_parameters(Polygon(LSHAPE), 0.5 + 0.5j)
    w = sc_evaluate(p, np.exp(2j * np.pi * (np.arange(200) + 0.5) / 200))
    assert Polygon(LSHAPE).boundary_distance(w).max() < 1e-9


def test_sc_inverse_round_trip():
    p = sc_solve_parameters(Polygon(LSHAPE), 0.5 + 0.5j)
    rng = np.random.default_rng(4)
    w = rng.uniform(0, 2, 400) + 1j * rng.uniform(0, 2, 400)
    poly = Polygon(LSHAPE)
    w = w[poly.contains(w) & (poly.boundary_distance(w) > 1e-3)][:60]
    z = sc_invert(p, w)
    assert np.all(np.abs(z) < 1)
    assert np.max(np.abs(sc_evaluate(p, z) - w)) <= 1e-9
    assert abs(sc_invert(p, 0.5 + 0.5j)) < 1e-12
    assert np.allclose(sc_invert(p, np.array(LSHAPE)), p.prevertices, atol=1e-9)


def test_sc_rejects_bad_polygons():
    with pytest.raises(InvalidGeometryError):
        Polygon(SQUARE[::-1])
    with pytest.raises(InvalidGeometryError):
        Polygon((0, 1, 1j, 1 + 1j))
    with pytest.raises(InvalidParameterError):
        sc_solve_parameters(Polygon(SQUARE), 3.0)


def test_sc_corner_derivative_raises():
    m = SCMap(RECT)
    with pytest.raises(CornerSingularityError):
        m.dphi_abs(RECT[0])


# ----------------------------------------------------------- composition

def test_compose_identity_and_inverse():
    M = MobiusDiskMap(0.4 - 0.2j)
    assert compose(IdentityMap(), M) is M
    rng = np.random.default_rng(0)
    z = 0.9 * np.sqrt(rng.random(100)) * np.exp(2j * np.pi * rng.random(100))
    both = compose(M, M)  # M_a is an involution
    assert np.max(np.abs(both.forward(z) - z)) <= 1e-12


def test_compose_requires_disk_outer():
    with pytest.raises(InvalidCompositionError):
        compose(HalfplaneMobiusMap(), MobiusDiskMap(0.2))


def test_composite_derivative_finite_difference():
    sc = SCMap(RECT)
    m = compose(MobiusDiskMap(0.6), sc)
    z = np.array([0.1 + 0.1j, -0.5 + 0.2j, 0.6 - 0.3j, 0.0])
    h = 1e-4
    fd = np.abs((m.forward(z + h) - m.forward(z - h)) / (2 * h))
    assert np.max(np.abs(m.dphi_abs(z) - fd) / fd) <= 1e-6


def test_map_description_round_trip():
    m = compose(MobiusDiskMap(0.3 + 0.1j), SCMap(RECT))
    again = map_from_description(m.describe())
    z = np.array([0.2 + 0.1j, -0.3j])
    assert np.allclose(again.forward(z), m.forward(z), atol=1e-12)


# ---------------------------------------------------- transformed currents

def test_transformed_current_identity_is_basis():
    spec = BasisSpec(4)
    t = 2 * np.pi * np.arange(32) / 32
    for n in spec.indices:
        got = transformed_current(IdentityMap(), n, np.exp(1j * t), spec)
        assert np.allclose(got, basis_eval(spec, n, t), atol=1e-15)


@pytest.mark.parametrize("cmap", [MobiusDiskMap(0.6), MobiusDiskMap(-0.3 + 0.5j)])
def test_transformed_current_is_mean_free(cmap):
    spec = BasisSpec(16)
    z = np.exp(2j * np.pi * np.arange(256) / 256)
    for n in spec.indices:
        assert abs(np.mean(transformed_current(cmap, n, z, spec)) * 2 * np.pi) <= 1e-8


def test_transformed_current_matches_fd_oracle():
    cmap = MobiusDiskMap(0.6)
    spec = BasisSpec(8)
    t = 2 * np.pi * np.arange(256) / 256
    z = np.exp(1j * t)
    # |Phi'| from central differences along the tangent
    h = 1e-6
    dphi = np.abs(cmap.forward(z * np.exp(1j * h)) - cmap.forward(z * np.exp(-1j * h))) / (2 * h)
    ref = dphi * basis_eval(spec, 8, np.angle(cmap.forward(z)))
    got = transformed_current(cmap, 8, z, spec)
    assert np.max(np.abs(got - ref)) <= 1e-5 * np.abs(ref).max()
