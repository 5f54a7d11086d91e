import numpy as np
import pytest

from conformal_dbar.dbar_core import (
    DbarSolver,
    KGrid,
    ScatteringGrid,
    TruncationParams,
    auto_radius,
    cgo_trace_coeffs,
    disk_coverage,
    reconstruct,
    scattering_grid,
    scattering_transform,
    solve_bie,
    solve_dbar,
    truncate_scattering,
)
from conformal_dbar.errors import AutoTruncationError, InvalidParameterError
from conformal_dbar.forward_sim import Phantom, nd_matrix
from conformal_dbar.fourier_ops import BasisSpec, nd_to_dn, unit_disk_dn, unit_disk_nd

TWO = Phantom("disk", [(0.3 + 0.1j, 0.2, 3.0), (-0.4 - 0.2j, 0.15, 0.3)])


def dn(phantom, N):
    return nd_to_dn(nd_matrix(phantom, BasisSpec(N)))


def ops(N):
    return unit_disk_dn(N), unit_disk_nd(N)


def zero_scattering(R=5.0):
    g = KGrid(12, 64)
    z = np.zeros(g.k.shape)
    return ScatteringGrid(g, z.astype(complex), z.astype(bool), R, 10.0)


@pytest.fixture(scope="module")
def concentric_raw():
    """Raw scattering data of the (rho=0.5, sigma0=2) concentric phantom, |k| <= 6."""
    L = dn(Phantom("disk", [(0, 0.5, 2.0)]), 16)
    return scattering_grid(L, KGrid(6, 64))


@pytest.fixture(scope="module")
def concentric(concentric_raw):
    return truncate_scattering(concentric_raw, TruncationParams(5.0, 10.0))


# ------------------------------------------------------------------ BIE

def test_bie_homogeneous_returns_trace():
    L1, R1 = ops(8)
    for k in (0.7, -2 + 3j, 6j):
        p = solve_bie(L1, L1, R1, k)
        e = cgo_trace_coeffs(k, BasisSpec(8))[:, 0]
        assert np.max(np.abs(p - e)) <= 1e-12 * np.abs(e).max()
        assert scattering_transform(L1, L1, p, k) == 0


def test_bie_rejects_zero_k():
    L1, R1 = ops(2)
    with pytest.raises(InvalidParameterError):
        solve_bie(L1, L1, R1, 0)


def test_bie_conjugation_symmetry():
    # conj(L) is the DN matrix of the phantom mirrored in the real axis
    L = dn(TWO, 8)
    L1, R1 = ops(8)
    mirrored = Phantom("disk", [(i.center.conjugate(), i.radius, i.sigma) for i in TWO.inclusions])
    Lm = dn(mirrored, 8)
    assert np.max(np.abs(Lm.entries - L.entries.conj())) <= 1e-10
    for k in (1.3 - 0.7j, 4 + 2j, -0.2 + 3j):
        a = solve_bie(Lm, L1, R1, k)
        b = solve_bie(L, L1, R1, -np.conj(k)).conj()
        assert np.max(np.abs(a - b)) <= 1e-8 * np.abs(b).max()


def test_bie_low_contrast_close_to_trace():
    L = dn(Phantom("disk", [(0, 0.5, 1.05)]), 16)
    L1, R1 = ops(16)
    for k in (0.5, 2j, -3 + 2j, 4.0):
        e = cgo_trace_coeffs(k, BasisSpec(16))[:, 0]
        assert np.linalg.norm(solve_bie(L, L1, R1, k) - e) <= 0.1 * np.linalg.norm(e)


def test_born_approximation_low_contrast():
    L = dn(Phantom("disk", [(0, 0.5, 1.05)]), 16)
    g = KGrid(2, 10)
    full = scattering_grid(L, g).t
    born = scattering_grid(L, g, born=True).t
    sel = np.abs(g.k) <= 2
    assert np.max(np.abs(full - born)[sel] / np.abs(born)[sel]) <= 0.05


def test_homogeneous_scattering_is_zero():
    L1, _ = ops(16)
    raw = scattering_grid(L1, KGrid(8, 32))
    assert np.all(raw.t == 0)


def test_grid_matches_pointwise_transform():
    L = dn(TWO, 8)
    L1, R1 = ops(8)
    g = KGrid(3, 6)
    raw = scattering_grid(L, g)
    for k in g.k.ravel()[::7]:
        t = scattering_transform(L, L1, solve_bie(L, L1, R1, k), k)
        got = raw.t[g.k == k][0]
        assert abs(got - t) <= 1e-10 * max(1.0, abs(t))


def test_rotation_equivariance_of_abs_t():
    g = KGrid(4, 16)
    rot = Phantom("disk", [(i.center * 1j, i.radius, i.sigma) for i in TWO.inclusions])
    a = np.abs(scattering_grid(dn(TWO, 8), g).t)
    b = np.abs(scattering_grid(dn(rot, 8), g).t)
    assert np.max(np.abs(np.rot90(a) - b)) <= 1e-6


# ------------------------------------------------------------ truncation

def test_truncation_rejects_bad_params():
    with pytest.raises(InvalidParameterError):
        TruncationParams(R=0, c=10)
    with pytest.raises(InvalidParameterError):
        TruncationParams(R=3, c=-1)
    with pytest.raises(InvalidParameterError):
        TruncationParams(R=3, mode="magic")


def test_truncation_identity_for_large_params():
    rng = np.random.default_rng(0)
    g = KGrid(4, 16)
    t = rng.normal(size=g.k.shape) + 1j * rng.normal(size=g.k.shape)
    raw = ScatteringGrid(g, t, np.zeros(t.shape, dtype=bool))
    out = truncate_scattering(raw, TruncationParams(R=4 * np.sqrt(2) + 0.1, c=100.0))
    assert np.array_equal(out.t, t)


def test_truncation_invariants(concentric_raw):
    for R, c in ((3.0, 10.0), (6.0, 1.0)):
        tr = truncate_scattering(concentric_raw, TruncationParams(R, c))
        K = np.abs(tr.grid.k)
        assert np.all(tr.t[K >= R] == 0)
        assert np.all(np.abs(tr.t) <= c)
        assert np.all(np.abs(tr.t) <= np.abs(concentric_raw.t))


def test_auto_radius_and_failure(concentric_raw):
    assert auto_radius(concentric_raw, 10.0) == 6.0
    assert auto_radius(concentric_raw, 1.0) < 6.0
    g = KGrid(4, 16)
    bad = ScatteringGrid(g, np.full(g.k.shape, 50.0 + 0j), np.zeros(g.k.shape, dtype=bool))
    with pytest.raises(AutoTruncationError):
        truncate_scattering(bad, TruncationParams(c=10, mode="auto"))


def test_disk_coverage():
    k = np.array([0.0, 10.0, 5.0])
    f = disk_coverage(k, 0.1, 5.0)
    assert f[0] == 1 and f[1] == 0 and 0.4 < f[2] < 0.6


# ----------------------------------------------------------------- D-bar

def test_zero_scattering_gives_unit_mu():
    sol = solve_dbar(0.3, zero_scattering())
    assert sol.iterations == 0 and np.all(sol.mu == 1)
    rec = reconstruct(np.array([0, 0.5j, -0.9]), zero_scattering())
    assert np.all(rec.sigma == 1.0)


def test_convolution_matches_gaussian_closed_form():
    # dbar^{-1} of exp(-|k|^2) is (1 - exp(-|k|^2)) / k
    S = DbarSolver(zero_scattering(), lattice=128)
    u = S.convolve(np.exp(-np.abs(S.k) ** 2))
    k = S.k
    ex = np.where(k == 0, 0, (1 - np.exp(-np.abs(k) ** 2)) / np.where(k == 0, 1, k))
    inner = np.abs(k) < 4
    assert np.max(np.abs(u - ex)[inner]) <= 1e-3


def test_one_picard_step_small_data(concentric):
    eps = 1e-3
    small = ScatteringGrid(concentric.grid, eps * concentric.t, concentric.flagged,
                           concentric.R, concentric.c, concentric.mask)
    S = DbarSolver(small)
    for z in (0.0, 0.3, -0.5j):
        mu = S.solve(z).mu
        born = S.born(z)
        assert np.max(np.abs(mu - 1)) <= 10 * eps
        assert np.max(np.abs(mu - born)) <= 1e-3 * np.max(np.abs(born - 1))


def test_lattice_refinement(concentric):
    a = DbarSolver(concentric, lattice=128)
    b = DbarSolver(concentric, lattice=256)
    for z in (0.0, 0.3, 0.7j):
        assert abs(a.solve(z).mu0 - b.solve(z).mu0) <= 1e-3


def test_far_lattice_decay(concentric):
    S = DbarSolver(concentric)
    sol = S.solve(0.3)
    assert sol.converged
    far = np.abs(S.k) > 0.9 * S.h * S.n / 2
    assert np.max(np.abs(sol.mu[far] - 1)) <= 0.05


def test_concentric_profile(concentric):
    r = np.linspace(0, 0.95, 12)
    rec = reconstruct(r, concentric)
    assert 1.3 <= rec.sigma[0] <= 2.7
    inner = r <= 0.6
    assert np.all(np.diff(rec.sigma[inner]) <= 1e-9)
    assert np.all(np.abs(rec.sigma[r >= 0.75] - 1) <= 0.15)
    assert np.max(np.abs(rec.sigma_complex.imag)) <= 0.05 * rec.sigma.max()


def test_truncation_radius_ordering(concentric_raw):
    z = np.linspace(-0.9, 0.9, 9)
    Z = (z[None, :] + 1j * z[:, None]).ravel()
    Z = Z[np.abs(Z) < 1]
    rec = {R: reconstruct(Z, truncate_scattering(concentric_raw, TruncationParams(R, 10.0))).sigma
           for R in (3.0, 4.0, 6.0)}
    assert np.linalg.norm(rec[3.0] - rec[4.0]) <= np.linalg.norm(rec[3.0] - rec[6.0])


def test_reconstruction_mirror_symmetry():
    sym = Phantom("disk", [(0.4, 0.2, 2.5), (-0.3 + 0.35j, 0.15, 0.4), (-0.3 - 0.35j, 0.15, 0.4)])
    raw = scattering_grid(dn(sym, 12), KGrid(5, 40))
    tr = truncate_scattering(raw, TruncationParams(4.0, 10.0))
    pts = np.array([0.4 + 0.1j, -0.3 + 0.35j, 0.1 + 0.6j, -0.7 + 0.2j])
    S = DbarSolver(tr)
    a = reconstruct(pts, tr, solver=S).sigma
    b = reconstruct(pts.conj(), tr, solver=S).sigma
    assert np.max(np.abs(a - b)) <= 1e-3


def test_parallel_reconstruction_is_identical(concentric):
    pts = np.array([0.1, 0.2j, -0.4, 0.6 + 0.1j])
    S = DbarSolver(concentric)
    a = reconstruct(pts, concentric, solver=S, jobs=1)
    b = reconstruct(pts, concentric, solver=S, jobs=3)
    assert np.array_equal(a.sigma_complex, b.sigma_complex)
