import json

import numpy as np
import pytest

from conformal_dbar import io as fio
from conformal_dbar.dbar_core import KGrid, ScatteringGrid
from conformal_dbar.errors import ConfigError, InvalidScaleError
from conformal_dbar.fourier_ops import BasisSpec, OperatorMatrix
from conformal_dbar.phantoms import SHIPPED, phantom_from_doc, phantom_to_doc
from conformal_dbar.pipeline import ReconstructionGrid


def test_matrix_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    E = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)) * 1e-7
    M = OperatorMatrix(E, BasisSpec(4), "ND")
    p = tmp_path / "r.nd"
    fio.write_matrix(p, M, {"map": {"kind": "identity"}})
    back = fio.read_matrix(p)
    assert np.array_equal(back.entries, E)
    assert back.role == "ND" and back.spec.N == 4
    lines = p.read_text().splitlines()
    assert lines[0] == "# N: 4"
    assert lines[4].split()[:2] == ["-4", "-4"]


def test_matrix_missing_entries_rejected(tmp_path):
    p = tmp_path / "bad.nd"
    p.write_text("# N: 1\n-1 -1 1 0\n")
    with pytest.raises(ConfigError):
        fio.read_matrix(p)


def test_scattering_round_trip(tmp_path):
    g = KGrid(2, 4)
    t = np.arange(16).reshape(4, 4) * (1 + 0.5j) / 3
    mask = t.real > 2
    scat = ScatteringGrid(g, np.where(mask, 0, t), np.zeros(t.shape, dtype=bool), 2.0, 10.0, mask)
    p = tmp_path / "t.txt"
    fio.write_scattering(p, scat)
    back = fio.read_scattering(p)
    assert np.array_equal(back.t, scat.t) and np.array_equal(back.mask, mask)
    assert back.R == 2.0 and back.grid == g
    first = p.read_text().splitlines()[4].split()
    assert float(first[0]) == -2 and float(first[1]) == -2


def small_grid():
    x = np.array([-0.5, 0.5])
    sigma = np.array([[1.0, 2.0], [1.5, np.nan]])
    mask = np.array([[True, True], [True, False]])
    return ReconstructionGrid(x, x.copy(), sigma, mask, np.array([[0, 1], [0, 2]]), {"R": 5.0})


def test_grid_csv_round_trip(tmp_path):
    p = tmp_path / "g.csv"
    cfg = {"solver": {"N": 3}}
    fio.write_grid_csv(p, small_grid(), cfg)
    x, y, sigma, flag, back = fio.read_grid_csv(p)
    assert back == cfg
    assert np.array_equal(sigma[~np.isnan(sigma)], [1.0, 2.0, 1.5])
    assert flag[1, 1] == fio.FLAG_MASKED and flag[0, 1] == fio.FLAG_NONCONVERGED
    assert "x,y,sigma,flag" in p.read_text().splitlines()


def test_colormap_endpoints():
    rgb = fio.colormap(np.array([0.0, 1.0, 0.5]), 0.0, 1.0)
    assert rgb.tolist() == [[0, 0, 255], [255, 0, 0], [255, 255, 255]]
    with pytest.raises(InvalidScaleError):
        fio.colormap(0.0, 1.0, 1.0)


def test_render_exact_pixels():
    # rows are stored bottom-up (y increasing) and drawn top-down
    values = np.array([[0.0, 2.0], [1.0, 0.0]])
    mask = np.array([[True, True], [True, False]])
    data = fio.render_image(values, 0.0, 2.0, mask)
    assert data.startswith(b"P6\n2 2\n255\n")
    px = fio.read_ppm(data)
    assert px[1, 0].tolist() == [0, 0, 255]
    assert px[1, 1].tolist() == [255, 0, 0]
    assert px[0, 0].tolist() == [255, 255, 255]
    assert px[0, 1].tolist() == [128, 128, 128]
    assert fio.render_image(values, 0.0, 2.0, mask) == data


def test_render_constant_grid():
    px = fio.read_ppm(fio.render_image(np.full((3, 4), 1.0), 0.0, 2.0))
    assert px.shape == (3, 4, 3)
    assert np.all(px == 255)


def test_render_rejects_nonfinite():
    with pytest.raises(InvalidScaleError):
        fio.render_image(np.array([[np.nan]]), 0, 1)


def test_config_merge_and_validation():
    cfg, problems = fio.merge_config(fio.DEFAULT_CONFIG, {"solver": {"N": 8, "bogus": 1},
                                                          "extra": 2})
    assert cfg["solver"]["N"] == 8
    assert sorted(problems) == ["unknown key 'extra'", "unknown key solver.bogus"]
    cfg["solver"].update(N=0, lattice=127, c=-1, route="sideways")
    cfg["map"] = {"kind": "mobius", "b": 1}
    found = fio.validate_config(cfg)
    assert len(found) == 5


def test_load_config_collects_all_problems(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"solver": {"N": -1, "kgrid": 0}, "output": {"lo": 2, "hi": 1}}))
    with pytest.raises(ConfigError) as e:
        fio.load_config(p)
    assert len(e.value.problems) == 3


def test_phantom_documents():
    for name, make in SHIPPED.items():
        ph = make()
        assert phantom_from_doc(phantom_to_doc(ph)) == ph, name
    with pytest.raises(ConfigError) as e:
        phantom_from_doc({"domain": "disk", "colour": 1,
                          "inclusions": [{"center": [0, 0], "radius": 0.1}]})
    assert len(e.value.problems) == 2
    with pytest.raises(ConfigError):
        phantom_from_doc({"inclusions": [{"center": [0.95, 0], "radius": 0.2, "sigma": 2}]})
    with pytest.raises(ConfigError):
        phantom_from_doc("no-such-phantom")
