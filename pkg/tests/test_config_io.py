"""Config parsing/round-tripping and the on-disk output formats."""

import numpy as np
import pytest
import scipy.io
import yaml

import msfrac as mf
from msfrac import io_formats
from msfrac.analysis import ErrorReport
from msfrac.config import (ConfigError, config_to_dict, load_config,
                           parse_config)

FULL_CONFIG = {
    "grid": {"domain": [0.0, 0.0, 2.0, 1.0], "coarse": [6, 4],
             "refine": 3, "t": 1},
    "matrix": {"kappa": 2.5, "raster": "kappa.txt"},
    "fractures": {"field": "crossing_channels", "seed": 7, "kappa_f": 500.0,
                  "aperture": 0.002, "params": {"n": 4},
                  "list": [{"polyline": [[0.1, 0.2], [0.5, 0.6], [0.9, 0.3]],
                            "aperture": 0.001, "kappa_f": 1000.0,
                            "model": "efm"}]},
    "bc": {"bilinear": [0.5, 1.0, -0.25, 0.0]},
    "source": {"constant": 1.5},
    "offline": {"mode": "randomized", "M_off": 3, "k_nb": 5, "p_bf": 2,
                "seed": 11, "enrich_boundary": True},
    "adapt": {"theta": 0.6, "max_iters": 2, "basis_increment": 2,
              "indicator": "manual", "manual_box": [1, 3, 1, 2]},
    "outputs": {"dir": "run1", "csv": "e.csv", "vtk": "u.vtk",
                "matrices": True},
    "sweep": [1, 3, 5],
}


def test_config_roundtrip_through_dict():
    cfg = parse_config(FULL_CONFIG)
    echo = config_to_dict(cfg)
    cfg2 = parse_config(echo)
    assert config_to_dict(cfg2) == echo
    assert cfg2 == cfg


def test_config_defaults():
    cfg = parse_config({})
    assert (cfg.grid.coarse_nx, cfg.grid.coarse_ny, cfg.grid.refine) == (10, 10, 10)
    assert cfg.matrix.kappa == 1.0
    assert cfg.offline.mode == "full"
    assert cfg.sweep == [1, 2, 3, 4, 5]
    assert parse_config(None) == cfg


@pytest.mark.parametrize("data,frag", [
    ({"gird": {}}, "gird"),
    ({"grid": {"coarse": [4, 4], "refinement": 3}}, "refinement"),
    ({"matrix": {"kappa": 1.0, "perm": 2}}, "perm"),
    ({"fractures": {"feild": "x"}}, "feild"),
    ({"offline": {"mode": "full", "oversampling": 2}}, "oversampling"),
    ({"outputs": {"folder": "x"}}, "folder"),
])
def test_unknown_keys_rejected(data, frag):
    with pytest.raises(ConfigError, match=frag):
        parse_config(data)


@pytest.mark.parametrize("data,frag", [
    ({"grid": {"domain": [0, 0, 1]}}, "domain"),
    ({"grid": {"refine": 0}}, "positive"),
    ({"matrix": {"kappa": -2.0}}, "positive"),
    ({"fractures": {"field": "percolating_maze"}}, "percolating_maze"),
    ({"fractures": {"list": [{"polyline": [[0.1, 0.1]],
                              "aperture": 1e-3, "kappa_f": 1e3}]}},
     r"list\[0\]"),
    ({"fractures": {"list": [{"polyline": [[0, 0], [1, 1]],
                              "aperture": 1e-3, "kappa_f": 1e3,
                              "model": "xfem"}]}}, "xfem"),
    ({"bc": {"bilinear": [0, 1, 1, 0], "constant": 2.0}}, "not both"),
    ({"bc": {"bilinear": [1, 2]}}, "bilinear"),
    ({"offline": {"mode": "greedy"}}, "greedy"),
    ({"sweep": []}, "sweep"),
    ({"sweep": [2, 0]}, "sweep"),
])
def test_invalid_values_rejected(data, frag):
    with pytest.raises(ConfigError, match=frag):
        parse_config(data)


def test_load_config_reports_yaml_errors(tmp_path):
    p = tmp_path / "bad.yml"
    p.write_text("grid: [unclosed\n")
    with pytest.raises(ConfigError, match="bad.yml"):
        load_config(str(p))
    p2 = tmp_path / "ok.yml"
    p2.write_text(yaml.safe_dump(FULL_CONFIG))
    assert load_config(str(p2)) == parse_config(FULL_CONFIG)


def test_error_csv_exact_header_and_blank_optionals(tmp_path):
    path = tmp_path / "errors.csv"
    reports = [ErrorReport(dim_Voff=121, rel_L2_vs_fine=0.012,
                           rel_energy_vs_fine=0.0733,
                           rel_L2_vs_snap=0.001, rel_energy_vs_snap=0.02),
               ErrorReport(dim_Voff=202, rel_L2_vs_fine=0.004,
                           rel_energy_vs_fine=0.0401)]
    io_formats.write_error_csv(str(path), reports)
    lines = path.read_text().splitlines()
    assert lines[0] == "dim,l2_fine_pct,h1_fine_pct,l2_snap_pct,h1_snap_pct"
    assert lines[1] == "121,1.2,7.33,0.1,2"
    assert lines[2] == "202,0.4,4.01,,"
    assert len(lines) == 3


def test_vtk_structured_points_layout(tmp_path):
    g = mf.build_hierarchy(mf.UNIT_SQUARE, 2, 2, 2, t=0)
    u = np.arange(g.n_nodes, dtype=float)
    path = tmp_path / "u.vtk"
    io_formats.write_vtk(str(path), g, u, name="pressure")
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET STRUCTURED_POINTS"
    assert lines[4] == "DIMENSIONS 5 5 1"
    assert lines[5] == "ORIGIN 0 0 0"
    assert lines[6] == "SPACING 0.25 0.25 1"
    assert lines[7] == "POINT_DATA 25"
    assert lines[8] == "SCALARS pressure double"
    assert lines[9] == "LOOKUP_TABLE default"
    vals = np.array([float(v) for v in lines[10:]])
    np.testing.assert_array_equal(vals, u)
    with pytest.raises(ValueError, match="fine grid"):
        io_formats.write_vtk(str(path), g, u[:-1])


def test_kappa_raster_roundtrip(tmp_path):
    g = mf.build_hierarchy(mf.UNIT_SQUARE, 2, 2, 3, t=0)
    rng = np.random.default_rng(0)
    kap = rng.uniform(0.1, 9.0, g.fine_nx * g.fine_ny)
    path = tmp_path / "kappa.txt"
    io_formats.write_kappa_raster(str(path), g.fine_nx, g.fine_ny, kap)
    back = io_formats.read_kappa_raster(str(path), g)
    np.testing.assert_allclose(back, kap, rtol=1e-9)

    g_big = mf.build_hierarchy(mf.UNIT_SQUARE, 2, 2, 4, t=0)
    with pytest.raises(ValueError, match="raster is"):
        io_formats.read_kappa_raster(str(path), g_big)
    bad = tmp_path / "neg.txt"
    io_formats.write_kappa_raster(str(bad), g.fine_nx, g.fine_ny,
                                  np.full(g.fine_nx * g.fine_ny, -1.0))
    with pytest.raises(ValueError, match="positive"):
        io_formats.read_kappa_raster(str(bad), g)
    with pytest.raises(FileNotFoundError):
        io_formats.read_kappa_raster(str(tmp_path / "nope.txt"), g)


def test_matrix_market_roundtrip(tmp_path):
    g = mf.build_hierarchy(mf.UNIT_SQUARE, 2, 2, 2, t=0)
    perm = mf.PermeabilityField.constant(g, 3.0)
    sys = mf.assemble_dfm(g, perm, [])
    path = tmp_path / "A.mtx"
    io_formats.write_matrix_market(str(path), sys.A)
    back = scipy.io.mmread(str(path)).tocsr()
    assert np.abs(back - sys.A).max() < 1e-12


def test_eigenvalue_csv_rows(tmp_path):
    g = mf.build_hierarchy(mf.UNIT_SQUARE, 2, 2, 2, t=0)
    perm = mf.PermeabilityField.constant(g, 1.0)
    sys = mf.assemble_dfm(g, perm, [])
    pou = mf.compute_pou(g, sys)
    spaces = []
    for nb in g.neighborhoods:
        snap = mf.full_snapshots(g, sys, nb.index)
        spaces.append(mf.offline_eigendecomposition(snap, sys, pou, M_off=1))
    path = tmp_path / "eig.csv"
    io_formats.write_eigenvalue_csv(str(path), spaces)
    lines = path.read_text().splitlines()
    assert lines[0] == "omega_id,k,lambda"
    assert len(lines) == 1 + sum(sp.l_i for sp in spaces)
    ids = [int(l.split(",")[0]) for l in lines[1:]]
    assert ids == sorted(ids)


def test_manifest_echo_reparses(tmp_path):
    cfg = parse_config(FULL_CONFIG)
    path = tmp_path / "manifest.yml"
    io_formats.write_manifest(str(path), config_to_dict(cfg),
                              extras={"command": "solve", "dim": 121})
    doc = yaml.safe_load(path.read_text())
    assert parse_config(doc["config"]) == cfg
    assert set(doc["versions"]) == {"msfrac", "numpy", "scipy"}
    assert doc["run"]["dim"] == 121
    # no timestamps or other run-to-run noise
    io_formats.write_manifest(str(tmp_path / "m2.yml"), config_to_dict(cfg),
                              extras={"command": "solve", "dim": 121})
    assert (tmp_path / "m2.yml").read_bytes() == path.read_bytes()


def test_solution_csv(tmp_path):
    g = mf.build_hierarchy(mf.UNIT_SQUARE, 2, 2, 2, t=0)
    u = np.linspace(0.0, 1.0, g.n_nodes)
    path = tmp_path / "u.csv"
    io_formats.write_solution_csv(str(path), g, u)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,u"
    assert len(lines) == 1 + g.n_nodes
    x, y, v = (float(s) for s in lines[1].split(","))
    assert (x, y, v) == (0.0, 0.0, 0.0)
