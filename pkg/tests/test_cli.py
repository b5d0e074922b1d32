"""End-to-end CLI runs on small grids: exit codes, outputs, determinism."""

import numpy as np
import pytest
import scipy.io
import yaml

from msfrac.cli import main

BASE = {
    "grid": {"coarse": [4, 4], "refine": 3},
    "matrix": {"kappa": 1.0},
    "bc": {"bilinear": [0.2, 1.0, -0.5, 0.3]},
    "offline": {"mode": "full", "M_off": 2},
    "sweep": [1, 2],
}


def write_cfg(tmp_path, name="run.yml", **overrides):
    data = {**{k: dict(v) if isinstance(v, dict) else list(v)
               for k, v in BASE.items()}, **overrides}
    data.setdefault("outputs", {})["dir"] = str(tmp_path / "out")
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p, tmp_path / "out"


def test_solve_without_fractures_is_exact(tmp_path, capsys):
    cfg, out = write_cfg(tmp_path)
    assert main(["solve", "-c", str(cfg)]) == 0
    # 9 interior nodes at 2 modes + 16 boundary nodes at 1
    assert "dim=34" in capsys.readouterr().out
    lines = (out / "errors.csv").read_text().splitlines()
    assert lines[0] == "dim,l2_fine_pct,h1_fine_pct,l2_snap_pct,h1_snap_pct"
    dim, l2, h1 = lines[1].split(",")[:3]
    # constant kappa + bilinear data: the first-mode space already
    # contains the fine solution, so the percentages are round-off
    assert int(dim) == 34
    assert float(l2) < 1e-8 and float(h1) < 1e-6
    doc = yaml.safe_load((out / "manifest.yml").read_text())
    assert doc["run"]["command"] == "solve"


def test_sweep_csv_monotone_and_rerun_identical(tmp_path):
    cfg, out = write_cfg(
        tmp_path,
        fractures={"field": "crossing_channels", "seed": 2,
                   "params": {"n": 5}},
        sweep=[1, 2, 3, 4, 5])
    assert main(["sweep", "-c", str(cfg)]) == 0
    first = (out / "errors.csv").read_bytes()
    lines = first.decode().splitlines()
    assert len(lines) == 6
    h1 = [float(l.split(",")[2]) for l in lines[1:]]
    assert h1 == sorted(h1, reverse=True)
    ls = [float(l.split(",")[3]) for l in lines[1:]]
    assert ls[-1] == 0.0  # largest space is its own snapshot reference

    assert main(["sweep", "-c", str(cfg)]) == 0
    assert (out / "errors.csv").read_bytes() == first


def test_malformed_fracture_polyline_exits_nonzero(tmp_path, capsys):
    cfg, _ = write_cfg(
        tmp_path,
        fractures={"list": [{"polyline": [[0.5, 0.5]],
                             "aperture": 1e-3, "kappa_f": 1e3}]})
    assert main(["solve", "-c", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "error:" in err and "list[0]" in err


def test_degenerate_fracture_names_its_id(tmp_path, capsys):
    cfg, _ = write_cfg(
        tmp_path,
        fractures={"list": [
            {"polyline": [[0.2, 0.2], [0.6, 0.4]],
             "aperture": 1e-3, "kappa_f": 1e3},
            {"polyline": [[0.3, 0.3], [0.3, 0.3]],
             "aperture": 1e-3, "kappa_f": 1e3}]})
    assert main(["solve", "-c", str(cfg)]) == 2
    assert "fracture 1" in capsys.readouterr().err


def test_missing_config_exits_nonzero(tmp_path, capsys):
    assert main(["solve", "-c", str(tmp_path / "nope.yml")]) == 2
    assert "error:" in capsys.readouterr().err


def test_seed_and_out_overrides(tmp_path):
    cfg, _ = write_cfg(tmp_path,
                       fractures={"field": "isolated_blocks", "seed": 1},
                       offline={"mode": "randomized", "M_off": 2,
                                "k_nb": 3, "p_bf": 2, "seed": 1})
    alt = tmp_path / "elsewhere"
    assert main(["solve", "-c", str(cfg), "--seed", "9",
                 "--out", str(alt)]) == 0
    doc = yaml.safe_load((alt / "manifest.yml").read_text())
    assert doc["run"]["seeds"] == {"fractures": 9, "offline": 9}
    assert doc["config"]["fractures"]["seed"] == 9


def test_adapt_trajectory_csv(tmp_path):
    cfg, out = write_cfg(
        tmp_path,
        fractures={"field": "crossing_channels", "seed": 2,
                   "params": {"n": 5}},
        adapt={"theta": 0.7, "max_iters": 2, "basis_increment": 1})
    assert main(["adapt", "-c", str(cfg)]) == 0
    lines = (out / "errors.csv").read_text().splitlines()
    assert lines[0] == "iteration,dim,l2_fine_pct,h1_fine_pct,marked"
    assert len(lines) == 4
    dims = [int(l.split(",")[1]) for l in lines[1:]]
    assert dims[0] == 25 and dims == sorted(dims)
    h1 = [float(l.split(",")[3]) for l in lines[1:]]
    assert h1 == sorted(h1, reverse=True)


def test_adapt_rejects_embedded_fractures(tmp_path, capsys):
    cfg, _ = write_cfg(
        tmp_path,
        fractures={"list": [{"polyline": [[0.2, 0.5], [0.8, 0.6]],
                             "aperture": 1e-3, "kappa_f": 50.0,
                             "model": "efm"}]})
    assert main(["adapt", "-c", str(cfg)]) == 2
    assert "monolithic" in capsys.readouterr().err


def test_export_matrices_files_load(tmp_path, capsys):
    cfg, out = write_cfg(
        tmp_path,
        fractures={"list": [{"polyline": [[0.2, 0.5], [0.8, 0.6]],
                             "aperture": 1e-3, "kappa_f": 50.0,
                             "model": "efm"}]})
    assert main(["export-matrices", "-c", str(cfg)]) == 0
    printed = capsys.readouterr().out.splitlines()
    names = {p.rsplit("/", 1)[-1] for p in printed}
    assert {"A.mtx", "S.mtx", "A0.mtx", "R0T.mtx",
            "A_m.mtx", "B_0.mtx", "B_mf_0.mtx"} <= names
    A0 = scipy.io.mmread(str(out / "A0.mtx")).tocsr()
    assert A0.shape[0] == A0.shape[1] == 34
    asym = np.abs(A0 - A0.T).max()
    assert asym <= 1e-12 * np.abs(A0).max()


def test_raster_field_through_cli(tmp_path):
    from msfrac import io_formats
    import msfrac as mf

    g = mf.build_hierarchy(mf.UNIT_SQUARE, 4, 4, 3, t=0)
    rng = np.random.default_rng(4)
    raster = tmp_path / "kappa.txt"
    io_formats.write_kappa_raster(str(raster), g.fine_nx, g.fine_ny,
                                  rng.uniform(0.5, 5.0, g.n_cells))
    cfg, out = write_cfg(tmp_path, matrix={"kappa": 1.0,
                                           "raster": str(raster)})
    assert main(["solve", "-c", str(cfg)]) == 0
    row = (out / "errors.csv").read_text().splitlines()[1]
    assert float(row.split(",")[2]) > 1e-6  # heterogeneity makes it inexact
