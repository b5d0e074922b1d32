"""Output formats: error CSV, VTK structured points, Matrix Market,
kappa rasters, eigenvalue dumps and the run manifest.

All writers are deterministic — fixed float formatting, no timestamps —
so identical runs produce byte-identical artifacts.
"""

from __future__ import annotations

import io
import os

import numpy as np
import scipy.io
import scipy.sparse as sparse
import yaml

from .analysis import ErrorReport
from .grids import GridHierarchy

__all__ = ["write_error_csv", "write_solution_csv", "write_vtk",
           "write_matrix_market", "write_eigenvalue_csv", "write_manifest",
           "read_kappa_raster", "write_kappa_raster"]

CSV_HEADER = "dim,l2_fine_pct,h1_fine_pct,l2_snap_pct,h1_snap_pct"


def _fmt(v) -> str:
    return "" if v is None else f"{100.0 * v:.10g}"


def write_error_csv(path: str, reports: list[ErrorReport]) -> None:
    """The convergence-table CSV; one row per offline-space dimension."""
    lines = [CSV_HEADER]
    for r in reports:
        lines.append(",".join([
            str(r.dim_Voff), _fmt(r.rel_L2_vs_fine), _fmt(r.rel_energy_vs_fine),
            _fmt(r.rel_L2_vs_snap), _fmt(r.rel_energy_vs_snap)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_solution_csv(path: str, g: GridHierarchy, u: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,u\n")
        for (x, y), v in zip(g.node_coords, u):
            fh.write(f"{x:.10g},{y:.10g},{v:.12g}\n")


def write_vtk(path: str, g: GridHierarchy, u: np.ndarray,
              name: str = "pressure") -> None:
    """Legacy VTK structured-points file of a fine-nodal field."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != g.n_nodes:
        raise ValueError("field length does not match the fine grid")
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write("fine-grid nodal field\n")
    buf.write("ASCII\n")
    buf.write("DATASET STRUCTURED_POINTS\n")
    buf.write(f"DIMENSIONS {g.fine_nx + 1} {g.fine_ny + 1} 1\n")
    buf.write(f"ORIGIN {g.domain.x0:.10g} {g.domain.y0:.10g} 0\n")
    buf.write(f"SPACING {g.hx:.10g} {g.hy:.10g} 1\n")
    buf.write(f"POINT_DATA {g.n_nodes}\n")
    buf.write(f"SCALARS {name} double\n")
    buf.write("LOOKUP_TABLE default\n")
    for v in u:  # node order is already x-fastest, matching VTK
        buf.write(f"{v:.12g}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def write_matrix_market(path: str, A) -> None:
    scipy.io.mmwrite(path, sparse.coo_matrix(A))


def write_eigenvalue_csv(path: str, spaces) -> None:
    """Per-neighborhood eigenvalue dump: omega_id,k,lambda."""
    with open(path, "w") as fh:
        fh.write("omega_id,k,lambda\n")
        for sp in sorted(spaces, key=lambda s: s.omega_id):
            for k, lam in enumerate(sp.eigvals):
                fh.write(f"{sp.omega_id},{k + 1},{lam:.12g}\n")


def write_manifest(path: str, cfg_dict: dict, extras: dict | None = None) -> None:
    """Config echo plus versions and run metadata (no timestamps)."""
    import msfrac

    doc = {
        "config": cfg_dict,
        "versions": {
            "msfrac": msfrac.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extras:
        doc["run"] = extras
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True, default_flow_style=False)


def write_kappa_raster(path: str, nx: int, ny: int, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float).reshape(ny, nx)
    with open(path, "w") as fh:
        fh.write(f"{nx} {ny}\n")
        for row in values:
            fh.write(" ".join(f"{v:.10g}" for v in row) + "\n")


def read_kappa_raster(path: str, g: GridHierarchy) -> np.ndarray:
    """Per-cell permeability raster: header 'nx ny', then ny rows of nx
    values, row-major from the bottom row up (matching cell numbering)."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected 'nx ny' header")
        nx, ny = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=float, ndmin=2)
    if (nx, ny) != (g.fine_nx, g.fine_ny):
        raise ValueError(f"{path}: raster is {nx}x{ny}, grid needs "
                         f"{g.fine_nx}x{g.fine_ny}")
    if data.shape != (ny, nx):
        raise ValueError(f"{path}: expected {ny} rows of {nx} values, "
                         f"got {data.shape}")
    if np.any(data <= 0):
        raise ValueError(f"{path}: permeability values must be positive")
    return data.reshape(-1)
