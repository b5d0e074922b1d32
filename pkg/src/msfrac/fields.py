"""Seeded synthetic fracture fields for experiments and regression tests.

The generators below produce qualitatively different network types:
isolated per-block fractures, channels crossing coarse edges, crossing
networks, short/long mixtures, a single long embedded fracture, and a
curved long fracture.  Exact published geometries are figure-only, so
these are reproducible stand-ins, not reconstructions.

Defaults: fracture permeability 1e4 (contrast 1e4 over a unit matrix)
and aperture 1e-3 of the smaller domain side.
"""

from __future__ import annotations

import numpy as np

from .grids import GridHierarchy
from .fractures import Fracture, FractureModel, FractureNetwork

__all__ = ["isolated_blocks", "crossing_channels", "crossing_network",
           "mixed_short_long", "single_long_efm", "curved_long",
           "FIELD_GENERATORS", "default_aperture", "DEFAULT_KAPPA_F"]

DEFAULT_KAPPA_F = 1e4


def default_aperture(g: GridHierarchy) -> float:
    return 1e-3 * min(g.domain.width, g.domain.height)


def _params(g, kappa_f, aperture):
    return (DEFAULT_KAPPA_F if kappa_f is None else float(kappa_f),
            default_aperture(g) if aperture is None else float(aperture))


def _clamped_segment(center, ang, half_len, lo, hi, min_len):
    """Segment center +- half_len*dir shrunk to stay inside [lo, hi]."""
    d = np.array([np.cos(ang), np.sin(ang)])
    t = half_len
    for k in range(2):
        if d[k] > 1e-14:
            t = min(t, (hi[k] - center[k]) / d[k], (center[k] - lo[k]) / d[k])
        elif d[k] < -1e-14:
            t = min(t, (center[k] - lo[k]) / -d[k], (hi[k] - center[k]) / -d[k])
    if 2 * t < min_len:
        return None
    return np.array([center - t * d, center + t * d])


def isolated_blocks(g: GridHierarchy, seed: int = 0, kappa_f=None,
                    aperture=None, fill: float = 0.7) -> FractureNetwork:
    """At most one short fracture per coarse block, none touching the
    block edges (so no fracture crosses a coarse edge after snapping)."""
    kf, ap = _params(g, kappa_f, aperture)
    rng = np.random.default_rng(seed)
    margin = 2.5 * max(g.hx, g.hy)
    fractures = []
    for J in range(g.coarse_ny):
        for I in range(g.coarse_nx):
            if rng.random() > fill:
                continue
            lo = np.array([g.domain.x0 + I * g.Hx + margin,
                           g.domain.y0 + J * g.Hy + margin])
            hi = np.array([g.domain.x0 + (I + 1) * g.Hx - margin,
                           g.domain.y0 + (J + 1) * g.Hy - margin])
            if np.any(hi <= lo):
                continue
            center = lo + rng.uniform(0.3, 0.7, 2) * (hi - lo)
            ang = rng.uniform(0.0, np.pi)
            half = rng.uniform(0.18, 0.32) * min(g.Hx, g.Hy)
            seg = _clamped_segment(center, ang, half, lo, hi,
                                   min_len=3 * max(g.hx, g.hy))
            if seg is None:
                continue
            fractures.append(Fracture(polyline=seg, aperture=ap, kappa_f=kf,
                                      model=FractureModel.DFM,
                                      id=len(fractures)))
    return FractureNetwork(fractures)


def crossing_channels(g: GridHierarchy, seed: int = 0, n: int = 10,
                      kappa_f=None, aperture=None) -> FractureNetwork:
    """Medium-length channels at random angles, crossing coarse edges."""
    kf, ap = _params(g, kappa_f, aperture)
    rng = np.random.default_rng(seed)
    margin = 2.5 * max(g.hx, g.hy)
    lo = np.array([g.domain.x0 + margin, g.domain.y0 + margin])
    hi = np.array([g.domain.x1 - margin, g.domain.y1 - margin])
    fractures = []
    guard = 0
    while len(fractures) < n and guard < 20 * n:
        guard += 1
        center = lo + rng.uniform(0.1, 0.9, 2) * (hi - lo)
        ang = rng.uniform(0.0, np.pi)
        half = rng.uniform(0.8, 1.3) * min(g.Hx, g.Hy)
        seg = _clamped_segment(center, ang, half, lo, hi,
                               min_len=1.2 * min(g.Hx, g.Hy))
        if seg is None:
            continue
        fractures.append(Fracture(polyline=seg, aperture=ap, kappa_f=kf,
                                  model=FractureModel.DFM, id=len(fractures)))
    return FractureNetwork(fractures)


def crossing_network(g: GridHierarchy, seed: int = 0, n_pairs: int = 5,
                     n_single: int = 4, kappa_f=None,
                     aperture=None) -> FractureNetwork:
    """Pairs of fractures sharing a center at a wide angle (guaranteed
    crossings) plus a few singles."""
    kf, ap = _params(g, kappa_f, aperture)
    rng = np.random.default_rng(seed)
    margin = 2.5 * max(g.hx, g.hy)
    lo = np.array([g.domain.x0 + margin, g.domain.y0 + margin])
    hi = np.array([g.domain.x1 - margin, g.domain.y1 - margin])
    fractures = []

    def add(center, ang, half):
        seg = _clamped_segment(center, ang, half, lo, hi,
                               min_len=0.8 * min(g.Hx, g.Hy))
        if seg is not None:
            fractures.append(Fracture(polyline=seg, aperture=ap, kappa_f=kf,
                                      model=FractureModel.DFM,
                                      id=len(fractures)))

    for _ in range(n_pairs):
        center = lo + rng.uniform(0.15, 0.85, 2) * (hi - lo)
        ang = rng.uniform(0.0, np.pi)
        dang = rng.uniform(np.pi / 3, 2 * np.pi / 3)
        add(center, ang, rng.uniform(0.6, 1.1) * min(g.Hx, g.Hy))
        add(center, ang + dang, rng.uniform(0.6, 1.1) * min(g.Hx, g.Hy))
    for _ in range(n_single):
        center = lo + rng.uniform(0.1, 0.9, 2) * (hi - lo)
        add(center, rng.uniform(0.0, np.pi),
            rng.uniform(0.5, 0.9) * min(g.Hx, g.Hy))
    return FractureNetwork(fractures)


def mixed_short_long(g: GridHierarchy, seed: int = 0, n_short: int = 12,
                     kappa_f=None, aperture=None) -> FractureNetwork:
    """A couple of domain-spanning polylines plus many short fractures."""
    kf, ap = _params(g, kappa_f, aperture)
    rng = np.random.default_rng(seed)
    margin = 2.5 * max(g.hx, g.hy)
    w, h = g.domain.width, g.domain.height
    x0, y0 = g.domain.x0, g.domain.y0
    fractures = []
    for ylev in (rng.uniform(0.3, 0.45), rng.uniform(0.55, 0.7)):
        xs = x0 + np.array([0.05, 0.35, 0.65, 0.95]) * w
        ys = y0 + (ylev + rng.uniform(-0.08, 0.08, 4)) * h
        ys = np.clip(ys, y0 + margin, y0 + h - margin)
        fractures.append(Fracture(polyline=np.column_stack([xs, ys]),
                                  aperture=ap, kappa_f=kf,
                                  model=FractureModel.DFM, id=len(fractures)))
    lo = np.array([x0 + margin, y0 + margin])
    hi = np.array([x0 + w - margin, y0 + h - margin])
    guard = 0
    while sum(1 for f in fractures) < 2 + n_short and guard < 20 * n_short:
        guard += 1
        center = lo + rng.uniform(0.05, 0.95, 2) * (hi - lo)
        seg = _clamped_segment(center, rng.uniform(0.0, np.pi),
                               rng.uniform(0.25, 0.5) * min(g.Hx, g.Hy),
                               lo, hi, min_len=3 * max(g.hx, g.hy))
        if seg is None:
            continue
        fractures.append(Fracture(polyline=seg, aperture=ap, kappa_f=kf,
                                  model=FractureModel.DFM, id=len(fractures)))
    return FractureNetwork(fractures)


def single_long_efm(g: GridHierarchy, seed: int = 0, kappa_f: float = 10.0,
                    aperture=None) -> FractureNetwork:
    """One long straight embedded fracture, slightly inclined.

    The embedded model targets the smaller, mildly conductive fractures
    (the dominant ones belong in the discrete model), so the default
    contrast here is modest compared to the DFM generators.
    """
    kf, ap = _params(g, kappa_f, aperture)
    rng = np.random.default_rng(seed)
    w, h = g.domain.width, g.domain.height
    jit = rng.uniform(-0.02, 0.02, 2)
    p0 = (g.domain.x0 + 0.08 * w, g.domain.y0 + (0.38 + jit[0]) * h)
    p1 = (g.domain.x0 + 0.92 * w, g.domain.y0 + (0.61 + jit[1]) * h)
    return FractureNetwork([Fracture(polyline=np.array([p0, p1]),
                                     aperture=ap, kappa_f=kf,
                                     model=FractureModel.EFM, id=0)])


def curved_long(g: GridHierarchy, seed: int = 0, n_short: int = 8,
                n_arc: int = 24, kappa_f=None, aperture=None) -> FractureNetwork:
    """A long curved fracture (circular-arc polyline) plus short ones."""
    kf, ap = _params(g, kappa_f, aperture)
    rng = np.random.default_rng(seed)
    w, h = g.domain.width, g.domain.height
    x0, y0 = g.domain.x0, g.domain.y0
    cx = x0 + 0.5 * w
    cy = y0 - 0.35 * h
    rad = 0.85 * h
    th = np.linspace(np.radians(55), np.radians(125), n_arc)[::-1]
    arc = np.column_stack([cx + rad * np.cos(th) * (w / h),
                           cy + rad * np.sin(th)])
    margin = 2.5 * max(g.hx, g.hy)
    arc[:, 0] = np.clip(arc[:, 0], x0 + margin, x0 + w - margin)
    arc[:, 1] = np.clip(arc[:, 1], y0 + margin, y0 + h - margin)
    # clipping can fold consecutive points onto the same box corner
    keep = np.r_[True, np.any(np.diff(arc, axis=0) != 0.0, axis=1)]
    arc = arc[keep]
    fractures = []
    if len(arc) >= 2:
        fractures.append(Fracture(polyline=arc, aperture=ap, kappa_f=kf,
                                  model=FractureModel.DFM, id=0))
    lo = np.array([x0 + margin, y0 + margin])
    hi = np.array([x0 + w - margin, y0 + h - margin])
    guard = 0
    while len(fractures) < 1 + n_short and guard < 20 * n_short:
        guard += 1
        center = lo + rng.uniform(0.05, 0.95, 2) * (hi - lo)
        seg = _clamped_segment(center, rng.uniform(0.0, np.pi),
                               rng.uniform(0.25, 0.5) * min(g.Hx, g.Hy),
                               lo, hi, min_len=3 * max(g.hx, g.hy))
        if seg is None:
            continue
        fractures.append(Fracture(polyline=seg, aperture=ap, kappa_f=kf,
                                  model=FractureModel.DFM, id=len(fractures)))
    return FractureNetwork(fractures)


FIELD_GENERATORS = {
    "isolated_blocks": isolated_blocks,
    "crossing_channels": crossing_channels,
    "crossing_network": crossing_network,
    "mixed_short_long": mixed_short_long,
    "single_long_efm": single_long_efm,
    "curved_long": curved_long,
}
