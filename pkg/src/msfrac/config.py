"""Run configuration: YAML schema, strict validation, round-tripping.

Every block rejects unknown keys so typos fail loudly, and the parsed
config can be serialized back to an equivalent dict for the run
manifest (identical configs must re-parse to identical runs).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .adaptivity import AdaptConfig
from .fields import FIELD_GENERATORS

__all__ = ["ConfigError", "RunConfig", "GridConfig", "MatrixConfig",
           "FracturesConfig", "FractureSpec", "OfflineConfig",
           "OutputsConfig", "load_config", "parse_config", "config_to_dict"]


class ConfigError(ValueError):
    pass


def _check_keys(d: dict, allowed: set[str], ctx: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{ctx}: expected a mapping, got {type(d).__name__}")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{ctx}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _num(d, key, ctx, default=None, kind=float, positive=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{ctx}: missing required key {key!r}")
        return default
    try:
        v = kind(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{ctx}.{key}: expected {kind.__name__}, got {d[key]!r}")
    if positive and v <= 0:
        raise ConfigError(f"{ctx}.{key}: must be positive, got {v}")
    return v


@dataclass
class GridConfig:
    domain: tuple = (0.0, 0.0, 1.0, 1.0)
    coarse_nx: int = 10
    coarse_ny: int = 10
    refine: int = 10
    t: int = 0


@dataclass
class MatrixConfig:
    kappa: float = 1.0
    raster: str | None = None


@dataclass
class FractureSpec:
    polyline: list
    aperture: float
    kappa_f: float
    model: str = "dfm"


@dataclass
class FracturesConfig:
    field: str | None = None          # generator name
    seed: int = 0
    kappa_f: float | None = None
    aperture: float | None = None
    params: dict = None
    fractures: list[FractureSpec] = None

    def __post_init__(self):
        self.params = self.params or {}
        self.fractures = self.fractures or []


@dataclass
class OfflineConfig:
    mode: str = "full"                # "full" | "randomized"
    M_off: int = 1
    enrich_boundary: bool = False     # extra modes at boundary coarse nodes too
    k_nb: int = 4
    p_bf: int = 4
    seed: int = 0


@dataclass
class OutputsConfig:
    dir: str = "out"
    csv: str = "errors.csv"
    solution_csv: str | None = None
    vtk: str | None = None
    eigenvalues: str | None = None
    matrices: bool = False
    manifest: str = "manifest.yml"


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    matrix: MatrixConfig = field(default_factory=MatrixConfig)
    fractures: FracturesConfig = field(default_factory=FracturesConfig)
    bc: dict = field(default_factory=lambda: {"bilinear": [0.0, 1.0, 1.0, 0.0]})
    source: dict = field(default_factory=lambda: {"constant": 0.0})
    offline: OfflineConfig = field(default_factory=OfflineConfig)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    sweep: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])

    def bc_callable(self):
        from .assembly import bilinear_bc
        if "constant" in self.bc:
            return bilinear_bc(a=float(self.bc["constant"]))
        return bilinear_bc(*[float(v) for v in self.bc["bilinear"]])

    def source_callable(self):
        v = float(self.source.get("constant", 0.0))
        return None if v == 0.0 else v


def parse_config(data: dict) -> RunConfig:
    if data is None:
        data = {}
    _check_keys(data, {"grid", "matrix", "fractures", "bc", "source",
                       "offline", "adapt", "outputs", "sweep"}, "config")
    cfg = RunConfig()

    if "grid" in data:
        d = data["grid"]
        _check_keys(d, {"domain", "coarse", "refine", "t"}, "grid")
        dom = d.get("domain", [0.0, 0.0, 1.0, 1.0])
        if len(dom) != 4:
            raise ConfigError("grid.domain: expected [x0, y0, x1, y1]")
        coarse = d.get("coarse", [10, 10])
        if np.isscalar(coarse):
            coarse = [coarse, coarse]
        cfg.grid = GridConfig(domain=tuple(float(v) for v in dom),
                              coarse_nx=int(coarse[0]), coarse_ny=int(coarse[1]),
                              refine=_num(d, "refine", "grid", 10, int, True),
                              t=_num(d, "t", "grid", 0, int))

    if "matrix" in data:
        d = data["matrix"]
        _check_keys(d, {"kappa", "raster"}, "matrix")
        cfg.matrix = MatrixConfig(kappa=_num(d, "kappa", "matrix", 1.0, float, True),
                                  raster=d.get("raster"))

    if "fractures" in data:
        d = data["fractures"]
        _check_keys(d, {"field", "seed", "kappa_f", "aperture", "params", "list"},
                    "fractures")
        fc = FracturesConfig(
            field=d.get("field"),
            seed=_num(d, "seed", "fractures", 0, int),
            kappa_f=None if "kappa_f" not in d else _num(d, "kappa_f", "fractures",
                                                         None, float, True),
            aperture=None if "aperture" not in d else _num(d, "aperture", "fractures",
                                                           None, float, True),
            params=d.get("params") or {})
        if fc.field is not None and fc.field not in FIELD_GENERATORS:
            raise ConfigError(f"fractures.field: unknown generator {fc.field!r}; "
                              f"available: {sorted(FIELD_GENERATORS)}")
        for k, item in enumerate(d.get("list") or []):
            ctx = f"fractures.list[{k}]"
            _check_keys(item, {"polyline", "aperture", "kappa_f", "model"}, ctx)
            poly = item.get("polyline")
            if (not isinstance(poly, (list, tuple)) or len(poly) < 2
                    or any(len(p) != 2 for p in poly)):
                raise ConfigError(f"{ctx}.polyline: expected >= 2 [x, y] vertices")
            model = str(item.get("model", "dfm")).lower()
            if model not in ("dfm", "efm"):
                raise ConfigError(f"{ctx}.model: expected 'dfm' or 'efm', got {model!r}")
            fc.fractures.append(FractureSpec(
                polyline=[[float(x), float(y)] for x, y in poly],
                aperture=_num(item, "aperture", ctx, None, float, True),
                kappa_f=_num(item, "kappa_f", ctx, None, float, True),
                model=model))
        cfg.fractures = fc

    if "bc" in data:
        d = data["bc"]
        _check_keys(d, {"bilinear", "constant"}, "bc")
        if "bilinear" in d and "constant" in d:
            raise ConfigError("bc: give either 'bilinear' or 'constant', not both")
        if "bilinear" in d:
            if len(d["bilinear"]) != 4:
                raise ConfigError("bc.bilinear: expected [a, b, c, d] for a+bx+cy+dxy")
            cfg.bc = {"bilinear": [float(v) for v in d["bilinear"]]}
        else:
            cfg.bc = {"constant": float(d["constant"])}

    if "source" in data:
        d = data["source"]
        _check_keys(d, {"constant"}, "source")
        cfg.source = {"constant": float(d.get("constant", 0.0))}

    if "offline" in data:
        d = data["offline"]
        _check_keys(d, {"mode", "M_off", "enrich_boundary", "k_nb", "p_bf", "seed"},
                    "offline")
        mode = str(d.get("mode", "full")).lower()
        if mode not in ("full", "randomized"):
            raise ConfigError(f"offline.mode: expected 'full' or 'randomized', got {mode!r}")
        cfg.offline = OfflineConfig(
            mode=mode,
            M_off=_num(d, "M_off", "offline", 1, int, True),
            enrich_boundary=bool(d.get("enrich_boundary", False)),
            k_nb=_num(d, "k_nb", "offline", 4, int, True),
            p_bf=_num(d, "p_bf", "offline", 4, int),
            seed=_num(d, "seed", "offline", 0, int))

    if "adapt" in data:
        d = data["adapt"]
        _check_keys(d, {"theta", "max_iters", "basis_increment", "indicator",
                        "manual_box", "tol", "initial_basis"}, "adapt")
        box = d.get("manual_box")
        cfg.adapt = AdaptConfig(
            theta=_num(d, "theta", "adapt", 0.7, float),
            max_iters=_num(d, "max_iters", "adapt", 3, int),
            basis_increment=_num(d, "basis_increment", "adapt", 1, int),
            indicator=str(d.get("indicator", "residual")).lower(),
            manual_box=None if box is None else tuple(int(v) for v in box),
            tol=_num(d, "tol", "adapt", 0.0, float),
            initial_basis=_num(d, "initial_basis", "adapt", 1, int, True))

    if "outputs" in data:
        d = data["outputs"]
        _check_keys(d, {"dir", "csv", "solution_csv", "vtk", "eigenvalues",
                        "matrices", "manifest"}, "outputs")
        cfg.outputs = OutputsConfig(
            dir=str(d.get("dir", "out")),
            csv=str(d.get("csv", "errors.csv")),
            solution_csv=d.get("solution_csv"),
            vtk=d.get("vtk"),
            eigenvalues=d.get("eigenvalues"),
            matrices=bool(d.get("matrices", False)),
            manifest=str(d.get("manifest", "manifest.yml")))

    if "sweep" in data:
        if (not isinstance(data["sweep"], (list, tuple)) or not data["sweep"]
                or any(int(v) < 1 for v in data["sweep"])):
            raise ConfigError("sweep: expected a non-empty list of positive counts")
        cfg.sweep = [int(v) for v in data["sweep"]]

    return cfg


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-dict echo of the config; re-parses to an equivalent RunConfig."""
    out = {
        "grid": {"domain": list(cfg.grid.domain),
                 "coarse": [cfg.grid.coarse_nx, cfg.grid.coarse_ny],
                 "refine": cfg.grid.refine, "t": cfg.grid.t},
        "matrix": {"kappa": cfg.matrix.kappa},
        "bc": dict(cfg.bc),
        "source": dict(cfg.source),
        "offline": {"mode": cfg.offline.mode, "M_off": cfg.offline.M_off,
                    "enrich_boundary": cfg.offline.enrich_boundary,
                    "k_nb": cfg.offline.k_nb, "p_bf": cfg.offline.p_bf,
                    "seed": cfg.offline.seed},
        "adapt": {"theta": cfg.adapt.theta, "max_iters": cfg.adapt.max_iters,
                  "basis_increment": cfg.adapt.basis_increment,
                  "indicator": cfg.adapt.indicator, "tol": cfg.adapt.tol,
                  "initial_basis": cfg.adapt.initial_basis},
        "outputs": {k: v for k, v in asdict(cfg.outputs).items() if v is not None},
        "sweep": list(cfg.sweep),
    }
    if cfg.matrix.raster is not None:
        out["matrix"]["raster"] = cfg.matrix.raster
    if cfg.adapt.manual_box is not None:
        out["adapt"]["manual_box"] = list(cfg.adapt.manual_box)
    fr = {"seed": cfg.fractures.seed}
    if cfg.fractures.field is not None:
        fr["field"] = cfg.fractures.field
    if cfg.fractures.kappa_f is not None:
        fr["kappa_f"] = cfg.fractures.kappa_f
    if cfg.fractures.aperture is not None:
        fr["aperture"] = cfg.fractures.aperture
    if cfg.fractures.params:
        fr["params"] = dict(cfg.fractures.params)
    if cfg.fractures.fractures:
        fr["list"] = [{"polyline": [list(p) for p in fs.polyline],
                       "aperture": fs.aperture, "kappa_f": fs.kappa_f,
                       "model": fs.model} for fs in cfg.fractures.fractures]
    out["fractures"] = fr
    return out
