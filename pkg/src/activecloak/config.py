"""Run configuration: YAML file with nested blocks.

Every block is optional.  Missing keys fall back to the baseline problem (circular antenna of radius
0.01, sector 0.011 <= r <= 0.015 over [3pi/4, 5pi/4], R = 10, 256 samples
per boundary, k = 10, distant point source, delta = 0.02, epsilon = 0.005).
A ``geometry`` block, when given, must list all six keys.  Angles may be
written as arithmetic in ``pi``, e.g. ``3*pi/4``.
"""

import ast
import json
import math
import operator as _op
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml

from .experiments import AXES, Setup
from .fields import NOISE_MODELS
from .geometry import Geometry, GeometryError
from .regularize import WEIGHTINGS

FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


_BINOPS = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul, ast.Div: _op.truediv, ast.Pow: _op.pow}


def _eval_expr(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_expr(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_expr(node.left), _eval_expr(node.right))
    raise ValueError("unsupported expression")


def _number(value, path, positive=False, integer=False):
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if isinstance(value, str):
        try:
            value = _eval_expr(ast.parse(value, mode="eval").body)
        except (SyntaxError, ValueError, ZeroDivisionError):
            raise ConfigError(path, f"cannot parse {value!r} as a number") from None
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    if integer:
        if float(value) != int(value):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        value = int(value)
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    return value


def _grid(spec, path) -> Tuple[float, ...]:
    """A grid is a list of numbers or ``{spacing: log|linear, start, stop, num}``."""
    if isinstance(spec, list):
        if not spec:
            raise ConfigError(path, "grid is empty")
        return tuple(float(_number(v, f"{path}[{i}]")) for i, v in enumerate(spec))
    if not isinstance(spec, dict):
        raise ConfigError(path, "grid must be a list or a {spacing, start, stop, num} block")
    _check_keys(spec, {"spacing", "start", "stop", "num"}, path)
    for key in ("start", "stop", "num"):
        if key not in spec:
            raise ConfigError(f"{path}.{key}", "missing key")
    spacing = spec.get("spacing", "log")
    start = _number(spec["start"], f"{path}.start")
    stop = _number(spec["stop"], f"{path}.stop")
    num = _number(spec["num"], f"{path}.num", positive=True, integer=True)
    if spacing == "log":
        if not (start > 0 and stop > 0):
            raise ConfigError(path, "log grid needs positive endpoints")
        values = np.logspace(math.log10(start), math.log10(stop), num)
    elif spacing == "linear":
        values = np.linspace(start, stop, num)
    else:
        raise ConfigError(f"{path}.spacing", f"expected log or linear, got {spacing!r}")
    return tuple(float(v) for v in values)


DEFAULT_GRIDS = {
    "k": {"spacing": "log", "start": 0.1, "stop": 100, "num": 30},
    "d": {"spacing": "log", "start": 0.001, "stop": 0.03, "num": 20},
    "epsilon": {"spacing": "log", "start": 0.0005, "stop": 0.015, "num": 15},
    "R": {"spacing": "linear", "start": 2, "stop": 20, "num": 10},
}


def _check_keys(block, allowed, path):
    if not isinstance(block, dict):
        raise ConfigError(path, f"expected a mapping, got {type(block).__name__}")
    for key in block:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, f"unknown key (allowed: {sorted(allowed)})")


@dataclass
class SweepBlock:
    axis1: str = "k"
    grid1: Tuple[float, ...] = ()
    axis2: str = "d"
    grid2: Tuple[float, ...] = ()


@dataclass
class SvdBlock:
    d_grid: Tuple[float, ...] = (0.001, 0.002, 0.005, 0.01, 0.02)
    k_grid: Tuple[float, ...] = tuple(float(v) for v in np.logspace(-1, 2, 10))
    count: int = 50


@dataclass
class PkBlock:
    k_grid: Tuple[float, ...] = tuple(float(k) for k in range(1, 100, 5))
    epsilon: Optional[float] = None
    alpha_window: Tuple[float, float] = (1e-9, 1.0)
    per_decade: int = 200


@dataclass
class FieldmapBlock:
    extent: Tuple[float, float, float, float] = (-0.03, 0.03, -0.03, 0.03)
    resolution: Tuple[int, int] = (121, 121)
    density: str = "morozov"
    exclusion: float = 1e-3


@dataclass
class RunConfig:
    setup: Setup = field(default_factory=Setup)
    sweep: Optional[SweepBlock] = None
    svd: SvdBlock = field(default_factory=SvdBlock)
    pkscan: PkBlock = field(default_factory=PkBlock)
    fieldmap: FieldmapBlock = field(default_factory=FieldmapBlock)
    output_dir: str = "out"
    formats: Tuple[str, ...] = ("csv", "json")

    def resolved(self) -> Dict[str, Any]:
        """Plain-data echo of every effective value, for output headers.

        The output block (directory and formats) is left out: it does not
        change any computed value, and leaving it out keeps tables written
        to different places byte-identical.
        """
        s = self.setup
        data = {
            "geometry": asdict(s.geometry),
            "discretization": {"n_a": s.n_a, "n_arc1": s.n_arc1, "n_R": s.n_R},
            "physics": {"k": s.k, "source": "point_source", "x0": list(s.source)},
            "regularization": {
                "delta": s.delta,
                "alpha_window": list(s.window),
                "newton_tol": s.tol,
                "newton_max_iter": s.max_iter,
                "weighting": s.weighting,
            },
            "noise": {"epsilon": s.epsilon, "seed": s.seed, "model": s.noise_model},
            "svd": _plain(asdict(self.svd)),
            "pkscan": _plain(asdict(self.pkscan)),
            "fieldmap": _plain(asdict(self.fieldmap)),
        }
        if self.sweep is not None:
            data["sweep"] = _plain(asdict(self.sweep))
        return data

    def to_json(self) -> str:
        return json.dumps(self.resolved(), sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


TOP_KEYS = {"geometry", "discretization", "physics", "regularization", "noise", "sweep", "svd",
            "pkscan", "fieldmap", "output"}


def parse_config(data: Optional[Dict[str, Any]]) -> RunConfig:
    """Validate a decoded config mapping and build a :class:`RunConfig`."""
    data = {} if data is None else data
    _check_keys(data, TOP_KEYS, "")

    geometry_keys = ("a", "r1", "r2", "theta1", "theta2", "R")
    if "geometry" in data:
        # a partial geometry is ambiguous (the radii must stay ordered), so a
        # block that is present has to be complete
        g = data["geometry"] or {}
        _check_keys(g, set(geometry_keys), "geometry")
        for key in geometry_keys:
            if key not in g:
                raise ConfigError(f"geometry.{key}", "missing key")
        gvals = {key: _number(g[key], f"geometry.{key}") for key in geometry_keys}
    else:
        base = Geometry()
        gvals = {key: getattr(base, key) for key in geometry_keys}
    try:
        geometry = Geometry(**gvals)
    except GeometryError as exc:
        raise ConfigError("geometry", str(exc)) from None

    disc = data.get("discretization", {}) or {}
    _check_keys(disc, {"n_a", "n_arc1", "n_R"}, "discretization")
    counts = {key: _number(disc.get(key, 256), f"discretization.{key}", positive=True, integer=True)
              for key in ("n_a", "n_arc1", "n_R")}
    if counts["n_a"] & (counts["n_a"] - 1) or counts["n_a"] < 8:
        raise ConfigError("discretization.n_a", f"must be a power of two >= 8, got {counts['n_a']}")
    for key in ("n_arc1", "n_R"):
        if counts[key] < 8:
            raise ConfigError(f"discretization.{key}", f"must be >= 8, got {counts[key]}")

    phys = data.get("physics", {}) or {}
    _check_keys(phys, {"k", "source", "x0"}, "physics")
    k = _number(phys.get("k", 10.0), "physics.k", positive=True)
    if phys.get("source", "point_source") != "point_source":
        raise ConfigError("physics.source", f"only point_source is supported, got {phys['source']!r}")
    x0 = phys.get("x0", [10000.0, 0.0])
    if not isinstance(x0, list) or len(x0) != 2:
        raise ConfigError("physics.x0", "expected a list of two numbers")
    x0 = tuple(float(_number(v, f"physics.x0[{i}]")) for i, v in enumerate(x0))

    reg = data.get("regularization", {}) or {}
    _check_keys(reg, {"delta", "alpha_window", "newton_tol", "newton_max_iter", "weighting"}, "regularization")
    delta = _number(reg.get("delta", 0.02), "regularization.delta", positive=True)
    if not delta < 1:
        raise ConfigError("regularization.delta", f"must lie in (0, 1), got {delta}")
    window = reg.get("alpha_window", [1e-8, 1.0])
    if not isinstance(window, list) or len(window) != 2:
        raise ConfigError("regularization.alpha_window", "expected [low, high]")
    window = tuple(float(_number(v, f"regularization.alpha_window[{i}]", positive=True)) for i, v in enumerate(window))
    if not window[0] < window[1]:
        raise ConfigError("regularization.alpha_window", "low must be below high")
    tol = _number(reg.get("newton_tol", 1e-8), "regularization.newton_tol", positive=True)
    max_iter = _number(reg.get("newton_max_iter", 50), "regularization.newton_max_iter", positive=True, integer=True)
    weighting = reg.get("weighting", "euclidean")
    if weighting not in WEIGHTINGS:
        raise ConfigError("regularization.weighting", f"expected one of {WEIGHTINGS}, got {weighting!r}")

    noise = data.get("noise", {}) or {}
    _check_keys(noise, {"epsilon", "seed", "model"}, "noise")
    eps = _number(noise.get("epsilon", 0.005), "noise.epsilon")
    if eps < 0:
        raise ConfigError("noise.epsilon", "must be non-negative")
    seed = _number(noise.get("seed", 0), "noise.seed", integer=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("noise.seed", "must be an unsigned 64-bit integer")
    model = noise.get("model", "standard")
    if model not in NOISE_MODELS:
        raise ConfigError("noise.model", f"expected one of {NOISE_MODELS}, got {model!r}")

    setup = Setup(
        geometry=geometry, k=float(k), source=x0, delta=float(delta), epsilon=float(eps),
        seed=int(seed), noise_model=model, window=window, tol=float(tol), max_iter=max_iter,
        weighting=weighting, **counts,
    )
    cfg = RunConfig(setup=setup)

    if "sweep" in data:
        sw = data["sweep"] or {}
        _check_keys(sw, {"axis1", "grid1", "axis2", "grid2"}, "sweep")
        a1, a2 = sw.get("axis1", "k"), sw.get("axis2", "d")
        for key, name in (("axis1", a1), ("axis2", a2)):
            if name not in AXES:
                raise ConfigError(f"sweep.{key}", f"expected one of {AXES}, got {name!r}")
        if a1 == a2:
            raise ConfigError("sweep.axis2", "must differ from sweep.axis1")
        g1 = _grid(sw.get("grid1", DEFAULT_GRIDS[a1]), "sweep.grid1")
        g2 = _grid(sw.get("grid2", DEFAULT_GRIDS[a2]), "sweep.grid2")
        for key, name, grid in (("grid1", a1, g1), ("grid2", a2, g2)):
            if name == "d" and min(grid) < 1e-3 * (1 - 1e-9):
                raise ConfigError(f"sweep.{key}", "distance grid goes below 0.001")
            if name in ("k", "R") and min(grid) <= 0:
                raise ConfigError(f"sweep.{key}", f"{name} grid must be positive")
        cfg.sweep = SweepBlock(a1, g1, a2, g2)

    sv = data.get("svd", {}) or {}
    _check_keys(sv, {"d_grid", "k_grid", "count"}, "svd")
    if "d_grid" in sv:
        cfg.svd.d_grid = _grid(sv["d_grid"], "svd.d_grid")
        if min(cfg.svd.d_grid) < 1e-3 * (1 - 1e-9):
            raise ConfigError("svd.d_grid", "distance grid goes below 0.001")
    if "k_grid" in sv:
        cfg.svd.k_grid = _grid(sv["k_grid"], "svd.k_grid")
        if min(cfg.svd.k_grid) <= 0:
            raise ConfigError("svd.k_grid", "wavenumbers must be positive")
    cfg.svd.count = _number(sv.get("count", 50), "svd.count", positive=True, integer=True)
    if cfg.svd.count > setup.n_a:
        raise ConfigError("svd.count", f"cannot exceed n_a = {setup.n_a}")

    pk = data.get("pkscan", {}) or {}
    _check_keys(pk, {"k_grid", "epsilon", "alpha_window", "per_decade"}, "pkscan")
    if "k_grid" in pk:
        cfg.pkscan.k_grid = _grid(pk["k_grid"], "pkscan.k_grid")
        if min(cfg.pkscan.k_grid) <= 0:
            raise ConfigError("pkscan.k_grid", "wavenumbers must be positive")
    if "epsilon" in pk:
        cfg.pkscan.epsilon = float(_number(pk["epsilon"], "pkscan.epsilon"))
    if "alpha_window" in pk:
        w = pk["alpha_window"]
        if not isinstance(w, list) or len(w) != 2:
            raise ConfigError("pkscan.alpha_window", "expected [low, high]")
        cfg.pkscan.alpha_window = tuple(float(_number(v, f"pkscan.alpha_window[{i}]", positive=True))
                                        for i, v in enumerate(w))
    cfg.pkscan.per_decade = _number(pk.get("per_decade", 200), "pkscan.per_decade", positive=True, integer=True)

    fm = data.get("fieldmap", {}) or {}
    _check_keys(fm, {"extent", "resolution", "density", "exclusion"}, "fieldmap")
    if "extent" in fm:
        ext = fm["extent"]
        if not isinstance(ext, list) or len(ext) != 4:
            raise ConfigError("fieldmap.extent", "expected [xmin, xmax, ymin, ymax]")
        ext = tuple(float(_number(v, f"fieldmap.extent[{i}]")) for i, v in enumerate(ext))
        if not (ext[0] < ext[1] and ext[2] < ext[3]):
            raise ConfigError("fieldmap.extent", "need xmin < xmax and ymin < ymax")
        cfg.fieldmap.extent = ext
    if "resolution" in fm:
        res = fm["resolution"]
        if not isinstance(res, list) or len(res) != 2:
            raise ConfigError("fieldmap.resolution", "expected [nx, ny]")
        cfg.fieldmap.resolution = tuple(_number(v, f"fieldmap.resolution[{i}]", positive=True, integer=True)
                                        for i, v in enumerate(res))
    density = fm.get("density", "morozov")
    if density not in ("morozov", "zero"):
        raise ConfigError("fieldmap.density", f"expected morozov or zero, got {density!r}")
    cfg.fieldmap.density = density
    cfg.fieldmap.exclusion = float(_number(fm.get("exclusion", 1e-3), "fieldmap.exclusion", positive=True))

    out = data.get("output", {}) or {}
    _check_keys(out, {"directory", "formats"}, "output")
    cfg.output_dir = str(out.get("directory", "out"))
    formats = out.get("formats", ["csv", "json"])
    if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
        raise ConfigError("output.formats", f"expected a list drawn from {FORMATS}")
    cfg.formats = tuple(formats)
    return cfg


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(path, f"cannot read config: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(path, f"invalid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(path, "top level must be a mapping")
    return parse_config(data)
