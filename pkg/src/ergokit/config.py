"""JSON configuration files: validation with field-path errors and model construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import dsl
from .ctmc import RateMatrix
from .diffusion import BUILTIN_MODELS, DiffusionModel, ScalarField
from .errors import ConfigError, DSLError, ErgokitError
from .measures import FiniteSet, RegionSet, WeightFunction


@dataclass
class ModelConfig:
    kind: str
    model: Any
    f: Any
    C: Any
    V: Any = None
    B: list = field(default_factory=list)
    b: Optional[float] = None
    delta: float = 1.0
    params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.model.n if self.kind == "ctmc" else None

    @property
    def d(self):
        return self.model.d if self.kind == "diffusion" else None


def load_config(path, seed=None) -> ModelConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    if seed is not None:
        raw.setdefault("params", {})["seed"] = int(seed)
        if isinstance(raw["params"].get("mc"), dict):
            raw["params"]["mc"]["seed"] = int(seed)
    return parse_config(raw)


def parse_config(raw: dict) -> ModelConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    model_cfg = _get(raw, "model", dict, "<root>")
    kind = _get(model_cfg, "kind", str, "model")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "must be an object")
    delta = _number(raw.get("delta", 1.0), "delta")
    if not delta > 0:
        raise ConfigError("delta", "must be positive")
    b = raw.get("b")
    if b is not None:
        b = _number(b, "b")
    if kind == "ctmc":
        model = _rate_matrix(model_cfg)
        n = model.n
        f = _table_weight(raw.get("f", 1.0), n, "f")
        V = _table(raw["V"], n, "V", allow_inf=True) if "V" in raw else None
        C = _finite_set(_get(raw, "C", (list, dict), "<root>"), n, "C")
        B = [_finite_set(s, n, f"B[{i}]") for i, s in enumerate(_get(raw, "B", list, "<root>", []))]
    elif kind == "diffusion":
        model = _diffusion_model(model_cfg)
        d = model.d
        f = _field(raw.get("f", "1"), d, "f")
        V = _field(raw["V"], d, "V") if "V" in raw else None
        C = _region(_get(raw, "C", dict, "<root>"), d, "C")
        B = [_region(s, d, f"B[{i}]") for i, s in enumerate(_get(raw, "B", list, "<root>", []))]
    else:
        raise ConfigError("model.kind", f"must be 'ctmc' or 'diffusion', got {kind!r}")
    return ModelConfig(kind, model, f, C, V, B, b, delta, params, raw)


def _get(obj, key, types, where, default=...):
    path = key if where == "<root>" else f"{where}.{key}"
    if key not in obj:
        if default is ...:
            raise ConfigError(path, "required field is missing")
        return default
    value = obj[key]
    if not isinstance(value, types):
        names = types.__name__ if isinstance(types, type) else " or ".join(t.__name__ for t in types)
        raise ConfigError(path, f"expected {names}, got {type(value).__name__}")
    return value


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _table(value, n, path, allow_inf=False):
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(path, f"expected a list of {n} numbers")
    out = []
    for i, v in enumerate(value):
        if allow_inf and v in ("inf", "Infinity"):
            out.append(np.inf)
        else:
            out.append(_number(v, f"{path}[{i}]"))
    return np.array(out)


def _table_weight(value, n, path):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        table = np.full(n, float(value))
    else:
        table = _table(value, n, path)
    bad = np.flatnonzero(~(table >= 1))
    if bad.size:
        raise ConfigError(f"{path}[{bad[0]}]", f"weight must be >= 1, got {table[bad[0]]}")
    return WeightFunction(table)


def _rate_matrix(cfg):
    rows = _get(cfg, "rates", list, "model")
    n = len(rows)
    if n == 0:
        raise ConfigError("model.rates", "must have at least one row")
    q = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"model.rates[{i}]", f"expected a row of {n} numbers")
        q.append([_number(v, f"model.rates[{i}][{j}]") for j, v in enumerate(row)])
    q = np.array(q)
    labels = cfg.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != n or len(set(map(str, labels))) != n):
        raise ConfigError("model.labels", f"expected {n} unique labels")
    off = q - np.diag(np.diag(q))
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise ConfigError(f"model.rates[{i}][{j}]", "off-diagonal rates must be nonnegative")
    if cfg.get("fill_diagonal", True):
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
    try:
        return RateMatrix(q, tuple(map(str, labels)) if labels else None)
    except ErgokitError as exc:
        raise ConfigError("model.rates", str(exc)) from None


def _finite_set(value, n, path):
    if isinstance(value, dict):
        raise ConfigError(path, "a ctmc set must be a list of state indices")
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < n:
            raise ConfigError(f"{path}[{i}]", f"expected a state index in 0..{n - 1}, got {v!r}")
    if not value:
        raise ConfigError(path, "set must be nonempty")
    return FiniteSet(value, n)


def _expr(source, d, path):
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str):
        raise ConfigError(path, f"expected an expression string, got {source!r}")
    try:
        return dsl.parse(source, d)
    except DSLError as exc:
        raise ConfigError(path, str(exc)) from None


def _field(source, d, path):
    return ScalarField.from_expr(_expr(source, d, path), d)


def _diffusion_model(cfg):
    if "builtin" in cfg:
        name = _get(cfg, "builtin", str, "model")
        if name not in BUILTIN_MODELS:
            raise ConfigError("model.builtin", f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}")
        kwargs = _get(cfg, "params", dict, "model", {})
        try:
            return BUILTIN_MODELS[name](**{k: _number(v, f"model.params.{k}") for k, v in kwargs.items()})
        except TypeError as exc:
            raise ConfigError("model.params", str(exc)) from None
    drift = _get(cfg, "drift", list, "model")
    disp = _get(cfg, "dispersion", list, "model")
    d = len(drift)
    if "d" in cfg and cfg["d"] != d:
        raise ConfigError("model.d", f"declared d={cfg['d']} but drift has {d} components")
    if len(disp) != d:
        raise ConfigError("model.dispersion", f"expected {d} rows")
    k = cfg.get("k", len(disp[0]) if disp and isinstance(disp[0], list) else 0)
    for i, row in enumerate(disp):
        if not isinstance(row, list) or len(row) != k:
            raise ConfigError(f"model.dispersion[{i}]", f"expected a row of {k} expressions")
    for i, s in enumerate(drift):
        _expr(s, d, f"model.drift[{i}]")
    for i, row in enumerate(disp):
        for j, s in enumerate(row):
            _expr(s, d, f"model.dispersion[{i}][{j}]")
    as_text = lambda v: repr(float(v)) if isinstance(v, (int, float)) else v  # noqa: E731
    return DiffusionModel.from_expressions(
        [as_text(s) for s in drift], [[as_text(s) for s in row] for row in disp], name="custom"
    )


def _bounds(value, d, path):
    if not isinstance(value, list) or len(value) != d:
        raise ConfigError(path, f"expected {d} [low, high] pairs")
    out = []
    for i, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{path}[{i}]", "expected [low, high]")
        lo, hi = _number(pair[0], f"{path}[{i}][0]"), _number(pair[1], f"{path}[{i}][1]")
        if lo > hi:
            raise ConfigError(f"{path}[{i}]", "low exceeds high")
        out.append([lo, hi])
    return out


def _region(value, d, path):
    if not isinstance(value, dict) or len(value) != 1:
        raise ConfigError(path, "expected exactly one of 'box', 'ball', 'sublevel'")
    (kind, spec), = value.items()
    if kind == "box":
        return RegionSet.box(_bounds(spec, d, f"{path}.box"))
    if kind == "ball":
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}.ball", "expected an object with center and radius")
        center = _get(spec, "center", list, f"{path}.ball")
        if len(center) != d:
            raise ConfigError(f"{path}.ball.center", f"expected {d} coordinates")
        center = [_number(c, f"{path}.ball.center[{i}]") for i, c in enumerate(center)]
        radius = _number(_get(spec, "radius", (int, float), f"{path}.ball"), f"{path}.ball.radius")
        return RegionSet.ball(center, radius)
    if kind == "sublevel":
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}.sublevel", "expected an object with expr, threshold and bounds")
        e = _expr(_get(spec, "expr", str, f"{path}.sublevel"), d, f"{path}.sublevel.expr")
        threshold = _number(_get(spec, "threshold", (int, float), f"{path}.sublevel"), f"{path}.sublevel.threshold")
        bounds = _bounds(_get(spec, "bounds", list, f"{path}.sublevel"), d, f"{path}.sublevel.bounds")
        return RegionSet.sublevel(e, threshold, bounds)
    raise ConfigError(path, f"unknown set kind {kind!r}")


def grid_points(spec, d, path="params.grid"):
    """Grid from ``{"start", "stop", "step"}`` (per axis, as a list for d > 1) or explicit points."""
    if isinstance(spec, dict):
        spec = [spec] * d if d == 1 else None
        if spec is None:
            raise ConfigError(path, "give one {start, stop, step} object per dimension")
    if not isinstance(spec, list) or not spec:
        raise ConfigError(path, "expected a nonempty list")
    if all(isinstance(s, dict) for s in spec):
        if len(spec) != d:
            raise ConfigError(path, f"expected {d} axis specifications")
        axes = []
        for i, s in enumerate(spec):
            start = _number(_get(s, "start", (int, float), f"{path}[{i}]"), f"{path}[{i}].start")
            stop = _number(_get(s, "stop", (int, float), f"{path}[{i}]"), f"{path}[{i}].stop")
            step = _number(_get(s, "step", (int, float), f"{path}[{i}]"), f"{path}[{i}].step")
            if not step > 0 or stop < start:
                raise ConfigError(f"{path}[{i}]", "need step > 0 and stop >= start")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            axes.append(start + step * np.arange(count))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    pts = np.array(spec, dtype=float)
    if pts.ndim == 1 and d == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ConfigError(path, f"points must have dimension {d}")
    return pts


def time_grid(spec, path="params.t_grid"):
    if spec is None:
        return np.linspace(0.0, 5.0, 51)
    if isinstance(spec, dict):
        start = _number(spec.get("start", 0.0), f"{path}.start")
        stop = _number(_get(spec, "stop", (int, float), path), f"{path}.stop")
        num = spec.get("num", 51)
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            raise ConfigError(f"{path}.num", "expected a positive integer")
        return np.linspace(start, stop, num)
    if isinstance(spec, list) and spec:
        ts = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(spec)])
        if np.any(ts < 0):
            raise ConfigError(path, "times must be nonnegative")
        return ts
    raise ConfigError(path, "expected a list of times or {start, stop, num}")
