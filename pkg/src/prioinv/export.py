"""CSV/JSON writers for every result type, and experiment config loading."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .model import PARAM_KEYS, ModelError, ModelParams, coerce_params, parse_keyvalue


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.17g}"
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def stationary_csv(dist) -> str:
    return _csv(("n1", "n2", "k", "prob"), dist.records())


def stationary_json(dist) -> str:
    return _json({
        "params": dist.params.to_dict(),
        "trunc": {"cap1": dist.trunc.cap1, "cap2": dist.trunc.cap2},
        "method": dist.method,
        "residual": dist.residual,
        "records": [{"n1": a, "n2": b, "k": k, "prob": p} for a, b, k, p in dist.records()],
    })


def drift_csv(report) -> str:
    return _csv(("n1", "n2", "k", "drift", "in_F", "violation"), report.rows())


def drift_json(report) -> str:
    return _json(report.summary())


def balance_json(reports) -> str:
    if not isinstance(reports, (list, tuple)):
        return _json(reports.to_dict())
    return _json([r.to_dict() for r in reports])


def balance_csv(report) -> str:
    return _csv(("index", "residual", "excluded"), report.rows())


def instant_csv(dist) -> str:
    return _csv(("k", "theta"), dist.records())


def instant_json(dist, residual: float | None = None) -> str:
    d = {"params": dist.params.to_dict(), "theta": [float(t) for t in dist.theta]}
    if residual is not None:
        d["balance_residual"] = residual
    return _json(d)


def simulation_json(est) -> str:
    return _json(est.to_dict())


def trajectory_csv(traj) -> str:
    return _csv(("t", "n1", "n2", "k", "event"), traj.rows())


def write_text(path, text: str):
    Path(path).write_text(text)


# --- experiment configs -------------------------------------------------------

class ConfigError(ValueError):
    def __init__(self, msg, key=None):
        super().__init__(msg)
        self.key = key


SWEEP_AXES = PARAM_KEYS


@dataclass
class ExperimentConfig:
    params: dict  # raw parameter mapping; validated by .model_params()
    trunc: tuple | None = None
    sim: dict = field(default_factory=dict)
    sweep_axis: str | None = None
    sweep_grid: list = field(default_factory=list)
    out: str | None = None
    format: str | None = None

    def model_params(self) -> ModelParams:
        try:
            return coerce_params(self.params)
        except ModelError as exc:
            raise ConfigError(str(exc), getattr(exc, "key", None)) from None

    def sweep_points(self) -> list[ModelParams]:
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}", "sweep.axis")
        if not self.sweep_grid:
            raise ConfigError("sweep grid is empty", "sweep.grid")
        base = dict(self.params)
        out = []
        for v in self.sweep_grid:
            base[self.sweep_axis] = v
            try:
                out.append(coerce_params(base))
            except ModelError as exc:
                raise ConfigError(f"sweep value {self.sweep_axis}={v!r}: {exc}", "sweep.grid") from None
        return out


def _grid(v):
    if isinstance(v, str):
        return [x.strip() for x in v.split(",") if x.strip()]
    return list(v)


def _from_mapping(d: dict) -> ExperimentConfig:
    params = dict(d.get("params", {}))
    for k in PARAM_KEYS:
        if k in d and k not in params:
            params[k] = d[k]
    trunc = d.get("trunc")
    if trunc is None and ("cap1" in d or "cap2" in d):
        trunc = (d.get("cap1"), d.get("cap2"))
    if isinstance(trunc, dict):
        trunc = (trunc.get("cap1"), trunc.get("cap2"))
    if trunc is not None:
        try:
            trunc = tuple(int(float(c)) for c in trunc)
        except (TypeError, ValueError):
            raise ConfigError(f"bad truncation {trunc!r}", "trunc") from None
    sim = dict(d.get("sim", {}))
    for k in ("seed", "events", "warmup", "batches", "stream"):
        if k in d and k not in sim:
            sim[k] = d[k]
    sweep = d.get("sweep", {})
    axis = sweep.get("axis", d.get("sweep_axis"))
    grid = _grid(sweep.get("grid", d.get("sweep_grid", [])))
    return ExperimentConfig(params, trunc, sim, axis, grid, d.get("out"), d.get("format"))


def load_config(path) -> ExperimentConfig:
    """JSON (``.json``) or flat ``key=value`` text."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "config") from None
    try:
        if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
            d = json.loads(text)
            if not isinstance(d, dict):
                raise ConfigError("config root must be an object")
        else:
            d = parse_keyvalue(text)
    except (json.JSONDecodeError, ModelError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}", "config") from None
    return _from_mapping(d)
