"""Two-class priority queueing-inventory process: parameters, states, rates.

A single server draws one item from a base-stock inventory per service.
Priority customers preempt ordinary ones (preemptive resume).  When the
on-hand inventory ``k`` is zero every arrival is lost; when ``0 < k <= s``
an ordinary arrival is admitted with probability ``p``.  Each consumed
item triggers a replenishment order with exponential lead time.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, NamedTuple


class ModelError(ValueError):
    """Invalid parameters or state."""


PARAM_KEYS = ("lambda1", "lambda2", "mu", "nu", "p", "s", "b")


@dataclass(frozen=True)
class ModelParams:
    lambda1: float
    lambda2: float
    mu: float
    nu: float
    p: float
    s: int
    b: int

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "mu", "nu"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be a finite positive rate, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not (isinstance(self.p, (int, float)) and 0.0 <= self.p <= 1.0):
            raise ModelError(f"p must lie in [0, 1], got {self.p!r}")
        object.__setattr__(self, "p", float(self.p))
        for name in ("s", "b"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ModelError(f"{name} must be an integer, got {v!r}")
        if self.b < 2:
            raise ModelError(f"base stock level b must be >= 2, got {self.b}")
        if not 0 < self.s < self.b:
            raise ModelError(f"threshold s must satisfy 0 < s < b, got s={self.s}, b={self.b}")

    @property
    def load(self) -> float:
        return (self.lambda1 + self.lambda2) / self.mu

    def ordinary_arrival_rate(self, k: int) -> float:
        """Admitted ordinary-arrival rate at inventory level ``k``."""
        if k <= 0:
            return 0.0
        if k <= self.s:
            return self.p * self.lambda2
        return self.lambda2

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return coerce_params(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_keyvalue(self) -> str:
        return "".join(f"{k}={repr(v)}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelParams":
        return coerce_params(d)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return coerce_params(json.loads(text))

    @classmethod
    def from_keyvalue(cls, text: str) -> "ModelParams":
        return coerce_params(parse_keyvalue(text))


class MissingKeyError(ModelError):
    def __init__(self, key: str):
        super().__init__(f"missing parameter key: {key}")
        self.key = key


def parse_keyvalue(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _to_int(name, v):
    if isinstance(v, str):
        v = float(v) if any(c in v for c in ".eE") else int(v)
    if isinstance(v, float):
        if not v.is_integer():
            raise ModelError(f"{name} must be an integer, got {v!r}")
        v = int(v)
    return v


def coerce_params(d: Mapping) -> ModelParams:
    """Build ModelParams from a mapping whose values may be strings."""
    kwargs = {}
    for f in fields(ModelParams):
        if f.name not in d:
            raise MissingKeyError(f.name)
        v = d[f.name]
        try:
            kwargs[f.name] = _to_int(f.name, v) if f.name in ("s", "b") else float(v)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"{f.name}: cannot parse {v!r}") from None
    return ModelParams(**kwargs)


class State(NamedTuple):
    n1: int
    n2: int
    k: int


class Transition(NamedTuple):
    target: State
    rate: float


# Event labels, also used in trajectory logs.
A1, A2, S1, S2, R = "A1", "A2", "S1", "S2", "R"


def check_state(params: ModelParams, z) -> State:
    n1, n2, k = z
    if n1 < 0 or n2 < 0 or not 0 <= k <= params.b:
        raise ModelError(f"invalid state {tuple(z)} for b={params.b}")
    return State(int(n1), int(n2), int(k))


def labelled_transitions(params: ModelParams, z) -> list[tuple[str, State, float]]:
    """Positive-rate moves out of ``z`` tagged with their event label."""
    n1, n2, k = check_state(params, z)
    out = []
    if k > 0:
        out.append((A1, State(n1 + 1, n2, k), params.lambda1))
        r2 = params.ordinary_arrival_rate(k)
        if r2 > 0:
            out.append((A2, State(n1, n2 + 1, k), r2))
        if n1 > 0:
            out.append((S1, State(n1 - 1, n2, k - 1), params.mu))
        elif n2 > 0:
            out.append((S2, State(n1, n2 - 1, k - 1), params.mu))
    if k < params.b:
        out.append((R, State(n1, n2, k + 1), params.nu))
    return out


def transitions(params: ModelParams, z) -> list[Transition]:
    """Positive-rate neighbours of ``z`` (one row of the generator)."""
    return [Transition(t, r) for _, t, r in labelled_transitions(params, z)]


def total_rate(params: ModelParams, z) -> float:
    """Total outflow rate of ``z``, i.e. ``-q(z, z)``."""
    return sum(r for _, _, r in labelled_transitions(params, z))
