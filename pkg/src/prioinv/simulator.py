"""Event-driven simulation of the untruncated queueing-inventory process.

Competing exponential clocks: in each state the holding time is
exponential with the total event rate and the event is picked with
probability proportional to its rate.  Both arrival streams always run at
their full rates so that lost demand is counted; a blocked arrival leaves
the state unchanged.  The admitted dynamics are exactly those of the
generator.

Random numbers come from numpy's counter-based Philox generator.  Stream
``i`` of seed ``s`` is ``SeedSequence(s, spawn_key=(i,))``, so parallel
replications and sweep points get disjoint, reproducible streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .lyapunov import check_ergodicity
from .model import ModelParams, State, check_state

EVENT_NAMES = ("A1", "A2", "S1", "S2", "R", "L1", "L2")
CHUNK = 1 << 18
CONFIDENCE = 0.95


class InsufficientDataError(ValueError):
    pass


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    max_events: int = 1_000_000
    warmup_events: int | None = None  # default: 10% of max_events
    batches: int = 20
    initial_state: tuple | None = None  # default: (0, 0, b)
    stream: int = 0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.warmup_events is None:
            object.__setattr__(self, "warmup_events", self.max_events // 10)
        if self.batches < 2:
            raise ValueError("need at least 2 batches")
        if not 0 <= self.warmup_events < self.max_events:
            raise ValueError("warmup_events must be in [0, max_events)")
        if self.max_events - self.warmup_events < self.batches:
            raise ValueError("fewer post-warmup events than batches")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class Trajectory:
    t: np.ndarray
    event: np.ndarray  # codes into EVENT_NAMES
    states: np.ndarray  # (events, 3), state after the event

    def rows(self):
        for t, e, (n1, n2, k) in zip(self.t, self.event, self.states):
            yield float(t), int(n1), int(n2), int(k), EVENT_NAMES[e]


@dataclass
class SimEstimates:
    time_avg: dict  # metric -> (estimate, 95% half-width)
    batch_values: dict  # metric -> per-batch values
    counts: dict  # event name -> count over the whole run (warmup included)
    simulated_time: float
    measured_time: float
    events: int  # post-warmup events
    initial_state: State
    final_state: State
    params: ModelParams
    config: SimConfig
    trajectory: Trajectory | None = field(default=None, repr=False)

    def admitted(self, cls: int) -> int:
        return self.counts[f"A{cls}"]

    def lost(self, cls: int) -> int:
        return self.counts[f"L{cls}"]

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "seed": self.config.seed,
            "stream": self.config.stream,
            "max_events": self.config.max_events,
            "warmup_events": self.config.warmup_events,
            "batches": self.config.batches,
            "initial_state": list(self.initial_state),
            "final_state": list(self.final_state),
            "simulated_time": self.simulated_time,
            "measured_time": self.measured_time,
            "counts": dict(self.counts),
            "metrics": {m: {"estimate": e, "half_width": h} for m, (e, h) in self.time_avg.items()},
        }


def _metrics(params: ModelParams, ymass, x1, x2, counts, T) -> dict:
    s = params.s
    out = {f"P(Y={k})": ymass[k] / T for k in range(len(ymass))}
    out["P(Y>0)"] = math.fsum(ymass[1:]) / T
    out["P(0<Y<=s)"] = math.fsum(ymass[1:s + 1]) / T
    out["E[X1]"] = x1 / T
    out["E[X2]"] = x2 / T
    for i, name in enumerate(EVENT_NAMES):
        out[f"rate_{name}"] = counts[i] / T
    return out


def _half_width(values: np.ndarray) -> float:
    n = len(values)
    return float(stats.t.ppf(0.5 + CONFIDENCE / 2, n - 1) * np.std(values, ddof=1) / math.sqrt(n))


class _Runner:
    def __init__(self, params: ModelParams, state, rng, record: bool):
        self.p = params
        self.state = np.array(state, dtype=np.int64)
        self.rng = rng
        self.record = record
        self.t = 0.0
        self.logs = []

    def run(self, n_events: int):
        """Advance ``n_events``; returns (ymass, x1area, x2area, counts, elapsed)."""
        p = self.p
        ymass = np.zeros(p.b + 1)
        x1, x2 = np.zeros(1), np.zeros(1)
        counts = np.zeros(len(EVENT_NAMES), dtype=np.int64)
        elapsed = 0.0
        done = 0
        while done < n_events:
            m = min(CHUNK, n_events - done)
            u = self.rng.random((m, 3))
            if self.record:
                lt, le, ls = np.empty(m), np.empty(m, dtype=np.int8), np.empty((m, 3), dtype=np.int64)
            else:
                lt, le, ls = np.empty(0), np.empty(0, dtype=np.int8), np.empty((0, 3), dtype=np.int64)
            dt = _kernels.simulate_chunk(self.state, u, p.lambda1, p.lambda2, p.mu, p.nu, p.p,
                                         p.s, p.b, ymass, x1, x2, counts, lt, le, ls, self.t)
            self.t += dt
            elapsed += dt
            if self.record:
                self.logs.append((lt, le, ls))
            done += m
        return ymass, float(x1[0]), float(x2[0]), counts, elapsed

    def trajectory(self) -> Trajectory | None:
        if not self.record:
            return None
        if not self.logs:
            return Trajectory(np.empty(0), np.empty(0, dtype=np.int8), np.empty((0, 3), dtype=np.int64))
        return Trajectory(*(np.concatenate(parts) for parts in zip(*self.logs)))


def simulate(params: ModelParams, cfg: SimConfig) -> SimEstimates:
    init = check_state(params, cfg.initial_state if cfg.initial_state is not None else (0, 0, params.b))
    runner = _Runner(params, init, make_rng(cfg.seed, cfg.stream), cfg.record_trajectory)
    total_counts = np.zeros(len(EVENT_NAMES), dtype=np.int64)
    warm = runner.run(cfg.warmup_events)
    total_counts += warm[3]
    post = cfg.max_events - cfg.warmup_events
    sizes = [post // cfg.batches] * cfg.batches
    sizes[-1] += post - sum(sizes)
    batch_metrics = []
    agg_y = np.zeros(params.b + 1)
    agg_x1 = agg_x2 = agg_T = 0.0
    agg_counts = np.zeros(len(EVENT_NAMES), dtype=np.int64)
    for n in sizes:
        ymass, x1, x2, counts, T = runner.run(n)
        batch_metrics.append(_metrics(params, ymass, x1, x2, counts, T))
        agg_y += ymass
        agg_x1 += x1
        agg_x2 += x2
        agg_T += T
        agg_counts += counts
    total_counts += agg_counts
    overall = _metrics(params, agg_y, agg_x1, agg_x2, agg_counts, agg_T)
    batch_values = {m: np.array([bm[m] for bm in batch_metrics]) for m in overall}
    time_avg = {m: (float(overall[m]), _half_width(batch_values[m])) for m in overall}
    return SimEstimates(
        time_avg=time_avg,
        batch_values=batch_values,
        counts={name: int(c) for name, c in zip(EVENT_NAMES, total_counts)},
        simulated_time=runner.t,
        measured_time=agg_T,
        events=post,
        initial_state=init,
        final_state=State(*(int(v) for v in runner.state)),
        params=params,
        config=cfg,
        trajectory=runner.trajectory(),
    )


@dataclass
class ThroughputCheck:
    residuals: dict  # class -> effective arrival minus effective departure rate
    std_errors: dict
    passed: dict  # class -> bool, or None in a flagged boundary regime
    boundary: bool

    @property
    def ok(self) -> bool | None:
        if self.boundary:
            return None
        return all(self.passed.values())


def throughput_check(est: SimEstimates, n_sigma: float = 3.0) -> ThroughputCheck:
    """Admitted-arrival rate minus departure rate, per class and in total."""
    if est.events <= 0 or est.measured_time <= 0:
        raise InsufficientDataError("no post-warmup events to check")
    bv = est.batch_values
    diffs = {
        "1": bv["rate_A1"] - bv["rate_S1"],
        "2": bv["rate_A2"] - bv["rate_S2"],
        "total": bv["rate_A1"] + bv["rate_A2"] - bv["rate_S1"] - bv["rate_S2"],
    }
    ta = est.time_avg
    point = {
        "1": ta["rate_A1"][0] - ta["rate_S1"][0],
        "2": ta["rate_A2"][0] - ta["rate_S2"][0],
        "total": ta["rate_A1"][0] + ta["rate_A2"][0] - ta["rate_S1"][0] - ta["rate_S2"][0],
    }
    se = {c: float(np.std(d, ddof=1) / math.sqrt(len(d))) for c, d in diffs.items()}
    erg = check_ergodicity(est.params)
    boundary = erg.sharp and not erg.stable
    passed = {c: None if boundary else abs(point[c]) <= n_sigma * se[c] for c in point}
    return ThroughputCheck(point, se, passed, boundary)


def windowed_means(params: ModelParams, n_windows: int, window_events: int, seed: int,
                   stream: int = 0, initial_state=None) -> np.ndarray:
    """Time-averaged total queue length X1+X2 over successive event windows."""
    init = check_state(params, initial_state if initial_state is not None else (0, 0, params.b))
    runner = _Runner(params, init, make_rng(seed, stream), False)
    out = np.empty(n_windows)
    for w in range(n_windows):
        _, x1, x2, _, T = runner.run(window_events)
        out[w] = (x1 + x2) / T
    return out
