"""Instant-service variant: the inventory level alone is a birth-death chain.

With zero service time no queue forms; demand either takes an item or is
lost.  Items are consumed at rate lambda1 + p*lambda2 for 0 < k <= s and
lambda1 + lambda2 above s, and replenished at rate nu below b.  The
service rate ``mu`` of the parameter set is ignored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams

# Below this distance from 1 the closed geometric-sum formula loses more than
# ~1e-13 to cancellation, so the terms are summed directly instead.
RATIO_ONE_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class InventoryDistribution:
    theta: np.ndarray
    params: ModelParams

    def records(self):
        for k, t in enumerate(self.theta):
            yield k, float(t)


def demand_rate(params: ModelParams, k: int) -> float:
    if k <= 0:
        return 0.0
    if k <= params.s:
        return params.lambda1 + params.p * params.lambda2
    return params.lambda1 + params.lambda2


def _geom_sum(r: float, n: int) -> float:
    """sum_{j=0}^{n} r**j."""
    if abs(r - 1.0) < RATIO_ONE_TOL:
        return math.fsum(r ** j for j in range(n + 1))
    return (1.0 - r ** (n + 1)) / (1.0 - r)


def instant_stationary(params: ModelParams) -> InventoryDistribution:
    s, b = params.s, params.b
    low = params.nu / (params.lambda1 + params.p * params.lambda2)
    high = params.nu / (params.lambda1 + params.lambda2)
    theta0 = 1.0 / (_geom_sum(low, s) + low ** s * (_geom_sum(high, b - s) - 1.0))
    theta = np.empty(b + 1)
    for k in range(b + 1):
        if k <= s:
            theta[k] = low ** k * theta0
        else:
            theta[k] = low ** s * high ** (k - s) * theta0
    return InventoryDistribution(theta, params)


def instant_balance_residual(params: ModelParams, dist: InventoryDistribution | np.ndarray) -> float:
    """Largest absolute residual over the b+1 global balance equations."""
    theta = np.asarray(getattr(dist, "theta", dist), dtype=float)
    b = params.b
    if theta.shape != (b + 1,):
        raise ValueError(f"expected {b + 1} probabilities, got shape {theta.shape}")
    up = [params.nu if k < b else 0.0 for k in range(b + 1)]
    down = [demand_rate(params, k) for k in range(b + 1)]
    res = []
    for k in range(b + 1):
        out = theta[k] * (up[k] + down[k])
        inflow = (theta[k + 1] * down[k + 1] if k < b else 0.0) + (theta[k - 1] * up[k - 1] if k > 0 else 0.0)
        res.append(out - inflow)
    return float(np.max(np.abs(res)))
