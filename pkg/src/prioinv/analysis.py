"""Equilibrium identities checked against a solved stationary distribution.

The cut identities for priority queue levels, ordinary queue levels,
total queue levels and inventory levels hold exactly on an
arrival-rejection truncation (away from the caps), so they are checked at
machine precision.  The aggregate rate equations and the geometric
normalisation only hold in the limit of large caps and are reported
together with the boundary mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams
from .solver import (GTH_TOL, POWER_TOL, GeneratorMatrix, StationaryDistribution,
                     TruncationSpec, X1_GIVEN_Y_POS, marginal, solve, total_queue_fibers)

CUT_TOL = 1e-10


@dataclass
class BalanceReport:
    identity: str
    residuals: np.ndarray
    tolerance: float
    indices: np.ndarray = None
    excluded: np.ndarray = None  # boolean mask over indices, excluded from pass/fail
    boundary_mass: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.residuals = np.asarray(self.residuals, dtype=float)
        if self.indices is None:
            self.indices = np.arange(len(self.residuals))
        if self.excluded is None:
            self.excluded = np.zeros(len(self.residuals), dtype=bool)

    @property
    def max_residual(self) -> float:
        r = np.abs(self.residuals[~self.excluded])
        return float(r.max()) if r.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def to_dict(self) -> dict:
        d = {"identity": self.identity, "max_residual": self.max_residual,
             "tolerance": self.tolerance, "pass": self.passed}
        if self.boundary_mass is not None:
            d["boundary_mass"] = self.boundary_mass
        d.update(self.extra)
        return d

    def rows(self):
        for i, r, ex in zip(self.indices, self.residuals, self.excluded):
            yield int(i), float(r), bool(ex)


def _fsum(a) -> float:
    return math.fsum(np.ravel(a))


def _check_params(dist, params):
    if params is None:
        return dist.params
    if params.b != dist.index.b:
        raise ValueError(f"params.b={params.b} does not match distribution (b={dist.index.b})")
    return params


def global_balance_residual(dist: StationaryDistribution, gen: GeneratorMatrix,
                            tol: float | None = None) -> BalanceReport:
    if dist.index != gen.index or len(dist.probabilities) != gen.dimension:
        raise ValueError("distribution and generator have different state spaces")
    if tol is None:
        tol = GTH_TOL if dist.method == "gth" else POWER_TOL
    r = gen.Q.T @ dist.probabilities
    return BalanceReport("global_balance", r, tol)


def check_cut_x1(dist: StationaryDistribution, params: ModelParams | None = None,
                 tol: float = CUT_TOL) -> BalanceReport:
    """P(X1=n, Y>0) lambda1 = P(X1=n+1, Y>0) mu for n < cap1."""
    params = _check_params(dist, params)
    a = dist.as_array()
    level = np.array([_fsum(a[n, :, 1:]) for n in range(a.shape[0])])
    lhs = level[:-1] * params.lambda1
    rhs = level[1:] * params.mu
    return BalanceReport("cut_x1", lhs - rhs, tol)


def check_cut_x2(dist: StationaryDistribution, params: ModelParams | None = None,
                 tol: float = CUT_TOL) -> BalanceReport:
    """Admitted ordinary flow out of level n2 equals ordinary service flow back."""
    params = _check_params(dist, params)
    a = dist.as_array()
    s = params.s
    low = np.array([_fsum(a[:, n, 1:s + 1]) for n in range(a.shape[1])])
    high = np.array([_fsum(a[:, n, s + 1:]) for n in range(a.shape[1])])
    served = np.array([_fsum(a[0, n, 1:]) for n in range(a.shape[1])])
    lhs = low[:-1] * (params.p * params.lambda2) + high[:-1] * params.lambda2
    rhs = served[1:] * params.mu
    return BalanceReport("cut_x2", lhs - rhs, tol)


def check_cut_total(dist: StationaryDistribution, params: ModelParams | None = None,
                    tol: float = CUT_TOL) -> BalanceReport:
    """Total-queue cut; levels that touch a cap are reported but excluded."""
    params = _check_params(dist, params)
    a = dist.as_array()
    s = params.s
    fib = total_queue_fibers(a)  # [n, k]
    low = np.array([math.fsum(row[1:s + 1]) for row in fib])
    high = np.array([math.fsum(row[s + 1:]) for row in fib])
    pos = np.array([math.fsum(row[1:]) for row in fib])
    lhs = low[:-1] * (params.lambda1 + params.p * params.lambda2) + high[:-1] * (params.lambda1 + params.lambda2)
    rhs = pos[1:] * params.mu
    n = np.arange(len(lhs))
    excluded = n >= min(dist.trunc.cap1, dist.trunc.cap2)
    return BalanceReport("cut_total", lhs - rhs, tol, n, excluded)


def check_inventory_flow(dist: StationaryDistribution, params: ModelParams | None = None,
                         tol: float = CUT_TOL) -> BalanceReport:
    """P(Y=k) nu = P(Y=k+1, X1+X2>0) mu for k < b."""
    params = _check_params(dist, params)
    a = dist.as_array()
    py = np.array([_fsum(a[:, :, k]) for k in range(a.shape[2])])
    busy = np.array([_fsum(a[1:, :, k]) + _fsum(a[0, 1:, k]) for k in range(a.shape[2])])
    lhs = py[:-1] * params.nu
    rhs = busy[1:] * params.mu
    return BalanceReport("inventory_flow", lhs - rhs, tol)


def check_inventory_insensitivity(params: ModelParams, trunc: TruncationSpec,
                                  variants: list[dict] | None = None, **solve_kw) -> list[BalanceReport]:
    """Re-solve with altered threshold and arrival rates; the inventory
    identity keeps the same form for every variant."""
    if variants is None:
        variants = [{"s": s} for s in range(1, params.b)]
        variants += [{"lambda1": params.lambda1 * 0.5}, {"lambda2": params.lambda2 * 0.5},
                     {"lambda1": params.lambda1 * 0.5, "lambda2": params.lambda2 * 1.5}]
    reports = []
    for change in variants:
        p = params.replace(**change)
        rep = check_inventory_flow(solve(p, trunc, **solve_kw), p)
        rep.extra["variant"] = change
        reports.append(rep)
    return reports


def check_rate_equations(dist: StationaryDistribution, params: ModelParams | None = None,
                         tol: float = CUT_TOL) -> BalanceReport:
    """Effective arrival rate = effective departure rate, per class and total.

    Arrival rates take the untruncated form, so on a truncated solve the
    residuals equal the arrival flow rejected at the caps. That is at most
    max(lambda1, lambda2) times the boundary mass, which (plus ``tol``) is the
    pass tolerance. ``extra["admitted_arrival"]`` counts only what the
    truncated chain admits and matches the departures exactly.
    """
    params = _check_params(dist, params)
    a = dist.as_array()
    s = params.s
    y_pos = _fsum(a[:, :, 1:])
    y_low = _fsum(a[:, :, 1:s + 1])
    y_high = _fsum(a[:, :, s + 1:])
    arr1 = y_pos * params.lambda1
    arr2 = y_low * params.p * params.lambda2 + y_high * params.lambda2
    dep1 = _fsum(a[1:, :, 1:]) * params.mu
    dep2 = _fsum(a[0, 1:, 1:]) * params.mu
    dep = (_fsum(a[1:, :, 1:]) + _fsum(a[0, 1:, 1:])) * params.mu
    res = np.array([arr1 - dep1, arr2 - dep2, arr1 + arr2 - dep])
    bm = dist.boundary_mass()
    rep = BalanceReport("rate_equations", res, max(params.lambda1, params.lambda2) * bm + tol,
                        boundary_mass=bm)
    # arrivals the truncated chain actually admits; these balance departures exactly
    adm1 = _fsum(a[:-1, :, 1:]) * params.lambda1
    adm2 = (_fsum(a[:, :-1, 1:s + 1]) * params.p * params.lambda2
            + _fsum(a[:, :-1, s + 1:]) * params.lambda2)
    rep.extra.update(effective_arrival=[arr1, arr2, arr1 + arr2],
                     effective_departure=[dep1, dep2, dep],
                     admitted_arrival=[adm1, adm2, adm1 + adm2])
    return rep


def check_geometric(dist: StationaryDistribution, params: ModelParams | None = None,
                    tol: float = CUT_TOL) -> BalanceReport:
    """Priority queue length given Y>0 is geometric with ratio lambda1/mu."""
    params = _check_params(dist, params)
    cond = marginal(dist, X1_GIVEN_Y_POS)  # raises on zero mass
    q = cond.values
    rho = params.lambda1 / params.mu
    res = q[:-1] * rho - q[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = q[1:] / q[:-1]
    fitted = math.fsum(q[1:]) / math.fsum(q[:-1]) if len(q) > 1 else float("nan")
    rep = BalanceReport("geometric_x1", res, tol)
    rep.extra.update(
        ratio=rho,
        fitted_ratio=fitted,
        max_ratio_error=float(np.max(np.abs(ratios - rho))) if len(ratios) else 0.0,
        p_x1_zero=float(q[0]),
        normalization_gap=abs(float(q[0]) - (1.0 - rho)),
        conditioning_mass=cond.mass,
    )
    return rep


def run_all(dist: StationaryDistribution, gen: GeneratorMatrix | None = None) -> list[BalanceReport]:
    """All identity checks for one solve; global balance only when ``gen`` is given."""
    reports = []
    if gen is not None:
        reports.append(global_balance_residual(dist, gen))
    reports += [check_cut_x1(dist), check_cut_x2(dist), check_cut_total(dist),
                check_inventory_flow(dist), check_rate_equations(dist)]
    if _fsum(dist.as_array()[:, :, 1:]) > 0:
        reports.append(check_geometric(dist))
    return reports
