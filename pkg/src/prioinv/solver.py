"""Truncated state space, sparse generator and stationary solvers.

Truncation rejects arrivals that would push a queue past its cap.  Every
service and replenishment move is kept, so the cut identities for queue
levels below the caps (and for all inventory levels) remain exact on the
truncated chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .model import ModelParams, State, labelled_transitions

MAX_STATES = 2_000_000
# "auto" uses banded GTH while its cost n*w**2 and band storage n*(2w+1)
# stay within these budgets (w = half-bandwidth); power iteration beyond.
GTH_MAX_WORK = 1e10
GTH_MAX_BAND_ENTRIES = 3e7
GTH_TOL = 1e-12
POWER_TOL = 1e-10
UNIFORMIZATION_FACTOR = 1.01


class SolverError(RuntimeError):
    pass


class CapacityError(SolverError):
    pass


class StructuralError(SolverError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (achieved residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class TruncationSpec:
    cap1: int
    cap2: int

    def __post_init__(self):
        for name in ("cap1", "cap2"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    def n_states(self, b: int) -> int:
        return (self.cap1 + 1) * (self.cap2 + 1) * (b + 1)


class StateIndex:
    """Lexicographic (n1, n2, k) bijection on the truncated box."""

    def __init__(self, trunc: TruncationSpec, b: int):
        self.trunc = trunc
        self.b = b
        self.shape = (trunc.cap1 + 1, trunc.cap2 + 1, b + 1)
        self.size = trunc.n_states(b)

    def __len__(self):
        return self.size

    def __contains__(self, z) -> bool:
        n1, n2, k = z
        return 0 <= n1 < self.shape[0] and 0 <= n2 < self.shape[1] and 0 <= k < self.shape[2]

    def index(self, z) -> int:
        if z not in self:
            raise KeyError(tuple(z))
        n1, n2, k = z
        return (n1 * self.shape[1] + n2) * self.shape[2] + k

    def state(self, i: int) -> State:
        if not 0 <= i < self.size:
            raise IndexError(i)
        rest, k = divmod(i, self.shape[2])
        n1, n2 = divmod(rest, self.shape[1])
        return State(n1, n2, k)

    @property
    def states(self) -> list[State]:
        return [self.state(i) for i in range(self.size)]

    def coords(self) -> np.ndarray:
        """(size, 3) integer array of states in index order."""
        g = np.indices(self.shape).reshape(3, -1).T
        return np.ascontiguousarray(g)

    def __eq__(self, other):
        return isinstance(other, StateIndex) and self.shape == other.shape

    def __repr__(self):
        return f"StateIndex(cap1={self.trunc.cap1}, cap2={self.trunc.cap2}, b={self.b})"


def enumerate_states(trunc: TruncationSpec, b: int, max_states: int = MAX_STATES) -> StateIndex:
    n = trunc.n_states(b)
    if n > max_states:
        raise CapacityError(f"{n} truncated states exceed the limit of {max_states}")
    return StateIndex(trunc, b)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Conservative generator of the truncated chain (CSR, diagonal included)."""
    Q: sp.csr_matrix
    index: StateIndex
    params: ModelParams
    trunc: TruncationSpec

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]

    def offdiag(self) -> sp.csr_matrix:
        A = self.Q.tolil(copy=True)
        A.setdiag(0.0)
        return A.tocsr()

    def rate(self, z_from, z_to) -> float:
        return float(self.Q[self.index.index(z_from), self.index.index(z_to)])


def build_generator(params: ModelParams, trunc: TruncationSpec,
                    max_states: int = MAX_STATES) -> GeneratorMatrix:
    idx = enumerate_states(trunc, params.b, max_states)
    rows, cols, vals = [], [], []
    diag = np.zeros(idx.size)
    for i in range(idx.size):
        z = idx.state(i)
        out = []
        for _, target, rate in labelled_transitions(params, z):
            if target.n1 > trunc.cap1 or target.n2 > trunc.cap2:
                continue  # arrival rejected at the cap
            rows.append(i)
            cols.append(idx.index(target))
            vals.append(rate)
            out.append(rate)
        diag[i] = -math.fsum(out)  # correctly rounded: row sums vanish to within one ulp
    rows.extend(range(idx.size))
    cols.extend(range(idx.size))
    vals.extend(diag)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(idx.size, idx.size))
    Q.sum_duplicates()
    Q.sort_indices()
    return GeneratorMatrix(Q, idx, params, trunc)


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    probabilities: np.ndarray
    index: StateIndex
    residual: float
    method: str
    params: ModelParams
    trunc: TruncationSpec
    iterations: int = 0
    support: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.probabilities.setflags(write=False)

    def prob(self, z) -> float:
        return float(self.probabilities[self.index.index(z)])

    def as_array(self) -> np.ndarray:
        """Probabilities reshaped to ``pi[n1, n2, k]``."""
        return self.probabilities.reshape(self.index.shape)

    def boundary_mass(self) -> float:
        """P(X1 = cap1) + P(X2 = cap2)."""
        a = self.as_array()
        return math.fsum(a[-1].ravel()) + math.fsum(a[:, -1].ravel())

    def records(self):
        for i, z in enumerate(self.index.coords()):
            yield int(z[0]), int(z[1]), int(z[2]), float(self.probabilities[i])


def recurrent_class(gen: GeneratorMatrix) -> np.ndarray:
    """Sorted indices of the unique closed communicating class."""
    A = gen.offdiag()
    A.eliminate_zeros()
    ncomp, labels = connected_components(A, directed=True, connection="strong")
    # a class is closed when no edge leaves it
    coo = A.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_classes = set(labels[coo.row[leaving]].tolist())
    closed = [c for c in range(ncomp) if c not in open_classes]
    if len(closed) != 1:
        raise StructuralError(f"truncated chain has {len(closed)} closed classes, expected 1")
    return np.flatnonzero(labels == closed[0])


def _half_bandwidth(A: sp.csr_matrix) -> int:
    coo = A.tocoo()
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


def gth_feasible(Q: sp.csr_matrix) -> bool:
    n, w = Q.shape[0], _half_bandwidth(Q)
    return n * w * w <= GTH_MAX_WORK and n * (2 * w + 1) <= GTH_MAX_BAND_ENTRIES


def _solve_gth(A: sp.csr_matrix) -> np.ndarray:
    n = A.shape[0]
    if n == 1:
        return np.ones(1)
    w = _half_bandwidth(A)
    band = np.zeros((n, 2 * w + 1))
    coo = A.tocoo()
    band[coo.row, w + coo.col - coo.row] = coo.data
    pi, bad = _kernels.gth_band(band, w)
    if bad >= 0:
        raise StructuralError(f"GTH elimination found no outflow at reduced state {bad}")
    return pi


def _solve_power(Q: sp.csr_matrix, tol: float, max_iter: int) -> tuple[np.ndarray, int, float]:
    n = Q.shape[0]
    unif = UNIFORMIZATION_FACTOR * float(np.max(-Q.diagonal()))
    if unif == 0.0:
        return np.full(n, 1.0 / n), 0, 0.0
    QT = Q.T.tocsr()
    pi = np.full(n, 1.0 / n)
    res = math.inf
    for it in range(1, max_iter + 1):
        r = QT @ pi
        res = float(np.max(np.abs(r)))
        if res <= tol:
            return pi, it, res
        pi = pi + r / unif
        if it % 1000 == 0:
            pi /= pi.sum()
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", res)


def solve_stationary(gen: GeneratorMatrix, tol: float | None = None, method: str = "auto",
                     max_iter: int = 2_000_000) -> StationaryDistribution:
    """Stationary law of the truncated chain.

    ``method`` is ``"gth"``, ``"power"`` or ``"auto"`` (banded GTH within
    the GTH_MAX_WORK / GTH_MAX_BAND_ENTRIES budgets, uniformized power
    iteration above).  Only GTH solves are accurate enough for the
    1e-10 cut-identity checks.
    States outside the closed class get probability zero.
    """
    support = recurrent_class(gen)
    Qr = gen.Q[support][:, support].tocsr()
    if method == "auto":
        method = "gth" if gth_feasible(Qr) else "power"
    iterations = 0
    if method == "gth":
        tol = GTH_TOL if tol is None else tol
        A = Qr.tolil(copy=True)
        A.setdiag(0.0)
        A = A.tocsr()
        A.eliminate_zeros()
        pr = _solve_gth(A)
    elif method == "power":
        tol = POWER_TOL if tol is None else tol
        pr, iterations, _ = _solve_power(Qr, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    pr = np.clip(pr, 0.0, None)
    pr /= math.fsum(pr)
    pi = np.zeros(gen.dimension)
    pi[support] = pr
    residual = float(np.max(np.abs(gen.Q.T @ pi)))
    if residual > tol:
        raise ConvergenceError(f"{method} solve missed tolerance {tol:.1e}", residual)
    return StationaryDistribution(pi, gen.index, residual, method, gen.params, gen.trunc,
                                  iterations, support)


def solve(params: ModelParams, trunc: TruncationSpec, **kw) -> StationaryDistribution:
    return solve_stationary(build_generator(params, trunc), **kw)


# marginal queries
Y, X1, X2, X1_GIVEN_Y_POS, X_TOTAL, JOINT = "Y", "X1", "X2", "X1|Y>0", "X1+X2", "X1+X2,Y"
QUERIES = (Y, X1, X2, X1_GIVEN_Y_POS, X_TOTAL, JOINT)


class Marginal(NamedTuple):
    values: np.ndarray
    mass: float  # conditioning mass; 1.0 for unconditional queries


def _fsum_axes(a: np.ndarray, keep: int) -> np.ndarray:
    moved = np.moveaxis(a, keep, 0).reshape(a.shape[keep], -1)
    return np.array([math.fsum(row) for row in moved])


def total_queue_fibers(a: np.ndarray) -> np.ndarray:
    """``out[n, k] = sum over n1 + n2 = n of a[n1, n2, k]`` (compensated)."""
    c1, c2, nk = a.shape
    out = np.zeros((c1 + c2 - 1, nk))
    for n in range(c1 + c2 - 1):
        lo, hi = max(0, n - c2 + 1), min(n, c1 - 1)
        n1 = np.arange(lo, hi + 1)
        diag = a[n1, n - n1, :]
        out[n] = [math.fsum(diag[:, k]) for k in range(nk)]
    return out


def marginal(dist: StationaryDistribution, query: str) -> Marginal:
    a = dist.as_array()
    if query == Y:
        return Marginal(_fsum_axes(a, 2), 1.0)
    if query == X1:
        return Marginal(_fsum_axes(a, 0), 1.0)
    if query == X2:
        return Marginal(_fsum_axes(a, 1), 1.0)
    if query == X1_GIVEN_Y_POS:
        joint = _fsum_axes(a[:, :, 1:], 0)
        mass = math.fsum(joint)
        if mass <= 0.0:
            raise ValueError("conditioning event Y>0 has zero mass")
        return Marginal(joint / mass, mass)
    if query == X_TOTAL:
        fib = total_queue_fibers(a)
        return Marginal(np.array([math.fsum(r) for r in fib]), 1.0)
    if query == JOINT:
        return Marginal(total_queue_fibers(a), 1.0)
    raise ValueError(f"unknown query {query!r}; expected one of {QUERIES}")
