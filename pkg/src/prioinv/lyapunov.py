"""Foster-Lyapunov certificate for the queueing-inventory process.

Lyapunov function ``L(n1, n2, k) = n1 + n2 + alpha(k)`` with
``alpha(k) = (b - k) * eta / (2 mu)`` and ``eta = mu - lambda1 - lambda2``.
Outside the exception set ``F = {n1 + n2 = 0}`` the generator drift is
bounded by ``-eps`` with ``eps = (eta / 2) * min(1, nu / mu)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import ModelParams, check_state, transitions
from .solver import TruncationSpec

# Slack on the drift comparison; drifts at k = 0 can equal -eps exactly.
DRIFT_ATOL = 1e-12


class Ergodicity(NamedTuple):
    stable: bool
    eta: float
    epsilon: float
    sharp: bool  # True when the condition is also necessary (p = 1)

    @property
    def tag(self) -> str:
        return "sharp" if self.sharp else "sufficient only"


def check_ergodicity(params: ModelParams) -> Ergodicity:
    eta = params.mu - params.lambda1 - params.lambda2
    eps = 0.5 * eta * min(1.0, params.nu / params.mu)
    stable = params.lambda1 + params.lambda2 < params.mu
    return Ergodicity(stable, eta, eps, params.p == 1.0)


@dataclass(frozen=True)
class LyapunovCertificate:
    alpha: tuple[float, ...]
    eta: float
    epsilon: float

    @property
    def applicable(self) -> bool:
        return self.eta > 0

    @staticmethod
    def in_exception_set(z) -> bool:
        return z[0] + z[1] == 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "LyapunovCertificate":
        erg = check_ergodicity(params)
        step = erg.eta / (2.0 * params.mu)
        alpha = tuple((params.b - k) * step for k in range(params.b + 1))
        return cls(alpha, erg.eta, erg.epsilon)


def lyapunov_value(cert: LyapunovCertificate, z) -> float:
    n1, n2, k = z
    return n1 + n2 + cert.alpha[k]


def drift(params: ModelParams, cert: LyapunovCertificate, z) -> float:
    """``(Q L)(z)``: sum over neighbours of rate * (L(target) - L(z))."""
    z = check_state(params, z)
    here = lyapunov_value(cert, z)
    return sum(t.rate * (lyapunov_value(cert, t.target) - here) for t in transitions(params, z))


@dataclass
class DriftReport:
    box: tuple[int, int, int]
    epsilon: float
    eta: float
    applicable: bool
    max_drift_outside_F: float
    violations: list = field(default_factory=list)
    drift_on_F: list = field(default_factory=list)
    states: np.ndarray = field(default=None, repr=False)
    drifts: np.ndarray = field(default=None, repr=False)
    atol: float = DRIFT_ATOL

    @property
    def ok(self) -> bool:
        return self.applicable and not self.violations

    def summary(self) -> dict:
        return {
            "box": list(self.box),
            "eta": self.eta,
            "epsilon": self.epsilon,
            "applicable": self.applicable,
            "max_drift_outside_F": self.max_drift_outside_F,
            "n_violations": len(self.violations),
            "n_states": 0 if self.states is None else int(len(self.states)),
            "atol": self.atol,
        }

    def rows(self):
        """(n1, n2, k, drift, in_F, violation) per evaluated state."""
        for (n1, n2, k), d in zip(self.states, self.drifts):
            in_f = n1 + n2 == 0
            yield int(n1), int(n2), int(k), float(d), in_f, (not in_f) and d > -self.epsilon + self.atol


def verify_drift_bound(params: ModelParams, box: TruncationSpec, atol: float = DRIFT_ATOL) -> DriftReport:
    """Evaluate the drift on every state of the box and check it against -eps.

    With ``eta <= 0`` the certificate does not apply; the report is returned
    flagged ``applicable=False`` and no states are evaluated.
    """
    cert = LyapunovCertificate.for_params(params)
    dims = (box.cap1, box.cap2, params.b)
    if not cert.applicable:
        return DriftReport(dims, cert.epsilon, cert.eta, False, float("nan"), atol=atol)
    states = np.indices((box.cap1 + 1, box.cap2 + 1, params.b + 1)).reshape(3, -1).T
    drifts = np.array([drift(params, cert, z) for z in states.tolist()])
    in_f = states[:, 0] + states[:, 1] == 0
    outside = drifts[~in_f]
    max_out = float(outside.max()) if outside.size else float("-inf")
    bound = -cert.epsilon + atol
    violations = [(tuple(z), float(d)) for z, d, f in zip(states.tolist(), drifts, in_f)
                  if not f and d > bound]
    on_f = [(tuple(z), float(d)) for z, d, f in zip(states.tolist(), drifts, in_f) if f]
    return DriftReport(dims, cert.epsilon, cert.eta, True, max_out, violations, on_f,
                       states, drifts, atol)
