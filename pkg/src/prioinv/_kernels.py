"""Compiled inner loops (numba) for the GTH solve and the event simulator."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def gth_band(A, w):
    """In-place GTH elimination on a band-stored rate matrix.

    ``A[i, w + j - i]`` holds the rate i -> j for ``|i - j| <= w``; the
    diagonal slot is ignored.  Returns ``(pi, bad)`` where ``bad`` is the
    first state (counting down) with no outflow to lower states, or -1.
    """
    n = A.shape[0]
    pi = np.zeros(n)
    for m in range(n - 1, 0, -1):
        lo = max(0, m - w)
        s = 0.0
        for l in range(lo, m):
            s += A[m, w + l - m]
        if s <= 0.0:
            return pi, m
        for j in range(lo, m):
            A[j, w + m - j] /= s
        for j in range(lo, m):
            c = A[j, w + m - j]
            if c == 0.0:
                continue
            for l in range(lo, m):
                r = A[m, w + l - m]
                if r != 0.0:
                    A[j, w + l - j] += c * r
    pi[0] = 1.0
    for j in range(1, n):
        lo = max(0, j - w)
        acc = 0.0
        for i in range(lo, j):
            acc += pi[i] * A[i, w + j - i]
        pi[j] = acc
    total = 0.0
    for j in range(n):
        total += pi[j]
    for j in range(n):
        pi[j] /= total
    return pi, -1


# Event codes shared with simulator.EVENT_NAMES.
EV_A1, EV_A2, EV_S1, EV_S2, EV_R, EV_L1, EV_L2 = 0, 1, 2, 3, 4, 5, 6


@njit(cache=True)
def simulate_chunk(state, u, lam1, lam2, mu, nu, p, s, b,
                   ymass, x1area, x2area, counts, log_t, log_ev, log_state, t0):
    """Advance the trajectory by ``u.shape[0]`` events.

    Each event consumes three uniforms: holding time, event choice,
    admission coin.  Arrival streams run at full rate lam1/lam2 so that
    lost demand is visible; blocked arrivals are self-loops.  Occupation
    time per inventory level goes into ``ymass``; ``x1area``/``x2area``
    are time integrals of the queue lengths.  Returns the elapsed time.
    """
    n1, n2, k = state[0], state[1], state[2]
    elapsed = 0.0
    logging = log_ev.shape[0] > 0
    for e in range(u.shape[0]):
        serve = mu if (k > 0 and n1 + n2 > 0) else 0.0
        repl = nu if k < b else 0.0
        total = lam1 + lam2 + serve + repl
        dt = -math.log1p(-u[e, 0]) / total
        elapsed += dt
        ymass[k] += dt
        x1area[0] += n1 * dt
        x2area[0] += n2 * dt
        x = u[e, 1] * total
        # ordinary arrivals (always positive rate) last, absorbing x == total
        if x < repl:
            k += 1
            ev = EV_R
        elif x < repl + serve:
            k -= 1
            if n1 > 0:
                n1 -= 1
                ev = EV_S1
            else:
                n2 -= 1
                ev = EV_S2
        elif x < repl + serve + lam1:
            if k > 0:
                n1 += 1
                ev = EV_A1
            else:
                ev = EV_L1
        else:
            if k == 0:
                ev = EV_L2
            elif k <= s and u[e, 2] >= p:
                ev = EV_L2
            else:
                n2 += 1
                ev = EV_A2
        counts[ev] += 1
        if logging:
            log_t[e] = t0 + elapsed
            log_ev[e] = ev
            log_state[e, 0] = n1
            log_state[e, 1] = n2
            log_state[e, 2] = k
    state[0], state[1], state[2] = n1, n2, k
    return elapsed
