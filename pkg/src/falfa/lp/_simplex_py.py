"""Pure-Python (numpy-vectorised) bounded-variable simplex kernel.

Solves  min c.x  s.t.  a.x + s = rhs,  0 <= x <= 1,  s >= 0
for a single constraint row with a_j in {+1, -1}.  The caller supplies a
feasible starting point with every x at a bound; the slack starts basic.
Entering and leaving choices follow Bland's rule (lowest index first).

Mirrors ``_simplex.pyx`` line for line; keep the two in sync.
"""
from __future__ import annotations

import numpy as np

OPTIMAL = 0
ITERATION_LIMIT = 2


def simplex_kernel(cost, lam, x, rhs, max_iter, tol=1e-12, flip_pivot_sign=False):
    """Run the simplex in place on `x`.

    Returns ``(status, iterations, basic)`` where ``basic`` is the index of
    the basic structural variable, or -1 when the slack is basic.
    """
    n = len(cost)
    slack = rhs - float(lam @ x)
    basic = -1
    iters = 0
    while True:
        if basic < 0:
            pi = 0.0
        else:
            pi = cost[basic] / lam[basic]
            if flip_pivot_sign:
                pi = -pi
        d = cost - pi * lam
        at_upper = x > 0.5
        cand = np.where(at_upper, d > tol, d < -tol)
        if basic >= 0:
            cand[basic] = False
        hits = np.flatnonzero(cand)
        if len(hits):
            j = int(hits[0])
            sigma = -1.0 if at_upper[j] else 1.0
            a_j = lam[j]
            t_flip = 1.0
        elif basic >= 0 and -pi < -tol:
            j = n  # slack enters from 0
            sigma = 1.0
            a_j = 1.0
            t_flip = np.inf
        else:
            return OPTIMAL, iters, basic

        if iters >= max_iter:
            return ITERATION_LIMIT, iters, basic
        iters += 1

        # rate of change of the basic variable per unit step of the entering one
        if basic < 0:
            rate = -a_j * sigma
            t_basic = slack / -rate if rate < 0 else np.inf
        else:
            rate = -(a_j / lam[basic]) * sigma
            xb = x[basic]
            if rate < 0:
                t_basic = xb / -rate
            elif rate > 0:
                t_basic = (1.0 - xb) / rate
            else:
                t_basic = np.inf

        if t_flip <= t_basic:
            x[j] = 1.0 - x[j]
            if basic < 0:
                slack += rate
            else:
                x[basic] += rate
            continue

        t = t_basic
        # leaving variable lands exactly on the bound it hit
        if basic < 0:
            slack = 0.0
        else:
            x[basic] = 0.0 if rate < 0 else 1.0
        if j == n:
            slack = t
            basic = -1
        else:
            x[j] += sigma * t
            basic = j
