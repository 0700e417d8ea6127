# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bounded-variable simplex kernel; same contract as _simplex_py."""

from libc.math cimport INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF OPTIMAL = 0
DEF ITERATION_LIMIT = 2


def simplex_kernel(double[::1] cost, double[::1] lam, double[::1] x, double rhs,
                   Py_ssize_t max_iter, double tol=1e-12, bint flip_pivot_sign=False):
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t i, j, basic = -1, iters = 0
    cdef double slack = rhs, pi, d, sigma, a_j, t_flip, t_basic, rate, xb, t
    cdef bint found

    for i in range(n):
        slack -= lam[i] * x[i]

    while True:
        if basic < 0:
            pi = 0.0
        else:
            pi = cost[basic] / lam[basic]
            if flip_pivot_sign:
                pi = -pi

        found = False
        for i in range(n):
            if i == basic:
                continue
            d = cost[i] - pi * lam[i]
            if x[i] > 0.5:
                if d > tol:
                    found = True
                    sigma = -1.0
                    break
            elif d < -tol:
                found = True
                sigma = 1.0
                break
        if found:
            j = i
            a_j = lam[j]
            t_flip = 1.0
        elif basic >= 0 and -pi < -tol:
            j = n
            sigma = 1.0
            a_j = 1.0
            t_flip = INFINITY
        else:
            return OPTIMAL, iters, basic

        if iters >= max_iter:
            return ITERATION_LIMIT, iters, basic
        iters += 1

        if basic < 0:
            rate = -a_j * sigma
            t_basic = slack / -rate if rate < 0 else INFINITY
        else:
            rate = -(a_j / lam[basic]) * sigma
            xb = x[basic]
            if rate < 0:
                t_basic = xb / -rate
            elif rate > 0:
                t_basic = (1.0 - xb) / rate
            else:
                t_basic = INFINITY

        if t_flip <= t_basic:
            x[j] = 1.0 - x[j]
            if basic < 0:
                slack += rate
            else:
                x[basic] += rate
            continue

        t = t_basic
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
