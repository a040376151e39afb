"""Derivative-free downhill-simplex minimizer.

Kept self-contained so the likelihood fits control two things exactly:
the initial simplex is built with additive per-coordinate steps (which
preserves location equivariance of the fits), and convergence is declared
when the simplex diameter in parameter space falls below a tolerance.

Objectives may return +inf for infeasible points; the start point must be
feasible. The best vertex never worsens, so the returned value is always
at most the objective at the start point.
"""
from __future__ import annotations

import numpy as np

_ALPHA = 1.0   # reflection
_GAMMA = 2.0   # expansion
_RHO = 0.5     # contraction
_SIGMA = 0.5   # shrink


def nelder_mead(fn, x0, steps, max_iter: int = 2000, diam_tol: float = 1e-8):
    """Minimize fn from x0.

    steps: per-coordinate offsets used to build the initial simplex.
    Returns (x_best, f_best, converged).
    """
    x0 = np.asarray(x0, dtype=float)
    steps = np.asarray(steps, dtype=float)
    n = x0.size
    verts = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += steps[i]
        verts.append(v)
    verts = np.asarray(verts)
    fvals = np.asarray([fn(v) for v in verts])

    converged = False
    for _ in range(max_iter):
        order = np.argsort(fvals, kind="stable")
        verts = verts[order]
        fvals = fvals[order]
        diam = np.max(np.abs(verts[1:] - verts[0]))
        if diam < diam_tol:
            converged = True
            break

        centroid = verts[:-1].mean(axis=0)
        worst = verts[-1]
        reflected = centroid + _ALPHA * (centroid - worst)
        f_r = fn(reflected)
        if fvals[0] <= f_r < fvals[-2]:
            verts[-1], fvals[-1] = reflected, f_r
            continue
        if f_r < fvals[0]:
            expanded = centroid + _GAMMA * (reflected - centroid)
            f_e = fn(expanded)
            if f_e < f_r:
                verts[-1], fvals[-1] = expanded, f_e
            else:
                verts[-1], fvals[-1] = reflected, f_r
            continue
        # reflection no better than second-worst: contract
        if f_r < fvals[-1]:
            contracted = centroid + _RHO * (reflected - centroid)
        else:
            contracted = centroid + _RHO * (worst - centroid)
        f_c = fn(contracted)
        if f_c < min(f_r, fvals[-1]):
            verts[-1], fvals[-1] = contracted, f_c
            continue
        # shrink toward the best vertex
        for i in range(1, n + 1):
            verts[i] = verts[0] + _SIGMA * (verts[i] - verts[0])
            fvals[i] = fn(verts[i])

    best = int(np.argmin(fvals))
    return verts[best].copy(), float(fvals[best]), converged
