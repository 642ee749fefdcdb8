"""Independent reference computations used by the test suite.

Nothing here calls the closed-form solvers under test; distances are
evaluated directly from coordinates.
"""
import math

import numpy as np
from scipy import optimize

from harmonic_visibility import numerics


def point_distance(hyperbolic, p, q):
    if not hyperbolic:
        return math.dist(p, q)
    pairing = p[0] * q[0] - sum(a * b for a, b in zip(p[1:], q[1:]))
    return math.acosh(max(pairing, 1.0))


def ray_point(hyperbolic, u, t):
    if not hyperbolic:
        return [t * c for c in u]
    return [math.cosh(t)] + [math.sinh(t) * c for c in u]


def first_hit_by_root(hyperbolic, p, u, rho, r_max):
    """Smallest t in [0, r_max] with d(p, gamma(t)) <= rho, via minimization and bracketing.

    ``t -> d(p, gamma(t))`` is convex in both geometries, so the hit set is an
    interval: locate the minimizer, then bracket the left crossing.
    """
    f = lambda t: point_distance(hyperbolic, p, ray_point(hyperbolic, u, t)) - rho
    if f(0.0) <= 0.0:
        return 0.0
    res = optimize.minimize_scalar(f, bounds=(0.0, r_max), method="bounded", options={"xatol": 1e-12})
    t_min = float(res.x)
    if f(t_min) > 0.0:
        return math.inf
    return numerics.find_root(f, (0.0, t_min), abs_tol=1e-13)


def visible_range_by_scan(hyperbolic, points, u, rho, r_max, step=1e-4):
    """First grid parameter at which some point lies within ``rho`` of the ray."""
    t = np.arange(0.0, r_max + step / 2, step)
    if len(points) == 0:
        return math.inf
    pts = np.asarray(points, dtype=float)
    u = np.asarray(u, dtype=float)
    if not hyperbolic:
        ray = t[:, None] * u
        d2 = np.sum((ray[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        hit = d2 <= rho * rho
    else:
        spatial = pts[:, 1:] @ u
        pairing = np.cosh(t)[:, None] * pts[None, :, 0] - np.sinh(t)[:, None] * spatial[None, :]
        hit = pairing <= math.cosh(rho)
    rows = np.flatnonzero(hit.any(axis=1))
    return float(t[rows[0]]) if rows.size else math.inf


def stadium_distance(s, t, r):
    """Euclidean distance from ``(s, t)`` to the segment ``[0, r] x {0}``."""
    ds = np.maximum(np.maximum(-s, s - r), 0.0)
    return np.hypot(ds, t)
