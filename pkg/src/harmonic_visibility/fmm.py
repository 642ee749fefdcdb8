"""Fast-marching kernels for diagonal metrics ``dt^2 + J(s, t)^2 ds^2``.

The Eikonal equation ``(T_s / J)^2 + T_t^2 = 1`` is discretized with the
first-order upwind quadratic on a regular ``(s, t)`` grid. Because the metric
is diagonal and grid aligned, the four-neighbour update is causal and the
standard Dijkstra-like ordering applies.

Conformal factors are identified by an integer code so kernels stay
compiled: 0 flat, 1 ``1 + s^2 t^2``, 2 ``1 + eps (1 + sin(s)/2) t^2``.
"""
from __future__ import annotations

import heapq
import math

import numba
import numpy as np

FLAT, EX1, EX2 = 0, 1, 2

FAR, TRIAL, ACCEPTED = 0, 1, 2

# return codes of march()
OK = 0
ORDER_VIOLATION = 1


@numba.njit(cache=True)
def conformal(code, eps, s, t):
    if code == EX1:
        return 1.0 + s * s * t * t
    if code == EX2:
        return 1.0 + eps * (1.0 + 0.5 * math.sin(s)) * t * t
    return 1.0


@numba.njit(cache=True)
def _local_update(a, alpha, b, beta):
    """Solve ((T-a)/alpha)^2 + ((T-b)/beta)^2 = 1 upwind; inf marks a missing side."""
    if a == np.inf and b == np.inf:
        return np.inf
    if a == np.inf:
        return b + beta
    if b == np.inf:
        return a + alpha
    one_sided = min(a + alpha, b + beta)
    aa, bb = alpha * alpha, beta * beta
    disc = aa + bb - (a - b) * (a - b)
    if disc < 0.0:
        return one_sided
    t = (a * bb + b * aa + alpha * beta * math.sqrt(disc)) / (aa + bb)
    if t < max(a, b):
        return one_sided
    return min(t, one_sided)


@numba.njit(cache=True)
def march(values, fixed, jac, hs, ht, stop):
    """Run fast marching in place.

    ``values`` holds initial values (``inf`` for unknown nodes); nodes with
    ``fixed`` set keep their initial value and seed the front. Nodes whose
    value would exceed ``stop`` are left at ``inf``.

    Returns ``(code, n_accepted)``; ``code != OK`` signals an ordering
    violation.
    """
    ns, nt = values.shape
    status = np.zeros((ns, nt), dtype=np.int8)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for i in range(ns):
        for j in range(nt):
            if fixed[i, j] and values[i, j] < np.inf:
                status[i, j] = TRIAL
                heapq.heappush(heap, (values[i, j], np.int64(i * nt + j)))
            elif not fixed[i, j]:
                values[i, j] = np.inf

    last = -np.inf
    n_acc = 0
    di = (1, -1, 0, 0)
    dj = (0, 0, 1, -1)
    while len(heap) > 0:
        v, k = heapq.heappop(heap)
        i = k // nt
        j = k - i * nt
        if status[i, j] == ACCEPTED or v > values[i, j]:
            continue
        if v > stop:
            break
        tol = 1e-12 * max(1.0, abs(v))
        if v < last - tol:
            return ORDER_VIOLATION, n_acc
        last = max(last, v)
        status[i, j] = ACCEPTED
        n_acc += 1
        for d in range(4):
            ii = i + di[d]
            jj = j + dj[d]
            if ii < 0 or ii >= ns or jj < 0 or jj >= nt:
                continue
            if status[ii, jj] == ACCEPTED or fixed[ii, jj]:
                continue
            a = np.inf
            if ii > 0 and status[ii - 1, jj] == ACCEPTED:
                a = values[ii - 1, jj]
            if ii < ns - 1 and status[ii + 1, jj] == ACCEPTED:
                a = min(a, values[ii + 1, jj])
            b = np.inf
            if jj > 0 and status[ii, jj - 1] == ACCEPTED:
                b = values[ii, jj - 1]
            if jj < nt - 1 and status[ii, jj + 1] == ACCEPTED:
                b = min(b, values[ii, jj + 1])
            cand = _local_update(a, jac[ii, jj] * hs, b, ht)
            if cand < values[ii, jj]:
                values[ii, jj] = cand
                status[ii, jj] = TRIAL
                heapq.heappush(heap, (cand, np.int64(ii * nt + jj)))

    for i in range(ns):
        for j in range(nt):
            if status[i, j] != ACCEPTED:
                values[i, j] = np.inf
    return OK, n_acc


@numba.njit(cache=True)
def seed_points(values, fixed, s0, t0, hs, ht, ps, pt, radius_cells, code, eps):
    """Initialize nodes near point sources with a locally frozen metric distance."""
    ns, nt = values.shape
    for m in range(ps.shape[0]):
        ci = int(round((ps[m] - s0) / hs))
        cj = int(round((pt[m] - t0) / ht))
        for i in range(ci - radius_cells, ci + radius_cells + 1):
            if i < 0 or i >= ns:
                continue
            s = s0 + i * hs
            for j in range(cj - radius_cells, cj + radius_cells + 1):
                if j < 0 or j >= nt:
                    continue
                t = t0 + j * ht
                jm = conformal(code, eps, 0.5 * (s + ps[m]), 0.5 * (t + pt[m]))
                ds = (s - ps[m]) * jm
                dt = t - pt[m]
                d = math.sqrt(ds * ds + dt * dt)
                if d < values[i, j]:
                    values[i, j] = d
                fixed[i, j] = True


@numba.njit(cache=True)
def _tri_clip(xs, ys, fs, out_x, out_y):
    """Polygon ``{f <= 0}`` of a triangle with linear ``f``; returns vertex count."""
    n = 0
    for k in range(3):
        kn = (k + 1) % 3
        fa, fb = fs[k], fs[kn]
        if fa <= 0.0:
            out_x[n] = xs[k]
            out_y[n] = ys[k]
            n += 1
        if (fa <= 0.0) != (fb <= 0.0):
            w = fa / (fa - fb)
            out_x[n] = xs[k] + w * (xs[kn] - xs[k])
            out_y[n] = ys[k] + w * (ys[kn] - ys[k])
            n += 1
    return n


@numba.njit(cache=True)
def sublevel_integral(values, s0, t0, hs, ht, level, code, eps):
    """Integral of ``J`` over ``{T <= level}`` with linear interpolation on cell triangles."""
    ns, nt = values.shape
    g = 0.5 / math.sqrt(3.0)
    total = 0.0
    xs = np.empty(3)
    ys = np.empty(3)
    fs = np.empty(3)
    px = np.empty(4)
    py = np.empty(4)
    for i in range(ns - 1):
        sa = s0 + i * hs
        for j in range(nt - 1):
            ta = t0 + j * ht
            v00 = values[i, j]
            v10 = values[i + 1, j]
            v01 = values[i, j + 1]
            v11 = values[i + 1, j + 1]
            vmax = max(max(v00, v10), max(v01, v11))
            vmin = min(min(v00, v10), min(v01, v11))
            if vmin > level:
                continue
            if vmax <= level:
                # 2x2 Gauss rule on the full cell
                acc = 0.0
                for gs in (0.5 - g, 0.5 + g):
                    for gt in (0.5 - g, 0.5 + g):
                        acc += conformal(code, eps, sa + gs * hs, ta + gt * ht)
                total += 0.25 * acc * hs * ht
                continue
            f00 = min(v00, 1e300) - level
            f10 = min(v10, 1e300) - level
            f01 = min(v01, 1e300) - level
            f11 = min(v11, 1e300) - level
            for tri in range(2):
                if tri == 0:
                    xs[0], ys[0], fs[0] = sa, ta, f00
                    xs[1], ys[1], fs[1] = sa + hs, ta, f10
                    xs[2], ys[2], fs[2] = sa + hs, ta + ht, f11
                else:
                    xs[0], ys[0], fs[0] = sa, ta, f00
                    xs[1], ys[1], fs[1] = sa + hs, ta + ht, f11
                    xs[2], ys[2], fs[2] = sa, ta + ht, f01
                n = _tri_clip(xs, ys, fs, px, py)
                for k in range(1, n - 1):
                    ax, ay = px[0], py[0]
                    bx, by = px[k], py[k]
                    cx, cy = px[k + 1], py[k + 1]
                    area = 0.5 * abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))
                    total += area * conformal(code, eps, (ax + bx + cx) / 3.0, (ay + by + cy) / 3.0)
    return total
