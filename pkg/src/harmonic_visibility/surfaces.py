"""Warped metrics ``dt^2 + J^2 ds^2`` along a distinguished geodesic axis.

* ``ex1``: ``J = 1 + s^2 t^2``. Tube volumes grow like ``2 rho^3 r^3 / 9``,
  so visible ranges along the axis have Weibull-type tails with exponent 3.
* ``ex2``: ``J = 1 + eps q(s) t^2`` with ``q(s) = 1 + sin(s)/2``. Tubes are
  asymptotically linear and visible ranges decay at an exponential rate.
* ``ex3``: the n-dimensional analogue ``J = 1 + eps q(s) |y|^2``, handled
  analytically only.

Tube volumes are measured with fast marching (:mod:`.fmm`) and checked
against the strip/box sandwich
``[0, r] x [-rho, rho] <= T_rho <= [-rho, r + rho] x [-rho, rho]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import fmm, numerics
from .errors import BoundViolationError, FastMarchingError, InputError, PointCountError
from .harmonic import BooleanModel, euclidean_ball_volume
from .montecarlo import CENSORED, EmpiricalVisibility
from .numerics import LineFit, RngStream

KINDS = ("ex1", "ex2", "ex3")
MAX_POINTS = 100_000
SEED_RADIUS_CELLS = 4


def default_q(s):
    return 1.0 + 0.5 * np.sin(s)


def default_q_integral(r):
    """Closed form of the integral of ``1 + sin(s)/2`` over ``[0, r]``."""
    return r + 0.5 * (1.0 - np.cos(r))


@dataclass(frozen=True)
class WarpedSurface:
    """One of the three warped counterexample metrics.

    A custom transverse profile ``q`` needs its Cesaro mean ``qbar``; only
    the default ``q`` is available to the fast-marching solver.
    """

    kind: str
    eps: float = 0.0
    n: int = 2
    q: Callable | None = field(default=None, compare=False, repr=False)
    qbar: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown surface {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("ex2", "ex3") and not self.eps > 0:
            raise InputError(f"{self.kind} needs eps > 0, got {self.eps}")
        if self.kind == "ex3" and self.n < 2:
            raise InputError(f"ex3 needs n >= 2, got {self.n}")
        if self.kind != "ex3" and self.n != 2:
            raise InputError(f"{self.kind} is two-dimensional")
        if self.q is not None and self.qbar is None:
            raise InputError("a custom q needs its Cesaro mean qbar")

    @property
    def q_func(self):
        return default_q if self.q is None else self.q

    @property
    def q_mean(self) -> float:
        return 1.0 if self.q is None else float(self.qbar)

    @property
    def fmm_code(self) -> int:
        if self.kind == "ex1":
            return fmm.EX1
        if self.kind == "ex2" and self.q is None:
            return fmm.EX2
        raise InputError(f"{self.kind} surface with this profile has no distance-field solver (analytic only)")

    def q_integral(self, r: float) -> float:
        if self.q is None:
            return float(default_q_integral(r))
        return numerics.integrate(self.q, (0.0, r))


def Ex1() -> WarpedSurface:
    return WarpedSurface("ex1")


def Ex2(eps: float, q=None, qbar=None) -> WarpedSurface:
    return WarpedSurface("ex2", eps=eps, q=q, qbar=qbar)


def Ex3(n: int, eps: float, q=None, qbar=None) -> WarpedSurface:
    return WarpedSurface("ex3", eps=eps, n=n, q=q, qbar=qbar)


def conformal_factor(surface: WarpedSurface, s, t_or_y):
    """``J`` at ``(s, t)``; for ``ex3`` the last axis of ``t_or_y`` holds ``y``.

    ``J`` is also the Riemannian volume density in ``(s, t)`` / ``(s, y)``
    coordinates.
    """
    s = np.asarray(s, dtype=float)
    x = np.asarray(t_or_y, dtype=float)
    if surface.kind == "ex1":
        out = 1.0 + s**2 * x**2
    elif surface.kind == "ex2":
        out = 1.0 + surface.eps * surface.q_func(s) * x**2
    else:
        y2 = np.sum(x**2, axis=-1) if x.ndim and x.shape[-1] == surface.n - 1 else x**2
        out = 1.0 + surface.eps * surface.q_func(s) * y2
    return float(out) if np.ndim(out) == 0 else out


def volume_element(surface: WarpedSurface, s, t_or_y):
    return conformal_factor(surface, s, t_or_y)


def gaussian_curvature(surface: WarpedSurface, s, t):
    """``K = -J_tt / J`` for the two-dimensional examples."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if surface.kind == "ex1":
        out = -2.0 * s**2 / (1.0 + s**2 * t**2)
    elif surface.kind == "ex2":
        qs = surface.q_func(s)
        out = -2.0 * surface.eps * qs / (1.0 + surface.eps * qs * t**2)
    else:
        raise InputError("Gaussian curvature is defined for the surfaces ex1 and ex2 only")
    return float(out) if np.ndim(out) == 0 else out


def gaussian_curvature_fd(surface: WarpedSurface, s, t, h: float = 1e-4):
    """Central-difference version of :func:`gaussian_curvature`."""
    if surface.kind == "ex3":
        raise InputError("Gaussian curvature is defined for the surfaces ex1 and ex2 only")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    j0 = conformal_factor(surface, s, t)
    jtt = (conformal_factor(surface, s, t + h) - 2.0 * j0 + conformal_factor(surface, s, t - h)) / h**2
    return -jtt / j0


def _check_rho_r(rho, r):
    if not rho > 0:
        raise InputError(f"rho must be positive, got {rho}")
    if r < 0:
        raise InputError(f"r must be nonnegative, got {r}")


def transverse_moment(n: int, rho: float) -> float:
    """Integral of ``|y|^2`` over the ball of radius ``rho`` in R^{n-1}."""
    return (n - 1) * euclidean_ball_volume(n - 1) / (n + 1) * rho ** (n + 1)


def strip_tube_volume(surface: WarpedSurface, rho: float, r: float) -> float:
    """Exact volume of the main strip ``[0, r] x B(0, rho)`` of the tube."""
    _check_rho_r(rho, r)
    if surface.kind == "ex1":
        return 2.0 * rho * r + 2.0 * rho**3 / 9.0 * r**3
    if surface.kind == "ex2":
        return 2.0 * rho * r + 2.0 * surface.eps * rho**3 / 3.0 * surface.q_integral(r)
    n = surface.n
    kappa = euclidean_ball_volume(n - 1)
    return kappa * rho ** (n - 1) * r + surface.eps * transverse_moment(n, rho) * surface.q_integral(r)


def tube_volume_bounds(surface: WarpedSurface, rho: float, r: float) -> tuple[float, float]:
    """Strip lower bound and box upper bound for the ``ex1`` tube volume."""
    if surface.kind != "ex1":
        raise InputError("closed-form tube bounds are implemented for ex1")
    _check_rho_r(rho, r)
    lower = 2.0 * rho * r + 2.0 * rho**3 / 9.0 * r**3
    upper = 2.0 * rho * (r + 2.0 * rho) + 2.0 * rho**3 / 9.0 * ((r + rho) ** 3 + rho**3)
    return lower, upper


def _box_bounds(surface: WarpedSurface, rho: float, r: float) -> tuple[float, float]:
    """Sandwich for any 2-D surface: strip below, box ``[-rho, r + rho] x [-rho, rho]`` above."""
    if surface.kind == "ex1":
        return tube_volume_bounds(surface, rho, r)
    lower = strip_tube_volume(surface, rho, r)
    eps = surface.eps

    def column(s):
        return 2.0 * rho + 2.0 * eps * rho**3 / 3.0 * surface.q_func(s)

    upper = numerics.integrate(column, (-rho, r + rho))
    return lower, upper


def asymptotic_rate(surface: WarpedSurface, model: BooleanModel) -> float:
    """Limit of ``-log P(R > r | o uncovered) / r`` along the axis."""
    rho = model.rho
    if surface.kind == "ex2":
        return model.lam * (2.0 * rho + 2.0 * surface.eps * rho**3 / 3.0 * surface.q_mean)
    if surface.kind == "ex3":
        n = surface.n
        kappa = euclidean_ball_volume(n - 1)
        return model.lam * (kappa * rho ** (n - 1) + surface.eps * surface.q_mean * transverse_moment(n, rho))
    raise InputError("ex1 has no exponential rate: its tube volume grows cubically")


# ---------------------------------------------------------------------------
# Distance fields


@dataclass(frozen=True)
class DistanceField:
    s: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    seed: str
    code: int = fmm.FLAT
    eps: float = 0.0

    @property
    def hs(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def ht(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def s_range(self) -> numerics.Interval:
        return numerics.Interval(float(self.s[0]), float(self.s[-1]))

    @property
    def t_range(self) -> numerics.Interval:
        return numerics.Interval(float(self.t[0]), float(self.t[-1]))

    def jacobian(self) -> np.ndarray:
        ss, tt = np.meshgrid(self.s, self.t, indexing="ij")
        return _jac(self.code, self.eps, ss, tt)

    def interpolate(self, s, t):
        """Bilinear interpolation; points outside the grid get ``inf``."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        fi = (s - self.s[0]) / self.hs
        fj = (t - self.t[0]) / self.ht
        inside = (fi >= 0) & (fi <= len(self.s) - 1) & (fj >= 0) & (fj <= len(self.t) - 1)
        i = np.clip(np.floor(fi).astype(int), 0, len(self.s) - 2)
        j = np.clip(np.floor(fj).astype(int), 0, len(self.t) - 2)
        a = np.clip(fi - i, 0.0, 1.0)
        b = np.clip(fj - j, 0.0, 1.0)
        v = self.values
        with np.errstate(invalid="ignore"):
            out = (
                (1 - a) * (1 - b) * v[i, j]
                + a * (1 - b) * v[i + 1, j]
                + (1 - a) * b * v[i, j + 1]
                + a * b * v[i + 1, j + 1]
            )
        out = np.where(inside & np.isfinite(out), out, np.inf)
        return float(out) if out.ndim == 0 else out

    def sublevel_volume(self, level: float) -> float:
        """Riemannian volume of ``{T <= level}``."""
        return float(
            fmm.sublevel_integral(self.values, self.s[0], self.t[0], self.hs, self.ht, level, self.code, self.eps)
        )

    def eikonal_residual(self) -> np.ndarray:
        """Upwind ``(D_s T / J)^2 + (D_t T)^2`` at interior nodes (nan where undefined)."""
        v = self.values
        jac = self.jacobian()
        with np.errstate(invalid="ignore"):
            ds = np.maximum(np.maximum(v[1:-1, 1:-1] - v[:-2, 1:-1], v[1:-1, 1:-1] - v[2:, 1:-1]), 0.0) / self.hs
            dt = np.maximum(np.maximum(v[1:-1, 1:-1] - v[1:-1, :-2], v[1:-1, 1:-1] - v[1:-1, 2:]), 0.0) / self.ht
            res = (ds / jac[1:-1, 1:-1]) ** 2 + dt**2
        return np.where(np.isfinite(res), res, np.nan)


def _jac(code, eps, ss, tt):
    if code == fmm.EX1:
        return 1.0 + ss**2 * tt**2
    if code == fmm.EX2:
        return 1.0 + eps * default_q(ss) * tt**2
    return np.ones_like(ss)


def _axis_grid(lo: float, hi: float, h: float, anchor_hi: float | None = None) -> np.ndarray:
    """Nodes ``k * h`` covering ``[lo, hi]``, with a node at 0 (and at ``anchor_hi`` if given)."""
    if anchor_hi is not None and anchor_hi > 0:
        h = anchor_hi / math.ceil(anchor_hi / h - 1e-9)
    k_lo = math.floor(lo / h + 1e-9)
    k_hi = math.ceil(hi / h - 1e-9)
    return np.arange(k_lo, k_hi + 1) * h


def _run_march(values, fixed, s, t, code, eps, stop):
    ss, tt = np.meshgrid(s, t, indexing="ij")
    jac = _jac(code, eps, ss, tt)
    status, _ = fmm.march(values, fixed, jac, float(s[1] - s[0]), float(t[1] - t[0]), float(stop))
    if status != fmm.OK:
        raise FastMarchingError("fast-marching front accepted a node out of order")


def _code_of(surface) -> tuple[int, float]:
    if surface is None:
        return fmm.FLAT, 0.0
    return surface.fmm_code, float(surface.eps)


def solve_distance_field(
    surface: WarpedSurface | None,
    r: float,
    rho: float,
    h: float,
    margin: float | None = None,
) -> DistanceField:
    """Distance to the axis segment ``[0, r] x {0}`` on a grid covering its ``rho``-tube.

    ``surface=None`` solves the flat metric (``J = 1``), used for calibration.
    The grid covers ``[-rho - m, r + rho + m] x [-rho - m, rho + m]``.
    """
    _check_rho_r(rho, r)
    if not 0 < h:
        raise InputError("grid spacing must be positive")
    code, eps = _code_of(surface)
    m = max(h, 2 * h if margin is None else margin)
    if m < h:
        raise InputError("margin must be at least one grid step")
    s = _axis_grid(-rho - m, r + rho + m, h, anchor_hi=r if r > 0 else None)
    t = _axis_grid(-rho - m, rho + m, h)
    hs, ht = float(s[1] - s[0]), float(t[1] - t[0])
    values = np.full((len(s), len(t)), np.inf)
    fixed = np.zeros(values.shape, dtype=np.bool_)

    # lines s = const are unit-speed geodesics normal to the axis, so |t| is exact over the segment
    j0 = int(np.argmin(np.abs(t)))
    on_seg = (s >= -1e-9 * hs) & (s <= r + 1e-9 * hs)
    seg = np.flatnonzero(on_seg)
    band = slice(max(j0 - SEED_RADIUS_CELLS, 0), min(j0 + SEED_RADIUS_CELLS + 1, len(t)))
    values[seg, band] = np.abs(t[band])
    fixed[seg, band] = True
    ends_s = np.array([s[seg[0]], s[seg[-1]]])
    fmm.seed_points(
        values, fixed, float(s[0]), float(t[0]), hs, ht,
        ends_s, np.zeros(2), SEED_RADIUS_CELLS, code, eps,
    )

    _run_march(values, fixed, s, t, code, eps, np.inf)
    return DistanceField(s, t, values, f"segment [0, {r!r}] on t=0", code, eps)


def solve_point_distance_field(
    surface: WarpedSurface | None,
    points,
    s_range,
    t_range,
    h: float,
    stop: float = np.inf,
) -> DistanceField:
    """Multi-source distance field seeded at arbitrary ``(s, t)`` points.

    Nodes within a few cells of each source take the distance of the
    metric frozen at the midpoint; the front is stopped beyond ``stop``.
    """
    code, eps = _code_of(surface)
    s = _axis_grid(s_range[0], s_range[1], h)
    t = _axis_grid(t_range[0], t_range[1], h)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    values = np.full((len(s), len(t)), np.inf)
    fixed = np.zeros(values.shape, dtype=np.bool_)
    fmm.seed_points(
        values, fixed, s[0], t[0], float(s[1] - s[0]), float(t[1] - t[0]),
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), SEED_RADIUS_CELLS, code, eps,
    )
    _run_march(values, fixed, s, t, code, eps, stop)
    return DistanceField(s, t, values, f"{len(pts)} point source(s)", code, eps)


@dataclass(frozen=True)
class TubeVolumeReport:
    r: float
    rho: float
    fmm_volume: float
    lower_bound: float
    upper_bound: float
    grid_h: float
    tolerance: float


def _grid_tolerance(surface, rho, r, h):
    """``h`` times the J-weighted length of the tube's long edges ``t = +-rho``."""
    lo, hi = -rho, r + rho
    if surface.kind == "ex1":
        edge = (hi - lo) + rho**2 * (hi**3 - lo**3) / 3.0
    else:
        edge = numerics.integrate(lambda s: conformal_factor(surface, s, rho), (lo, hi))
    return 2.0 * h * edge


def tube_volume_fmm(surface: WarpedSurface, rho: float, r: float, h: float, check: bool = True) -> TubeVolumeReport:
    """Riemannian volume of ``{d(., gamma[0, r]) <= rho}`` from a fast-marching field.

    Raises:
        BoundViolationError: if the volume leaves the strip/box sandwich by
            more than the reported grid tolerance.
    """
    _check_rho_r(rho, r)
    if rho / h < 20:
        raise InputError(f"grid too coarse: rho/h = {rho / h:.3g} < 20")
    field_ = solve_distance_field(surface, r, rho, h)
    vol = field_.sublevel_volume(rho)
    lower, upper = _box_bounds(surface, rho, r)
    tol = _grid_tolerance(surface, rho, r, field_.hs)
    if check and not (lower - tol <= vol <= upper + tol):
        raise BoundViolationError(
            f"tube volume {vol!r} outside [{lower!r}, {upper!r}] +- {tol!r} (r={r}, rho={rho}, h={h})"
        )
    return TubeVolumeReport(float(r), float(rho), vol, lower, upper, field_.hs, tol)


@lru_cache(maxsize=32)
def _origin_field(surface: WarpedSurface, rho: float, h: float) -> DistanceField:
    m = rho + 2 * h
    return solve_point_distance_field(surface, [(0.0, 0.0)], (-m, m), (-m, m), h)


def origin_ball_volume(surface: WarpedSurface, rho: float, h: float) -> float:
    """Volume of ``B(o, rho)`` from a fast-marching field seeded at the origin."""
    return _origin_field(surface, float(rho), float(h)).sublevel_volume(rho)


def deterministic_survival(surface: WarpedSurface, model: BooleanModel, r, h: float) -> np.ndarray:
    """``exp(-lambda (vol T_rho(gamma[0, r]) - vol B(o, rho)))`` using fast-marching volumes."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    ball = origin_ball_volume(surface, model.rho, h)
    vols = np.array([tube_volume_fmm(surface, model.rho, float(x), h).fmm_volume for x in r])
    return np.exp(-model.lam * (vols - ball))


def _axis_hit(field_: DistanceField, rho: float, r_max: float) -> float:
    """First axis parameter in ``[0, r_max]`` where the field drops to ``rho``."""
    j0 = int(np.argmin(np.abs(field_.t)))
    i0 = int(np.argmin(np.abs(field_.s)))
    axis = field_.values[i0:, j0]
    below = np.flatnonzero(axis <= rho)
    if below.size == 0:
        return CENSORED
    k = int(below[0])
    if k == 0:
        return 0.0
    prev, cur = axis[k - 1], axis[k]
    w = (prev - rho) / (prev - cur) if np.isfinite(prev) else 1.0
    tau = float(field_.s[i0 + k - 1] + w * field_.hs)
    return tau if tau <= r_max else CENSORED


def sample_ex1_configuration(model: BooleanModel, r_max: float, h: float, rng, surface=None) -> np.ndarray:
    """Poisson points with density ``lambda J`` on ``[-rho, r_max + rho] x [-rho, rho]``
    by thinning, minus those within distance ``rho`` of the origin."""
    surface = Ex1() if surface is None else surface
    rho = model.rho
    if isinstance(rng, RngStream):
        rng = rng.generator()
    s_lo, s_hi = -rho, r_max + rho
    j_max = float(np.max(conformal_factor(surface, np.array([s_lo, s_hi]), rho)))
    area = (s_hi - s_lo) * 2.0 * rho
    mean = model.lam * j_max * area
    if mean > MAX_POINTS:
        raise PointCountError(f"expected {mean:.3g} candidate points per realization; shrink r_max or lambda")
    count = numerics.sample_poisson_count(mean, rng)
    u = rng.random((count, 3))
    s = s_lo + u[:, 0] * (s_hi - s_lo)
    t = -rho + u[:, 1] * 2.0 * rho
    keep = u[:, 2] * j_max <= conformal_factor(surface, s, t)
    pts = np.column_stack([s[keep], t[keep]])
    if len(pts):
        d_o = _origin_field(surface, float(rho), float(h)).interpolate(pts[:, 0], pts[:, 1])
        pts = pts[d_o > rho]
    return pts


def simulate_visibility_ex1(
    model: BooleanModel,
    r_max: float,
    h: float,
    trials: int,
    seed: int,
    surface: WarpedSurface | None = None,
    first_stream: int = 0,
) -> EmpiricalVisibility:
    """Realization-level visible ranges along the ``ex1`` axis.

    Each trial solves one multi-source fast-marching problem seeded at the
    sampled grains and reads off the first axis point within ``rho``.
    """
    surface = Ex1() if surface is None else surface
    if trials < 1:
        raise InputError(f"trials must be at least 1, got {trials}")
    if not r_max > 0:
        raise InputError(f"r_max must be positive, got {r_max}")
    if model.rho / h < 20:
        raise InputError(f"grid too coarse: rho/h = {model.rho / h:.3g} < 20")
    rho = model.rho
    m = 2 * h
    s_range = (-rho - m, r_max + rho + m)
    t_range = (-rho - m, rho + m)
    stop = rho + 2 * h
    ranges = np.empty(trials)
    for i in range(trials):
        pts = sample_ex1_configuration(model, r_max, h, RngStream(seed, first_stream + i), surface)
        if len(pts) == 0:
            ranges[i] = CENSORED
            continue
        f = solve_point_distance_field(surface, pts, s_range, t_range, h, stop=stop)
        ranges[i] = _axis_hit(f, rho, r_max)
    observed = np.sort(ranges[np.isfinite(ranges)])
    return EmpiricalVisibility(observed, int(trials - observed.size), float(r_max), int(trials))


def fit_weibull_exponent(r, survival=None, *, log_survival=None) -> LineFit:
    """OLS of ``log(-log S)`` on ``log r``; the slope estimates the Weibull exponent.

    Pass ``log_survival`` instead of ``survival`` when ``S`` underflows.
    """
    r = np.asarray(r, dtype=float)
    if (survival is None) == (log_survival is None):
        raise InputError("pass exactly one of survival and log_survival")
    if survival is not None:
        surv = np.asarray(survival, dtype=float)
        if np.any((surv <= 0) | (surv >= 1)):
            raise InputError("survival values must lie strictly between 0 and 1")
        log_s = np.log(surv)
    else:
        log_s = np.asarray(log_survival, dtype=float)
        if np.any(log_s >= 0) or not np.all(np.isfinite(log_s)):
            raise InputError("log survival values must be finite and negative")
    if r.shape != log_s.shape or r.size < 5:
        raise InputError("need at least five (r, S) points")
    if np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise InputError("r must be positive and increasing")
    return numerics.fit_line(np.log(r), np.log(-log_s))


def fit_cubic_coefficient(r, survival=None, *, log_survival=None) -> float:
    """Least-squares ``c`` in ``-log S(r) ~ c r^3`` (no intercept)."""
    r = np.asarray(r, dtype=float)
    if (survival is None) == (log_survival is None):
        raise InputError("pass exactly one of survival and log_survival")
    if survival is not None:
        log_survival = np.log(np.asarray(survival, dtype=float))
    y = -np.asarray(log_survival, dtype=float)
    if y.shape != r.shape or r.size < 1:
        raise InputError("r and survival must have matching nonempty shapes")
    x = r**3
    return float(np.dot(x, y) / np.dot(x, x))
