"""Geometric Monte Carlo for directional visibility in R^n and RH^n.

Hyperbolic space is realized as the upper sheet of the hyperboloid
``-x0^2 + x1^2 + ... + xn^2 = -1``. The reference point is the origin
(resp. ``(1, 0, ..., 0)``) and the default direction is the first spatial
basis vector.

Conditioning on ``o`` being uncovered is exact: Poisson points are only
sampled outside ``B(o, rho)`` (restriction of a Poisson process to a subset
is again Poisson).

No-hit and censored outcomes are encoded as ``math.inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special, stats

from . import harmonic, numerics
from .errors import CensoringError, InputError, NumericalConsistencyError
from .harmonic import BooleanModel
from .numerics import RngStream

NO_HIT = math.inf
CENSORED = math.inf
HYPERBOLOID_TOL = 1e-10
ARCCOSH_TOL = 1e-9
WINDOWS = ("ball", "cone")
# points assembled per vectorized batch in run_experiment (bounds memory use)
BATCH_POINTS = 1 << 20


@dataclass(frozen=True)
class SimSpace:
    kind: str  # "euclidean" or "hyperbolic"
    n: int

    def __post_init__(self):
        if self.kind not in ("euclidean", "hyperbolic"):
            raise InputError(f"unknown simulation space {self.kind!r}")
        if self.n < 2:
            raise InputError(f"dimension must be at least 2, got {self.n}")

    @property
    def hyperbolic(self) -> bool:
        return self.kind == "hyperbolic"

    @property
    def ambient_dim(self) -> int:
        return self.n + 1 if self.hyperbolic else self.n

    @property
    def harmonic_space(self) -> harmonic.HarmonicSpace:
        return harmonic.RH(self.n) if self.hyperbolic else harmonic.Flat(self.n)

    @property
    def origin(self) -> np.ndarray:
        o = np.zeros(self.ambient_dim)
        if self.hyperbolic:
            o[0] = 1.0
        return o

    def default_direction(self) -> np.ndarray:
        """Unit tangent vector at the origin, as an n-vector of spatial coordinates."""
        u = np.zeros(self.n)
        u[0] = 1.0
        return u


def Euclidean(n: int) -> SimSpace:
    return SimSpace("euclidean", n)


def Hyperbolic(n: int) -> SimSpace:
    return SimSpace("hyperbolic", n)


def _direction(space: SimSpace, u) -> np.ndarray:
    if u is None:
        return space.default_direction()
    u = np.asarray(u, dtype=float)
    if u.shape != (space.n,):
        raise InputError(f"direction must have {space.n} spatial components")
    norm = np.linalg.norm(u)
    if not norm > 0:
        raise InputError("direction must be nonzero")
    return u / norm


def _spatial(space: SimSpace, points: np.ndarray) -> np.ndarray:
    return points[..., 1:] if space.hyperbolic else points


def project_to_hyperboloid(spatial: np.ndarray) -> np.ndarray:
    """Lift spatial coordinates to the upper sheet (``x0 = sqrt(1 + |x|^2)``)."""
    spatial = np.asarray(spatial, dtype=float)
    x0 = np.sqrt(1.0 + np.sum(spatial**2, axis=-1, keepdims=True))
    return np.concatenate([x0, spatial], axis=-1)


def check_hyperboloid(points: np.ndarray, tol: float = HYPERBOLOID_TOL) -> None:
    points = np.asarray(points, dtype=float)
    form = -points[..., 0] ** 2 + np.sum(points[..., 1:] ** 2, axis=-1)
    scale = np.maximum(1.0, points[..., 0] ** 2)
    if np.any(np.abs(form + 1.0) > tol * scale) or np.any(points[..., 0] < 1.0 - tol):
        raise NumericalConsistencyError("point is not on the upper hyperboloid sheet")


def geodesic_point(space: SimSpace, t, u=None) -> np.ndarray:
    """Point at arc length ``t`` along the ray from the origin in direction ``u``."""
    u = _direction(space, u)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("geodesic parameter must be nonnegative")
    if not space.hyperbolic:
        return t[..., None] * u
    spatial = np.sinh(t)[..., None] * u
    return np.concatenate([np.cosh(t)[..., None], spatial], axis=-1)


def minkowski_pairing(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def distance(space: SimSpace, a, b):
    """Riemannian distance; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not space.hyperbolic:
        out = np.linalg.norm(a - b, axis=-1)
    else:
        # On the sheet -<a, b> = 1 + <a-b, a-b>/2; the difference form avoids
        # cancelling two numbers of size cosh^2 r for nearby far-out points.
        diff = a - b
        q = minkowski_pairing(diff, diff)
        arg = 1.0 + 0.5 * q
        if np.any(arg < 1.0 - ARCCOSH_TOL):
            raise NumericalConsistencyError(f"Minkowski pairing {np.min(arg)!r} below 1")
        out = 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(q, 0.0)))
    return float(out) if np.ndim(out) == 0 else out


def first_hit(space: SimSpace, points, rho: float, r_max: float, u=None):
    """Smallest ``t`` in ``[0, r_max]`` with ``d(p, gamma(t)) <= rho``, per point.

    Closed forms: in R^n solve ``|p - t u|^2 = rho^2``; in RH^n use
    ``cosh d(p, gamma(t)) = K cosh(t - t*)`` with ``K^2 = 1 + |p_perp|^2``.
    Returns ``NO_HIT`` (``inf``) where the ray segment misses the grain.
    """
    u = _direction(space, u)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x = _spatial(space, points)
    along = x @ u
    perp2 = np.sum((x - along[:, None] * u) ** 2, axis=-1)

    if not space.hyperbolic:
        gap = rho * rho - perp2
        half = np.sqrt(np.maximum(gap, 0.0))
        lower, upper = along - half, along + half
        hit = gap >= 0.0
    else:
        a = points[:, 0]
        k2 = 1.0 + perp2
        k = np.sqrt(k2)
        # a + along computed without cancellation when along < 0
        with np.errstate(divide="ignore"):
            a_plus = np.where(along >= 0, a + along, k2 / (a - along))
        t_star = np.log(a_plus) - np.log(k)
        ratio = math.cosh(rho) / k
        hit = ratio >= 1.0
        delta = np.arccosh(np.maximum(ratio, 1.0))
        lower, upper = t_star - delta, t_star + delta

    hit &= (upper >= 0.0) & (lower <= r_max)
    out = np.where(hit, np.maximum(lower, 0.0), NO_HIT)
    return out


def visible_range(space: SimSpace, points, rho: float, r_max: float, u=None) -> float:
    """Distance along the ray before the first grain; ``CENSORED`` beyond ``r_max``."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return CENSORED
    return float(np.min(first_hit(space, points, rho, r_max, u)))


# ---------------------------------------------------------------------------
# Sampling


def _radial_density(space: SimSpace):
    n = space.n
    if space.hyperbolic:
        c = harmonic.unit_sphere_area(n - 1)
        return lambda r: c * np.sinh(r) ** (n - 1)
    c = n * harmonic.euclidean_ball_volume(n)
    return lambda r: c * np.asarray(r, dtype=float) ** (n - 1)


def _cap_half_angle_sine(space: SimSpace, rho: float, r):
    """Sine of the widest angle to the ray at which a point at radius ``r`` can block it."""
    r = np.asarray(r, dtype=float)
    if space.hyperbolic:
        with np.errstate(over="ignore"):
            ratio = math.sinh(rho) / np.sinh(r)
    else:
        ratio = rho / r
    return np.clip(ratio, 0.0, 1.0)


def _cap_parameter(sin_theta):
    """``w = (1 - cos theta) / 2`` for ``theta`` in ``[0, pi/2]``, stable for small angles."""
    sin2 = np.asarray(sin_theta, dtype=float) ** 2
    return 0.5 * sin2 / (1.0 + np.sqrt(1.0 - sin2))


def _cap_fraction(n: int, w):
    """Fraction of the unit sphere S^{n-1} within angle ``theta`` of a pole, in terms of ``w``."""
    a = 0.5 * (n - 1)
    return special.betainc(a, a, w)


@lru_cache(maxsize=64)
def _window_sampler(space: SimSpace, rho: float, r_max: float, window: str):
    base = _radial_density(space)
    support = (rho, r_max + rho)
    if window == "ball":
        return numerics.InverseCDFSampler(base, support)

    def density(r):
        w = _cap_parameter(_cap_half_angle_sine(space, rho, r))
        return base(r) * _cap_fraction(space.n, w)

    return numerics.InverseCDFSampler(density, support)


def window_volume(space: SimSpace, rho: float, r_max: float, window: str = "ball") -> float:
    """Volume of the sampling window (``ball``: the annulus ``B(o, r_max + rho) \\ B(o, rho)``)."""
    if window not in WINDOWS:
        raise InputError(f"window must be one of {WINDOWS}")
    return _window_sampler(space, float(rho), float(r_max), window).total


def _draw_uniforms(space: SimSpace, mean: float, gen: np.random.Generator):
    count = gen.poisson(mean)
    uniforms = gen.random((count, 2))
    normals = gen.standard_normal((count, space.n))
    return uniforms, normals


def _assemble_points(space, sampler, rho, window, u, uniforms, normals):
    radii = np.atleast_1d(sampler.quantile(uniforms[:, 0]))
    if window == "ball":
        dirs = normals / np.linalg.norm(normals, axis=-1, keepdims=True)
    else:
        w_max = _cap_parameter(_cap_half_angle_sine(space, rho, radii))
        a = 0.5 * (space.n - 1)
        w = special.betaincinv(a, a, uniforms[:, 1] * special.betainc(a, a, w_max))
        w = np.minimum(w, w_max)
        cos_t = 1.0 - 2.0 * w
        sin_t = 2.0 * np.sqrt(w * (1.0 - w))
        ortho = normals - (normals @ u)[:, None] * u
        ortho /= np.linalg.norm(ortho, axis=-1, keepdims=True)
        dirs = cos_t[:, None] * u + sin_t[:, None] * ortho
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    if not space.hyperbolic:
        return radii[:, None] * dirs
    pts = project_to_hyperboloid(np.sinh(radii)[:, None] * dirs)
    check_hyperboloid(pts)
    return pts


def sample_configuration(
    space: SimSpace,
    model: BooleanModel,
    r_max: float,
    rng,
    window: str = "ball",
    u=None,
) -> np.ndarray:
    """Poisson points relevant to the ray segment ``gamma([0, r_max])``, given ``o`` uncovered.

    ``window="ball"`` samples ``lambda vol`` restricted to the annulus
    ``B(o, r_max + rho) \\ B(o, rho)``. ``window="cone"`` further restricts to
    the points whose angle to ``u`` lets them come within ``rho`` of the
    ray; every excluded point is provably a non-blocker, so the visible
    range has the same law.

    Returns:
        Array of shape ``(N, ambient_dim)``.
    """
    if not r_max > 0:
        raise InputError(f"r_max must be positive, got {r_max}")
    if window not in WINDOWS:
        raise InputError(f"window must be one of {WINDOWS}")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    u = _direction(space, u)
    sampler = _window_sampler(space, float(model.rho), float(r_max), window)
    uniforms, normals = _draw_uniforms(space, model.lam * sampler.total, rng)
    if len(uniforms) == 0:
        return np.zeros((0, space.ambient_dim))
    return _assemble_points(space, sampler, model.rho, window, u, uniforms, normals)


def default_r_max(space: SimSpace | harmonic.HarmonicSpace, model: BooleanModel, tail: float = 1e-4) -> float:
    """Smallest ``r_max`` with analytic survival ``exp(-lambda a_rho r_max)`` below ``tail``."""
    hs = space.harmonic_space if isinstance(space, SimSpace) else space
    rate = model.lam * harmonic.tube_coefficient(hs, model.rho)
    # nudged up so the tail at the returned radius is strictly below ``tail``
    return math.log(1.0 / tail) / rate * (1.0 + 1e-9)


# ---------------------------------------------------------------------------
# Experiments and statistics


@dataclass(frozen=True)
class EmpiricalVisibility:
    """Monte Carlo visible ranges; values beyond ``r_max`` are counted in ``censored``."""

    samples: np.ndarray = field(repr=False)
    censored: int
    r_max: float
    trials: int

    def __post_init__(self):
        if len(self.samples) + self.censored != self.trials:
            raise InputError("samples and censored counts do not add up to trials")

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.trials

    def survival(self, r):
        """Empirical ``P(s > r)`` (censored values count as exceeding every ``r <= r_max``)."""
        r = np.asarray(r, dtype=float)
        below = np.searchsorted(self.samples, r, side="right")
        out = 1.0 - below / self.trials
        return float(out) if out.ndim == 0 else out

    def mean_estimate(self) -> float:
        """Censoring-corrected mean: the exponential maximum-likelihood estimate."""
        observed = len(self.samples)
        if observed == 0:
            return math.inf
        return (float(np.sum(self.samples)) + self.censored * self.r_max) / observed


def run_experiment(
    space: SimSpace,
    model: BooleanModel,
    trials: int,
    r_max: float,
    seed: int,
    window: str = "cone",
    u=None,
    first_stream: int = 0,
) -> EmpiricalVisibility:
    """Independent realizations of the visible range; trial ``i`` uses stream ``first_stream + i``."""
    if trials < 1:
        raise InputError(f"trials must be at least 1, got {trials}")
    if not r_max > 0:
        raise InputError(f"r_max must be positive, got {r_max}")
    if window not in WINDOWS:
        raise InputError(f"window must be one of {WINDOWS}")
    u = _direction(space, u)
    sampler = _window_sampler(space, float(model.rho), float(r_max), window)
    mean = model.lam * sampler.total

    ranges = np.full(trials, CENSORED)
    uniform_parts, normal_parts, owners = [], [], []
    pending = 0
    for i in range(trials):
        gen = RngStream(seed, first_stream + i).generator()
        uni, nor = _draw_uniforms(space, mean, gen)
        if len(uni):
            uniform_parts.append(uni)
            normal_parts.append(nor)
            owners.append(np.full(len(uni), i))
            pending += len(uni)
        if pending >= BATCH_POINTS or (i == trials - 1 and pending):
            points = _assemble_points(
                space, sampler, model.rho, window, u, np.concatenate(uniform_parts), np.concatenate(normal_parts)
            )
            hits = first_hit(space, points, model.rho, r_max, u)
            np.minimum.at(ranges, np.concatenate(owners), hits)
            uniform_parts, normal_parts, owners = [], [], []
            pending = 0
    observed = np.sort(ranges[np.isfinite(ranges)])
    return EmpiricalVisibility(observed, int(trials - observed.size), float(r_max), int(trials))


@dataclass(frozen=True)
class KsReport:
    d_stat: float
    n_effective: int
    threshold: float
    passed: bool


def truncated_exponential_cdf(rate: float, r_max: float):
    norm = -math.expm1(-rate * r_max)

    def cdf(r):
        r = np.clip(np.asarray(r, dtype=float), 0.0, r_max)
        return -np.expm1(-rate * r) / norm

    return cdf


def ks_against_exponential(
    emp: EmpiricalVisibility,
    rate: float,
    alpha: float = 0.01,
    max_censored_fraction: float = 0.01,
) -> KsReport:
    """One-sample KS test of uncensored ranges against Exp(``rate``) truncated to ``[0, r_max]``.

    Raises:
        CensoringError: if at least ``max_censored_fraction`` of the trials were censored.
    """
    if not rate > 0:
        raise InputError(f"rate must be positive, got {rate}")
    if emp.censored_fraction >= max_censored_fraction:
        raise CensoringError(
            f"{emp.censored_fraction:.2%} of trials censored",
            suggested_r_max=math.log(1e4) / rate,
        )
    n = len(emp.samples)
    if n == 0:
        raise InputError("no uncensored samples")
    d = float(stats.kstest(emp.samples, truncated_exponential_cdf(rate, emp.r_max)).statistic)
    threshold = numerics.ks_critical_value(alpha) / math.sqrt(n)
    return KsReport(d, n, threshold, d < threshold)


def dkw_band(emp: EmpiricalVisibility, r, alpha: float = 0.01):
    """Pointwise values of the empirical survival and its DKW confidence band."""
    s = np.asarray(emp.survival(r), dtype=float)
    eps = numerics.dkw_epsilon(emp.trials, alpha)
    return s, np.clip(s - eps, 0.0, 1.0), np.clip(s + eps, 0.0, 1.0)
