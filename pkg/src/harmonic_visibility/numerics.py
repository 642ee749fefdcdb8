"""Shared numerical kernels: quadrature, root finding, random streams,
inverse-CDF sampling and least-squares line fits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from scipy import stats as _stats

from .errors import InputError, NoSignChangeError, QuadratureError

DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-12
MAX_SUBDIVISIONS = 500


class Interval(NamedTuple):
    lo: float
    hi: float

    @classmethod
    def of(cls, domain: Sequence[float], allow_infinite_hi: bool = False) -> "Interval":
        lo, hi = float(domain[0]), float(domain[1])
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise InputError(f"invalid interval [{lo}, {hi}]")
        if not math.isfinite(lo):
            raise InputError("interval lower end must be finite")
        if not math.isfinite(hi) and not (allow_infinite_hi and hi == math.inf):
            raise InputError("interval upper end must be finite")
        return cls(lo, hi)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams are values: calling :meth:`generator` twice yields two generators
    producing the same sequence. Distinct ``stream_id`` values map to
    independent children of the same :class:`numpy.random.SeedSequence`.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) < 2**64:
                raise InputError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r_squared: float


def integrate(
    f: Callable[[float], float],
    domain: Sequence[float],
    rel_tol: float = DEFAULT_REL_TOL,
    decay_rate: float | None = None,
) -> float:
    """Integrate ``f`` over ``domain`` to relative accuracy ``rel_tol``.

    A domain with ``hi = inf`` is mapped to ``[0, 1)`` by
    ``r = lo - log(1 - x) / decay_rate``; the caller must supply the
    integrand's exponential decay rate (a lower bound is fine).

    Raises:
        QuadratureError: when the adaptive rule does not converge within
            ``MAX_SUBDIVISIONS`` intervals.
    """
    if not 0.0 < rel_tol <= 1e-2:
        raise InputError(f"rel_tol must lie in (0, 1e-2], got {rel_tol}")
    lo, hi = Interval.of(domain, allow_infinite_hi=True)
    if lo == hi:
        return 0.0

    if math.isinf(hi):
        if decay_rate is None or not decay_rate > 0.0:
            raise InputError("an infinite domain needs a positive decay_rate hint")
        b = float(decay_rate)

        def g(x):
            one_minus = 1.0 - x
            return f(lo - math.log(one_minus) / b) / (b * one_minus)

        a, c = 0.0, 1.0
    else:
        g, a, c = f, lo, hi

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        out = _integrate.quad(
            g, a, c, epsabs=0.0, epsrel=rel_tol, limit=MAX_SUBDIVISIONS, full_output=1
        )
    value, abserr, info = out[0], out[1], out[2]
    ier = out[3] if len(out) > 3 else 0
    if not math.isfinite(value):
        raise QuadratureError("quadrature failure: non-finite integral", value, abserr)
    converged = abserr <= rel_tol * abs(value) or abserr <= 1e-300
    # QUADPACK flags roundoff (ier=2) even when the target is met
    if not converged or ier not in (0, 2):
        raise QuadratureError(
            f"quadrature failure after {info.get('last', '?')} subdivisions", value, abserr
        )
    return float(value)


def find_root(
    f: Callable[[float], float],
    bracket: Sequence[float],
    abs_tol: float = DEFAULT_ABS_TOL,
) -> float:
    """Locate a root of ``f`` inside ``bracket`` (Brent's method with bisection fallback)."""
    lo, hi = Interval.of(bracket)
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        raise NoSignChangeError(f"no sign change on [{lo}, {hi}]: f={f_lo!r}, {f_hi!r}")
    return float(_optimize.brentq(f, lo, hi, xtol=abs_tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def sample_poisson_count(mean: float, rng: np.random.Generator | RngStream, size=None):
    """Draw Poisson(``mean``) counts from ``rng``."""
    mean = float(mean)
    if not (math.isfinite(mean) and mean >= 0.0):
        raise InputError(f"Poisson mean must be finite and nonnegative, got {mean}")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    out = rng.poisson(mean, size=size)
    return int(out) if size is None else out


# 8-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _gauss_segments(density, a, b):
    """Vectorized fixed-order integral of ``density`` over ``[a_i, b_i]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    width = b - a
    x = a[..., None] + width[..., None] * _GL_X
    return width * (np.asarray(density(x), dtype=float) @ _GL_W)


class InverseCDFSampler:
    """Quantiles of an unnormalized density on a finite interval.

    The cumulative table is built once with a fixed Gauss-Legendre rule per
    cell; quantiles start from monotone (piecewise linear) interpolation of
    the table and are polished by safeguarded Newton steps on the exact
    in-cell CDF.

    Args:
        density: vectorized nonnegative function.
        support: ``(lo, hi)`` finite interval.
        rel_tol: relative accuracy of returned quantiles (w.r.t. support width).
        n_cells: number of table cells.
    """

    def __init__(self, density, support, rel_tol: float = DEFAULT_REL_TOL, n_cells: int = 1024):
        self.density = density
        self.lo, self.hi = Interval.of(support)
        self.rel_tol = rel_tol
        self.nodes = np.linspace(self.lo, self.hi, n_cells + 1)
        masses = _gauss_segments(density, self.nodes[:-1], self.nodes[1:])
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise InputError("density must be finite and nonnegative on the support")
        self.cumulative = np.concatenate([[0.0], np.cumsum(masses)])
        self.total = float(self.cumulative[-1])
        if not self.total > 0.0:
            raise InputError("density has zero total mass on the support")

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        k = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, len(self.nodes) - 2)
        partial = _gauss_segments(self.density, self.nodes[k], x)
        return (self.cumulative[k] + partial) / self.total

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0.0) | (u > 1.0)):
            raise InputError("u must lie in [0, 1]")
        target = u * self.total
        k = np.clip(np.searchsorted(self.cumulative, target, side="right") - 1, 0, len(self.nodes) - 2)
        left, right = self.nodes[k].copy(), self.nodes[k + 1].copy()
        c_left = self.cumulative[k]
        mass = self.cumulative[k + 1] - c_left
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(mass > 0, (target - c_left) / mass, 0.0)
        x = left + np.clip(frac, 0.0, 1.0) * (right - left)
        tol = self.rel_tol * (self.hi - self.lo)
        # each entry is frozen once converged, so results do not depend on batching
        active = np.ones(x.shape, dtype=bool)
        for _ in range(60):
            resid = c_left + _gauss_segments(self.density, self.nodes[k], x) - target
            left = np.where(resid < 0, x, left)
            right = np.where(resid > 0, x, right)
            dens = np.asarray(self.density(x), dtype=float)
            with np.errstate(invalid="ignore", divide="ignore"):
                step = np.where(dens > 0, resid / dens, np.inf)
            newton = x - step
            inside = (newton > left) & (newton < right)
            x_new = np.where(inside, newton, 0.5 * (left + right))
            x_new = np.where(resid == 0, x, x_new)
            x_new = np.where(active, x_new, x)
            active &= np.abs(x_new - x) > tol
            x = x_new
            if not active.any():
                break
        x = np.where(u == 0.0, self.lo, x)
        x = np.where(u == 1.0, self.hi, x)
        return float(x) if x.ndim == 0 else x


def sample_inverse_cdf(unnormalized_density, support, u, rel_tol: float = DEFAULT_REL_TOL):
    """One-shot quantile lookup; build an :class:`InverseCDFSampler` to reuse the table."""
    return InverseCDFSampler(unnormalized_density, support, rel_tol=rel_tol).quantile(u)


def fit_line(x, y=None) -> LineFit:
    """Ordinary least-squares line through ``(x, y)``.

    ``x`` may also be a sequence of ``(x, y)`` pairs when ``y`` is omitted.
    """
    if y is None:
        pts = np.asarray(x, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InputError("expected a sequence of (x, y) pairs")
        x, y = pts[:, 0], pts[:, 1]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise InputError("need at least two points with matching x and y")
    if np.ptp(x) == 0.0:
        raise InputError("degenerate abscissae: all x values are equal")
    res = _stats.linregress(x, y)
    r2 = float(res.rvalue) ** 2
    if not math.isfinite(r2):
        r2 = 1.0 if np.ptp(y) == 0.0 else 0.0
    return LineFit(float(res.slope), float(res.intercept), min(max(r2, 0.0), 1.0))


def ks_critical_value(alpha: float) -> float:
    """Asymptotic Kolmogorov constant c(alpha) with D_crit = c / sqrt(n)."""
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha in _KS_TABLE:
        return _KS_TABLE[alpha]
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


_KS_TABLE = {0.01: 1.628, 0.05: 1.358}


def dkw_epsilon(n: int, alpha: float = 0.01) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band for ``n`` samples."""
    if n < 1:
        raise InputError("DKW band needs at least one sample")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))
