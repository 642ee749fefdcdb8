"""Catalogue of homogeneous harmonic manifolds and their closed-form
visibility laws.

Every simply connected non-compact homogeneous harmonic manifold is flat or
a Damek-Ricci space ``DR(p, q)`` (rank-one symmetric spaces included). For
ball grains of radius ``rho`` the tube around a geodesic segment of length
``r`` has volume ``vol B(o, rho) + a_rho * r``, which makes the conditional
visible range exponential with rate ``lambda * a_rho``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

from . import numerics
from .errors import CriticalityError, InputError

CRITICALITY_TOL = 1e-9


@dataclass(frozen=True)
class HarmonicSpace:
    """A catalogued harmonic space.

    ``family`` is ``"flat"`` (uses ``n``) or ``"damek_ricci"`` (uses ``p``
    and ``q``). Prefer the named constructors :func:`Flat`, :func:`RH`,
    :func:`CH`, :func:`HH`, :func:`OH2` and :func:`DamekRicci`.
    """

    family: str
    n: int = 0
    p: int = 0
    q: int = 0
    name: str = ""

    def __post_init__(self):
        if self.family == "flat":
            if self.n < 1:
                raise InputError(f"flat space needs n >= 1, got {self.n}")
        elif self.family == "damek_ricci":
            if self.p < 1 or self.q < 0:
                raise InputError(f"Damek-Ricci space needs p >= 1, q >= 0, got ({self.p}, {self.q})")
        else:
            raise InputError(f"unknown family {self.family!r}")
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self):
        if self.family == "flat":
            return f"Flat({self.n})"
        if self.q == 0:
            return f"RH({self.p + 1})"
        return f"DR({self.p},{self.q})"

    @property
    def dim(self) -> int:
        return self.n if self.family == "flat" else self.p + self.q + 1

    @property
    def is_flat(self) -> bool:
        return self.family == "flat"

    @property
    def is_symmetric(self) -> bool:
        """True for flat and rank-one symmetric spaces; False for the
        non-symmetric Damek-Ricci spaces."""
        if self.is_flat:
            return True
        p, q = self.p, self.q
        return (
            q == 0
            or (q == 1 and p % 2 == 0)
            or (q == 3 and p % 4 == 0 and p >= 4)
            or (p, q) == (8, 7)
        )


def Flat(n: int) -> HarmonicSpace:
    return HarmonicSpace("flat", n=n)


def DamekRicci(p: int, q: int) -> HarmonicSpace:
    return HarmonicSpace("damek_ricci", p=p, q=q)


def RH(n: int) -> HarmonicSpace:
    if n < 2:
        raise InputError("real hyperbolic space needs n >= 2")
    return HarmonicSpace("damek_ricci", p=n - 1, q=0, name=f"RH({n})")


def CH(m: int) -> HarmonicSpace:
    if m < 2:
        raise InputError("complex hyperbolic space needs m >= 2")
    return HarmonicSpace("damek_ricci", p=2 * m - 2, q=1, name=f"CH({m})")


def HH(m: int) -> HarmonicSpace:
    if m < 2:
        raise InputError("quaternionic hyperbolic space needs m >= 2")
    return HarmonicSpace("damek_ricci", p=4 * m - 4, q=3, name=f"HH({m})")


def OH2() -> HarmonicSpace:
    return HarmonicSpace("damek_ricci", p=8, q=7, name="OH2")


@dataclass(frozen=True)
class BooleanModel:
    """Poisson Boolean model with intensity ``lam`` and grain radius ``rho``."""

    lam: float
    rho: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise InputError(f"intensity must be positive and finite, got {self.lam}")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise InputError(f"grain radius must be positive and finite, got {self.rho}")


class Threshold(enum.Enum):
    """Non-numeric critical intensity: the visible volume is finite for every intensity."""

    ALWAYS_FINITE = "finite ∀λ"

    def __str__(self):
        return self.value


ALWAYS_FINITE = Threshold.ALWAYS_FINITE


@dataclass(frozen=True)
class VisibleVolumeResult:
    finite: bool
    value: float | None
    margin: float
    model_dependent: bool = False


@lru_cache(maxsize=None)
def euclidean_ball_volume(k: int) -> float:
    """Volume of the Euclidean unit ball in dimension ``k``.

    Uses kappa_0 = 1, kappa_1 = 2 and kappa_k = kappa_{k-2} * 2 pi / k.
    """
    if k < 0:
        raise InputError(f"dimension must be nonnegative, got {k}")
    if k == 0:
        return 1.0
    if k == 1:
        return 2.0
    return euclidean_ball_volume(k - 2) * 2.0 * math.pi / k


def unit_sphere_area(k: int) -> float:
    """Area of the unit sphere in R^{k+1}, i.e. (k+1) * kappa_{k+1}."""
    return (k + 1) * euclidean_ball_volume(k + 1)


def tube_coefficient(space: HarmonicSpace, rho: float) -> float:
    """Linear growth rate ``a_rho`` of geodesic tube volumes."""
    if not rho > 0:
        raise InputError(f"rho must be positive, got {rho}")
    if space.is_flat:
        return euclidean_ball_volume(space.n - 1) * rho ** (space.n - 1)
    k = space.p + space.q
    return euclidean_ball_volume(k) * math.sinh(rho) ** k * math.cosh(rho) ** space.q


def volume_entropy(space: HarmonicSpace) -> float:
    return 0.0 if space.is_flat else float(space.p + 2 * space.q)


def log_sphere_area(space: HarmonicSpace, r: float) -> float:
    """``log S(r)``; stays finite for radii where ``S`` itself overflows."""
    if r < 0:
        raise InputError(f"radius must be nonnegative, got {r}")
    if r == 0:
        return -math.inf
    if space.is_flat:
        return math.log(space.n * euclidean_ball_volume(space.n)) + (space.n - 1) * math.log(r)
    k = space.p + space.q
    # log sinh r = r + log1p(-exp(-2r)) - log 2
    log_sinh = r + math.log1p(-math.exp(-2.0 * r)) - math.log(2.0)
    log_cosh = r + math.log1p(math.exp(-2.0 * r)) - math.log(2.0)
    return math.log(unit_sphere_area(k)) + k * log_sinh + space.q * log_cosh


def sphere_area(space: HarmonicSpace, r: float) -> float:
    """Area of the geodesic sphere of radius ``r``.

    Damek-Ricci spaces use ``sigma_{p+q} sinh^{p+q}(r) cosh^q(r)``, the
    radial density matching the tube coefficient's normalization; for
    non-symmetric spaces this is a modeling choice.
    """
    if r < 0:
        raise InputError(f"radius must be nonnegative, got {r}")
    if space.is_flat and space.n == 1:
        return 2.0
    if r == 0:
        return 0.0
    if space.is_flat:
        return space.n * euclidean_ball_volume(space.n) * r ** (space.n - 1)
    k = space.p + space.q
    return unit_sphere_area(k) * math.sinh(r) ** k * math.cosh(r) ** space.q


def ball_volume(space: HarmonicSpace, rho: float, rel_tol: float = numerics.DEFAULT_REL_TOL) -> float:
    if rho < 0:
        raise InputError(f"radius must be nonnegative, got {rho}")
    if rho == 0:
        return 0.0
    if space.is_flat:
        return euclidean_ball_volume(space.n) * rho**space.n
    return numerics.integrate(lambda r: sphere_area(space, r), (0.0, rho), rel_tol=rel_tol)


def tube_volume(space: HarmonicSpace, rho: float, r: float) -> float:
    """Volume of the closed ``rho``-tube around a geodesic segment of length ``r``."""
    if r < 0:
        raise InputError(f"segment length must be nonnegative, got {r}")
    return ball_volume(space, rho) + tube_coefficient(space, rho) * r


def survival(space: HarmonicSpace, model: BooleanModel, r: float) -> float:
    """P(visible range > r | o uncovered) = exp(-lambda * a_rho * r)."""
    if r < 0:
        raise InputError(f"r must be nonnegative, got {r}")
    return math.exp(-model.lam * tube_coefficient(space, model.rho) * r)


def median_visible_range(space: HarmonicSpace, model: BooleanModel) -> float:
    return math.log(2.0) / (model.lam * tube_coefficient(space, model.rho))


def critical_intensity(space: HarmonicSpace, rho: float) -> float | Threshold:
    """``h / a_rho``, or :data:`ALWAYS_FINITE` for flat spaces."""
    a = tube_coefficient(space, rho)
    h = volume_entropy(space)
    if h == 0.0:
        return ALWAYS_FINITE
    return h / a


def mean_visible_volume(
    space: HarmonicSpace,
    model: BooleanModel,
    rel_tol: float = numerics.DEFAULT_REL_TOL,
) -> VisibleVolumeResult:
    """Conditional expected volume of the region visible from an uncovered point.

    Equals the integral of ``exp(-lambda a_rho r) S(r)`` over ``[0, inf)``,
    which is finite iff ``lambda a_rho > h`` (always when ``h = 0``).

    Raises:
        CriticalityError: if ``|lambda a_rho - h| <= 1e-9`` with ``h > 0``.
    """
    rate = model.lam * tube_coefficient(space, model.rho)
    h = volume_entropy(space)
    margin = rate - h
    model_dependent = not space.is_symmetric
    if h > 0.0:
        if abs(margin) <= CRITICALITY_TOL:
            raise CriticalityError(
                f"{space.name}: lambda*a_rho = {rate!r} is within {CRITICALITY_TOL} of h = {h!r}; "
                "the mean visible volume diverges at criticality"
            )
        if margin < 0:
            return VisibleVolumeResult(False, None, margin, model_dependent)

    def integrand(r):
        if r == 0.0:
            return sphere_area(space, 0.0)
        return math.exp(log_sphere_area(space, r) - rate * r)

    value = numerics.integrate(integrand, (0.0, math.inf), rel_tol=rel_tol, decay_rate=margin)
    return VisibleVolumeResult(True, value, margin, model_dependent)


def catalog(extra: tuple[HarmonicSpace, ...] = ()) -> list[HarmonicSpace]:
    """The named spaces reported by the ``catalog`` command."""
    spaces = [Flat(n) for n in range(2, 9)]
    spaces += [RH(n) for n in range(2, 9)]
    spaces += [CH(m) for m in range(2, 5)]
    spaces += [HH(m) for m in range(2, 4)]
    spaces.append(OH2())
    spaces.extend(extra)
    return spaces
