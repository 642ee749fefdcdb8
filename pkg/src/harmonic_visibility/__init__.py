"""Visibility laws for Poisson Boolean models on harmonic manifolds and on
warped counterexample surfaces."""
from .errors import (
    BoundViolationError,
    CensoringError,
    CriticalityError,
    FastMarchingError,
    HarmonicVisibilityError,
    InputError,
    NoSignChangeError,
    NumericalConsistencyError,
    PointCountError,
    QuadratureError,
)
from .harmonic import (
    ALWAYS_FINITE,
    CH,
    HH,
    OH2,
    RH,
    BooleanModel,
    DamekRicci,
    Flat,
    HarmonicSpace,
    ball_volume,
    catalog,
    critical_intensity,
    mean_visible_volume,
    sphere_area,
    survival,
    tube_coefficient,
    volume_entropy,
)
from .montecarlo import Euclidean, Hyperbolic, SimSpace, ks_against_exponential, run_experiment
from .surfaces import Ex1, Ex2, Ex3, WarpedSurface, tube_volume_fmm

__version__ = "0.1.0"
