"""Command-line interface.

Every command emits a single output record (CSV table or JSON object).
Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 failed
statistical test.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import harmonic, montecarlo, numerics, surfaces
from .errors import HarmonicVisibilityError, InputError
from .harmonic import BooleanModel

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_STATISTICAL = 4

DR_WARNING = "DR density is model-dependent: non-symmetric Damek-Ricci sphere areas use the closed form sigma*sinh^(p+q)*cosh^q"


@dataclass
class OutputRecord:
    command: str
    params: dict[str, Any]
    rows: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "params": {k: _plain(v) for k, v in self.params.items()},
            "rows": [{k: _plain(v) for k, v in row.items()} for row in self.rows],
            "summary": {k: _plain(v) for k, v in self.summary.items()},
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    def to_csv(self) -> str:
        """Plain CSV: header row and data rows only (see :meth:`side_channel`)."""
        columns: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
        buf = io.StringIO()
        buf.write(",".join(columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_csv_cell(row.get(c)) for c in columns) + "\n")
        return buf.getvalue()

    def side_channel(self) -> str:
        """Warnings and summary lines written to stderr alongside CSV output."""
        lines = [f"warning: {w}" for w in self.warnings]
        lines += [f"summary: {k}={_csv_cell(v)}" for k, v in self.summary.items()]
        return "".join(line + "\n" for line in lines)


def _plain(value):
    """JSON-safe scalar; floats keep their shortest round-trip repr."""
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, harmonic.Threshold):
        return str(value)
    return value


def _csv_cell(value) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# space parsing


HARMONIC_SPACES = ("flat", "euclidean", "rh", "hyperbolic", "ch", "hh", "oh2", "dr")


def _harmonic_space(args) -> harmonic.HarmonicSpace:
    kind = args.space
    if kind in ("flat", "euclidean"):
        return harmonic.Flat(_need(args, "dim"))
    if kind in ("rh", "hyperbolic"):
        return harmonic.RH(_need(args, "dim"))
    if kind == "ch":
        return harmonic.CH(_need(args, "dim"))
    if kind == "hh":
        return harmonic.HH(_need(args, "dim"))
    if kind == "oh2":
        return harmonic.OH2()
    return harmonic.DamekRicci(_need(args, "p"), _need(args, "q"))


def _need(args, name):
    value = getattr(args, name)
    if value is None:
        raise InputError(f"--{name.replace('_', '-')} is required here")
    return value


def _space_params(space: harmonic.HarmonicSpace) -> dict[str, Any]:
    return {"space": space.name, "dim": space.dim, "p": space.p, "q": space.q}


def _format_threshold(value):
    return str(value) if isinstance(value, harmonic.Threshold) else value


# ---------------------------------------------------------------------------
# commands


def cmd_catalog(args) -> tuple[OutputRecord, int]:
    rho = args.rho
    if not rho > 0:
        raise InputError("--rho must be positive")
    extra = ()
    if args.p is not None or args.q is not None:
        extra = (harmonic.DamekRicci(_need(args, "p"), _need(args, "q")),)
    rec = OutputRecord("catalog", {"rho": rho})
    for space in harmonic.catalog(extra):
        rec.rows.append(
            {
                "space": space.name,
                "dim": space.dim,
                "p": space.p,
                "q": space.q,
                "a_rho": harmonic.tube_coefficient(space, rho),
                "h": harmonic.volume_entropy(space),
                "lambda_c": _format_threshold(harmonic.critical_intensity(space, rho)),
                "ball_volume": harmonic.ball_volume(space, rho),
            }
        )
        if not space.is_symmetric:
            rec.warnings.append(f"{space.name}: {DR_WARNING}")
    return rec, EXIT_OK


def cmd_survival(args) -> tuple[OutputRecord, int]:
    space = _harmonic_space(args)
    model = BooleanModel(_need(args, "lam"), _need(args, "rho"))
    r_max = args.rmax if args.rmax is not None else montecarlo.default_r_max(space, model)
    steps = args.steps if args.steps is not None else 50
    if steps < 1 or not r_max > 0:
        raise InputError("--steps must be >= 1 and --rmax positive")
    rec = OutputRecord(
        "survival", {**_space_params(space), "lambda": model.lam, "rho": model.rho, "rmax": r_max, "steps": steps}
    )
    for r in np.linspace(0.0, r_max, steps + 1):
        rec.rows.append({"r": float(r), "survival": harmonic.survival(space, model, float(r))})
    rate = model.lam * harmonic.tube_coefficient(space, model.rho)
    rec.summary = {"rate": rate, "median": math.log(2.0) / rate}
    return rec, EXIT_OK


def cmd_mean_visible(args) -> tuple[OutputRecord, int]:
    space = _harmonic_space(args)
    model = BooleanModel(_need(args, "lam"), _need(args, "rho"))
    res = harmonic.mean_visible_volume(space, model)
    rec = OutputRecord("mean-visible", {**_space_params(space), "lambda": model.lam, "rho": model.rho})
    rec.rows.append(
        {
            "space": space.name,
            "finite": res.finite,
            "verdict": "finite" if res.finite else "infinite",
            "margin": res.margin,
            "value": res.value,
            "lambda_c": _format_threshold(harmonic.critical_intensity(space, model.rho)),
        }
    )
    if res.model_dependent:
        rec.warnings.append(DR_WARNING)
    return rec, EXIT_OK


def cmd_simulate(args) -> tuple[OutputRecord, int]:
    if args.space not in ("euclidean", "hyperbolic"):
        raise InputError("simulate supports --space euclidean or hyperbolic")
    sim = montecarlo.SimSpace(args.space, _need(args, "dim"))
    model = BooleanModel(_need(args, "lam"), _need(args, "rho"))
    trials = args.trials if args.trials is not None else 10_000
    r_max = args.rmax if args.rmax is not None else montecarlo.default_r_max(sim, model)
    steps = args.steps if args.steps is not None else 16
    rate = model.lam * harmonic.tube_coefficient(sim.harmonic_space, model.rho)
    rec = OutputRecord(
        "simulate",
        {"space": args.space, "dim": sim.n, "lambda": model.lam, "rho": model.rho, "trials": trials,
         "rmax": r_max, "seed": args.seed, "alpha": args.alpha, "steps": steps},
    )
    if math.exp(-rate * r_max) >= 1e-4:
        rec.warnings.append(
            f"analytic survival at rmax is {math.exp(-rate * r_max):.3g} >= 1e-4; "
            f"suggested rmax >= {montecarlo.default_r_max(sim, model):.6g}"
        )
    emp = montecarlo.run_experiment(sim, model, trials, r_max, args.seed)
    ks = montecarlo.ks_against_exponential(emp, rate, args.alpha)
    grid = np.linspace(0.0, r_max, steps + 1)
    s_emp, lo, hi = montecarlo.dkw_band(emp, grid, args.alpha)
    for r, se, a, b in zip(grid, s_emp, lo, hi):
        rec.rows.append(
            {"r": float(r), "empirical_survival": float(se), "analytic_survival": math.exp(-rate * r),
             "dkw_lower": float(a), "dkw_upper": float(b)}
        )
    rec.summary = {
        "rate": rate,
        "ks_d": ks.d_stat,
        "ks_threshold": ks.threshold,
        "ks_pass": ks.passed,
        "n_effective": ks.n_effective,
        "censored": emp.censored,
        "mean_estimate": emp.mean_estimate(),
        "analytic_mean": 1.0 / rate,
    }
    return rec, EXIT_OK if ks.passed else EXIT_STATISTICAL


def _surface(args) -> surfaces.WarpedSurface:
    kind = args.surface
    if kind == "ex1":
        return surfaces.Ex1()
    if kind == "ex2":
        return surfaces.Ex2(_need(args, "eps"))
    return surfaces.Ex3(args.dim if args.dim is not None else 3, _need(args, "eps"))


def cmd_surface_tube_volume(args) -> tuple[OutputRecord, int]:
    surface = _surface(args)
    if surface.kind == "ex3":
        raise InputError("ex3 is analytic only: no tube-volume solver (use 'surface rate')")
    rho = _need(args, "rho")
    lam = args.lam if args.lam is not None else 1.0
    model = BooleanModel(lam, rho)
    r_max = _need(args, "rmax")
    steps = args.steps if args.steps is not None else 20
    h = args.grid_h if args.grid_h is not None else 0.01
    rec = OutputRecord(
        "surface tube-volume",
        {"surface": surface.kind, "eps": surface.eps, "rho": rho, "lambda": lam, "rmax": r_max, "steps": steps,
         "grid_h": h},
    )
    ball = surfaces.origin_ball_volume(surface, rho, h)
    rs = r_max * np.arange(1, steps + 1) / steps
    log_s = []
    for r in rs:
        rep = surfaces.tube_volume_fmm(surface, rho, float(r), h)
        ls = -lam * (rep.fmm_volume - ball)
        log_s.append(ls)
        rec.rows.append(
            {"r": rep.r, "fmm_volume": rep.fmm_volume, "lower_bound": rep.lower_bound,
             "upper_bound": rep.upper_bound, "strip_volume": surfaces.strip_tube_volume(surface, rho, rep.r),
             "tolerance": rep.tolerance, "log_survival": ls}
        )
    rec.summary = {"ball_volume": ball, "grid_h": h}
    if surface.kind == "ex1":
        sel = rs >= 0.4 * r_max
        if sel.sum() < 5:
            sel = np.ones_like(rs, dtype=bool)
        fit = surfaces.fit_weibull_exponent(rs[sel], log_survival=np.asarray(log_s)[sel])
        rec.summary.update(
            {"fit_r_min": float(rs[sel][0]), "fit_r_max": float(rs[sel][-1]),
             "weibull_slope": fit.slope, "weibull_r_squared": fit.r_squared,
             "cubic_coefficient": surfaces.fit_cubic_coefficient(rs[sel], log_survival=np.asarray(log_s)[sel]),
             "cubic_reference": lam * 2.0 * rho**3 / 9.0}
        )
    else:
        rec.summary.update(
            {"rate_at_rmax": -log_s[-1] / float(rs[-1]), "asymptotic_rate": surfaces.asymptotic_rate(surface, model)}
        )
    return rec, EXIT_OK


def cmd_surface_simulate(args) -> tuple[OutputRecord, int]:
    surface = _surface(args)
    if surface.kind != "ex1":
        raise InputError("realization-level simulation is implemented for ex1")
    model = BooleanModel(_need(args, "lam"), _need(args, "rho"))
    r_max = _need(args, "rmax")
    trials = args.trials if args.trials is not None else 10_000
    h = args.grid_h if args.grid_h is not None else model.rho / 25
    steps = args.steps if args.steps is not None else 4
    rec = OutputRecord(
        "surface simulate",
        {"surface": "ex1", "lambda": model.lam, "rho": model.rho, "rmax": r_max, "trials": trials,
         "seed": args.seed, "grid_h": h, "alpha": args.alpha, "steps": steps},
    )
    emp = surfaces.simulate_visibility_ex1(model, r_max, h, trials, args.seed)
    rs = r_max * np.arange(1, steps + 1) / steps
    det = surfaces.deterministic_survival(surface, model, rs, h)
    s_emp, lo, hi = montecarlo.dkw_band(emp, rs, args.alpha)
    ok = True
    for r, se, d, a, b in zip(rs, s_emp, det, lo, hi):
        inside = bool(a <= d <= b)
        ok &= inside
        rec.rows.append(
            {"r": float(r), "empirical_survival": float(se), "fmm_survival": float(d),
             "dkw_lower": float(a), "dkw_upper": float(b), "inside_band": inside}
        )
    rec.summary = {
        "censored": emp.censored,
        "dkw_epsilon": numerics.dkw_epsilon(trials, args.alpha),
        "max_abs_deviation": float(np.max(np.abs(s_emp - det))),
        "consistent": ok,
    }
    return rec, EXIT_OK if ok else EXIT_STATISTICAL


def cmd_surface_rate(args) -> tuple[OutputRecord, int]:
    surface = _surface(args)
    if surface.kind == "ex1":
        raise InputError("ex1 has no exponential rate (cubic tube growth); use 'surface tube-volume'")
    model = BooleanModel(args.lam if args.lam is not None else 1.0, _need(args, "rho"))
    rate = surfaces.asymptotic_rate(surface, model)
    r_max = args.rmax if args.rmax is not None else 200.0
    steps = args.steps if args.steps is not None else 10
    rec = OutputRecord(
        "surface rate",
        {"surface": surface.kind, "dim": surface.n, "eps": surface.eps, "rho": model.rho, "lambda": model.lam,
         "rmax": r_max, "steps": steps},
    )
    for r in r_max * np.arange(1, steps + 1) / steps:
        strip = model.lam * surfaces.strip_tube_volume(surface, model.rho, float(r)) / float(r)
        rec.rows.append({"r": float(r), "strip_rate": strip, "relative_gap": strip / rate - 1.0})
    rec.summary = {"asymptotic_rate": rate}
    return rec, EXIT_OK


def cmd_surface_curvature(args) -> tuple[OutputRecord, int]:
    surface = _surface(args)
    if surface.kind == "ex3":
        raise InputError("curvature is available for the surfaces ex1 and ex2")
    rec = OutputRecord("surface curvature", {"surface": surface.kind, "eps": surface.eps})
    if args.s is not None or args.t is not None:
        pts = [(args.s or 0.0, args.t or 0.0)]
    else:
        steps = args.steps if args.steps is not None else 5
        s_max = args.rmax if args.rmax is not None else 2.0
        t_max = args.rho if args.rho is not None else 1.0
        pts = [(float(s), float(t)) for s in np.linspace(0.0, s_max, steps + 1)
               for t in np.linspace(-t_max, t_max, 2 * steps + 1)]
        rec.params.update({"rmax": s_max, "rho": t_max, "steps": steps})
    for s, t in pts:
        rec.rows.append(
            {"s": s, "t": t, "J": surfaces.conformal_factor(surface, s, t),
             "K": surfaces.gaussian_curvature(surface, s, t),
             "K_fd": float(surfaces.gaussian_curvature_fd(surface, s, t))}
        )
    return rec, EXIT_OK


SURFACE_COMMANDS = {
    "tube-volume": cmd_surface_tube_volume,
    "simulate": cmd_surface_simulate,
    "rate": cmd_surface_rate,
    "curvature": cmd_surface_curvature,
}


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default="-", help="output path, or - for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmonic-visibility",
        description="Visibility laws for Poisson Boolean models on harmonic manifolds and warped surfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="tube coefficients, entropies and critical intensities")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    _add_common(p)

    for name, help_ in (("survival", "analytic survival curve"), ("mean-visible", "mean visible volume")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--space", choices=HARMONIC_SPACES, required=True)
        p.add_argument("--dim", type=int, help="n for flat/rh, m for ch/hh")
        p.add_argument("--p", type=int)
        p.add_argument("--q", type=int)
        p.add_argument("--lambda", dest="lam", type=float, required=True)
        p.add_argument("--rho", type=float, required=True)
        if name == "survival":
            p.add_argument("--rmax", type=float)
            p.add_argument("--steps", type=int)
        _add_common(p)

    p = sub.add_parser("simulate", help="Monte Carlo visible ranges in R^n or RH^n")
    p.add_argument("--space", choices=("euclidean", "hyperbolic"), required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--rmax", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    _add_common(p)

    p = sub.add_parser("surface", help="warped counterexample surfaces")
    p.add_argument("subcommand", choices=tuple(SURFACE_COMMANDS))
    p.add_argument("--surface", choices=surfaces.KINDS, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--dim", type=int, help="ambient dimension n for ex3")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-h", dest="grid_h", type=float)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--s", type=float, help="single evaluation point (curvature)")
    p.add_argument("--t", type=float, help="single evaluation point (curvature)")
    _add_common(p)
    return parser


def run(argv=None) -> tuple[OutputRecord, int, str, str, str]:
    """Parse and execute; returns ``(record, exit_code, output, stderr_text, out_path)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "surface" and args.subcommand == "simulate" and args.seed is None:
        parser.error("surface simulate requires --seed")
    handler = {
        "catalog": cmd_catalog,
        "survival": cmd_survival,
        "mean-visible": cmd_mean_visible,
        "simulate": cmd_simulate,
    }.get(args.command)
    if handler is None:
        handler = SURFACE_COMMANDS[args.subcommand]
    rec, code = handler(args)
    if args.format == "json":
        return rec, code, rec.to_json(), "", args.out
    return rec, code, rec.to_csv(), rec.side_channel(), args.out


def main(argv=None) -> int:
    try:
        _, code, text, side, out = run(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if exc.code is not None else EXIT_OK
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HarmonicVisibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    sys.stderr.write(side)
    return code


if __name__ == "__main__":
    sys.exit(main())
