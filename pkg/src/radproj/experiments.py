"""End-to-end experiments: exceptional-set sweeps, endpoint demo, bound tables, pipeline."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .config import ExperimentConfig
from .dimension import (
    DimensionFit,
    box_dimension,
    cap_counting_dimension,
    criteria_certificate,
    cube_for,
    radial_histograms,
)
from .errors import ConfigError, RadprojError
from .io import write_csv, write_json, write_pgm
from .measures import PointMeasure, full_grid_spec, build_cantor_measure, segment_measure
from .tubes import (
    GoalReport,
    TubeTable,
    default_beta,
    frostman_projection_check,
    goal_check,
    symmetry_check,
    bad_term,
    threshold_exponent,
)

THREADS_ENV = "RADPROJ_THREADS"
MIN_EXCEPTIONAL = 10


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def ordered_map(func, items):
    """Map in input order; threads only change wall time, never the output."""
    n = thread_count()
    if n == 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


def fitted_dimension(mu: PointMeasure, window=(2, 6)) -> DimensionFit:
    """Box-counting fit on the smallest cube containing ``mu``."""
    origin, side = cube_for(mu.locations)
    return box_dimension(mu.locations, window, origin=origin, side=side)


# ---------------------------------------------------------------- sweeps


@dataclass
class ViewpointResult:
    location: tuple[float, ...]
    slope: float
    residual: float
    verdict: bool | None
    margin: float


@dataclass
class SweepResult:
    lattice_shape: tuple[int, ...]
    spacing: tuple[float, ...]
    points: np.ndarray = field(repr=False)
    kept: np.ndarray = field(repr=False)
    results: list[ViewpointResult | None] = field(repr=False)
    dim_E: float
    tau: float
    beta: float | None
    exceptional: np.ndarray = field(repr=False)
    exceptional_fit: DimensionFit | None
    fit_window: tuple[int, int] | None
    vacuous: bool

    @property
    def status(self) -> str:
        return "ok" if self.exceptional_fit is not None else "insufficient sample"

    @property
    def exceptional_fraction(self) -> float:
        n = int(self.kept.sum())
        return len(self.exceptional) / n if n else 0.0

    def bounds(self) -> dict:
        d = self.points.shape[1]
        out = {"peres_schlag_tau": self.tau + 1, "peres_schlag_dimE": self.dim_E + 1}
        if d - 2 < self.dim_E <= d - 1 + 1e-9:
            out["radial_bound"] = 2 * (d - 1) - self.dim_E
        if d == 2:
            out["orponen_half_threshold"] = self.dim_E / 2
        return out

    def slope_grid(self) -> np.ndarray:
        vals = np.full(len(self.points), np.nan)
        for i, r in enumerate(self.results):
            if r is not None:
                vals[i] = r.slope
        return vals.reshape(self.lattice_shape)

    def rows(self):
        for i, (p, keep) in enumerate(zip(self.points, self.kept)):
            r = self.results[i]
            if r is None:
                yield [i, *p.tolist(), True, None, None, None, False, None]
            else:
                verdict = None if r.verdict is None else ("PASS" if r.verdict else "FAIL")
                yield [i, *p.tolist(), False, r.slope, r.residual, verdict, r.slope < self.tau, r.margin]

    def header(self) -> list[str]:
        d = self.points.shape[1]
        return ["index", *[f"x{j}" for j in range(d)], "excluded", "slope", "residual",
                "certificate", "exceptional", "margin"]

    def to_dict(self) -> dict:
        fit = self.exceptional_fit
        return {
            "lattice_shape": list(self.lattice_shape),
            "lattice_spacing": list(self.spacing),
            "viewpoints_total": len(self.points),
            "viewpoints_excluded": int((~self.kept).sum()),
            "dim_E_fit": self.dim_E,
            "tau": self.tau,
            "beta": self.beta,
            "vacuous": self.vacuous,
            "exceptional_count": len(self.exceptional),
            "exceptional_fraction": self.exceptional_fraction,
            "exceptional_status": self.status,
            "exceptional_dimension": None if fit is None else fit.slope,
            "exceptional_fit_residual": None if fit is None else fit.residual,
            "exceptional_fit_window": None if self.fit_window is None else list(self.fit_window),
            "bounds": self.bounds(),
            "note": "lattice-restricted estimate; says nothing about viewpoints off the lattice",
        }


def exclusion_mask(points: np.ndarray, mu: PointMeasure, rho0: float) -> np.ndarray:
    """True where a viewpoint is at least rho0 from every atom of mu."""
    if mu.is_empty:
        return np.ones(len(points), dtype=bool)
    dist, _ = cKDTree(mu.locations).query(points)
    return dist >= rho0


def _fit_window(side: float, spacing: float) -> tuple[int, int] | None:
    k1 = int(math.floor(math.log2(side / spacing) + 1e-9))
    k0 = max(1, k1 - 4)
    return (k0, k1) if k1 - k0 >= 2 else None


def exceptional_sweep(config: ExperimentConfig, E: PointMeasure | None = None) -> SweepResult:
    """Estimate dim pi^x(E) on the viewpoint lattice and box-count the exceptional subset."""
    if config.viewpoints is None:
        raise ConfigError("sweep needs a [viewpoints] section")
    E = config.build_E() if E is None else E
    lat, par = config.viewpoints, config.params
    if lat.lo.shape != (E.dim,):
        raise ConfigError(f"[viewpoints] lo/hi need {E.dim} coordinates")
    dim_E = par.s_E if par.s_E is not None else fitted_dimension(E, par.box_window).slope
    tau = par.tau if par.tau is not None else dim_E - par.slack
    vacuous = tau > dim_E
    beta = par.beta if par.beta is not None else default_beta(dim_E, tau)
    certify = 0 < tau <= E.dim - 1 and beta > 0
    ks = list(range(par.window[0], par.window[1] + 1))

    points = lat.points()
    kept = exclusion_mask(points, E, par.rho0)

    def one(x):
        hists = radial_histograms(E, x, ks, par.rho0)
        fit = cap_counting_dimension(E, x, par.window, par.mass_fraction, par.rho0, hists)
        verdict = None
        if certify:
            verdict = criteria_certificate(E, x, tau, beta, par.window, par.rho0, hists).verdict
        return ViewpointResult(tuple(float(c) for c in x), fit.slope, fit.residual, verdict, tau - fit.slope)

    computed = ordered_map(one, list(points[kept]))
    results: list[ViewpointResult | None] = [None] * len(points)
    for i, r in zip(np.flatnonzero(kept), computed):
        results[i] = r
    exc = np.array([i for i, r in enumerate(results) if r is not None and r.slope < tau], dtype=int)

    side = float((lat.hi - lat.lo).max()) or 1.0
    window = _fit_window(side, float(lat.spacing.min()))
    fit = None
    if len(exc) >= MIN_EXCEPTIONAL and window is not None:
        fit = box_dimension(points[exc], window, origin=lat.lo, side=side * (1 + 1e-9))
    return SweepResult(lat.shape, tuple(lat.spacing.tolist()), points, kept, results, dim_E, tau,
                       beta if certify else None, exc, fit, window, vacuous)


def write_sweep(result: SweepResult, config: ExperimentConfig) -> list:
    out = config.output
    out.dir.mkdir(parents=True, exist_ok=True)
    paths = [out.path("sweep.csv"), out.path("sweep.json")]
    write_csv(paths[0], result.header(), result.rows())
    write_json(paths[1], result.to_dict())
    if out.pgm and len(result.lattice_shape) == 2:
        d = result.points.shape[1]
        img = result.slope_grid().T[::-1]  # y up, x across
        paths.append(out.path("slopes.pgm"))
        write_pgm(paths[-1], img, 0.0, float(d - 1))
    return paths


# ---------------------------------------------------------------- endpoint demo

_INSIDE = {
    2: [(-1.0, 0.0), (2.0, 0.0), (-0.75, 0.0), (1.8, 0.0)],
    3: [(-1.0, 0.5, 0.0), (2.0, 0.3, 0.0), (0.5, -0.9, 0.0), (1.6, 1.7, 0.0)],
}
_OUTSIDE = {
    2: [(0.5, 1.0), (-0.6, 0.9), (1.7, -1.1), (0.2, -0.8)],
    3: [(0.5, 0.5, 1.0), (-0.4, 1.3, 0.8), (1.5, -0.5, -0.9), (0.3, 0.6, -1.2)],
}


def hyperplane_measure(d: int, k: int) -> PointMeasure:
    """Equal atoms filling the unit cube of the hyperplane x_d = 0, finer than delta_k."""
    if d == 2:
        return segment_measure([0.0, 0.0], [1.0, 0.0], 2 ** (k + 3))
    flat = build_cantor_measure(full_grid_spec(2, 2, k + 1))
    return PointMeasure(np.column_stack([flat.locations, np.zeros(flat.n_atoms)]), flat.weights)


def sharpness_endpoint_demo(d: int, k: int = 7) -> dict:
    """Cap-counting slopes from viewpoints inside vs outside the hyperplane holding E."""
    if d not in (2, 3):
        raise ConfigError("d must be 2 or 3")
    if k < 4:
        raise ConfigError("k must be at least 4 (window k-3 .. k)")
    E = hyperplane_measure(d, k)
    window = (k - 3, k)
    ks = list(range(window[0], window[1] + 1))

    def slopes(points):
        out, conserved = [], True
        for x in points:
            hists = radial_histograms(E, np.array(x), ks)
            conserved &= all(abs(math.fsum(h.tolist()) - E.total_mass) <= 1e-12 for h in hists.values())
            out.append(cap_counting_dimension(E, x, window, histograms=hists).slope)
        return out, conserved

    inside, c1 = slopes(_INSIDE[d])
    outside, c2 = slopes(_OUTSIDE[d])
    return {
        "d": d, "k": k, "window": list(window), "atoms": E.n_atoms,
        "inside": {"viewpoints": _INSIDE[d], "slopes": inside, "mean": float(np.mean(inside)),
                   "expected": d - 2},
        "outside": {"viewpoints": _OUTSIDE[d], "slopes": outside, "mean": float(np.mean(outside)),
                    "expected": d - 1},
        "drop": float(np.mean(outside) - np.mean(inside)),
        "mass_conserved": bool(c1 and c2),
    }


# ---------------------------------------------------------------- bound table

BOUND_COLUMNS = [
    "d", "dimE", "tau", "ps_exceptional", "ps_lower", "ps_dimE", "radial_bound", "orponen_half",
    "conjectured", "trivial", "min_upper", "min_source", "radial_improves_ps", "s",
    "cond1_dimE_above", "cond1_holds", "cond2_dimF_above", "cond3_dimF_above",
]


def bound_row(d: int, dimE: float, tau: float) -> dict:
    s = d - 1 + tau - dimE
    radial = 2 * (d - 1) - dimE if d - 2 < dimE <= d - 1 else None
    orponen = dimE / 2 if d == 2 else None
    uppers = {"peres_schlag": tau + 1, "trivial": float(d)}
    if radial is not None:
        uppers["radial_bound"] = radial
    if orponen is not None and tau <= orponen:
        # exceptional set for tau <= dim E / 2 is Hausdorff-null in the plane
        uppers["orponen_half"] = 0.0
    src = min(uppers, key=lambda key: (uppers[key], key))
    return {
        "d": d, "dimE": dimE, "tau": tau,
        "ps_exceptional": tau + 1, "ps_lower": dimE - 1, "ps_dimE": dimE + 1,
        "radial_bound": radial, "orponen_half": orponen, "conjectured": math.ceil(dimE),
        "trivial": float(d), "min_upper": uppers[src], "min_source": src,
        "radial_improves_ps": None if radial is None else radial <= dimE + 1,
        "s": s, "cond1_dimE_above": s + 1, "cond1_holds": dimE > s + 1,
        "cond2_dimF_above": s + 1, "cond3_dimF_above": 2 + 2 * tau - 2 * dimE,
    }


def bound_table(d: int, dimE_grid, tau_grid) -> list[dict]:
    """Bounds for every (dimE, tau) with tau in (dimE - 1, dimE]; other pairs are skipped."""
    if d not in (2, 3):
        raise ConfigError("d must be 2 or 3")
    rows = []
    for dimE in dimE_grid:
        if not 0 < dimE <= d - 1:
            raise ConfigError(f"dimE={dimE} outside (0, {d - 1}]")
        for tau in tau_grid:
            if not 0 < tau <= d - 1:
                raise ConfigError(f"tau={tau} outside (0, {d - 1}]")
            if dimE - 1 < tau <= dimE:
                rows.append(bound_row(d, float(dimE), float(tau)))
    if not rows:
        raise ConfigError("no (dimE, tau) pair satisfies dimE - 1 < tau <= dimE")
    return rows


# ---------------------------------------------------------------- pipeline

GOAL_HEADER = ["k", "lhs", "good", "bad", "dual", "target", "lhs_ratio", "good_ratio",
               "bad_ratio", "dual_ratio"]


def goal_rows(report: GoalReport):
    for r in report.rows:
        ratios = r.ratios
        yield [r.k, r.lhs, r.good, r.bad, r.dual, r.target, ratios["lhs_ratio"],
               ratios["good_ratio"], ratios["bad_ratio"], ratios["dual_ratio"]]


class _Stage:
    """Tag any library error raised inside with the stage name."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, RadprojError) and not hasattr(exc, "stage"):
            exc.stage = self.name
        return False


def run_pipeline(config: ExperimentConfig, write: bool = True) -> dict:
    """goal_check for (E, F, tau), the dual Bad bound, then goal_check for (F, E, s)."""
    par = config.params
    with _Stage("build"):
        E, F = config.build_E(), config.build_F()
        if E.dim != F.dim:
            raise ConfigError("E and F live in different dimensions")
    with _Stage("fit"):
        s_E = par.s_E if par.s_E is not None else fitted_dimension(E, par.box_window).slope
        s_F = par.s_F if par.s_F is not None else fitted_dimension(F, par.box_window).slope
        tau = par.tau if par.tau is not None else s_E - par.slack
        beta = par.beta if par.beta is not None else default_beta(s_E, tau)
    with _Stage("goal"):
        goal = goal_check(E, F, par.window, tau, beta, s_E)
    s = goal.s
    ks = [r.k for r in goal.rows]
    with _Stage("dual_bound"):
        table = TubeTable(E, F, ks)
        probes = []
        for row in goal.rows:
            sym = symmetry_check(bad_term(E, F, row.k, s, table))
            proj = frostman_projection_check(E, F, row.k, s, table)
            probes.append({
                "k": row.k, "bad": row.bad, "dual_rhs": row.dual,
                "ratio": row.bad / row.dual if row.dual and math.isfinite(row.dual) else None,
                "fubini_gap": sym.lhs, "frostman_proj_mass": proj.lhs,
                "frostman_proj_threshold": proj.rhs,
            })
    dual_stage = {"exponent": s, "s_F": s_F}
    with _Stage("dual_goal"):
        dual_beta = par.beta if par.beta is not None else default_beta(s_F, s)
        if not 0 < s <= E.dim - 1:
            dual_stage["skipped"] = f"exponent s={s!r} outside (0, {E.dim - 1}]"
        elif not dual_beta > 0:
            dual_stage["skipped"] = f"beta={dual_beta!r} not positive (needs s_F > s)"
        else:
            dual = goal_check(F, E, par.window, s, dual_beta, s_F)
            dual_stage["report"] = dual.to_dict()
    report = {
        "parameters": {"d": E.dim, "tau": tau, "beta": beta, "s_E": s_E, "s_F": s_F, "s": s,
                       "s_formula": "d - 1 + tau - s_E + 4 beta", "window": list(par.window),
                       "seed": config.seed, "atoms_E": E.n_atoms, "atoms_F": F.n_atoms},
        "goal": goal.to_dict(),
        "dual_bound": probes,
        "dual_stage": dual_stage,
    }
    if write:
        with _Stage("write"):
            out = config.output
            out.dir.mkdir(parents=True, exist_ok=True)
            write_csv(out.path("goal.csv"), GOAL_HEADER, goal_rows(goal))
            if "report" in dual_stage:
                write_csv(out.path("dual_goal.csv"), GOAL_HEADER, goal_rows(dual))
            write_json(out.path("pipeline.json"), report)
    return report


__all__ = [
    "SweepResult", "ViewpointResult", "bound_row", "bound_table", "exceptional_sweep",
    "fitted_dimension", "hyperplane_measure", "run_pipeline", "sharpness_endpoint_demo",
    "threshold_exponent", "write_sweep",
]
