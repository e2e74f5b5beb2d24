"""Oracle comparisons run by ``kgstep validate`` and the acceptance suite.

Each check returns an ``OracleCheck``; thresholds are arguments so callers
can tighten them (and watch them fail) without touching the measurement.
"""
from __future__ import annotations

import numpy as np

from .core import C_NM_PER_FS, SpacetimePoint, StepParams, derive_params
from .exact import phi_stationary, psi_cutoff_asym, psi_exact, psi_free
from .analysis import causality_scan, grid
from .oracle.fdtd import convergence_ladder
from .oracle.quadrature import QuadratureSpec, bromwich_quadrature
from .oracle.report import OracleCheck, OracleReport

GRID_TIMES = tuple(np.linspace(0.01, 0.3, 10))
GRID_FRACTIONS = tuple(np.linspace(0.1, 0.9, 10))
CAUSALITY_TIMES = (0.01, 0.05, 0.3)
CUTOFF_TIMES = (0.05, 0.3)
CUTOFF_WINDOW = 1e-3
LADDER_DXS = (0.008, 0.004, 0.002)
LADDER_PROBES = (0.1, 0.5, 1.0, 3.0)
LADDER_RATIO = (3.2, 4.8)
FREE_MU0 = 1e-8


def check_quadrature_grid(p: StepParams, threshold: float = 1e-8, tol: float = 1e-12) -> OracleCheck:
    """Stable series against contour quadrature on a 10 x 10 interior grid."""
    worst, worst_rel, where = 0.0, 0.0, None
    spec = QuadratureSpec(tol=min(tol, 1e-10))
    for t in GRID_TIMES:
        ct = C_NM_PER_FS * t
        for f in GRID_FRACTIONS:
            pt = SpacetimePoint(f * ct, float(t))
            a = psi_exact(p, pt, tol).value
            b = bromwich_quadrature(p, pt, spec).value
            err = abs(a - b)
            if err > worst:
                worst, where = err, (pt.x, pt.t)
            if a != 0:
                worst_rel = max(worst_rel, err / abs(a))
    return OracleCheck(
        "series_vs_quadrature",
        worst < threshold,
        worst,
        threshold,
        {"max_rel_error": worst_rel, "worst_point": where, "n_points": len(GRID_TIMES) * len(GRID_FRACTIONS)},
    )


def check_fdtd_ladder(
    p: StepParams,
    final_threshold: float = 1e-3,
    ratio_band: tuple = LADDER_RATIO,
    dxs=LADDER_DXS,
    max_memory_bytes: int | None = None,
    tol: float = 1e-12,
) -> list[OracleCheck]:
    """Error reduction per dx halving and the finest-level error."""
    rep = convergence_ladder(p, dxs, LADDER_PROBES, max_memory_bytes=max_memory_bytes, tol=tol)
    levels = [
        {"dx": lv.dx, "rel_l2_error": lv.rel_l2_error, "energy_drift": lv.energy_drift, "max_leakage": lv.max_leakage}
        for lv in rep.levels
    ]
    lo, hi = ratio_band
    ratios_ok = all(lo <= r <= hi for r in rep.ratios)
    worst_ratio = min(rep.ratios, key=lambda r: -abs(r - 0.5 * (lo + hi)))
    detail = {"levels": levels, "ratios": list(rep.ratios), "orders": list(rep.orders)}
    return [
        OracleCheck("fdtd_ratio_per_halving", ratios_ok, worst_ratio, 0.5 * (lo + hi), dict(detail, band=[lo, hi])),
        OracleCheck("fdtd_final_error", rep.final_error < final_threshold, rep.final_error, final_threshold, detail),
    ]


def free_limit_points() -> list[SpacetimePoint]:
    pts = []
    for t in GRID_TIMES:
        ct = C_NM_PER_FS * t
        pts += [SpacetimePoint(f * ct, float(t)) for f in GRID_FRACTIONS]
    return pts


def check_free_limit(energy_k: float, threshold: float = 1e-6, tol: float = 1e-12) -> OracleCheck:
    """Vanishing barrier: the series must reduce to the free shutter wave."""
    p0 = StepParams(FREE_MU0, energy_k, allow_propagating=True)
    worst, where = 0.0, None
    for pt in free_limit_points():
        err = abs(psi_exact(p0, pt, tol).value - psi_free(energy_k, pt).value)
        if err > worst:
            worst, where = err, (pt.x, pt.t)
    return OracleCheck("free_limit", worst < threshold, worst, threshold, {"mu0": FREE_MU0, "worst_point": where})


def check_stationary_limit(p: StepParams, x: float = 0.1, t: float = 20.0, threshold: float = 1e-5) -> OracleCheck:
    """Long-time approach to the stationary evanescent wave."""
    pt = SpacetimePoint(x, t)
    a = psi_exact(p, pt, 1e-10)
    b = phi_stationary(p, pt)
    rel = abs(a.value - b.value) / abs(b.value)
    return OracleCheck("stationary_limit", rel < threshold, rel, threshold, {"x": x, "t": t, "terms": a.diag.terms_used})


def cutoff_window_error(p: StepParams, t: float, width: float = CUTOFF_WINDOW, n: int = 400, tol: float = 1e-12) -> float:
    """Relative L2 distance between the forerunner asymptote and the series
    over ct (1 - width) <= x < ct.  Pointwise ratios are useless next to
    the zeros of J_1, so the window norm is what gets compared."""
    ct = C_NM_PER_FS * t
    xs = np.linspace(ct * (1.0 - width), ct, n, endpoint=False)
    ex = np.array([psi_exact(p, SpacetimePoint(float(x), t), tol).value for x in xs])
    asym = np.array([psi_cutoff_asym(p, SpacetimePoint(float(x), t)).value for x in xs])
    return float(np.linalg.norm(asym - ex) / np.linalg.norm(ex))


def check_cutoff_windows(p: StepParams, threshold: float = 1e-2, tol: float = 1e-12) -> OracleCheck:
    errs = {f"t={t:g}": cutoff_window_error(p, t, tol=tol) for t in CUTOFF_TIMES}
    worst = max(errs.values())
    return OracleCheck("cutoff_asymptote", worst < threshold, worst, threshold, {"window": CUTOFF_WINDOW, "errors": errs})


def check_causality(p: StepParams, tol: float = 1e-12, n: int = 200) -> OracleCheck:
    out = {}
    for t in CAUSALITY_TIMES:
        ct = C_NM_PER_FS * t
        # mostly beyond the cone, with a few interior points and the cone itself
        xs = np.concatenate([grid(0.5 * ct, 2.0 * ct, n), [ct, np.nextafter(ct, np.inf)]])
        out[f"t={t:g}"] = causality_scan(p, t, np.sort(xs), tol=tol).max_outside
    worst = max(out.values())
    return OracleCheck("causality", worst == 0.0, worst, 0.0, {"max_outside": out})


def run_validation(
    p: StepParams,
    tol: float = 1e-12,
    fdtd_threshold: float = 1e-3,
    max_memory_bytes: int | None = None,
) -> OracleReport:
    d = derive_params(p)
    checks = [check_quadrature_grid(p, tol=tol)]
    checks += check_fdtd_ladder(p, fdtd_threshold, max_memory_bytes=max_memory_bytes, tol=tol)
    checks += [
        check_free_limit(p.energy_k, tol=tol),
        check_stationary_limit(p),
        check_cutoff_windows(p, tol=tol),
        check_causality(p, tol=tol),
    ]
    return OracleReport(tuple(checks), {"mu0": p.mu0, "energy_k": p.energy_k, "q": d.q, "x_p": d.x_p})
