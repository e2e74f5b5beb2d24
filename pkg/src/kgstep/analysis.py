"""Transient features of |psi|^2 extracted from 1-D scans.

Everything here works on ``FieldScan`` objects (amplitudes sampled on a
uniform grid in x at fixed t, or in t at fixed x) and is deterministic:
identical scans give identical reports.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import C_NM_PER_FS, KGStepError, ParameterError, SpacetimePoint, StepParams, derive_params
from .exact import ComplexAmplitude, phi_stationary, psi_auto
from .specfn import j1_zeros

# conventions for the detectors below
CROSSOVER_DEVIATION = 0.5
MIN_OSCILLATIONS = 3


class AnalysisError(KGStepError):
    pass


class NoPeakError(AnalysisError):
    pass


class TooFewZerosError(AnalysisError):
    pass


class NoCrossoverError(AnalysisError):
    pass


class PatternAbsentError(AnalysisError):
    def __init__(self, reason: str, report: "DiffractionReport | None" = None):
        super().__init__(reason)
        self.reason = reason
        self.report = report


class Axis(enum.Enum):
    OVER_X = "OverX"
    OVER_T = "OverT"


@dataclass(frozen=True)
class FieldScan:
    """Amplitudes on a uniform grid; ``fixed_value`` is t (fs) or x (nm)."""

    axis: Axis
    fixed_value: float
    coords: np.ndarray
    samples: tuple
    params: StepParams | None = None

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ParameterError("a scan needs at least two coordinates")
        if len(self.samples) != c.size:
            raise ParameterError("coords and samples differ in length")
        d = np.diff(c)
        if np.any(d <= 0):
            raise ParameterError("scan coordinates must be strictly increasing")
        if np.max(np.abs(d - d.mean())) > 1e-12 * max(1.0, float(np.max(np.abs(c)))):
            raise ParameterError("scan spacing is not uniform")
        object.__setattr__(self, "coords", c)

    @property
    def spacing(self) -> float:
        return float((self.coords[-1] - self.coords[0]) / (self.coords.size - 1))

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples], dtype=complex)

    @property
    def abs2(self) -> np.ndarray:
        return np.array([s.abs2 for s in self.samples])

    def point(self, i: int) -> SpacetimePoint:
        if self.axis is Axis.OVER_X:
            return SpacetimePoint(float(self.coords[i]), self.fixed_value)
        return SpacetimePoint(self.fixed_value, float(self.coords[i]))


def grid(start: float, stop: float, n: int) -> np.ndarray:
    if n < 2:
        raise ParameterError(f"grid needs n >= 2, got {n}")
    if not start < stop:
        raise ParameterError(f"grid needs start < stop, got {start}, {stop}")
    return np.linspace(start, stop, int(n))


def scan(
    axis: Axis,
    fixed_value: float,
    coords: Sequence[float],
    fn: Callable[[SpacetimePoint], ComplexAmplitude],
    params: StepParams | None = None,
) -> FieldScan:
    coords = np.asarray(coords, dtype=float)
    if axis is Axis.OVER_X:
        pts = [SpacetimePoint(float(x), fixed_value) for x in coords]
    else:
        pts = [SpacetimePoint(fixed_value, float(t)) for t in coords]
    return FieldScan(axis, float(fixed_value), coords, tuple(fn(pt) for pt in pts), params)


def scan_over_x(p: StepParams, t: float, xs, tol: float = 1e-12, evaluator=psi_auto) -> FieldScan:
    return scan(Axis.OVER_X, t, xs, lambda pt: evaluator(p, pt, tol), p)


def scan_over_t(p: StepParams, x: float, ts, tol: float = 1e-12, evaluator=psi_auto) -> FieldScan:
    return scan(Axis.OVER_T, x, ts, lambda pt: evaluator(p, pt, tol), p)


def stationary_level(scan_: FieldScan) -> np.ndarray:
    """|phi|^2 at every sample of the scan."""
    if scan_.params is None:
        raise ParameterError("scan carries no parameters for the stationary reference")
    return np.array([phi_stationary(scan_.params, scan_.point(i)).abs2 for i in range(scan_.coords.size)])


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class PeakReport:
    t_peak: float
    peak_value: float
    x: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OscillationReport:
    extrema: tuple  # ((coord, value), ...)
    zero_spacings: tuple
    mean_spacing: float
    zeros: tuple = ()
    reference_zeros: tuple = ()
    max_zero_mismatch: float = math.nan
    grid_spacing: float = math.nan

    def to_dict(self) -> dict:
        return {
            "extrema": [list(e) for e in self.extrema],
            "zero_spacings": list(self.zero_spacings),
            "mean_spacing": self.mean_spacing,
            "zeros": list(self.zeros),
            "reference_zeros": list(self.reference_zeros),
            "max_zero_mismatch": self.max_zero_mismatch,
            "grid_spacing": self.grid_spacing,
        }


@dataclass(frozen=True)
class DiffractionReport:
    x: float
    t_front: float
    t_first_max: float
    reference: float
    extrema: tuple  # ((t, |psi|^2, "max" | "min"), ...)
    deviations: tuple
    present: bool = True
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "t_front": self.t_front,
            "t_first_max": self.t_first_max,
            "reference": self.reference,
            "extrema": [list(e) for e in self.extrema],
            "deviations": list(self.deviations),
            "present": self.present,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class CausalityReport:
    t: float
    max_outside: float
    max_inside: float
    n_outside: int

    @property
    def relative(self) -> float:
        return self.max_outside / self.max_inside if self.max_inside > 0 else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relative"] = self.relative
        return d


def to_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True)


# ---------------------------------------------------------------------------
# peaks


def _parabolic(y_m, y_0, y_p):
    den = y_m - 2.0 * y_0 + y_p
    if den >= 0.0:  # flat or not a maximum: keep the sample
        return 0.0, y_0
    delta = 0.5 * (y_m - y_p) / den
    return delta, y_0 - 0.25 * (y_m - y_p) * delta


def detect_peak(scan_: FieldScan) -> PeakReport:
    """Global maximum of |psi|^2 over t, refined by a 3-point parabola.

    Ties go to the earliest sample; a maximum on either end of the scan is
    not a peak.
    """
    if scan_.axis is not Axis.OVER_T:
        raise ParameterError("detect_peak needs a scan over t")
    y = scan_.abs2
    i = int(np.argmax(y))  # first occurrence on ties
    if i == 0 or i == y.size - 1:
        raise NoPeakError("no interior maximum of |psi|^2 in the scan")
    delta, value = _parabolic(y[i - 1], y[i], y[i + 1])
    return PeakReport(float(scan_.coords[i] + delta * scan_.spacing), float(value), scan_.fixed_value)


def peak_ordering(p: StepParams, xs: Sequence[float], ts, tol: float = 1e-12) -> dict:
    """Peaks and front arrivals for several depths, plus the two orderings."""
    peaks = [detect_peak(scan_over_t(p, x, ts, tol)) for x in xs]
    fronts = [x / C_NM_PER_FS for x in xs]
    order = np.argsort(xs)
    t_peaks = [peaks[i].t_peak for i in order]
    t_fronts = [fronts[i] for i in order]
    return {
        "x": [float(xs[i]) for i in order],
        "t_peak": t_peaks,
        "peak_value": [peaks[i].peak_value for i in order],
        "t_front": t_fronts,
        "peaks_earlier_when_deeper": all(a > b for a, b in zip(t_peaks, t_peaks[1:])),
        "fronts_later_when_deeper": all(a < b for a, b in zip(t_fronts, t_fronts[1:])),
    }


# ---------------------------------------------------------------------------
# precursor


def _sign_change_zeros(x, f):
    s = np.sign(f)
    out = []
    for i in range(x.size - 1):
        if f[i] == 0.0:
            out.append(float(x[i]))
        elif s[i] * s[i + 1] < 0:
            out.append(float(x[i] - f[i] * (x[i + 1] - x[i]) / (f[i + 1] - f[i])))
    return np.array(out)


def j1_zero_positions(p: StepParams, t: float, lo: float, hi: float) -> np.ndarray:
    """x positions where eta(x) = mu0 sqrt(c^2 t^2 - x^2) hits a zero of J_1."""
    ct = C_NM_PER_FS * t
    eta_max = p.mu0 * math.sqrt(max(ct * ct - lo * lo, 0.0))
    z = j1_zeros(eta_max + 1.0)
    xs = np.sqrt(np.maximum(ct * ct - (z / p.mu0) ** 2, 0.0))
    return np.sort(xs[(xs >= lo) & (xs <= hi)])


def precursor_zeros(scan_: FieldScan, window: tuple[float, float] | None = None) -> OscillationReport:
    """Zeros of Re(psi e^{iEct}) near the cone, compared with J_1 zeros.

    At fixed t the carrier e^{-iEct} is a constant phase; removing it leaves
    the real Bessel structure of the forerunner.
    """
    if scan_.axis is not Axis.OVER_X or scan_.params is None:
        raise ParameterError("precursor_zeros needs a parametrised scan over x")
    p, t = scan_.params, scan_.fixed_value
    ct = C_NM_PER_FS * t
    lo, hi = window if window is not None else (0.7 * ct, ct)
    if lo < 0.7 * ct * (1 - 1e-12) or hi > ct:
        raise ParameterError(f"window must lie in [0.7 ct, ct) = [{0.7 * ct:.6g}, {ct:.6g})")
    sel = (scan_.coords >= lo) & (scan_.coords <= hi)
    x = scan_.coords[sel]
    f = (scan_.values[sel] * np.exp(1j * p.energy_k * ct)).real
    zeros = _sign_change_zeros(x, f)
    if zeros.size < 3:
        raise TooFewZerosError(f"found {zeros.size} zeros in [{lo}, {hi}], need 3")
    ref = j1_zero_positions(p, t, lo, hi)
    mismatch = math.nan
    if ref.size:
        mismatch = float(max(np.min(np.abs(ref - z)) for z in zeros))
    extrema = []
    for a, b in zip(zeros[:-1], zeros[1:]):
        m = (x > a) & (x < b)
        if m.any():
            j = int(np.argmax(np.abs(f[m])))
            extrema.append((float(x[m][j]), float(f[m][j])))
    spacings = np.diff(zeros)
    return OscillationReport(
        tuple(extrema),
        tuple(float(s) for s in spacings),
        float(spacings.mean()),
        tuple(float(z) for z in zeros),
        tuple(float(z) for z in ref),
        mismatch,
        scan_.spacing,
    )


# ---------------------------------------------------------------------------
# penetration regime


def crossover_depth(scan_: FieldScan, p: StepParams | None = None) -> float:
    """Smallest x past which |psi|^2 departs from |phi|^2 by more than 50%
    over a full penetration length (or to the end of the scan)."""
    p = p or scan_.params
    if scan_.axis is not Axis.OVER_X or p is None:
        raise ParameterError("crossover_depth needs a parametrised scan over x")
    xp = derive_params(p).x_p
    x = scan_.coords
    if x[0] > 1e-12 or x[-1] < 4.0 * xp * (1 - 1e-9):
        raise ParameterError(f"scan must cover [0, 4 x_p] = [0, {4 * xp:.6g}] nm")
    phi2 = np.array([phi_stationary(p, SpacetimePoint(float(v), scan_.fixed_value)).abs2 for v in x])
    dev = np.abs(scan_.abs2 - phi2) / phi2
    bad = dev > CROSSOVER_DEVIATION
    # suffix-free check: index of the next sample at or below threshold
    n = x.size
    next_ok = np.empty(n, dtype=int)
    nxt = n
    for i in range(n - 1, -1, -1):
        if not bad[i]:
            nxt = i
        next_ok[i] = nxt
    for i in range(n):
        if not bad[i] or x[i] + xp > x[-1]:
            continue
        stop = n if next_ok[i] == n else next_ok[i]
        if stop == n or x[stop] > x[i] + xp:
            return float(x[i])
    raise NoCrossoverError("|psi|^2 tracks |phi|^2 across the whole scan")


# ---------------------------------------------------------------------------
# diffraction in time


def _extrema(t, y):
    out = []
    for i in range(1, y.size - 1):
        if y[i] > y[i - 1] and y[i] >= y[i + 1]:
            out.append((float(t[i]), float(y[i]), "max"))
        elif y[i] < y[i - 1] and y[i] <= y[i + 1]:
            out.append((float(t[i]), float(y[i]), "min"))
    return out


def diffraction_pattern(scan_: FieldScan, reference: float | None = None) -> DiffractionReport:
    """Front at x/c, monotone rise to a first maximum, then damped
    oscillation of |psi|^2 about the stationary level.

    Present means: nothing before x/c; |psi|^2 non-decreasing up to the
    first maximum; the first three maxima and the two minima between them
    sit alternately above and below the reference with strictly shrinking
    distance from it.  ``reference`` defaults to |phi(x)|^2.
    """
    if scan_.axis is not Axis.OVER_T:
        raise ParameterError("diffraction_pattern needs a scan over t")
    x = scan_.fixed_value
    t = scan_.coords
    y = scan_.abs2
    if reference is None:
        if scan_.params is None:
            raise ParameterError("no reference level given and scan has no parameters")
        reference = phi_stationary(scan_.params, SpacetimePoint(x, 0.0)).abs2
    t0 = x / C_NM_PER_FS
    before = t < t0
    ext = _extrema(t, y)

    def absent(reason, extrema=(), devs=(), t_max=math.nan):
        rep = DiffractionReport(x, t0, t_max, reference, tuple(extrema), tuple(devs), False, reason)
        raise PatternAbsentError(reason, rep)

    if np.any(y[before] != 0.0):
        absent("nonzero field before the front x/c")
    after = [e for e in ext if e[0] >= t0]
    maxima = [e for e in after if e[2] == "max"]
    if not maxima:
        absent("no maximum after the front")
    first = maxima[0]
    rise = y[(t >= t0) & (t <= first[0])]
    if np.any(np.diff(rise) < 0):
        absent("rise to the first maximum is not monotone", after, (), first[0])
    seq = [e for e in after if e[0] >= first[0]][: 2 * MIN_OSCILLATIONS - 1]
    if sum(e[2] == "max" for e in seq) < MIN_OSCILLATIONS:
        absent(f"fewer than {MIN_OSCILLATIONS} maxima after the front", seq, (), first[0])
    devs = [e[1] - reference for e in seq]
    for e, d in zip(seq, devs):
        if (e[2] == "max") != (d > 0):
            absent("extrema do not straddle the stationary level", seq, devs, first[0])
    mags = np.abs(devs)
    if np.any(np.diff(mags) >= 0):
        absent("oscillation about the stationary level is not damped", seq, devs, first[0])
    return DiffractionReport(x, t0, first[0], reference, tuple(seq), tuple(devs))


def has_diffraction_pattern(scan_: FieldScan, reference: float | None = None) -> bool:
    try:
        diffraction_pattern(scan_, reference)
    except PatternAbsentError:
        return False
    return True


# ---------------------------------------------------------------------------
# causality


def causality_scan(p: StepParams, t: float, x_grid, field_values=None, tol: float = 1e-12) -> CausalityReport:
    """max |psi|^2 over grid points beyond the cone x > ct.

    Without ``field_values`` the analytic evaluator is sampled; otherwise the
    supplied values (e.g. an FDTD snapshot on ``x_grid``) are measured.
    """
    xs = np.asarray(x_grid, dtype=float)
    ct = C_NM_PER_FS * t
    if xs.size == 0 or xs.max() <= ct:
        raise ParameterError("grid must extend beyond ct")
    if field_values is None:
        vals = np.array([psi_auto(p, SpacetimePoint(float(x), t), tol).abs2 for x in xs])
    else:
        vals = np.abs(np.asarray(field_values)) ** 2
        if vals.shape != xs.shape:
            raise ParameterError("field values and grid differ in shape")
    outside = xs > ct
    return CausalityReport(
        float(t),
        float(vals[outside].max()),
        float(vals[~outside].max()) if (~outside).any() else 0.0,
        int(outside.sum()),
    )
