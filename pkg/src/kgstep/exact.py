"""Closed-form field inside the barrier and its limiting forms.

The interior field (t > x/c) is a pair of pole terms k+- exp(-+qx - iEct)
plus a Bessel series from the essential singularity.  Printed that way the
two pieces cancel catastrophically once qx is large, so the default
evaluator (`psi_exact`) uses the resummed form obtained with the Bessel
generating function,

    psi = sum_+- k+- [ -(i z+- / 2 xi) J_1(eta)
                       + sum_{n>=2} (-i z+- / xi)^n J_n(eta) ]

whose terms are bounded by xi^-n <= 1.  `psi_literal` and `psi_alt` keep
the printed groupings and fall back to mpmath when the cancellation budget
demands it; they exist to certify the resummation.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .core import (
    C_NM_PER_FS,
    KGStepError,
    ParameterError,
    Region,
    SpacetimePoint,
    StepParams,
    derive_params,
    light_cone,
)
from .specfn import (
    EPS,
    bessel_j_array,
    lommel_u,
    scaled_bessel_values,
    series_tail_bound,
)

TOL_MIN, TOL_MAX = 1e-14, 1e-6
# log-magnitude above which the printed series needs more than doubles
DOUBLE_BUDGET = 25.0
MAX_BUDGET = 600.0
LOMMEL_MIN_RATIO = 10.0
CONE_DISPATCH = 1e-6


class Method(enum.Enum):
    STABLE_SERIES = "StableSeries"
    LITERAL_SERIES = "LiteralSeries"
    ALT_SERIES = "AltSeries"
    CUTOFF_ASYMPTOTE = "CutoffAsymptote"
    STATIONARY = "Stationary"
    LOMMEL_APPROX = "LommelApprox"
    FREE_LIMIT = "FreeLimit"
    QUADRATURE = "Quadrature"
    FDTD = "FDTD"


class ToleranceError(KGStepError):
    pass


class CancellationBudgetError(KGStepError):
    pass


@dataclass(frozen=True)
class EvalDiagnostics:
    method: Method
    terms_used: int = 0
    cancellation_ratio: float = 1.0
    est_error: float = 0.0
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "terms_used": self.terms_used,
            "cancellation_ratio": self.cancellation_ratio,
            "est_error": self.est_error,
            "note": self.note,
        }


@dataclass(frozen=True)
class ComplexAmplitude:
    value: complex
    abs2: float
    diag: EvalDiagnostics = field(compare=False)

    @classmethod
    def of(cls, value: complex, diag: EvalDiagnostics) -> ComplexAmplitude:
        value = complex(value)
        return cls(value, value.real * value.real + value.imag * value.imag, diag)


def _zero(method: Method, note: str) -> ComplexAmplitude:
    return ComplexAmplitude.of(0j, EvalDiagnostics(method, note=note))


def _check_tol(tol):
    if not (TOL_MIN <= tol <= TOL_MAX):
        raise ParameterError(f"tol must lie in [{TOL_MIN:g}, {TOL_MAX:g}], got {tol!r}")


def _interior(p: StepParams, pt: SpacetimePoint, who: str):
    lc = light_cone(p, pt)
    if lc.region is not Region.INTERIOR:
        raise ParameterError(f"{who} needs an interior point (x < ct), got {lc.region.value}")
    return lc


def stable_truncation(eta: float) -> int:
    return math.ceil(eta) + max(40, math.ceil(8.0 * eta ** (1.0 / 3.0)))


def _log_tail_bound(n_from: int, y: float) -> float:
    """log of sum_{n >= n_from} y^n / n!  (y >= 0, n_from > y)."""
    if y == 0.0:
        return -math.inf
    lead = n_from * math.log(y) - math.lgamma(n_from + 1)
    ratio = y / (n_from + 1)
    if ratio >= 1.0:
        return math.inf
    return lead - math.log1p(-ratio)


def _unit_powers(unit: complex, n: np.ndarray) -> np.ndarray:
    """unit**n for |unit| = 1 as exp(i n theta) with theta folded into
    [-pi/2, pi/2]; complex ** loses ~n eps in phase, which the coherent
    sum over thousands of orders turns into 1e-10 errors at late times."""
    theta = cmath.phase(unit)
    sign = np.ones(n.shape)
    if abs(theta) > 0.5 * math.pi:
        theta -= math.copysign(math.pi, theta)
        sign = np.where(n % 2 == 0, 1.0, -1.0)
    return sign * np.exp(1j * (n * theta))


def _branch_series(k, z, xi, eta, n_max, unit_modulus):
    """k [-(iz/2xi) J_1 + sum_{n=2}^{n_max} (-iz/xi)^n J_n] and bookkeeping.

    With ``unit_modulus`` |z| is taken as exactly 1: a rounded |z| of
    1 + 1e-16 raised to the ~1e4th power is a visible error at late times.
    """
    mod = 1.0 if unit_modulus else abs(z)
    a = mod / xi
    unit = -1j * z / abs(z)
    if a <= 1.0:
        J = bessel_j_array(n_max, eta)
        s = J.values * a ** np.arange(n_max + 1)
        bess_err = J.est_error
    else:
        # continuation with |z| > xi: keep a^n J_n together to avoid overflow
        s, _ = scaled_bessel_values(n_max, eta, a)
        bess_err = 4.0 * EPS * math.sqrt(n_max + 1)
    n = np.arange(2, n_max + 1)
    terms = _unit_powers(unit, n) * s[2:]
    first = 0.5 * unit * s[1]
    total = first + terms.sum()
    mags = np.abs(terms)
    abs_k = abs(k)
    rounding = 4.0 * EPS * (abs(first) + mags.sum())
    if a <= 1.0:
        tail = series_tail_bound(n_max + 1, eta, a)
    else:
        # |a^n J_n| <= (a eta / 2)^n / n!
        log_tail = _log_tail_bound(n_max + 1, a * eta / 2.0)
        tail = math.exp(log_tail) if log_tail < 700 else math.inf
    bess = bess_err * (abs(first) + float(np.abs(s[2:]).sum()))
    biggest = max(abs(first), float(mags.max()) if mags.size else 0.0)
    return k * total, abs_k * (rounding + tail + bess), abs_k * biggest, abs_k * tail


def psi_exact(p: StepParams, pt: SpacetimePoint, tol: float = 1e-12) -> ComplexAmplitude:
    """Exact interior field by the resummed (cancellation-free) Bessel series.

    Exterior and on-cone points return exactly 0.
    """
    _check_tol(tol)
    d = derive_params(p)
    lc = light_cone(p, pt)
    if lc.region is Region.EXTERIOR:
        return _zero(Method.STABLE_SERIES, "exterior: t < x/c")
    if lc.region is Region.ON_CONE:
        return _zero(Method.STABLE_SERIES, "on cone")
    xi, eta = lc.xi, lc.eta
    a_max = 1.0 / xi if d.evanescent else max(abs(d.z_plus), abs(d.z_minus)) / xi
    eff = max(eta, a_max * eta)
    n_max = stable_truncation(eff)
    for _ in range(40):
        vp, ep, bp, tp = _branch_series(d.k_plus, d.z_plus, xi, eta, n_max, d.evanescent)
        vm, em, bm, tm = _branch_series(d.k_minus, d.z_minus, xi, eta, n_max, d.evanescent)
        if tp + tm <= 0.1 * tol:
            break
        n_max += max(40, math.ceil(8.0 * eff ** (1.0 / 3.0)))
    else:
        raise ToleranceError(f"series tail did not drop below tol at ({pt.x}, {pt.t})")
    value = vp + vm
    est = ep + em
    if est > tol:
        raise ToleranceError(
            f"requested tol={tol:g} below attainable floor {est:.3g} at ({pt.x}, {pt.t})"
        )
    ratio = max(1.0, max(bp, bm, abs(vp), abs(vm)) / abs(value)) if value != 0 else 1.0
    return ComplexAmplitude.of(
        value, EvalDiagnostics(Method.STABLE_SERIES, n_max, ratio, est)
    )


# ---------------------------------------------------------------------------
# printed series forms


def cancellation_budget(p: StepParams, pt: SpacetimePoint) -> float:
    """Predicted log-magnitude of the largest intermediate term.

    The nominal budget is q x + eta ln xi.  Near the cone the largest Bessel
    term xi^n J_n is governed instead by exp(mu0 (ct + x) / 2), so the larger
    of the two is returned.
    """
    d = derive_params(p)
    lc = _interior(p, pt, "cancellation_budget")
    q_re = d.q if isinstance(d.q, float) else 0.0
    nominal = q_re * pt.x + lc.eta * math.log(lc.xi)
    # xi^n J_n(eta) / |z|^n <= y^n / n! <= e^y with y = mu0 (ct + x) / (2 |z|)
    zmin = min(abs(d.z_plus), abs(d.z_minus))
    return max(nominal, 0.5 * p.mu0 * (lc.ct + pt.x) / zmin)


def _literal_order(lc, d, n_max, target_log):
    """Smallest N past eta + 40 where the growing-series tail is below exp(target_log)."""
    y = lc.xi * lc.eta / 2.0 / min(abs(d.z_plus), abs(d.z_minus))
    need = math.ceil(lc.eta) + 40
    n = max(need, math.ceil(2 * y) + 1)
    while _log_tail_bound(n + 1, y) > target_log:
        n += 10
    if n_max is None:
        return n, y
    if n_max < lc.eta + 40:
        raise ParameterError(f"n_max={n_max} must be >= eta + 40 = {lc.eta + 40:.1f}")
    return int(n_max), y


def _mp_bessel(n_max, eta):
    return [mpmath.besselj(n, eta) for n in range(n_max + 1)]


def _printed_eval(p, pt, n_max, grouping):
    d = derive_params(p)
    lc = _interior(p, pt, grouping)
    budget = cancellation_budget(p, pt)
    if budget > MAX_BUDGET:
        raise CancellationBudgetError(
            f"cancellation budget {budget:.1f} exceeds extended-precision capacity "
            f"{MAX_BUDGET:g}; use psi_exact"
        )
    extended = budget > DOUBLE_BUDGET
    digits = math.ceil(budget / math.log(10)) + 30 if extended else 15
    n_max, y = _literal_order(lc, d, n_max, -budget - 40.0)
    method = Method.LITERAL_SERIES if grouping == "literal" else Method.ALT_SERIES
    with mpmath.workdps(max(digits, 20)):
        mpc = mpmath.mpc
        mu0, e = mpmath.mpf(p.mu0), mpmath.mpf(p.energy_k)
        ct = mpmath.mpf(lc.ct)  # same double ct that psi_exact sees
        x = mpmath.mpf(pt.x)
        xi = mpmath.sqrt((ct + x) / (ct - x))
        eta = mu0 * mpmath.sqrt((ct + x) * (ct - x))
        if extended:
            J = _mp_bessel(n_max, eta)
        else:
            J = [mpmath.mpf(v) for v in bessel_j_array(n_max, float(eta)).values]
        # spectral constants are rebuilt at working precision: their double
        # rounding would otherwise be amplified by the cancellation
        if d.evanescent:
            q = mpc(mpmath.sqrt((mu0 - e) * (mu0 + e)))
            ep, em = e + 1j * q, e - 1j * q
        else:
            s = mpmath.sqrt((e - mu0) * (e + mu0))
            q = mpc(0, s)
            em, ep = mpc(e + s), mpc(mu0 * mu0 / (e + s))
        kp, km, zp, zm = 2 * e / ep, 2 * e / em, ep / mu0, em / mu0
        ect = e * ct
        exps = {
            +1: mpmath.exp(-q * x - 1j * ect),
            -1: mpmath.exp(q * x - 1j * ect),
        }
        pieces = []
        if grouping == "literal":
            for k, z, sgn in ((kp, zp, +1), (km, zm, -1)):
                w = xi / (1j * z)
                pieces.append(k * exps[sgn])
                pieces.append(k * (1j * z / (2 * xi)) * J[1])
                wn = mpc(1)
                for n in range(n_max + 1):
                    pieces.append(-k * wn * J[n])
                    wn *= w
        else:
            w = xi / (1j * zm)
            pieces.append(km * exps[-1])
            wn = mpc(1)
            for n in range(n_max + 1):
                pieces.append(-km * wn * J[n])
                wn *= w
            v = zp / (1j * xi)
            vn = v * v
            for n in range(2, n_max + 1):
                pieces.append(kp * vn * J[n])
                vn *= v
        total = mpmath.fsum(pieces)
        biggest = max(abs(t) for t in pieces)
        value = complex(total)
        mag = abs(total)
        ratio = float(biggest / mag) if mag > 0 else math.inf
        lost = math.log10(max(ratio, 1.0))
        unit = 10.0 ** -digits if extended else 2.0 * EPS
        if extended and lost > digits - 10:
            raise CancellationBudgetError(
                f"observed cancellation 1e{lost:.0f} exhausts {digits} working digits"
            )
        log_tail = _log_tail_bound(n_max + 1, y)
        tail = (abs(d.k_plus) + abs(d.k_minus)) * (math.exp(log_tail) if log_tail < 700 else math.inf)
    est = float(biggest) * unit * math.sqrt(len(pieces)) + tail
    return ComplexAmplitude.of(
        value,
        EvalDiagnostics(
            method,
            n_max + 1,
            max(ratio, 1.0),
            est,
            note=f"{'mp' if extended else 'double'} {digits} digits, budget {budget:.1f}",
        ),
    )


def psi_literal(p: StepParams, pt: SpacetimePoint, n_max: int | None = None) -> ComplexAmplitude:
    """Pole terms plus essential-singularity series, exactly as grouped in print.

    Switches to mpmath (with Bessel values computed at the same precision)
    when the cancellation budget exceeds ~25 e-folds; refuses beyond 600.
    """
    return _printed_eval(p, pt, n_max, "literal")


def psi_alt(p: StepParams, pt: SpacetimePoint, n_max: int | None = None) -> ComplexAmplitude:
    """k- [e^{qx - iEct} - sum_{n>=0} (xi/iz-)^n J_n] + k+ sum_{n>=2} (z+/i xi)^n J_n."""
    return _printed_eval(p, pt, n_max, "alt")


# ---------------------------------------------------------------------------
# limiting forms


def psi_free(k: float, pt: SpacetimePoint) -> ComplexAmplitude:
    """Free propagation (mu0 -> 0): exp(ik(x - ct)) - 1 inside the cone, else 0."""
    if not k > 0:
        raise ParameterError("k must be positive")
    ct = C_NM_PER_FS * pt.t
    if pt.x >= ct:
        return _zero(Method.FREE_LIMIT, "outside or on cone")
    theta = k * (pt.x - ct)
    half = math.sin(0.5 * theta)
    return ComplexAmplitude.of(
        complex(-2.0 * half * half, math.sin(theta)), EvalDiagnostics(Method.FREE_LIMIT, 1)
    )


def phi_stationary(p: StepParams, pt: SpacetimePoint) -> ComplexAmplitude:
    """Stationary evanescent wave k+ exp(-qx) exp(-iEct)."""
    d = derive_params(p)
    value = d.k_plus * cmath.exp(-d.q * pt.x) * cmath.exp(-1j * p.energy_k * C_NM_PER_FS * pt.t)
    return ComplexAmplitude.of(value, EvalDiagnostics(Method.STATIONARY, 1))


def cutoff_residual_bound(p: StepParams, xi: float, eta: float) -> float:
    """Bound on |psi - cutoff asymptote| from the dropped n >= 2 terms."""
    d = derive_params(p)
    r = eta / (2.0 * xi)
    two = abs(d.k_plus * d.z_plus**2 + d.k_minus * d.z_minus**2) * r * r / 2.0
    rest = (abs(d.k_plus) + abs(d.k_minus)) * math.exp(_log_tail_bound(3, r)) if r > 0 else 0.0
    return two + rest


def psi_cutoff_asym(p: StepParams, pt: SpacetimePoint) -> ComplexAmplitude:
    """Forerunner near the cone: -(2iE / mu0 xi) J_1(eta).

    The sign is the one the exact series produces (leading n = 1 terms of
    both branches add to -2iE J_1 / (mu0 xi)); |psi|^2 is unaffected by it.
    """
    lc = light_cone(p, pt)
    if lc.region is Region.EXTERIOR:
        raise ParameterError("cutoff asymptote is defined only for t >= x/c")
    if lc.region is Region.ON_CONE:
        return _zero(Method.CUTOFF_ASYMPTOTE, "on cone")
    j1 = bessel_j_array(1, lc.eta).values[1]
    value = -2j * p.energy_k / (p.mu0 * lc.xi) * j1
    return ComplexAmplitude.of(
        value,
        EvalDiagnostics(Method.CUTOFF_ASYMPTOTE, 1, 1.0, cutoff_residual_bound(p, lc.xi, lc.eta)),
    )


def psi_lommel(p: StepParams, pt: SpacetimePoint) -> ComplexAmplitude:
    """Low-energy Lommel form 2(E/mu0) [U_3(i eta/xi, eta) - U_1(i eta/xi, eta)].

    Valid for mu0/E >> 1 (enforced: >= 10).  It is the leading term of the
    exact series with z+- replaced by +-i, so its modulus tracks |psi|
    closely while its phase drifts by roughly E(ct - x).
    """
    if p.mu0 / p.energy_k < LOMMEL_MIN_RATIO:
        raise ParameterError(
            f"Lommel form needs mu0/E >= {LOMMEL_MIN_RATIO:g}, got {p.mu0 / p.energy_k:.3g}"
        )
    lc = _interior(p, pt, "psi_lommel")
    w = 1j * lc.eta / lc.xi
    u1 = lommel_u(1, w, lc.eta)
    u3 = lommel_u(3, w, lc.eta)
    pref = 2.0 * p.energy_k / p.mu0
    return ComplexAmplitude.of(
        pref * (u3.value - u1.value),
        EvalDiagnostics(
            Method.LOMMEL_APPROX,
            u1.terms_used + u3.terms_used,
            1.0,
            pref * (u1.est_error + u3.est_error),
        ),
    )


def psi_auto(p: StepParams, pt: SpacetimePoint, tol: float = 1e-12) -> ComplexAmplitude:
    """Dispatching evaluator: 0 outside the cone, the forerunner asymptote
    hugging the cone when it is already accurate to ``tol``, the stable
    series otherwise."""
    _check_tol(tol)
    lc = light_cone(p, pt)
    if lc.region is not Region.INTERIOR:
        return _zero(Method.STABLE_SERIES, f"bypass: {lc.region.value}")
    if (lc.ct - pt.x) / lc.ct < CONE_DISPATCH:
        asym = psi_cutoff_asym(p, pt)
        if asym.diag.est_error <= tol:
            return asym
    return psi_exact(p, pt, tol)


EVALUATORS = {
    "auto": psi_auto,
    "exact": psi_exact,
}
