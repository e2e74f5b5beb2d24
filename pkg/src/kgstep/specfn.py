"""Integer-order Bessel arrays and two-variable Lommel functions.

Only real, non-negative Bessel arguments occur in this package (eta is real
inside the light cone), so everything here is real-argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import KGStepError, ParameterError

EPS = np.finfo(float).eps
_BIG = 1e200


class LommelDivergenceError(KGStepError, ValueError):
    pass


@dataclass(frozen=True)
class BesselArray:
    order_max: int
    arg: float
    values: np.ndarray
    est_error: float


def miller_start(n_max: int, eta: float) -> int:
    """Starting order for the downward recurrence.

    Has to sit past the turning point n = eta as well as past n_max.
    """
    m = max(n_max, eta)
    return max(n_max, math.ceil(eta)) + math.ceil(10 + 1.5 * math.sqrt(m))


def _check_args(n_max, eta):
    if not isinstance(n_max, (int, np.integer)) or n_max < 0:
        raise ParameterError(f"n_max must be a non-negative integer, got {n_max!r}")
    if not math.isfinite(eta):
        raise ParameterError(f"Bessel argument must be finite, got {eta!r}")
    if eta < 0:
        raise ParameterError(f"Bessel argument must be >= 0, got {eta!r}")


def scaled_bessel_values(n_max: int, eta: float, scale: float = 1.0) -> tuple[np.ndarray, int]:
    """Return ``scale**n * J_n(eta)`` for n = 0..n_max by Miller's algorithm.

    The recurrence is run on the scaled sequence s_n = a^n J_n directly,
    s_{n-1} = (2n / (a eta)) s_n - s_{n+1} / a^2, so large scales (a >> 1 with
    tiny eta) never form a^n and J_n separately.  Normalisation uses
    J_0 + 2 sum J_2m = 1.  Also returns the starting order.
    """
    if eta == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out, 0
    a = float(scale)
    n_start = miller_start(n_max, max(eta, a * eta))
    inv_a2 = 1.0 / (a * a)
    two_over = 2.0 / (a * eta)
    out = np.zeros(n_max + 1)
    s_next, s_cur = 0.0, 1e-30
    norm = 0.0
    # a^-n for the even-order normalisation terms, tracked in log form
    log_inv_a = -math.log(a)
    log_shift = 0.0  # log of accumulated rescale factor applied to s
    for n in range(n_start, 0, -1):
        if n <= n_max:
            out[n] = s_cur
        if n % 2 == 0:
            w = n * log_inv_a
            if w > -700.0:
                norm += 2.0 * s_cur * math.exp(w)
        s_prev = two_over * n * s_cur - s_next * inv_a2
        s_next, s_cur = s_cur, s_prev
        if abs(s_cur) > _BIG:
            s_cur /= _BIG
            s_next /= _BIG
            out /= _BIG
            norm /= _BIG
            log_shift += math.log(_BIG)
    out[0] = s_cur
    norm += s_cur
    if not np.isfinite(norm) or norm == 0.0:
        raise KGStepError(f"Miller normalisation failed (eta={eta}, scale={scale})")
    return out / norm, n_start


def bessel_j_array(n_max: int, eta: float) -> BesselArray:
    """J_0(eta) ... J_{n_max}(eta) by downward recurrence.

    Examples
    --------
    >>> bessel_j_array(3, 0.0).values.tolist()
    [1.0, 0.0, 0.0, 0.0]
    """
    _check_args(n_max, eta)
    vals, n_start = scaled_bessel_values(int(n_max), float(eta))
    # backward recurrence is stable; rounding grows roughly like sqrt of the
    # number of steps, relative to max|J| <= 1
    est = 0.0 if eta == 0.0 else 4.0 * EPS * math.sqrt(n_start + 1)
    return BesselArray(int(n_max), float(eta), vals, est)


def bessel_small_arg(n: int, eta: float) -> float:
    """Leading small-argument term J_n(eta) ~ (eta/2)^n / n!."""
    if eta < 0:
        raise ParameterError("eta must be >= 0")
    if n == 0:
        return 1.0
    return math.exp(n * math.log(eta / 2.0) - math.lgamma(n + 1)) if eta > 0 else 0.0


def log_small_arg_bound(n: np.ndarray | int, eta: float) -> np.ndarray:
    """log of (eta/2)^n / n!, an upper bound for |J_n(eta)| (eta >= 0)."""
    n = np.asarray(n, dtype=float)
    if eta == 0:
        return np.where(n == 0, 0.0, -np.inf)
    from scipy.special import gammaln

    return n * math.log(eta / 2.0) - gammaln(n + 1.0)


def log_bessel_bound(n: np.ndarray | int, eta: float) -> np.ndarray:
    """Rigorous upper bound on log|J_n(eta)|, n >= 1, eta >= 0.

    Minimum of |J_n| <= 1, the power-series bound (eta/2)^n / n! and
    Kapteyn's inequality |J_n(n s)| <= s^n e^{n r} / (1 + r)^n with
    r = sqrt(1 - s^2), s = eta / n <= 1.  Kapteyn is what makes the bound
    tight just past the turning point.
    """
    n = np.asarray(n, dtype=float)
    out = np.minimum(0.0, log_small_arg_bound(n, eta))
    if eta == 0:
        return out
    s = np.minimum(eta / np.maximum(n, 1.0), 1.0)
    r = np.sqrt((1.0 - s) * (1.0 + s))
    kap = n * (np.log(s) + r - np.log1p(r))
    return np.where(n >= eta, np.minimum(out, kap), out)


def series_tail_bound(n_from: int, eta: float, scale: float = 1.0) -> float:
    """Bound on sum_{n >= n_from} scale^n |J_n(eta)| for scale <= 1, n_from > eta."""
    if eta == 0.0:
        return 0.0
    width = max(200, int(20 * eta ** (1.0 / 3.0)))
    n = np.arange(n_from, n_from + width)
    logs = log_bessel_bound(n, eta) + n * math.log(scale)
    # successive-term ratio of the bound only shrinks past the turning point,
    # so the remainder is dominated by a geometric series
    ratio = math.exp(min(0.0, logs[-1] - logs[-2]))
    if ratio >= 1.0:
        return math.inf
    top = float(logs.max())
    head = math.exp(top) * float(np.exp(logs - top).sum()) if top > -745 else 0.0
    return head + math.exp(logs[-1]) * ratio / (1.0 - ratio)


@dataclass(frozen=True)
class LommelValue:
    value: complex
    est_error: float
    terms_used: int


@dataclass(frozen=True)
class LommelPair:
    u1: complex
    u3: complex
    w: complex
    z: float
    est_error: float


def _term_bounds(ratio_abs, z, order):
    # rigorous |(w/z)^k J_k(z)| <= |w/z|^k * min(1, (z/2)^k / k!)
    k = np.asarray(order, dtype=float)
    with np.errstate(divide="ignore"):
        log_r = math.log(ratio_abs) if ratio_abs > 0 else -np.inf
    return np.exp(k * log_r + np.minimum(0.0, log_small_arg_bound(k, z)))


def lommel_u(n: int, w: complex, z: float, rel_tol: float = 1e-14) -> LommelValue:
    """Two-variable Lommel function U_n(w, z) = sum_m (-1)^m (w/z)^(n+2m) J_(n+2m)(z).

    Summation stops once the rigorous term bound has fallen below
    ``rel_tol`` times the accumulated magnitude and the order is past the
    Bessel turning point n = z.
    """
    if n < 0:
        raise ParameterError("Lommel order must be >= 0")
    if not (z > 0 and math.isfinite(z)):
        raise ParameterError(f"Lommel z must be positive and finite, got {z!r}")
    w = complex(w)
    ratio = w / z
    r = abs(ratio)
    if r >= 1.0:
        raise LommelDivergenceError(
            f"|w/z| = {r:.6g} >= 1: divergent regime, use the Bessel-series evaluator"
        )
    if w == 0:
        return LommelValue(0j, 0.0, 0)
    top = max(n + 40, math.ceil(z) + 40)
    while True:
        J = bessel_j_array(top, z)
        orders = np.arange(n, top + 1, 2)
        m = np.arange(orders.size)
        terms = ((-1.0) ** m) * ratio ** orders * J.values[orders]
        partial = np.cumsum(terms)
        bounds = _term_bounds(r, z, orders)
        past = orders > z
        ok = past & (bounds < rel_tol * np.maximum(np.abs(partial), 1e-300))
        if ok.any():
            stop = int(np.argmax(ok))
            val = complex(partial[stop])
            nxt = orders[stop] + 2
            # remaining terms decay at least geometrically from here
            tail = float(_term_bounds(r, z, nxt)) / (1.0 - r * r * min(1.0, z / (2.0 * (nxt + 1))) ** 2)
            rounding = 4.0 * EPS * float(np.sum(np.abs(terms[: stop + 1])))
            bess = J.est_error * float(np.sum(r ** orders[: stop + 1]))
            return LommelValue(val, tail + rounding + bess, stop + 1)
        top = 2 * top


def lommel_pair(w: complex, z: float) -> LommelPair:
    u1 = lommel_u(1, w, z)
    u3 = lommel_u(3, w, z)
    return LommelPair(u1.value, u3.value, complex(w), float(z), u1.est_error + u3.est_error)


def j1_zeros(eta_max: float, step: float = 0.25) -> np.ndarray:
    """Positive zeros of J_1 below ``eta_max`` (bracketed scan + root polish)."""
    def j1(e):
        return bessel_j_array(1, e).values[1]

    grid = np.arange(step, eta_max + step, step)
    vals = [j1(e) for e in grid]
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(j1, a, b, xtol=1e-14))
    return np.array([r for r in roots if r <= eta_max])
