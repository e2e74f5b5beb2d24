"""Direct numerical inversion of the transform in the u-plane.

psi(x, t) = (1/2 pi i) * int_{Im u = gamma} F(u) du  with

    F(u) = (2E/mu0) (1 - u^2) / [u^2 (u^2 - 2Eu/mu0 + 1)]
           * exp{ i mu0 [u (x - ct) - (x + ct) / u] / 2 }.

Two contours are offered:

* ``line``: the horizontal line itself, oscillatory tails handled by
  Fourier-weighted quadrature (QUADPACK QAWF).  For interior points the
  integrand is amplified by exp(mu0 gamma (ct - x) / 2) relative to the
  result, so this path is only well conditioned close to the cone or
  outside it (where it doubles as the closure test).
* ``loop``: for interior points the line can be swung down into a circle
  |u| = R enclosing u = 0 and both poles.  On |u| = xi the exponential
  has unit modulus, so R = max(xi, 1 + delta) keeps the integrand O(1)
  and the periodic trapezoid rule converges geometrically.

Neither path uses residues or the Bessel expansion.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..core import KGStepError, ParameterError, Region, SpacetimePoint, StepParams, derive_params, light_cone
from ..exact import ComplexAmplitude, EvalDiagnostics, Method

EPS = np.finfo(float).eps


class QuadratureError(KGStepError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Contour and rule settings.

    ``gamma`` None means the default 2 max(q/mu0, 1).  ``u_max`` is where the
    line switches from panel quadrature to the Fourier-weighted tail; None
    picks it from the oscillation scale.  ``path`` "auto" uses the loop
    inside the cone and the line elsewhere.
    """

    gamma: float | None = None
    u_max: float | None = None
    n_nodes: int = 32
    rule: str = "adaptive"
    path: str = "auto"
    tol: float = 1e-12
    radius: float | None = None
    max_nodes: int = 1 << 22

    def __post_init__(self):
        if self.rule not in ("adaptive", "fixed-panel"):
            raise ParameterError(f"rule must be 'adaptive' or 'fixed-panel', got {self.rule!r}")
        if self.path not in ("auto", "line", "loop"):
            raise ParameterError(f"path must be 'auto', 'line' or 'loop', got {self.path!r}")
        if self.n_nodes < 4:
            raise ParameterError("n_nodes must be >= 4")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")


def default_gamma(p: StepParams) -> float:
    d = derive_params(p)
    return 2.0 * max(d.q / p.mu0, 1.0)


def integrand(p: StepParams, pt: SpacetimePoint, u: np.ndarray) -> np.ndarray:
    """F(u) at complex points u (vectorised)."""
    d = derive_params(p)
    u = np.asarray(u, dtype=complex)
    ct = 299.792458 * pt.t
    pre = 2.0 * p.energy_k / p.mu0
    rational = pre * (1.0 - u * u) / (u * u * (u - d.z_plus) * (u - d.z_minus))
    phase = 0.5j * p.mu0 * (u * (pt.x - ct) - (pt.x + ct) / u)
    return rational * np.exp(phase)


# ---------------------------------------------------------------------------
# circle


def _loop(p, pt, spec, lc):
    xi = lc.xi
    # keep clear of the poles on |u| = 1 without letting the exponential grow
    # by more than ~e^3 anywhere on the circle
    eta_scale = max(p.mu0 * lc.ct, 1.0)
    delta = min(0.5, max(3.0 / eta_scale, 0.02))
    R = spec.radius if spec.radius is not None else max(xi, 1.0 + delta)
    if R <= 1.0:
        raise ParameterError(f"loop radius {R} must exceed the pole modulus 1")
    n = max(spec.n_nodes, 2 ** math.ceil(math.log2(max(64.0, 4.0 * p.mu0 * lc.ct * R))))
    prev = None
    while True:
        theta = 2.0 * math.pi * np.arange(n) / n
        u = R * np.exp(1j * theta)
        # du = i u dtheta; counter-clockwise circle equals minus the line
        terms = integrand(p, pt, u) * u
        value = -terms.sum() / n
        if prev is not None:
            change = abs(value - prev)
            if change <= spec.tol * max(1.0, abs(value)) or n >= spec.max_nodes:
                break
        prev = value
        n *= 2
    scale = float(np.abs(terms).sum()) / n
    rounding = 8.0 * EPS * scale * math.sqrt(n)
    # geometric convergence: the last change over-estimates the error of the
    # finer sum, so it stands as the truncation estimate
    est = change + rounding
    if change > spec.tol * max(1.0, abs(value)):
        raise QuadratureError(f"loop quadrature did not converge with {n} nodes (change {change:.3g})")
    ratio = max(1.0, scale / abs(value)) if value != 0 else 1.0
    return ComplexAmplitude.of(
        value, EvalDiagnostics(Method.QUADRATURE, n, ratio, est, note=f"loop R={R:.6g}")
    )


# ---------------------------------------------------------------------------
# horizontal line


def _panel_integral(f, a, b, n_panels, nodes, weights):
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    vals = f(s).reshape(n_panels, nodes.size)
    parts = (vals * weights[None, :]).sum(axis=1) * half
    return parts.sum(), float((np.abs(vals) * weights[None, :]).sum(axis=1).dot(half))


def _fourier_tail(g, start, kappa):
    """int_start^inf g(s) e^{i kappa s} ds for smooth slowly decaying g."""
    w = abs(kappa)
    sgn = math.copysign(1.0, kappa)
    total, err = 0j, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for part, weight, coef in (
            ("re", "cos", 1.0),
            ("im", "cos", 1j),
            ("re", "sin", 1j * sgn),
            ("im", "sin", -sgn),
        ):
            fn = (lambda s, _g=g: _g(s).real) if part == "re" else (lambda s, _g=g: _g(s).imag)
            val, e = integrate.quad(fn, start, np.inf, weight=weight, wvar=w, limlst=200)
            total += coef * val
            err += abs(e)
    return total, err


def _line(p, pt, spec, lc):
    d = derive_params(p)
    gamma = spec.gamma if spec.gamma is not None else default_gamma(p)
    if gamma <= d.q / p.mu0:
        raise ParameterError(
            f"gamma={gamma:.6g} must exceed q/mu0={d.q / p.mu0:.6g} (contour below a pole)"
        )
    ct = lc.ct
    kappa = 0.5 * p.mu0 * (pt.x - ct)
    if kappa == 0.0:
        raise ParameterError("line path is undefined on the light cone")
    # essential-singularity phase scale near s = 0 and carrier period
    inner = 0.5 * p.mu0 * (pt.x + ct) / (gamma * gamma)
    period = 2.0 * math.pi / max(abs(kappa) + inner, 1e-300)
    u_max = spec.u_max if spec.u_max is not None else max(20.0, 40.0 * gamma, 20.0 / abs(kappa))

    def f(s):
        return integrand(p, pt, s + 1j * gamma)

    nodes, weights = np.polynomial.legendre.leggauss(spec.n_nodes)
    n_panels = max(8, math.ceil(2.0 * u_max / period))
    core, mag = _panel_integral(f, -u_max, u_max, n_panels, nodes, weights)
    change = math.inf
    if spec.rule == "adaptive":
        while True:
            n_panels *= 2
            finer, mag = _panel_integral(f, -u_max, u_max, n_panels, nodes, weights)
            change = abs(finer - core)
            core = finer
            if change <= 0.1 * spec.tol * max(1.0, abs(core)):
                break
            if n_panels * spec.n_nodes > spec.max_nodes:
                raise QuadratureError(f"line panel quadrature did not converge (change {change:.3g})")
    else:
        change = 0.0

    def g_right(s):
        return f(s) * np.exp(-1j * kappa * s)

    def g_left(s):
        return f(-s) * np.exp(1j * kappa * s)

    right, err_r = _fourier_tail(g_right, u_max, kappa)
    # int_{-inf}^{-u_max} f(s) ds = int_{u_max}^{inf} f(-s) ds, carrier e^{-i kappa s}
    left, err_l = _fourier_tail(g_left, u_max, -kappa)
    total = core + right + left
    value = total / (2j * math.pi)
    amplification = math.exp(max(0.0, -kappa * gamma))
    est = (change + err_r + err_l + 16.0 * EPS * mag) / (2.0 * math.pi)
    ratio = max(1.0, mag / (2.0 * math.pi * abs(value))) if value != 0 else math.inf
    return ComplexAmplitude.of(
        value,
        EvalDiagnostics(
            Method.QUADRATURE,
            n_panels * spec.n_nodes,
            ratio,
            est,
            note=f"line gamma={gamma:.6g} u_max={u_max:.6g} amplification={amplification:.3g}",
        ),
    )


def bromwich_quadrature(
    p: StepParams, pt: SpacetimePoint, spec: QuadratureSpec | None = None
) -> ComplexAmplitude:
    """Invert the transform at ``pt`` by direct contour quadrature."""
    spec = spec or QuadratureSpec()
    lc = light_cone(p, pt)
    if lc.region is Region.ON_CONE:
        raise ParameterError("quadrature is not defined on the light cone itself")
    path = spec.path
    if path == "auto":
        path = "loop" if lc.region is Region.INTERIOR else "line"
    if path == "loop":
        if lc.region is not Region.INTERIOR:
            raise ParameterError("loop path needs an interior point; use the line for the closure test")
        return _loop(p, pt, spec, lc)
    return _line(p, pt, spec, lc)
