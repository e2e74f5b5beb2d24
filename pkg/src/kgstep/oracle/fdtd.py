"""Leapfrog finite differences for c^-2 psi_tt = psi_xx - V(x) psi.

V = 0 for x < 0 and mu0^2 for x > 0.  The node sitting on the step gets the
mean of the two one-sided values, mu0^2 / 2: that is what a cell-averaged
potential gives there, and with it the scheme converges at second order.
Taking the right-limit value mu0^2 at that one node introduces an O(dx)
error that dominates the convergence ladder.

Time stepping is the standard three-level central scheme with homogeneous
Dirichlet ends.  Real and imaginary parts obey the same real stencil and
never couple, so the complex array is just both fields stepped together.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..core import C_NM_PER_FS, KGStepError, ParameterError, SpacetimePoint, StepParams
from ..exact import ComplexAmplitude, EvalDiagnostics, Method, psi_exact

INSTABILITY_LIMIT = 1e6


class FdtdInstabilityError(KGStepError):
    pass


class FdtdResourceError(KGStepError):
    pass


@dataclass(frozen=True)
class FdtdSpec:
    """Grid and time-step settings; ``dt`` follows from ``courant``.

    ``interface`` selects the potential at the x = 0 node: "mean"
    (mu0^2/2, default) or "right" (mu0^2).
    """

    dx: float
    t_end: float
    courant: float = 0.9
    x_min: float = -80.0
    x_max: float = 40.0
    interface: str = "mean"
    margin: float = 1.0

    def __post_init__(self):
        if not (self.dx > 0 and self.t_end > 0 and self.courant > 0):
            raise ParameterError("dx, t_end and courant must be positive")
        if self.courant > 1.0:
            raise ParameterError(f"courant={self.courant} > 1 is unstable")
        if not (self.x_min < 0 < self.x_max):
            raise ParameterError("domain must straddle the step at x = 0")
        i0 = -self.x_min / self.dx
        if abs(i0 - round(i0)) > 1e-6:
            raise ParameterError("x = 0 must be a grid node (x_min / dx integral)")
        if self.interface not in ("mean", "right"):
            raise ParameterError(f"interface must be 'mean' or 'right', got {self.interface!r}")
        reach = C_NM_PER_FS * self.t_end
        if -self.x_min < reach + self.margin or self.x_max < reach + self.margin:
            raise ParameterError(
                f"domain [{self.x_min}, {self.x_max}] too small: signals travel "
                f"{reach:.3g} nm by t_end"
            )

    @property
    def dt(self) -> float:
        return self.courant * self.dx / C_NM_PER_FS

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def origin_index(self) -> int:
        return int(round(-self.x_min / self.dx))

    @property
    def n_nodes(self) -> int:
        return self.origin_index + int(round(self.x_max / self.dx)) + 1

    def nodes(self) -> np.ndarray:
        i = np.arange(self.n_nodes) - self.origin_index
        return i * self.dx

    def memory_bytes(self) -> int:
        # three complex time levels plus the coefficient array
        return self.n_nodes * (3 * 16 + 8)

    def check_stable(self, p: StepParams) -> None:
        """Von Neumann bound for the massive stencil: C^2 + (C dx mu0)^2 / 4 <= 1."""
        cr = self.courant
        amp = cr * cr + (cr * self.dx * p.mu0) ** 2 / 4.0
        if amp > 1.0:
            raise ParameterError(
                f"unstable: courant^2 + (courant dx mu0)^2/4 = {amp:.6f} > 1"
            )


@dataclass
class FieldState:
    grid: np.ndarray
    grid_prev: np.ndarray
    time: float
    step: int = 0

    def __post_init__(self):
        if self.grid.shape != self.grid_prev.shape:
            raise ParameterError("time levels must have equal length")


def potential(p: StepParams, spec: FdtdSpec) -> np.ndarray:
    x = spec.nodes()
    v = np.where(x > 0, p.mu0 * p.mu0, 0.0)
    v[spec.origin_index] = p.mu0 * p.mu0 * (0.5 if spec.interface == "mean" else 1.0)
    return v


def initial_data(p: StepParams, spec: FdtdSpec) -> tuple[np.ndarray, np.ndarray]:
    """psi(x, 0) and d/dt psi(x, 0) of the released wave.

    Before release the left field is exp[ik(x - ct)] - exp[-ik(x + ct)];
    its time derivative at t = 0 is -ikc e^{ikx} + ikc e^{-ikx} (x < 0).
    """
    x = spec.nodes()
    k = p.energy_k
    left = x <= 0
    psi0 = np.where(left, np.exp(1j * k * x) - np.exp(-1j * k * x), 0j)
    psi0[spec.origin_index] = 0.0
    v0 = np.where(x < 0, -1j * k * C_NM_PER_FS * (np.exp(1j * k * x) - np.exp(-1j * k * x)), 0j)
    # the Dirichlet ends hold from t = 0 on
    psi0[0] = psi0[-1] = v0[0] = v0[-1] = 0.0
    return psi0, v0


def fdtd_initial_state(p: StepParams, spec: FdtdSpec) -> FieldState:
    """Levels 0 and 1; level 1 from the Taylor start psi + dt v + dt^2/2 psi_tt."""
    spec.check_stable(p)
    psi0, v0 = initial_data(p, spec)
    dt, dx = spec.dt, spec.dx
    lap = np.zeros_like(psi0)
    lap[1:-1] = (psi0[2:] - 2.0 * psi0[1:-1] + psi0[:-2]) / (dx * dx)
    acc = C_NM_PER_FS**2 * (lap - potential(p, spec) * psi0)
    psi1 = psi0 + dt * v0 + 0.5 * dt * dt * acc
    psi1[0] = psi1[-1] = 0.0
    return FieldState(psi1, psi0, dt, 1)


def _coefficients(p, spec):
    r2 = spec.courant**2
    return r2, 2.0 - 2.0 * r2 - (C_NM_PER_FS * spec.dt) ** 2 * potential(p, spec)


def _advance(cur, prev, out, r2, diag, hi):
    # out = r2 (cur[i+1] + cur[i-1]) + diag cur[i] - prev[i] on nodes 1..hi-1
    s = slice(1, hi)
    np.add(cur[2 : hi + 1], cur[0 : hi - 1], out=out[s])
    out[s] *= r2
    out[s] += diag[s] * cur[s]
    out[s] -= prev[s]
    out[0] = 0.0
    out[-1] = 0.0


def fdtd_step(state: FieldState, p: StepParams, spec: FdtdSpec) -> FieldState:
    """One leapfrog step (returns a new state; run_fdtd does bulk runs in place)."""
    r2, diag = _coefficients(p, spec)
    out = np.zeros_like(state.grid)
    _advance(state.grid, state.grid_prev, out, r2, diag, out.size - 1)
    peak = float(np.abs(out).max())
    if not np.isfinite(peak) or peak > INSTABILITY_LIMIT:
        raise FdtdInstabilityError(
            f"|psi| = {peak:.3g} at t = {state.time + spec.dt:.6g} fs (step {state.step + 1})"
        )
    return FieldState(out, state.grid.copy(), state.time + spec.dt, state.step + 1)


def discrete_energy(cur, prev, p: StepParams, spec: FdtdSpec) -> float:
    """Conserved leapfrog energy between levels ``prev`` and ``cur``:

    sum dx [ |cur - prev|^2 / (c dt)^2 + Re(D+cur . conj D+prev)
             + V Re(cur . conj prev) ]
    """
    dx, cdt = spec.dx, C_NM_PER_FS * spec.dt
    v = potential(p, spec)
    kin = np.abs(cur - prev) ** 2 / (cdt * cdt)
    grad_c = np.diff(cur) / dx
    grad_p = np.diff(prev) / dx
    pot = v * (cur * np.conj(prev)).real
    return float(dx * (kin.sum() + (grad_c * np.conj(grad_p)).real.sum() + pot.sum()))


@dataclass
class FdtdResult:
    spec: FdtdSpec
    params: StepParams
    times: np.ndarray
    probe_x: tuple
    probes: np.ndarray  # shape (n_samples, n_probes), complex
    energy: np.ndarray
    leakage: np.ndarray  # max |psi| beyond ct + 5 dx over max |psi|, per sample
    final: FieldState
    snapshot_files: list = field(default_factory=list)

    @property
    def energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / abs(e0))


def _interp_weights(spec, xs):
    idx, w = [], []
    for xp in xs:
        f = (xp - spec.x_min) / spec.dx
        i = min(int(math.floor(f + 1e-9)), spec.n_nodes - 2)
        idx.append(i)
        w.append(min(max(f - i, 0.0), 1.0))
    return np.array(idx), np.array(w)


def run_fdtd(
    p: StepParams,
    spec: FdtdSpec,
    probes=(),
    stride: int = 1,
    snapshot_dir: str | None = None,
    snapshot_stride: int | None = None,
    max_memory_bytes: int | None = None,
) -> FdtdResult:
    """Step to ``t_end`` recording probes, energy and leakage every ``stride`` steps.

    Nodes the numerical stencil cannot have reached yet are skipped (they are
    exactly zero), which saves a quarter of the work on the default domain.
    """
    if max_memory_bytes is not None and spec.memory_bytes() > max_memory_bytes:
        raise FdtdResourceError(
            f"grid needs {spec.memory_bytes() / 2**20:.1f} MiB > cap {max_memory_bytes / 2**20:.1f} MiB"
        )
    for xp in probes:
        if not fdtd_reliable(spec, xp):
            raise ParameterError(f"probe x={xp} lies where boundary echoes arrive before t_end")
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    state = fdtd_initial_state(p, spec)
    r2, diag = _coefficients(p, spec)
    cur, prev = state.grid.copy(), state.grid_prev.copy()
    out = np.empty_like(cur)
    x = spec.nodes()
    i0 = spec.origin_index
    idx, w = _interp_weights(spec, probes)
    n_steps = spec.n_steps
    times, rec, energy, leak, files = [], [], [], [], []
    if snapshot_dir is not None:
        os.makedirs(snapshot_dir, exist_ok=True)

    def record(step):
        t = step * spec.dt
        times.append(t)
        rec.append((1.0 - w) * cur[idx] + w * cur[idx + 1] if len(idx) else np.zeros(0, complex))
        energy.append(discrete_energy(cur, prev, p, spec))
        cone = np.searchsorted(x, C_NM_PER_FS * t + 5 * spec.dx, side="right")
        mags = np.abs(cur)
        top = mags.max()
        leak.append(float(mags[cone:].max() / top) if cone < x.size and top > 0 else 0.0)
        if snapshot_dir is not None and step % (snapshot_stride or stride) == 0:
            files.append(dump_snapshot(os.path.join(snapshot_dir, f"step_{step:07d}.csv"), x, cur))

    record(1)
    for step in range(2, n_steps + 1):
        hi = min(x.size - 1, i0 + step + 2)
        _advance(cur, prev, out, r2, diag, hi)
        if hi < x.size - 1:
            out[hi:] = 0.0
        prev, cur, out = cur, out, prev
        if step % stride == 0 or step == n_steps:
            peak = float(np.abs(cur[: hi + 1]).max())
            if not np.isfinite(peak) or peak > INSTABILITY_LIMIT:
                raise FdtdInstabilityError(f"|psi| = {peak:.3g} at step {step}")
            record(step)
    final = FieldState(cur.copy(), prev.copy(), n_steps * spec.dt, n_steps)
    return FdtdResult(
        spec,
        p,
        np.array(times),
        tuple(probes),
        np.array(rec).reshape(len(times), len(probes)),
        np.array(energy),
        np.array(leak),
        final,
        files,
    )


def fdtd_reliable(spec: FdtdSpec, x_probe: float) -> bool:
    """True if no boundary disturbance reaches ``x_probe`` before t_end.

    The left end clamps a plane wave to zero and radiates from t = 0; the
    right end only reflects what arrives.  Both travel at c (what the stencil
    moves faster than c is the leakage measured separately).
    """
    reach = C_NM_PER_FS * spec.t_end + spec.margin
    return (
        spec.x_min < x_probe < spec.x_max
        and x_probe - spec.x_min > reach
        and 2.0 * spec.x_max - x_probe > reach
    )


def fdtd_probe(result: FdtdResult, x_probe: float) -> list[ComplexAmplitude]:
    """Recorded time series at ``x_probe`` as amplitudes tagged FDTD."""
    try:
        j = result.probe_x.index(x_probe)
    except ValueError:
        raise ParameterError(f"x={x_probe} was not a recorded probe") from None
    diag = EvalDiagnostics(Method.FDTD, 1, 1.0, 0.0, note=f"dx={result.spec.dx:g}")
    return [ComplexAmplitude.of(v, diag) for v in result.probes[:, j]]


def dump_snapshot(path: str, x: np.ndarray, psi: np.ndarray) -> str:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x_nm", "re_psi", "im_psi"])
        for xv, v in zip(x, psi):
            wr.writerow([f"{xv:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
    return path


@dataclass(frozen=True)
class LadderLevel:
    dx: float
    rel_l2_error: float
    n_samples: int
    energy_drift: float
    max_leakage: float


@dataclass(frozen=True)
class LadderReport:
    levels: tuple
    ratios: tuple
    orders: tuple

    @property
    def final_error(self) -> float:
        return self.levels[-1].rel_l2_error


def convergence_ladder(
    p: StepParams,
    dxs=(0.008, 0.004, 0.002),
    probes=(0.1, 0.5, 1.0, 3.0),
    t_end: float = 0.1,
    courant: float = 0.9999,
    samples: int = 100,
    x_min: float = -80.0,
    x_max: float = 40.0,
    max_memory_bytes: int | None = None,
    tol: float = 1e-12,
) -> LadderReport:
    """Relative L2 error of probe series against psi_exact for each dx.

    Samples are taken at the same physical times on every level (the
    coarsest step count divided into ``samples`` strides).
    """
    levels = []
    base = FdtdSpec(dxs[0], t_end, courant, x_min, x_max)
    coarse_stride = max(1, base.n_steps // samples)
    exact_cache: dict = {}
    for level, dx in enumerate(dxs):
        spec = FdtdSpec(dx, t_end, courant, x_min, x_max)
        ratio = dxs[0] / dx
        stride = max(1, int(round(coarse_stride * ratio)))
        res = run_fdtd(p, spec, probes, stride, max_memory_bytes=max_memory_bytes)
        num = den = 0.0
        for t, row in zip(res.times, res.probes):
            if t == res.times[0] and t < coarse_stride * base.dt * 0.5:
                continue
            for xp, v in zip(probes, row):
                key = (xp, round(t, 15))
                if key not in exact_cache:
                    exact_cache[key] = psi_exact(p, SpacetimePoint(xp, t), tol).value
                ex = exact_cache[key]
                num += abs(v - ex) ** 2
                den += abs(ex) ** 2
        err = math.sqrt(num / den) if den > 0 else math.inf
        levels.append(LadderLevel(dx, err, len(res.times), res.energy_drift, float(res.leakage.max())))
    ratios = tuple(levels[i].rel_l2_error / levels[i + 1].rel_l2_error for i in range(len(levels) - 1))
    orders = tuple(
        math.log(r) / math.log(levels[i].dx / levels[i + 1].dx) for i, r in enumerate(ratios)
    )
    return LadderReport(tuple(levels), ratios, orders)
