"""Command-line front end.

    kgstep params     --preset | --mu0 M (--energy-ev E | --k K)
    kgstep snapshot   --t T[,T2..] --grid x0,x1,n     -> CSV over x
    kgstep timeseries --x X[,X2..] --grid t0,t1,n     -> CSV over t
    kgstep figure     --figure fig3..fig8             -> preset scans + report
    kgstep validate                                   -> oracle report

Every run directory gets a ``manifest.json``; ``--config manifest.json``
replays the run.  Exit codes: 0 ok, 1 usage, 2 validation failure,
3 runtime or resource error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone

import mpmath
import numpy as np
import scipy

from . import __version__
from .analysis import (
    NoCrossoverError,
    NoPeakError,
    PatternAbsentError,
    TooFewZerosError,
    crossover_depth,
    diffraction_pattern,
    grid as make_grid,
    peak_ordering,
    precursor_zeros,
    scan_over_t,
    scan_over_x,
)
from .core import (
    C_NM_PER_FS,
    HBAR_C_EV_NM,
    PRESET_ENERGY_EV,
    PRESET_ENERGY_K,
    PRESET_MU0,
    PUBLISHED_TWO_XP,
    KGStepError,
    ParameterError,
    SpacetimePoint,
    StepParams,
    derive_params,
    energy_to_wavenumber,
)
from .exact import TOL_MAX, TOL_MIN, ToleranceError, phi_stationary, psi_auto
from .oracle.fdtd import FdtdResourceError

log = logging.getLogger("kgstep")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
COMMANDS = ("snapshot", "timeseries", "figure", "validate", "params")
MANIFEST = "manifest.json"

X_COLUMNS = ["x_nm", "re_psi", "im_psi", "abs2_psi", "abs2_phi", "method", "est_error"]
T_COLUMNS = ["t_fs"] + X_COLUMNS[1:]


@dataclass(frozen=True)
class FigurePreset:
    axis: str  # "x" scans over x at fixed times, "t" over t at fixed depths
    fixed: tuple
    grid: tuple


FIGURES = {
    "fig3": FigurePreset("x", (0.001, 0.0035, 0.0075, 0.012), (0.0, 4.0, 801)),
    "fig4": FigurePreset("x", (0.05,), (0.0, 16.0, 2000)),
    "fig5": FigurePreset("x", (0.3,), (0.0, 92.0, 4601)),
    "fig6": FigurePreset("t", (0.4, 0.6, 0.8), (0.0, 0.1, 2001)),
    "fig7": FigurePreset("t", (3.0,), (0.0, 0.1, 2001)),
    "fig8": FigurePreset("t", (0.1, 0.3, 0.5), (0.0, 0.03, 3001)),
}
PRECURSOR_WINDOW = (12.0, 14.9)


class UsageError(KGStepError):
    pass


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    command: str
    mu0: float | None = None
    energy_k: float | None = None
    energy_ev: float | None = None
    t: tuple | None = None
    x: tuple | None = None
    grid: tuple | None = None
    tol: float = 1e-12
    figure: str | None = None
    output_dir: str = "kgstep-out"
    workers: int = 1
    max_memory_mb: float = 2048.0
    fdtd_threshold: float = 1e-3

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not (TOL_MIN <= self.tol <= TOL_MAX):
            raise UsageError(f"tol must lie in [{TOL_MIN:g}, {TOL_MAX:g}], got {self.tol!r}")
        if self.grid is not None:
            start, stop, n = self.grid
            if int(n) != n or n < 2:
                raise UsageError(f"grid needs an integer n >= 2, got {n!r}")
            if not start < stop:
                raise UsageError(f"grid needs start < stop, got {start}, {stop}")
        if self.figure is not None and self.figure not in FIGURES:
            raise UsageError(f"figure must be one of {', '.join(FIGURES)}, got {self.figure!r}")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")

    def params(self) -> StepParams:
        if self.mu0 is None:
            raise UsageError("mu0 is required (--mu0 or --preset)")
        if self.energy_k is None:
            raise UsageError("an energy is required (--energy-ev or --k)")
        return StepParams(self.mu0, self.energy_k)

    def replay_dict(self) -> dict:
        """Everything that determines the outputs (the output path does not)."""
        d = asdict(self)
        d.pop("output_dir")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _floats(text: str) -> tuple:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _grid_arg(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--grid takes start,stop,n; got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        n = float(parts[2])
    except ValueError:
        raise UsageError(f"--grid takes start,stop,n; got {text!r}") from None
    return (start, stop, int(n) if n == int(n) else n)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kgstep", description="Transients of a Klein-Gordon wave on a step barrier.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--mu0", type=float, help="barrier parameter mu0 [nm^-1]")
    energy = ap.add_mutually_exclusive_group()
    energy.add_argument("--energy-ev", type=float, help="incident energy E_r [eV]")
    energy.add_argument("--k", type=float, help="incident wavenumber E [nm^-1]")
    ap.add_argument(
        "--preset",
        action="store_true",
        help=f"mu0={PRESET_MU0}, E={PRESET_ENERGY_K} nm^-1 (E_r={PRESET_ENERGY_EV} eV); flags override",
    )
    ap.add_argument("--t", help="time(s) in fs, comma separated")
    ap.add_argument("--x", help="depth(s) in nm, comma separated")
    ap.add_argument("--grid", help="start,stop,n of the scanned coordinate")
    ap.add_argument("--tol", type=float, help="evaluator tolerance (default 1e-12)")
    ap.add_argument("--figure", choices=sorted(FIGURES))
    ap.add_argument("--out", help="output directory (default kgstep-out)")
    ap.add_argument("--config", help="JSON config or a previous run's manifest")
    ap.add_argument("--workers", type=int, help="processes for scan evaluation (default 1)")
    ap.add_argument("--max-memory-mb", type=float, help="FDTD memory cap for validate (default 2048)")
    ap.add_argument("--fdtd-threshold", type=float, help="relative error allowed at the finest FDTD level")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} is not a JSON object")
    if "config" in data:  # a manifest
        cfg = dict(data["config"])
        out = data.get("run", {}).get("output_dir")
        if out is not None:
            cfg.setdefault("output_dir", out)
        return cfg
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File values first, then flags on top.  Figure and validate runs fall
    back to the preset barrier when no parameters are given at all."""
    cfg: dict = load_config_file(args.config) if args.config else {}
    cfg["command"] = args.command
    preset = args.preset or (
        args.command in ("figure", "validate")
        and args.mu0 is None
        and args.energy_ev is None
        and args.k is None
        and "mu0" not in cfg
    )
    if preset:
        cfg["mu0"], cfg["energy_k"], cfg["energy_ev"] = PRESET_MU0, PRESET_ENERGY_K, None
    if args.mu0 is not None:
        cfg["mu0"] = args.mu0
    if args.energy_ev is not None:
        cfg["energy_ev"] = args.energy_ev
        cfg["energy_k"] = energy_to_wavenumber(args.energy_ev)
    if args.k is not None:
        cfg["energy_ev"], cfg["energy_k"] = None, args.k
    if cfg.get("energy_k") is None and cfg.get("energy_ev") is not None:
        cfg["energy_k"] = energy_to_wavenumber(cfg["energy_ev"])
    for name, conv in (("t", _floats), ("x", _floats), ("grid", _grid_arg)):
        val = getattr(args, name)
        if val is not None:
            cfg[name] = conv(val)
    for name, key in (
        ("tol", "tol"),
        ("figure", "figure"),
        ("out", "output_dir"),
        ("workers", "workers"),
        ("max_memory_mb", "max_memory_mb"),
        ("fdtd_threshold", "fdtd_threshold"),
    ):
        val = getattr(args, name)
        if val is not None:
            cfg[key] = val
    known = {f.name for f in fields(RunConfig)}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("t", "x", "grid"):
        if cfg.get(key) is not None:
            cfg[key] = tuple(cfg[key])
    return RunConfig(**cfg)


# ---------------------------------------------------------------------------
# manifest


def open_questions(p: StepParams) -> list[dict]:
    d = derive_params(p)
    flags = []
    if p.energy_k == PRESET_ENERGY_K:
        converted = energy_to_wavenumber(PRESET_ENERGY_EV)
        flags.append(
            {
                "id": "energy_literal",
                "used": p.energy_k,
                "converted_from_eV": converted,
                "relative_gap": abs(converted - p.energy_k) / converted,
                "note": f"E = {p.energy_k} nm^-1 used as published; "
                f"{PRESET_ENERGY_EV} eV / hbar_c gives {converted:.6g}",
            }
        )
    if p.mu0 == PRESET_MU0 and p.energy_k == PRESET_ENERGY_K:
        flags.append(
            {
                "id": "two_x_p",
                "computed": 2.0 * d.x_p,
                "published": PUBLISHED_TWO_XP,
                "relative_gap": abs(PUBLISHED_TWO_XP - 2.0 * d.x_p) / (2.0 * d.x_p),
                "note": "computed 2/q is used everywhere; the published value is recorded only",
            }
        )
    return flags


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def resolved_params(p: StepParams) -> dict:
    d = derive_params(p)
    return {
        "mu0": p.mu0,
        "energy_k": p.energy_k,
        "energy_ev": p.energy_k * HBAR_C_EV_NM,
        "q": d.q,
        "x_p": d.x_p,
        "two_x_p": 2.0 * d.x_p,
        "k_plus": _cplx(d.k_plus),
        "k_minus": _cplx(d.k_minus),
        "z_plus": _cplx(d.z_plus),
        "z_minus": _cplx(d.z_minus),
    }


def command_echo(cfg: RunConfig) -> str:
    parts = ["kgstep", cfg.command, "--mu0", repr(cfg.mu0), "--k", repr(cfg.energy_k)]
    if cfg.t is not None:
        parts += ["--t", ",".join(repr(v) for v in cfg.t)]
    if cfg.x is not None:
        parts += ["--x", ",".join(repr(v) for v in cfg.x)]
    if cfg.grid is not None:
        parts += ["--grid", ",".join(repr(v) for v in cfg.grid)]
    if cfg.figure is not None:
        parts += ["--figure", cfg.figure]
    parts += ["--tol", repr(cfg.tol)]
    return " ".join(parts)


def write_manifest(cfg: RunConfig, p: StepParams, outputs: list[str], started: float) -> str:
    manifest = {
        "tool": "kgstep",
        "config": cfg.replay_dict(),
        "command_echo": command_echo(cfg),
        "params": resolved_params(p),
        "constants": {"c_nm_per_fs": C_NM_PER_FS, "hbar_c_ev_nm": HBAR_C_EV_NM},
        "versions": {
            "kgstep": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "mpmath": mpmath.__version__,
        },
        "open_questions": open_questions(p),
        "outputs": sorted(os.path.basename(o) for o in outputs),
        # the only block allowed to differ between identical runs
        "run": {
            "output_dir": cfg.output_dir,
            "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
            "elapsed_s": time.time() - started,
        },
    }
    return write_json(os.path.join(cfg.output_dir, MANIFEST), manifest)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return _cplx(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path: str, obj) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    return path


# ---------------------------------------------------------------------------
# scans


def _row(args):
    p, x, t, tol = args
    pt = SpacetimePoint(x, t)
    a = psi_auto(p, pt, tol)
    method = a.diag.method.value
    if a.diag.note.startswith("bypass"):
        method += "-bypass"
    phi = phi_stationary(p, pt).abs2
    return (a.value.real, a.value.imag, a.abs2, phi, method, a.diag.est_error)


def evaluate_points(p: StepParams, pts: list[tuple[float, float]], tol: float, workers: int = 1) -> list[tuple]:
    """Rows in input order; with workers > 1 the pool's map keeps the order."""
    jobs = [(p, x, t, tol) for x, t in pts]
    if workers == 1 or len(jobs) < 64:
        return [_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_row, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def _csv_row(c, row) -> list:
    re, im, a2, phi, method, est = row
    return [fmt(c), fmt(re), fmt(im), fmt(a2), fmt(phi), method, fmt(est)]


def write_series(path: str, axis: str, coords, rows) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(X_COLUMNS if axis == "x" else T_COLUMNS)
        for c, row in zip(coords, rows):
            wr.writerow(_csv_row(c, row))
    return path


def _label(v: float) -> str:
    return f"{v:g}"


def run_scans(cfg: RunConfig, p: StepParams, axis: str, fixed: tuple, grid_: tuple, stem: str) -> tuple[list[str], dict]:
    """One CSV per fixed value, plus a combined file when there are several."""
    coords = make_grid(*grid_)
    outputs, series = [], {}
    combined_path = os.path.join(cfg.output_dir, f"{stem}_all.csv")
    for v in fixed:
        if axis == "t" and grid_[1] <= v / C_NM_PER_FS:
            log.warning("x=%g: t-range ends before the front x/c=%.6g fs; series all-zero", v, v / C_NM_PER_FS)
        pts = [(float(c), v) for c in coords] if axis == "x" else [(v, float(c)) for c in coords]
        rows = evaluate_points(p, pts, cfg.tol, cfg.workers)
        series[v] = rows
        key = "t" if axis == "x" else "x"
        outputs.append(write_series(os.path.join(cfg.output_dir, f"{stem}_{key}{_label(v)}.csv"), axis, coords, rows))
    if len(fixed) > 1:
        key = "t_fs" if axis == "x" else "x_nm"
        with open(combined_path, "w", encoding="utf-8", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow([key] + (X_COLUMNS if axis == "x" else T_COLUMNS))
            for v in fixed:
                for c, row in zip(coords, series[v]):
                    wr.writerow([fmt(v)] + _csv_row(c, row))
        outputs.append(combined_path)
    return outputs, series


# ---------------------------------------------------------------------------
# commands


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required for this command")
    return value


def cmd_snapshot(cfg: RunConfig) -> int:
    p = cfg.params()
    ts = _need(cfg.t, "--t")
    grid_ = _need(cfg.grid, "--grid")
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    outputs, _ = run_scans(cfg, p, "x", ts, grid_, "snapshot")
    write_manifest(cfg, p, outputs, started)
    return EXIT_OK


def cmd_timeseries(cfg: RunConfig) -> int:
    p = cfg.params()
    xs = _need(cfg.x, "--x")
    grid_ = _need(cfg.grid, "--grid")
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    outputs, _ = run_scans(cfg, p, "t", xs, grid_, "timeseries")
    write_manifest(cfg, p, outputs, started)
    return EXIT_OK


def _try(fn):
    try:
        return fn()
    except (NoCrossoverError, NoPeakError, TooFewZerosError) as exc:
        return {"error": type(exc).__name__, "message": str(exc)}


def figure_report(name: str, p: StepParams, cfg: RunConfig, preset: FigurePreset, grid_: tuple) -> dict:
    """Features the figure is about, measured on the same grids."""
    coords = make_grid(*grid_)
    report: dict = {"figure": name}
    if preset.axis == "x":
        per_t = {}
        for t in preset.fixed:
            s = scan_over_x(p, t, coords, cfg.tol)
            entry = {"crossover_depth_nm": _try(lambda: crossover_depth(s, p))}
            lo, hi = PRECURSOR_WINDOW
            ct = C_NM_PER_FS * t
            if coords[0] <= lo and hi <= min(coords[-1], ct) and lo >= 0.7 * ct:
                entry["precursor"] = _try(lambda: precursor_zeros(s, PRECURSOR_WINDOW).to_dict())
            per_t[_label(t)] = entry
        report["snapshots"] = per_t
        return report
    if name == "fig8":
        report["peaks"] = _try(lambda: peak_ordering(p, list(preset.fixed), coords, cfg.tol))
        return report
    per_x = {}
    for x in preset.fixed:
        s = scan_over_t(p, x, coords, cfg.tol)
        try:
            per_x[_label(x)] = diffraction_pattern(s).to_dict()
        except PatternAbsentError as exc:
            per_x[_label(x)] = exc.report.to_dict() if exc.report else {"present": False, "reason": exc.reason}
    report["diffraction"] = per_x
    return report


def cmd_figure(cfg: RunConfig) -> int:
    name = _need(cfg.figure, "--figure")
    p = cfg.params()
    preset = FIGURES[name]
    grid_ = cfg.grid or preset.grid
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    outputs, _ = run_scans(cfg, p, preset.axis, preset.fixed, grid_, name)
    report = figure_report(name, p, cfg, preset, grid_)
    outputs.append(write_json(os.path.join(cfg.output_dir, f"{name}_report.json"), report))
    write_manifest(cfg, p, outputs, started)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    from .validation import run_validation

    p = cfg.params()
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    report = run_validation(
        p,
        tol=cfg.tol,
        fdtd_threshold=cfg.fdtd_threshold,
        max_memory_bytes=int(cfg.max_memory_mb * 2**20),
    )
    path = write_json(os.path.join(cfg.output_dir, "report.json"), report.to_dict())
    write_manifest(cfg, p, [path], started)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<24s} measured={c.measured:.6g} threshold={c.threshold:.6g}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def params_table(p: StepParams) -> str:
    d = derive_params(p)
    k2 = abs(d.k_plus) ** 2
    lines = [
        f"{'mu0':<10s}{repr(float(p.mu0)):>22s}  nm^-1",
        f"{'E':<10s}{repr(float(p.energy_k)):>22s}  nm^-1",
        f"{'E_r':<10s}{repr(float(p.energy_k * HBAR_C_EV_NM)):>22s}  eV",
        f"{'q':<10s}{repr(float(d.q)):>22s}  nm^-1",
        f"{'x_p':<10s}{repr(float(d.x_p)):>22s}  nm",
        f"{'2x_p':<10s}{repr(float(2.0 * d.x_p)):>22s}  nm",
        f"{'|k+|^2':<10s}{repr(float(k2)):>22s}",
    ]
    flags = open_questions(p)
    if flags:
        lines.append("discrepancies:")
        for f in flags:
            if f["id"] == "two_x_p":
                lines.append(
                    f"  2x_p: computed {f['computed']:.5f} nm, published {f['published']} nm "
                    f"({100 * f['relative_gap']:.2f}% apart); computed value used"
                )
            else:
                lines.append(
                    f"  E: {f['used']} nm^-1 used as published, {PRESET_ENERGY_EV} eV converts to "
                    f"{f['converted_from_eV']:.6g} nm^-1 ({100 * f['relative_gap']:.2f}% apart)"
                )
    return "\n".join(lines)


def cmd_params(cfg: RunConfig) -> int:
    print(params_table(cfg.params()))
    return EXIT_OK


HANDLERS = {
    "snapshot": cmd_snapshot,
    "timeseries": cmd_timeseries,
    "figure": cmd_figure,
    "validate": cmd_validate,
    "params": cmd_params,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        # parameter guard runs before any output is produced
        if cfg.mu0 is not None and cfg.energy_k is not None:
            derive_params(cfg.params())
        return HANDLERS[cfg.command](cfg)
    except (UsageError, ParameterError) as exc:
        print(f"kgstep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ToleranceError as exc:
        print(f"kgstep: error: {exc} (try a looser --tol)", file=sys.stderr)
        return EXIT_RUNTIME
    except FdtdResourceError as exc:
        print(f"kgstep: resource limit: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (KGStepError, OSError) as exc:
        print(f"kgstep: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
