"""Run configuration, the time loop, snapshots, logs and convergence tables."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import mhd_core as mc
from .ct import CtConfig, DivergenceReport, NumericalFailure, ct_step
from .hj_potential import PotentialField
from .problems import PROBLEMS, get_problem, initialize, vortex_exact

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
DIVERGENCE_LOG = "divergence.csv"
DIVERGENCE_COLUMNS = ("step", "time", "dt", "max_div", "l2_div", "floor_activations")
FLOOR_STORM_FRACTION = 0.01
SNAPSHOT_SUFFIX = ".snap"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str
    nx: int | None = None
    ny: int | None = None
    nz: int | None = None
    cfl: float = 0.5
    order: int = 3
    beta: float | None = None
    energy_option: int | None = None  # default: the problem's choice
    tfinal: float | None = None
    snapshots: int = 0  # write a snapshot every this many steps (0: final only)
    outdir: str | None = None
    cadence: str = "step"
    local_c: bool = False
    weno: str = mc.DEFAULT_WENO
    limiter: bool | None = None  # default: the problem's choice
    reference_resolution: bool = False
    fixed_dt: float | None = None
    max_steps: int | None = None

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        for name in ("nx", "ny", "nz", "cfl", "beta", "tfinal", "fixed_dt", "max_steps"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive, got {val}")
        if self.order not in (1, 2, 3):
            raise ConfigError(f"order must be 1, 2 or 3, got {self.order}")
        if self.energy_option not in (None, 1, 2):
            raise ConfigError(f"energy_option must be 1 or 2, got {self.energy_option}")
        if self.snapshots < 0:
            raise ConfigError("snapshots must be non-negative")
        if self.cadence not in ("step", "stage"):
            raise ConfigError("cadence must be 'step' or 'stage'")
        if self.weno not in mc.WENO_SCHEMES:
            raise ConfigError(f"weno must be one of {sorted(mc.WENO_SCHEMES)}")
        spec = get_problem(self.problem)
        given = [n for n in (self.nx, self.ny, self.nz)[: spec.ndim] if n is not None]
        if given and len(given) != spec.ndim and len(given) != 1:
            raise ConfigError(f"{self.problem} needs {spec.ndim} resolutions")
        for n in given:
            if n < 6:
                raise ConfigError("each axis needs at least 6 cells")

    def cells(self) -> tuple[int, ...] | None:
        spec = get_problem(self.problem)
        res = (self.nx, self.ny, self.nz)[: spec.ndim]
        if all(n is None for n in res):
            return None
        first = next(n for n in res if n is not None)
        return tuple(first if n is None else n for n in res)


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _convert(name: str, text: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = str(types[name])
    text = text.strip()
    if text.lower() in ("", "none", "default") and "None" in kind:
        return None
    try:
        if kind.startswith("bool"):
            return _BOOL[text.lower()]
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except (KeyError, ValueError):
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


_ALIASES = {"k": "order", "energy-option": "energy_option", "t_final": "tfinal",
            "reference-resolution": "reference_resolution", "local-c": "local_c"}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        out[key] = _convert(key, value)
    return out


def load_config(path: str | Path, **overrides) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = parse_config_text(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "problem" not in values:
        raise ConfigError("config needs a problem")
    return RunConfig(**values)


# --------------------------------------------------------------------------
# snapshots


def snapshot_fields(state: mc.ConservedState, A: PotentialField) -> dict[str, np.ndarray]:
    u = state.velocity()
    B = state.bfield
    out = {"rho": state.rho, "u1": u[0], "u2": u[1], "u3": u[2], "p": state.pressure(),
           "B1": B[0], "B2": B[1], "B3": B[2], "Bmag": np.sqrt(np.sum(B ** 2, axis=0))}
    if A.ncomp == 1:
        out["A3"] = A.a[0]
    else:
        out.update({"A1": A.a[0], "A2": A.a[1], "A3": A.a[2]})
    return out


def write_snapshot(path: str | Path, fields_: dict[str, np.ndarray], *, problem: str, time: float,
                   step: int, spacing: Sequence[float], lower: Sequence[float]) -> Path:
    """Write a JSON header line followed by little-endian float64 arrays,
    each flattened with the x index varying fastest."""
    shapes = {a.shape for a in fields_.values()}
    if len(shapes) != 1:
        raise ValueError("all snapshot fields must share one shape")
    dims = list(shapes.pop())
    header = {"problem": problem, "time": float(time).hex(), "time_decimal": float(time),
              "step": int(step), "dims": dims, "spacing": [float(h) for h in spacing],
              "lower": [float(x) for x in lower], "fields": list(fields_),
              "dtype": "<f8", "order": "x-fastest"}
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for arr in fields_.values():
            fh.write(np.asarray(arr, dtype="<f8").ravel(order="F").tobytes())
    return path


def read_snapshot(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = fh.read()
    dims = tuple(header["dims"])
    count = math.prod(dims)
    nbytes = 8 * count
    if len(data) != nbytes * len(header["fields"]):
        raise ValueError("snapshot payload does not match the header dims")
    header["time"] = float.fromhex(header["time"])
    arrays = {}
    for i, name in enumerate(header["fields"]):
        flat = np.frombuffer(data, dtype="<f8", count=count, offset=i * nbytes)
        arrays[name] = flat.reshape(dims, order="F").astype(np.float64)
    return header, arrays


def export_slice_csv(path: str | Path, header: dict, arrays: dict[str, np.ndarray],
                     names: Sequence[str] | None = None, z_index: int | None = None) -> Path:
    """Write one x-y plane as CSV rows ``x, y, <fields>`` (x fastest)."""
    names = list(names or arrays)
    dims = header["dims"]
    h, lo = header["spacing"], header["lower"]
    if len(dims) == 3:
        k = dims[2] // 2 if z_index is None else z_index
        planes = {n: arrays[n][:, :, k] for n in names}
    else:
        planes = {n: arrays[n] for n in names}
    x = lo[0] + h[0] * np.arange(dims[0])
    y = lo[1] + h[1] * np.arange(dims[1])
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", *names])
        for j in range(dims[1]):
            for i in range(dims[0]):
                w.writerow([repr(float(x[i])), repr(float(y[j])), *(repr(float(planes[n][i, j])) for n in names)])
    return path


# --------------------------------------------------------------------------
# time loop


@dataclass
class RunResult:
    status: int
    time: float = 0.0
    steps: int = 0
    message: str = ""
    reports: list[DivergenceReport] = field(default_factory=list)
    floor_activations: int = 0
    node_steps: int = 0
    state: mc.ConservedState | None = None
    potential: PotentialField | None = None
    grid: object = None
    errors: dict | None = None
    initial_max_b: float = 0.0
    max_b_history: list[float] = field(default_factory=list)

    @property
    def max_relative_divergence(self) -> float:
        return max((r.relative for r in self.reports), default=0.0)

    @property
    def floor_fraction(self) -> float:
        return self.floor_activations / self.node_steps if self.node_steps else 0.0


def solution_errors(problem: str, state: mc.ConservedState, grid, time: float) -> dict | None:
    """L1 (grid mean) and Linf density errors against an exact solution."""
    if problem != "SmoothVortex":
        return None
    x, y = grid.mesh()
    exact = vortex_exact(time, x, y, get_problem(problem))
    err = np.abs(state.rho - exact.rho)
    return {"L1": float(np.mean(err)), "Linf": float(np.max(err))}


def _ct_config(cfg: RunConfig, spec) -> CtConfig:
    option = cfg.energy_option if cfg.energy_option is not None else spec.energy_option
    limiter = cfg.limiter if cfg.limiter is not None else spec.flux_limiter
    return CtConfig(energy_option=option, cadence=cfg.cadence, order_k=cfg.order,
                    beta=cfg.beta, local_c=cfg.local_c, weno=cfg.weno, flux_limiter=limiter)


def run(config: RunConfig, state=None, potential=None) -> RunResult:
    """Advance the configured problem to its final time.

    Writes ``divergence.csv`` and snapshots to ``config.outdir`` when set.
    ``state`` and ``potential`` override the problem initializers.
    """
    try:
        config.validate()
        spec = get_problem(config.problem)
        ctc = _ct_config(config, spec)
    except (ConfigError, ValueError, KeyError) as exc:
        return RunResult(EXIT_CONFIG, message=str(exc))

    s0, A0, grid, _ = initialize(config.problem, config.cells(),
                                 reference_resolution=config.reference_resolution)
    state = s0 if state is None else state
    A = A0 if potential is None else potential
    t_final = config.tfinal if config.tfinal is not None else spec.t_final
    outdir = Path(config.outdir) if config.outdir else None
    res = RunResult(EXIT_OK, grid=grid)
    res.initial_max_b = float(np.max(np.sqrt(np.sum(state.bfield ** 2, axis=0))))

    log_fh = writer = None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        log_fh = open(outdir / DIVERGENCE_LOG, "w", newline="")
        writer = csv.writer(log_fh)
        writer.writerow(DIVERGENCE_COLUMNS)

    def snapshot(step, t):
        if outdir is not None:
            write_snapshot(outdir / f"snap_{step:06d}{SNAPSHOT_SUFFIX}", snapshot_fields(state, A),
                           problem=config.problem, time=t, step=step, spacing=grid.spacing,
                           lower=grid.lower)

    t, step = 0.0, 0
    try:
        if config.snapshots:
            snapshot(0, t)
        while t < t_final:
            if config.max_steps is not None and step >= config.max_steps:
                break
            dt = config.fixed_dt if config.fixed_dt is not None else mc.compute_dt(state, grid, config.cfl)
            last = t + dt >= t_final
            if last:
                dt = t_final - t
            state, A, rep, floors = ct_step(state, A, dt, grid, ctc, step, t)
            step += 1
            t = t_final if last else t + dt
            res.reports.append(replace(rep, step=step, time=t))
            res.max_b_history.append(rep.max_b)
            res.floor_activations += floors
            res.node_steps += grid.size
            if writer is not None:
                writer.writerow([step, repr(t), repr(dt), repr(rep.max_abs_div), repr(rep.l2_div), floors])
            if floors > FLOOR_STORM_FRACTION * grid.size:
                raise NumericalFailure(f"positivity floor storm: {floors} nodes", step)
            if config.snapshots and step % config.snapshots == 0:
                snapshot(step, t)
    except (NumericalFailure, mc.PositivityError, FloatingPointError) as exc:
        res.status = EXIT_NUMERICAL
        res.message = str(exc) if isinstance(exc, NumericalFailure) else f"{exc} (step={step})"
        log.error("numerical failure: %s", exc)
    finally:
        if log_fh is not None:
            log_fh.close()

    res.time, res.steps = t, step
    res.state, res.potential = state, A
    if res.status == EXIT_OK:
        if not config.snapshots or step % config.snapshots:
            snapshot(step, t)
        res.errors = solution_errors(config.problem, state, grid, t)
        if outdir is not None:
            summary = {"problem": config.problem, "time": t, "steps": step,
                       "cells": list(grid.cells),
                       "max_relative_divergence": res.max_relative_divergence,
                       "floor_activations": res.floor_activations,
                       "floor_fraction": res.floor_fraction, "errors": res.errors,
                       "config": asdict(config)}
            (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    return res


# --------------------------------------------------------------------------
# convergence table


@dataclass
class ConvergenceRow:
    n: int
    l1: float
    linf: float
    l1_order: float | None
    linf_order: float | None


def _order(prev, cur, n_prev, n_cur):
    return math.log(prev / cur) / math.log(n_cur / n_prev)


def convergence_table(problem: str = "SmoothVortex", resolutions: Sequence[int] = (20, 40, 80),
                      t_final: float = 0.05, cfl: float = 0.5, order: int = 3,
                      energy_option: int | None = None) -> list[ConvergenceRow]:
    """Density errors against the exact solution and observed orders."""
    spec = get_problem(problem)
    if problem != "SmoothVortex":
        raise ValueError(f"{problem} has no exact solution")
    rows: list[ConvergenceRow] = []
    for n in resolutions:
        cfg = RunConfig(problem, nx=n, ny=n, cfl=cfl, order=order, tfinal=t_final,
                        energy_option=energy_option)
        res = run(cfg)
        if res.status != EXIT_OK:
            raise RuntimeError(f"{spec.name} at {n} failed: {res.message}")
        l1, linf = res.errors["L1"], res.errors["Linf"]
        if rows:
            p = rows[-1]
            rows.append(ConvergenceRow(n, l1, linf, _order(p.l1, l1, p.n, n),
                                       _order(p.linf, linf, p.n, n)))
        else:
            rows.append(ConvergenceRow(n, l1, linf, None, None))
    return rows


def _fmt_order(o):
    return "--" if o is None else f"{o:.3f}"


def table_csv(rows: Sequence[ConvergenceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "L1_error", "L1_order", "Linf_error", "Linf_order"])
    for r in rows:
        w.writerow([f"{r.n}x{r.n}", f"{r.l1:.3E}", _fmt_order(r.l1_order),
                    f"{r.linf:.3E}", _fmt_order(r.linf_order)])
    return buf.getvalue()


def table_text(rows: Sequence[ConvergenceRow]) -> str:
    head = f"{'N':>10}  {'L1 error':>10}  {'order':>6}  {'Linf error':>10}  {'order':>6}"
    lines = [head]
    for r in rows:
        lines.append(f"{f'{r.n}x{r.n}':>10}  {r.l1:>10.3E}  {_fmt_order(r.l1_order):>6}  "
                     f"{r.linf:>10.3E}  {_fmt_order(r.linf_order):>6}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# command line


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mhdct", description="Kernel-based constrained transport MHD solver")
    p.add_argument("config", nargs="?", help="key = value config file")
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--nz", type=int)
    p.add_argument("--cfl", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--energy-option", type=int, dest="energy_option")
    p.add_argument("--tfinal", type=float)
    p.add_argument("--outdir")
    p.add_argument("--snapshots", type=int)
    p.add_argument("--cadence", choices=("step", "stage"))
    p.add_argument("--weno", choices=sorted(mc.WENO_SCHEMES))
    p.add_argument("--limiter", dest="limiter", action="store_true", default=None,
                   help="force the positivity flux limiter on")
    p.add_argument("--no-limiter", dest="limiter", action="store_false",
                   help="force the positivity flux limiter off")
    p.add_argument("--reference-resolution", action="store_true", default=None, dest="reference_resolution")
    p.add_argument("--convergence", metavar="N", type=int, nargs="+",
                   help="print a SmoothVortex convergence table for these resolutions")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.convergence:
        try:
            rows = convergence_table("SmoothVortex", args.convergence,
                                     t_final=args.tfinal or 0.05, cfl=args.cfl or 0.5,
                                     order=args.order or 3)
        except RuntimeError as exc:
            print(exc, file=sys.stderr)
            return EXIT_NUMERICAL
        print(table_text(rows))
        if args.outdir:
            Path(args.outdir).mkdir(parents=True, exist_ok=True)
            (Path(args.outdir) / "convergence.csv").write_text(table_csv(rows))
        return EXIT_OK

    keys = ("problem", "nx", "ny", "nz", "cfl", "beta", "order", "energy_option", "tfinal",
            "outdir", "snapshots", "cadence", "weno", "limiter", "reference_resolution")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
        elif "problem" in overrides:
            cfg = RunConfig(**overrides)
        else:
            raise ConfigError("give a config file or --problem")
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    res = run(cfg)
    if res.status == EXIT_CONFIG:
        print(f"config error: {res.message}", file=sys.stderr)
    elif res.status == EXIT_NUMERICAL:
        print(f"numerical failure: {res.message}", file=sys.stderr)
    else:
        line = (f"{cfg.problem}: t={res.time:.6g} steps={res.steps} "
                f"max|div B|/max|B|={res.max_relative_divergence:.3e} "
                f"floor fraction={res.floor_fraction:.2e}")
        if res.errors:
            line += f" L1(rho)={res.errors['L1']:.4e} Linf(rho)={res.errors['Linf']:.4e}"
        print(line)
    return res.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
