"""Benchmark command line: run problems, sweep refinement levels, build the
Riemann-strip reference profile.

    mhdfem run   --problem blast --level 1 --mode high --out results/
    mhdfem sweep --problem vortex --levels 0..2 --out sweep/
    mhdfem make-reference --out src/mhdfem/data/briowu_ref_16000.csv

Configuration may also come from a flat key=value file (--config); command
line flags override file entries.  Every run writes diag.csv (one diagnostics
record per step) and VTK snapshots.  All computations are single-threaded
with fixed-order reductions, so results are bitwise reproducible regardless
of the --reproducible flag (the flag is accepted and recorded).
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .diagnostics import (DiagnosticsRecord, compute_record, eoc, error_norms,
                          weak_div_fingerprint)
from .problems import get_problem, make_state
from .splitting import run_to_time
from .vtkio import write_vtk

REFERENCE_NAME = "briowu_ref_16000.csv"


@dataclass
class RunConfig:
    problem: str = ""
    level: int = 0
    cfl: float | None = None
    mode: str = "high"
    out: str = "out"
    snapshot_every: int = 0
    reproducible: bool = False
    ba: float | None = None
    mu_strength: float | None = None
    t_final: float | None = None

    def __post_init__(self):
        if self.cfl is not None and not (0.0 < self.cfl < 1.0):
            raise ValueError("cfl must lie in (0, 1)")
        if self.mode not in ("low", "high"):
            raise ValueError("mode must be 'low' or 'high'")


def load_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _coerce(cfg: dict) -> dict:
    typed = {}
    casts = {f.name: f.type for f in fields(RunConfig)}
    for key, val in cfg.items():
        if key not in casts:
            raise KeyError(f"unknown config key {key!r}")
        if isinstance(val, str):
            if key in ("level", "snapshot_every"):
                val = int(val)
            elif key in ("cfl", "ba", "mu_strength", "t_final"):
                val = float(val)
            elif key == "reproducible":
                val = val.lower() in ("1", "true", "yes")
        typed[key] = val
    return typed


def run(config: RunConfig) -> int:
    """Execute one benchmark run; returns a process exit status."""
    spec = get_problem(config.problem, mu_strength=config.mu_strength,
                       b_ambient=config.ba)
    cfl = spec.cfl if config.cfl is None else config.cfl
    t_final = spec.t_final if config.t_final is None else config.t_final
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    state = make_state(spec, config.level)
    fp0 = weak_div_fingerprint(state.sys, state.b)
    steps = [0]

    diag_path = out / "diag.csv"
    fh = open(diag_path, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(DiagnosticsRecord.FIELDS)
    writer.writerow(compute_record(state, fp0).row())

    def callback(st, info):
        steps[0] += 1
        writer.writerow(compute_record(st, fp0).row())
        if config.snapshot_every and steps[0] % config.snapshot_every == 0:
            write_vtk(st, str(out / f"snap_{steps[0]:06d}.vtk"))

    t0 = time.time()
    try:
        state = run_to_time(state, t_final, cfl=cfl, mode=config.mode,
                            callbacks=[callback])
    except Exception as exc:  # noqa: BLE001 - report and fail the process
        fh.close()
        print(f"run failed during time marching: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    fh.close()
    write_vtk(state, str(out / f"snap_{steps[0]:06d}.vtk"))
    print(f"{spec.name} level {config.level} mode {config.mode}: "
          f"{steps[0]} steps to t={state.t:g} in {time.time() - t0:.1f}s "
          f"-> {diag_path}")
    return 0


# ----------------------------------------------------------------------
# refinement sweeps
# ----------------------------------------------------------------------

def reference_path() -> Path:
    return Path(importlib.resources.files("mhdfem") / "data" / REFERENCE_NAME)


def load_reference() -> tuple[np.ndarray, np.ndarray]:
    path = reference_path()
    if not path.exists():
        raise FileNotFoundError(
            f"missing Riemann reference {path}; generate it once with "
            "'mhdfem make-reference'"
        )
    data = np.genfromtxt(path, delimiter=",", names=True)
    return data["x"], data["rho"]


def _write_rates(path: Path, dofs, norms, dim: int) -> None:
    norms = np.asarray(norms)            # (nlev, 3)
    rates = [eoc(norms[:, k], dofs, dim=dim) for k in range(3)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dofs", "L1", "rate1", "L2", "rate2", "Linf", "rateinf"])
        for lev in range(len(dofs)):
            row = [dofs[lev]]
            for k in range(3):
                row.append(f"{norms[lev, k]:.6e}")
                row.append("" if lev == 0 else f"{rates[k][lev - 1]:.3f}")
            w.writerow(row)


def sweep_vortex(levels, out: Path, mu_strength: float | None = None,
                 cfl: float | None = None, verbose: bool = True):
    """Refinement study against the advected exact vortex.

    Errors are relative (normalized by the exact solution's own norm, the
    convention of the benchmark's published tables).  Emits rates.csv for
    velocity and rates_b.csv for the magnetic field; returns both tables.
    """
    spec = get_problem("vortex", mu_strength=mu_strength)
    use_cfl = spec.cfl if cfl is None else cfl
    v_norms, b_norms, v_dofs, b_dofs = [], [], [], []
    for lev in levels:
        state = make_state(spec, lev)
        state = run_to_time(state, spec.t_final, cfl=use_cfl, mode="high")
        sysv = state.sys.space_v
        v_num = state.U[:, 1:3] / state.U[:, 0:1]
        ev = error_norms(v_num, lambda p: spec.exact_v(p, state.t), sysv)
        base_v = error_norms(np.zeros_like(v_num),
                             lambda p: spec.exact_v(p, state.t), sysv)
        eb = error_norms(state.b, lambda p: spec.exact_B(p, state.t),
                         state.sys.space_w)
        base_b = error_norms(np.zeros_like(state.b),
                             lambda p: spec.exact_B(p, state.t),
                             state.sys.space_w)
        v_norms.append([e / n for e, n in zip(ev, base_v)])
        b_norms.append([e / n for e, n in zip(eb, base_b)])
        v_dofs.append(2 * sysv.ndofs)
        b_dofs.append(state.sys.space_w.ndofs)
        if verbose:
            print(f"vortex level {lev}: vdofs={v_dofs[-1]} relL1={v_norms[-1][0]:.3e}")
    out.mkdir(parents=True, exist_ok=True)
    _write_rates(out / "rates.csv", v_dofs, v_norms, dim=2)
    _write_rates(out / "rates_b.csv", b_dofs, b_norms, dim=2)
    return (v_dofs, v_norms), (b_dofs, b_norms)


def sweep_briowu(levels, out: Path, cfl: float | None = None,
                 verbose: bool = True):
    """Refinement study of the Riemann strip against the stored fine-grid
    reference; 1D error convention (h ~ 1/cells, strip-height-averaged L^p)."""
    x_ref, rho_ref = load_reference()
    spec = get_problem("briowu")
    use_cfl = spec.cfl if cfl is None else cfl
    height = spec.meta["strip_height"]
    norms, dofs = [], []
    for lev in levels:
        state = make_state(spec, lev)
        state = run_to_time(state, spec.t_final, cfl=use_cfl, mode="high")
        ref = lambda p: np.interp(p[:, 0], x_ref, rho_ref)
        e = error_norms(state.U[:, 0], ref, state.sys.space_v)
        # convert strip integrals to 1D line norms
        norms.append([e[0] / height, e[1] / np.sqrt(height), e[2]])
        dofs.append(spec.nx0 * 2**lev)
        if verbose:
            print(f"briowu {dofs[-1]} cells: L1={norms[-1][0]:.3e}")
    out.mkdir(parents=True, exist_ok=True)
    _write_rates(out / "rates.csv", dofs, norms, dim=1)
    return dofs, norms


def make_reference(out: Path | None = None, nx: int = 16000,
                   cfl: float = 0.5, verbose: bool = True) -> Path:
    """Generate the fine-grid low-order Riemann reference profile.

    Runs the full solver in low mode on the nx-cell strip and stores the
    nodal density (and magnetic y-component) of the bottom node row.  The
    default resolution takes a few hours of single-core time; the result
    ships with the package so sweeps never need to regenerate it.
    """
    from .problems import briowu_problem

    spec = briowu_problem()
    spec.nx0 = nx
    spec.ny0 = 2
    spec.domain = (0.0, 1.0, 0.0, 2.0 / nx)
    state = make_state(spec, 0)
    t0 = time.time()
    done = [0]

    def progress(st, info):
        done[0] += 1
        if verbose and done[0] % 500 == 0:
            print(f"  t={st.t:.5f} ({done[0]} steps, {time.time() - t0:.0f}s)",
                  flush=True)

    state = run_to_time(state, spec.t_final, cfl=cfl, mode="low",
                        callbacks=[progress])

    coords = state.sys.space_v.node_coords
    row = np.flatnonzero(np.abs(coords[:, 1]) < 1e-14)
    order = row[np.argsort(coords[row, 0])]
    xs = coords[order, 0]
    rho = state.U[order, 0]
    # vertex-averaged B_y along the bottom row
    from .vtkio import _vertex_bdm_average
    Bv = _vertex_bdm_average(state)
    mesh = state.sys.mesh
    by = np.zeros(state.sys.space_v.ndofs)
    cnt = np.zeros(state.sys.space_v.ndofs)
    np.add.at(by, mesh.vertex_class, Bv[:, 1])
    np.add.at(cnt, mesh.vertex_class, 1.0)
    by /= np.maximum(cnt, 1.0)

    path = reference_path() if out is None else Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "rho", "by"])
        for x, r, b in zip(xs, rho, by[order]):
            w.writerow([f"{x:.12g}", f"{r:.12g}", f"{b:.12g}"])
    if verbose:
        print(f"reference written to {path} ({len(xs)} samples, "
              f"{time.time() - t0:.0f}s)")
    return path


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _parse_levels(text: str):
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.split(",")]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mhdfem",
                                     description="compressible MHD benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one benchmark")
    p_run.add_argument("--problem", required=False)
    p_run.add_argument("--level", type=int, default=None)
    p_run.add_argument("--cfl", type=float, default=None)
    p_run.add_argument("--mode", choices=("low", "high"), default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--ba", type=float, default=None)
    p_run.add_argument("--mu-strength", type=float, default=None)
    p_run.add_argument("--t-final", type=float, default=None)
    p_run.add_argument("--snapshot-every", type=int, default=None)
    p_run.add_argument("--reproducible", action="store_true", default=None)
    p_run.add_argument("--config", default=None)

    p_sweep = sub.add_parser("sweep", help="refinement study")
    p_sweep.add_argument("--problem", required=True, choices=("vortex", "briowu"))
    p_sweep.add_argument("--levels", required=True)
    p_sweep.add_argument("--out", default="sweep")
    p_sweep.add_argument("--cfl", type=float, default=None)
    p_sweep.add_argument("--mu-strength", type=float, default=None)

    p_ref = sub.add_parser("make-reference",
                           help="generate the Riemann-strip reference profile")
    p_ref.add_argument("--out", default=None)
    p_ref.add_argument("--nx", type=int, default=16000)
    p_ref.add_argument("--cfl", type=float, default=0.5)

    args = parser.parse_args(argv)

    if args.command == "run":
        cfg = {}
        if args.config:
            cfg.update(load_config_file(args.config))
        for key in ("problem", "level", "cfl", "mode", "out", "ba",
                    "mu_strength", "t_final", "snapshot_every", "reproducible"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        try:
            config = RunConfig(**_coerce(cfg))
            if not config.problem:
                raise KeyError("problem")
            get_problem(config.problem)
        except (KeyError, ValueError) as exc:
            parser.error(str(exc))
        return run(config)

    if args.command == "sweep":
        levels = _parse_levels(args.levels)
        out = Path(args.out)
        if args.problem == "vortex":
            sweep_vortex(levels, out, mu_strength=args.mu_strength, cfl=args.cfl)
        else:
            sweep_briowu(levels, out, cfl=args.cfl)
        print(f"rates written to {out}/rates.csv")
        return 0

    if args.command == "make-reference":
        make_reference(None if args.out is None else Path(args.out),
                       nx=args.nx, cfl=args.cfl)
        return 0

    parser.error("unknown command")
    return 2


if __name__ == "__main__":
    sys.exit(main())
