"""Command-line interface: ``tetra-lfa {analyze,optimize,solve,table}``.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analysis import (
    NumericalError,
    SampleGrid,
    default_threads,
    optimize_damping,
    smoothing_factor,
    two_grid_factor,
)
from .geometry import GeometryError, LatticeBasis, load_geometry
from .stencil import StencilError, assemble_stencil
from .symbols import SmootherConfig, strongest_axes

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

SMOOTHER_NAMES = {
    "jacobi": "jacobi",
    "gs-lex": "gs_lex",
    "four-color": "four_color",
    "zebra-line": "zebra_line",
    "zebra-plane": "zebra_plane",
    "plane-lex": "plane_lex",
    "alternating-line": "zebra_line",
    "alternating-plane": "zebra_plane",
}

# Jacobi is damped by default (0.8 minimises its two-grid factor).
DEFAULT_OMEGA = {"jacobi": (0.8,)}

TABLE_SMOOTHERS = (
    ("jacobi", SmootherConfig("jacobi", (0.8,))),
    ("gs", SmootherConfig("gs_lex", (1.0,))),
    ("four_color", SmootherConfig("four_color", (1.0,) * 4)),
)
TABLE_ROWS = {"table1": ((1, 0), (1, 1), (2, 1), (2, 2)), "table2": ((1, 0), (1, 1))}
TABLE_SHAPES = {"table1": "regular", "table2": "optimized"}
DEGENERATE_SHAPES = ("regular", "optimized", "needle", "wedge", "spindle", "spade", "sliver", "cap")


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    geometry: str | None = None
    smoother: dict | None = None
    resolution: int | None = None
    outputs: list[str] = field(default_factory=list)
    seed: int | None = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    version: str = __version__
    argv: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# -- argument helpers -------------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _nu(text: str) -> tuple[int, int]:
    vals = _ints(text)
    if len(vals) != 2 or min(vals) < 0 or sum(vals) == 0:
        raise argparse.ArgumentTypeError(f"--nu takes 'nu1,nu2' with nu1+nu2 >= 1, got {text!r}")
    return vals


def build_smoother(name: str, omega=None, axis=None, color=None, order=None,
                   stencil=None) -> SmootherConfig:
    """Translate CLI options (1-based axes) into a :class:`SmootherConfig`.

    Without ``axis``, line and plane smoothers use the most strongly coupled
    direction(s) of ``stencil``.
    """
    if name not in SMOOTHER_NAMES:
        raise UsageError(f"unknown smoother {name!r}")
    kind = SMOOTHER_NAMES[name]
    omega = tuple(omega) if omega else DEFAULT_OMEGA.get(kind, (1.0,))
    axes = tuple(a - 1 for a in axis) if axis else None
    if axes is None and stencil is not None and kind in ("zebra_line", "zebra_plane", "plane_lex"):
        axes = strongest_axes(stencil, "zebra_line" if kind == "zebra_line" else "zebra_plane",
                              2 if name.startswith("alternating") else 1)
    if axes is not None and any(a not in (0, 1, 2) for a in axes):
        raise UsageError("--axis values must be 1, 2 or 3")
    try:
        if name.startswith("alternating"):
            if not axes or len(axes) < 2:
                raise UsageError(f"{name} needs at least two --axis values, e.g. --axis 1,2")
            if len(omega) != 1:
                raise UsageError(f"{name} takes one damping value")
            parts = tuple(SmootherConfig(kind, omega, a) for a in axes)
            return SmootherConfig("alternating", omega, parts=parts)
        if kind in ("zebra_line", "zebra_plane", "plane_lex"):
            if not axes or len(axes) != 1:
                raise UsageError(f"{name} needs exactly one --axis (1, 2 or 3)")
            return SmootherConfig(kind, omega, axes[0], color=color)
        if axes:
            raise UsageError(f"{name} takes no --axis")
        if kind == "four_color":
            if len(omega) not in (1, 4):
                raise UsageError(f"four-color takes 1 or 4 damping values, got {len(omega)}")
            return SmootherConfig(kind, omega, order=order or (0, 1, 2, 3))
        if len(omega) != 1:
            raise UsageError(f"{name} takes one damping value, got {len(omega)}")
        return SmootherConfig(kind, omega)
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _smoother_from_args(args, basis: LatticeBasis) -> SmootherConfig:
    return build_smoother(args.smoother, args.omega, args.axis, args.color, args.order,
                          stencil=assemble_stencil(basis))


def _stencils(basis: LatticeBasis):
    fine = assemble_stencil(basis)
    coarse = assemble_stencil(LatticeBasis.from_vectors(2.0 * basis.vectors, basis.label))
    return fine, coarse


def _geometry(args) -> LatticeBasis:
    try:
        return load_geometry(args.geometry)
    except GeometryError as exc:
        raise UsageError(str(exc)) from None


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


def _emit(text: str, path: str | None):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x
    return json.dumps(clean(obj), indent=2) + "\n"


def _csv_with_manifest(manifest: RunManifest, header, rows) -> str:
    buf = io.StringIO()
    buf.write("# manifest " + json.dumps(manifest.to_dict()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# -- commands -------------------------------------------------------------------

def cmd_analyze(args) -> int:
    basis = _geometry(args)
    smoother = _smoother_from_args(args, basis)
    fine, coarse = _stencils(basis)
    grid = SampleGrid(resolution=args.resolution, exclusion_tol=args.exclusion_tol)
    nu1, nu2 = args.nu
    if args.mode == "smoothing":
        report = smoothing_factor(fine, smoother, nu1 + nu2, grid, _threads(args))
    else:
        report = two_grid_factor(fine, coarse, smoother, nu1, nu2, grid, _threads(args))
    manifest = RunManifest("analyze", args.geometry, smoother.describe(), args.resolution,
                           [args.out] if args.out else [], argv=args.argv)
    out = report.to_dict()
    out["mode"] = args.mode
    out["manifest"] = manifest.to_dict()
    _emit(_json(out), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    basis = _geometry(args)
    smoother = _smoother_from_args(args, basis)
    fine, coarse = _stencils(basis)
    step = args.resolution_omega
    lo = args.min_omega if args.min_omega is not None else step
    if not 0.0 < lo < args.max_omega <= 2.0:
        raise UsageError("need 0 < --min-omega < --max-omega <= 2")
    nu1, nu2 = args.nu
    omega, report = optimize_damping(
        fine, coarse, smoother, nu1, nu2, method=args.method, resolution=args.resolution,
        search_resolution=args.search_resolution, step=step, bounds=(lo, args.max_omega),
        objective="smoothing" if args.mode == "smoothing" else "two_grid",
        threads=_threads(args))
    manifest = RunManifest("optimize", args.geometry, smoother.describe(), args.resolution,
                           [args.out] if args.out else [], argv=args.argv)
    out = {"omega": list(omega), "factor": report.total, "method": args.method,
           "report": report.to_dict(), "manifest": manifest.to_dict()}
    _emit(_json(out), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    from .solver import CycleConfig, Hierarchy, run_cycles
    from .solver.kernels import get_backend

    basis = _geometry(args)
    smoother = _smoother_from_args(args, basis)
    nu1, nu2 = args.nu
    try:
        config = CycleConfig(smoother, nu1, nu2, args.cycle, args.levels, args.coarse_solver, args.seed)
        hierarchy = Hierarchy(basis, args.n, args.levels, get_backend(args.backend))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outputs = [p for p in (args.log, args.out) if p]
    manifest = RunManifest("solve", args.geometry, smoother.describe(), args.resolution,
                           outputs, seed=args.seed, argv=args.argv)

    from .solver import DivergenceError
    status = EXIT_OK
    try:
        result = run_cycles(basis, config, args.n, args.cycles, hierarchy=hierarchy)
        error = None
    except DivergenceError as exc:
        result, error, status = exc.result, str(exc), EXIT_NUMERIC
    log = "# manifest " + json.dumps(manifest.to_dict()) + "\n" + result.to_csv()
    if args.log:
        _emit(log, args.log)

    measured = result.asymptotic_rate
    predicted = None
    if args.predict:
        fine, coarse = _stencils(basis)
        predicted = two_grid_factor(fine, coarse, smoother, nu1, nu2,
                                    SampleGrid(resolution=args.resolution), _threads(args)).factor
    gap = abs(measured - predicted) if predicted is not None and math.isfinite(measured) else None
    summary = {
        "predicted_rho": predicted,
        "measured_rho": measured,
        "gap": gap,
        "cycles": len(result.rates),
        "config": dict(config.describe(), n=args.n, backend=hierarchy.kernels.name),
        "manifest": manifest.to_dict(),
    }
    if error:
        summary["error"] = error
        print(f"tetra-lfa solve: {error}", file=sys.stderr)
    _emit(_json(summary), args.out)
    return status


def _table_rows(name, resolution, with_solver, n, cycles, threads):
    from .geometry import basis_from_tet, shape_catalog

    basis = basis_from_tet(shape_catalog(TABLE_SHAPES[name]))
    fine, coarse = _stencils(basis)
    grid = SampleGrid(resolution=resolution)
    header = ["nu1", "nu2"]
    for label, _ in TABLE_SMOOTHERS:
        header += [f"{label}_mu", f"{label}_rho"] + ([f"{label}_rho_h"] if with_solver else [])
    rows = []
    for nu1, nu2 in TABLE_ROWS[name]:
        row = [nu1, nu2]
        for _, sm in TABLE_SMOOTHERS:
            row.append(smoothing_factor(fine, sm, nu1 + nu2, grid, threads).total)
            row.append(two_grid_factor(fine, coarse, sm, nu1, nu2, grid, threads).factor)
            if with_solver:
                from .solver import CycleConfig, run_cycles
                row.append(run_cycles(basis, CycleConfig(sm, nu1, nu2, "W"), n, cycles).asymptotic_rate)
        rows.append(row)
    return header, rows


def _degenerate_rows(resolution, with_solver, n, cycles, threads):
    from .geometry import basis_from_tet, shape_catalog

    sm = SmootherConfig("four_color", (1.0,) * 4)
    grid = SampleGrid(resolution=resolution)
    mu, rho, rho_h = ["mu"], ["rho"], ["rho_h"]
    for shape in DEGENERATE_SHAPES:
        basis = basis_from_tet(shape_catalog(shape))
        fine, coarse = _stencils(basis)
        mu.append(smoothing_factor(fine, sm, 2, grid, threads).total)
        rho.append(two_grid_factor(fine, coarse, sm, 1, 1, grid, threads).factor)
        if with_solver:
            from .solver import CycleConfig, run_cycles
            rho_h.append(run_cycles(basis, CycleConfig(sm, 1, 1, "W"), n, cycles).asymptotic_rate)
    rows = [mu, rho] + ([rho_h] if with_solver else [])
    return ["quantity", *DEGENERATE_SHAPES], rows


def cmd_table(args) -> int:
    threads = _threads(args)
    if args.name == "degenerate":
        header, rows = _degenerate_rows(args.resolution, args.with_solver, args.n, args.cycles, threads)
    else:
        header, rows = _table_rows(args.name, args.resolution, args.with_solver, args.n,
                                   args.cycles, threads)
    manifest = RunManifest("table", args.name, None, args.resolution,
                           [args.out] if args.out else [], argv=args.argv)
    _emit(_csv_with_manifest(manifest, header, rows), args.out)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _add_common(p, smoother=True):
    p.add_argument("--geometry", default="catalog:regular",
                   help="catalog:<name> or a JSON file with 'vertices' or 'basis'")
    if smoother:
        p.add_argument("--smoother", default="four-color", choices=sorted(SMOOTHER_NAMES))
        p.add_argument("--omega", type=_floats, default=None,
                       help="damping value(s), comma separated (four per colour for four-color)")
        p.add_argument("--axis", type=_ints, default=None,
                       help="line direction / plane normal, 1-based; a list for alternating")
        p.add_argument("--color", type=_ints, default=None,
                       help="zebra colouring vector a (colour = a.k mod 2), e.g. 0,1,0")
        p.add_argument("--order", type=_ints, default=None, help="four-colour sweep order")
        p.add_argument("--nu", type=_nu, default=(1, 1), help="nu1,nu2 (default 1,1)")
    p.add_argument("--resolution", type=int, default=32, help="frequency samples per pi")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for frequency sampling (default $TETRA_LFA_THREADS or 1)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tetra-lfa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="smoothing or two-grid factor of one configuration")
    _add_common(p)
    p.add_argument("--mode", choices=("smoothing", "two-grid"), default="two-grid")
    p.add_argument("--exclusion-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="damping parameters minimising the predicted factor")
    _add_common(p)
    p.add_argument("--method", choices=("grid", "simplex"), default="simplex")
    p.add_argument("--mode", choices=("smoothing", "two-grid"), default="two-grid")
    p.add_argument("--resolution-omega", type=float, default=0.05, help="grid step in omega")
    p.add_argument("--min-omega", type=float, default=None, help="default: one grid step")
    p.add_argument("--max-omega", type=float, default=2.0)
    p.add_argument("--search-resolution", type=int, default=16,
                   help="frequency resolution used while searching")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("solve", help="measure multigrid convergence on a Dirichlet box")
    _add_common(p)
    p.add_argument("--cycle", choices=("V", "W"), default="W")
    p.add_argument("--n", type=int, default=65, help="points per direction (2**l + 1)")
    p.add_argument("--cycles", type=int, default=50)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--coarse-solver", choices=("exact_dense", "many_sweeps"), default="exact_dense")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    p.add_argument("--log", default=None, help="CSV run log (cycle,error_l2,rate)")
    p.add_argument("--no-predict", dest="predict", action="store_false",
                   help="skip the LFA prediction in the summary")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table", help="regenerate a results table as CSV")
    _add_common(p, smoother=False)
    p.add_argument("--name", required=True, choices=("table1", "table2", "degenerate"))
    p.add_argument("--with-solver", action="store_true", help="add measured W-cycle rates")
    p.add_argument("--n", type=int, default=65)
    p.add_argument("--cycles", type=int, default=50)
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("tetra-lfa: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if getattr(args, "resolution", 32) < 4 or args.resolution % 2:
            raise UsageError("--resolution must be an even integer >= 4")
        return args.func(args)
    except (UsageError, StencilError) as exc:
        print(f"tetra-lfa {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError, RuntimeError) as exc:
        print(f"tetra-lfa {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
