"""Command line front end.

Subcommands ``hierarchy``, ``solve``, ``ablate`` and ``oracle``.  Every run
writes its resolved settings to ``manifest.json`` in the output directory;
passing that file back with ``--manifest`` repeats the run.

Exit codes: 0 ok, 2 unreadable input, 3 degenerate input, 4 zero diagonal,
5 input too large for the dense oracle.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .hierarchy import HierarchyConfig, build_hierarchy
from .mesh_io import MeshFormatError
from .pipeline import RunManifest, build_system, load_domain, write_vector
from .solver import MultigridSolver
from .sparse import CholeskySolver, NotPositiveDefinite, ZeroDiagonal

EXIT_OK, EXIT_PARSE, EXIT_DEGENERATE, EXIT_ZERO_DIAGONAL, EXIT_ORACLE_SIZE = 0, 2, 3, 4, 5
ORACLE_LIMIT = 5000

ABLATIONS = {
    "sampling": [(name, {"sampling": name}) for name in ("gravo", "random", "fps", "mis")],
    "selection": [(name, {"selection": name}) for name in
                  ("voronoi_triangle", "closest2", "closest3", "closest4", "random3", "closest_vertex",
                   "all_triangles")],
    "weighting": [("barycentric", {"weighting": "barycentric"}),
                  ("uniform", {"weighting": "uniform"}),
                  ("inverse_distance", {"weighting": "inverse_distance"}),
                  ("no_shift", {"weighting": "barycentric", "shift_seeds": False})],
}

_HIERARCHY_FLAGS = {"phi": "phi", "coarsest": "coarsest_size", "ring_limit": "ring_limit",
                    "sampling": "sampling", "selection": "selection", "weighting": "weighting"}
_SOLVER_FLAGS = {"nu_pre": "nu_pre", "nu_post": "nu_post", "tol": "epsilon", "max_iters": "max_iterations"}
_PROBLEM_FLAGS = {"problem": "kind", "alpha": "alpha", "beta": "beta", "eta": "eta",
                  "input_function": "input_function"}


def _seconds(value: float, manifest: RunManifest) -> str:
    return f"{value if manifest.timings else 0.0:.3f}"


def _g9(value: float) -> str:
    return f"{value:.9g}"


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("input", nargs="?", default=S, help="OBJ or PLY mesh / point cloud")
    p.add_argument("--manifest", help="JSON manifest from a previous run; flags given here override it")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--seed", type=int, default=S, help="seed for random right-hand sides and random variants")
    p.add_argument("--knn", type=int, default=S, help="neighbors per point for point clouds")
    p.add_argument("--no-timings", dest="timings", action="store_false", default=S,
                   help="write 0.000 for all timings so outputs are byte-reproducible")
    g = p.add_argument_group("hierarchy")
    g.add_argument("--phi", type=float, default=S)
    g.add_argument("--coarsest", type=int, default=S)
    g.add_argument("--ring-limit", type=int, default=S)
    g.add_argument("--no-shift", dest="shift_seeds", action="store_false", default=S)
    g.add_argument("--sampling", choices=("gravo", "random", "fps", "mis"), default=S)
    g.add_argument("--selection", default=S,
                   choices=("voronoi_triangle", "closest2", "closest3", "closest4", "random3",
                            "closest_vertex", "all_triangles"))
    g.add_argument("--weighting", choices=("barycentric", "uniform", "inverse_distance"), default=S)
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=("poisson", "smoothing", "bilaplacian_smoothing"), default=S)
    g.add_argument("--alpha", type=float, default=S)
    g.add_argument("--beta", type=float, default=S)
    g.add_argument("--eta", type=float, default=S)
    g.add_argument("--input-function", default=S, help="text file with one value per vertex")
    g = p.add_argument_group("solver")
    g.add_argument("--nu-pre", type=int, default=S)
    g.add_argument("--nu-post", type=int, default=S)
    g.add_argument("--tol", type=float, default=S)
    g.add_argument("--max-iters", type=int, default=S)
    g.add_argument("--norm", choices=("euclidean", "mass", "mass_weighted"), default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surfmg", description="Geometric multigrid for surface Laplace systems")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("hierarchy", help="build the level hierarchy and write levels.csv")
    _add_common(p)
    p.add_argument("--export-levels", action="store_true", help="write one OBJ per level")
    p = sub.add_parser("solve", help="solve a benchmark problem with multigrid")
    _add_common(p)
    p = sub.add_parser("ablate", help="compare hierarchy variants along one axis")
    _add_common(p)
    p.add_argument("--axis", choices=tuple(ABLATIONS), required=True)
    p = sub.add_parser("oracle", help="dense Cholesky reference solution")
    _add_common(p)
    return parser


def resolve_manifest(args: argparse.Namespace) -> RunManifest:
    base = RunManifest.load(args.manifest) if args.manifest else RunManifest()
    a = vars(args)
    top = {k: a[k] for k in ("input", "out", "seed", "knn", "timings") if k in a}
    hier = {field: a[flag] for flag, field in _HIERARCHY_FLAGS.items() if flag in a}
    if "shift_seeds" in a:
        hier["shift_seeds"] = a["shift_seeds"]
    hier_seed = {"seed": a["seed"]} if "seed" in a else {}
    solver = {field: a[flag] for flag, field in _SOLVER_FLAGS.items() if flag in a}
    if "norm" in a:
        solver["norm"] = "mass_weighted" if a["norm"] in ("mass", "mass_weighted") else "euclidean"
    problem = {field: a[flag] for flag, field in _PROBLEM_FLAGS.items() if flag in a}
    m = base.with_overrides(problem=problem, hierarchy={**hier, **hier_seed}, solver=solver, **top)
    if not m.input:
        raise SystemExit("an input file is required (positional or via --manifest)")
    return m


def _write_levels(path, hierarchy, manifest) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "n", "edges", "triangles", "fallback_fraction", "seconds"])
        for row in hierarchy.stats():
            w.writerow([row["level"], row["n"], row["edges"], row["triangles"],
                        _g9(row["fallback_fraction"]), _seconds(row["seconds"], manifest)])


def cmd_hierarchy(manifest: RunManifest, out: Path, export_levels: bool = False) -> int:
    domain = load_domain(manifest.input, manifest.knn)
    h = build_hierarchy(domain.graph, manifest.hierarchy)
    _write_levels(out / "levels.csv", h, manifest)
    if export_levels:
        h.export_levels(out / "levels")
    print(" ".join(f"{r['n']}" for r in h.stats()))
    return EXIT_OK


def _solve_once(domain, manifest: RunManifest, hierarchy_config: HierarchyConfig):
    A, b, _ = build_system(domain, manifest.problem, manifest.seed)
    t0 = time.perf_counter()
    h = build_hierarchy(domain.graph, hierarchy_config)
    hier_s = time.perf_counter() - t0
    mg = MultigridSolver(A, h, domain.ops.mass, manifest.solver)
    x, report = mg.solve(b)
    return x, report, h, hier_s


def cmd_solve(manifest: RunManifest, out: Path) -> int:
    domain = load_domain(manifest.input, manifest.knn)
    x, report, h, hier_s = _solve_once(domain, manifest, manifest.hierarchy)
    write_vector(out / "solution.txt", x)
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "relative_residual", "seconds"])
        for it, (res, sec) in enumerate(zip(report.residual_history, report.iteration_seconds)):
            w.writerow([it, _g9(res), _seconds(sec, manifest)])
    _write_levels(out / "levels.csv", h, manifest)
    summary = (f"hier_s={_seconds(hier_s, manifest)} setup_s={_seconds(report.setup_seconds, manifest)} "
               f"solve_s={_seconds(report.solve_seconds, manifest)} iters={report.iterations} "
               f"converged={str(report.converged).lower()}")
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def cmd_ablate(manifest: RunManifest, out: Path, axis: str) -> int:
    domain = load_domain(manifest.input, manifest.knn)
    path = out / f"ablation_{axis}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "levels", "hier_s", "iterations", "solve_s", "converged", "error"])
        for name, change in ABLATIONS[axis]:
            config = replace(manifest.hierarchy, **change)
            try:
                _, report, h, hier_s = _solve_once(domain, manifest, config)
            except (ZeroDiagonal, NotPositiveDefinite, ValueError) as exc:
                w.writerow([name, "", "", "", "", "false", str(exc)])
                continue
            w.writerow([name, h.n_levels, _seconds(hier_s, manifest), report.iterations,
                        _seconds(report.solve_seconds, manifest), str(report.converged).lower(), ""])
            print(f"{name}: iters={report.iterations} converged={str(report.converged).lower()}")
    return EXIT_OK


def cmd_oracle(manifest: RunManifest, out: Path) -> int:
    domain = load_domain(manifest.input, manifest.knn)
    if domain.n > ORACLE_LIMIT:
        print(f"oracle refused: {domain.n} vertices exceed the limit of {ORACLE_LIMIT}", file=sys.stderr)
        return EXIT_ORACLE_SIZE
    A, b, _ = build_system(domain, manifest.problem, manifest.seed)
    x = CholeskySolver(A).solve(b)
    write_vector(out / "oracle_solution.txt", x)
    print(f"residual={np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300):.3e}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = resolve_manifest(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: bad manifest or options: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest.save(out / "manifest.json")
    try:
        if args.command == "hierarchy":
            return cmd_hierarchy(manifest, out, args.export_levels)
        if args.command == "solve":
            return cmd_solve(manifest, out)
        if args.command == "ablate":
            return cmd_ablate(manifest, out, args.axis)
        return cmd_oracle(manifest, out)
    except (MeshFormatError, IndexError, OSError) as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ZeroDiagonal as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_DIAGONAL
    except ValueError as exc:
        print(f"error: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
