"""Command-line entry point: ``pinnray {geometry,fem,train,evaluate,export}``.

Every command reads an experiment JSON (``--config``).  Flags override the
JSON, and each flag can also come from a ``PINNRAY_<FLAG>`` environment
variable (flags win over the environment).

Exit codes: 0 when every output was written and is finite, 1 for runtime
failures (singular system, divergence, non-finite output), 2 for usage and
configuration errors, including missing input files.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("pinnray")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")


class InputError(Exception):
    """Missing or unusable input; maps to exit code 2."""


class OutputError(Exception):
    """An output was not written or is not finite; maps to exit code 1."""


def _env(name, default=None):
    return os.environ.get(f"PINNRAY_{name.upper()}", default)


def _env_flag(name) -> bool:
    return str(_env(name, "0")).strip().lower() in ("1", "true", "yes", "on")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env("config"), help="experiment JSON")
    common.add_argument("--seed", type=int, default=_env("seed"), help="seed for network, sampling and training")
    common.add_argument("--threads", type=int, default=_env("threads"), help="worker threads for BLAS and numba")
    common.add_argument("--deterministic", action="store_true", default=_env_flag("deterministic"),
                        help="single-threaded reductions so reruns are bit-identical")
    common.add_argument("--out", default=_env("out"), help="output directory (overrides the JSON)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pinnray", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", parents=[common], help="write the domain polygons (and optionally a mesh)")
    g.add_argument("--mesh", action="store_true", help="also write mesh.msh")

    sub.add_parser("fem", parents=[common], help="solve the FEM baseline and sample it at the markers")

    t = sub.add_parser("train", parents=[common], help="train a displacement network")
    t.add_argument("--variant", choices=("std", "asm"), default=_env("variant", "std"))
    t.add_argument("--epochs", type=int, default=_env("epochs"))
    t.add_argument("--markers", default=_env("markers"), help="measured marker displacements CSV")

    e = sub.add_parser("evaluate", parents=[common], help="marker errors for every available method")
    e.add_argument("--markers", default=_env("markers"), help="measured marker displacements CSV")

    x = sub.add_parser("export", parents=[common], help="sample displacement, strain and stress on a grid")
    x.add_argument("--source", choices=("fem", "std", "asm"), default=_env("source", "fem"))
    x.add_argument("--spacing", type=float, default=float(_env("spacing", 0.5)), help="grid spacing in mm")
    x.add_argument("--keep-outside", action="store_true", help="keep grid points outside the material as empty rows")
    return p


def _configure_threads(args) -> None:
    n = 1 if args.deterministic else args.threads
    if n is None:
        return
    if n < 1:
        raise InputError("--threads must be >= 1")
    for var in THREAD_VARS:
        os.environ[var] = str(n)
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except Exception:  # numba absent or already pinned
        pass


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {p}")
    return p


def _load_spec(args):
    from .experiment import ExperimentSpec

    if not args.config:
        raise InputError("--config is required")
    spec = ExperimentSpec.load(_require_file(args.config))
    if args.seed is not None:
        spec.network["seed"] = args.seed
        spec.points["seed"] = args.seed
        spec.train["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        spec.train["epochs"] = args.epochs
    if args.out:
        spec.out = str(Path(args.out).resolve())
    spec.validate()
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    return spec


def _check_finite(name: str, *arrays) -> None:
    import numpy as np

    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a, dtype=np.float64))):
            raise OutputError(f"{name} contains non-finite values")


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


# commands ---------------------------------------------------------------------

def cmd_geometry(args) -> list[Path]:
    from dataclasses import fields

    from .geometry import FinRayParams, build_finray, save_mesh

    cfg = _require_file(args.config) if args.config else None
    if cfg is None:
        raise InputError("--config is required")
    raw = json.loads(cfg.read_text())
    if set(raw) <= {f.name for f in fields(FinRayParams)}:
        # a bare parameter file rather than an experiment bundle
        domain = build_finray(FinRayParams.from_json(cfg.read_text()))
        out = Path(args.out or cfg.parent)
        out.mkdir(parents=True, exist_ok=True)
        spec = None
    else:
        spec = _load_spec(args)
        domain = spec.domain()
        out = spec.out_dir
    d = domain.to_dict()
    d["area"] = domain.area
    written = [_write_json(out / "domain.json", d)]
    print(f"domain: {len(domain.holes)} holes, area {domain.area:.6g} mm^2 -> {written[0]}")
    if args.mesh:
        if spec is None:
            raise InputError("--mesh needs an experiment config with a mesh section")
        mesh = spec.build_mesh(domain)
        save_mesh(mesh, out / "mesh.msh")
        written.append(out / "mesh.msh")
        print(f"mesh: {len(mesh.nodes)} nodes, {len(mesh.triangles)} triangles")
    return written


def _load_fem(spec):
    """FEM solution saved by ``fem`` (mesh.msh + fem_nodes.csv), or None."""
    import numpy as np

    from .fem import FemSolution, recover_fields
    from .geometry import read_mesh

    mesh_path, nodes_path = spec.out_dir / "mesh.msh", spec.out_dir / "fem_nodes.csv"
    if not (mesh_path.is_file() and nodes_path.is_file()):
        return None
    mesh = read_mesh(mesh_path)
    disp = np.loadtxt(nodes_path, delimiter=",", skiprows=1, ndmin=2)[:, 2:4]
    if disp.shape[0] != len(mesh.nodes):
        raise InputError(f"{nodes_path} does not match {mesh_path}")
    mat = spec.material_model()
    strain, stress, area = recover_fields(mesh, mat, disp)
    return FemSolution(mesh, mat, disp, strain, stress, area)


def cmd_fem(args) -> list[Path]:
    import numpy as np

    from .evaluation import MarkerDisplacements
    from .fem import FemProblem, export_solution, interpolate, solve
    from .geometry import save_mesh

    spec = _load_spec(args)
    domain = spec.domain()
    mesh = spec.build_mesh(domain)
    mat = spec.material_model()
    sol = solve(FemProblem(mesh, mat, spec.dirichlet(mesh)))
    _check_finite("FEM displacement", sol.displacement, sol.stress)
    out = spec.out_dir
    save_mesh(mesh, out / "mesh.msh")
    written = [out / "mesh.msh", *export_solution(sol, out / "fem.csv")]
    summary = {
        "nodes": len(mesh.nodes),
        "elements": len(mesh.triangles),
        "max_abs_u": float(np.abs(sol.u).max()),
        "max_abs_v": float(np.abs(sol.v).max()),
        "strain_energy": sol.strain_energy(),
    }
    sites = spec.marker_sites()
    if sites is not None:
        md = MarkerDisplacements(np.arange(1, len(sites) + 1), sites, interpolate(sol, sites))
        md.to_csv(out / "fem_markers.csv")
        written.append(out / "fem_markers.csv")
        summary["markers"] = md.displacements.tolist()
    written.append(_write_json(out / "fem_summary.json", summary))
    print(f"fem: {summary['nodes']} nodes, max |u| {summary['max_abs_u']:.6g} mm, "
          f"max |v| {summary['max_abs_v']:.6g} mm, energy {summary['strain_energy']:.6g}")
    return written


def _measured(spec, args):
    override = _require_file(args.markers) if getattr(args, "markers", None) else None
    mk = spec.markers
    for key in ("displacements", "observations", "correspondences"):
        if override is None and mk.get(key):
            _require_file(spec.resolve(mk[key]))
    return spec.measured_markers(override)


def cmd_train(args) -> list[Path]:
    from .errors import ConfigurationError, DivergenceError
    from .network import DisplacementNet
    from .training import train, write_history

    spec = _load_spec(args)
    asm = args.variant == "asm"
    measured = _measured(spec, args) if asm else None
    if asm and measured is None:
        raise ConfigurationError("variant asm needs marker measurements (markers.displacements or --markers)")
    domain = spec.domain()
    mesh = spec.build_mesh(domain) if spec.points.get("collocation_source") == "mesh" else None
    sets = spec.point_sets(domain, mesh, measured)
    net0 = DisplacementNet.init(spec.network_config(), domain.bbox)
    cfg = spec.train_config(asm)
    out = spec.out_dir
    hist_path = out / f"loss_{args.variant}.csv"
    ckpt_path = out / f"checkpoint_{args.variant}.json"
    cb = (lambda r: log.info("epoch %d  total %.6g  pde %.6g  bc %.6g  asm %.6g",
                             r.epoch, r.l_total, r.l_pde, r.l_bc, r.l_asm))
    try:
        net, history = train(net0, sets, spec.material_model(), cfg, callback=cb)
    except DivergenceError as e:
        write_history(e.history, hist_path)
        raise OutputError(f"{e} (history up to epoch {e.last_finite_epoch} kept in {hist_path})") from e
    write_history(history, hist_path)
    net.save(ckpt_path)
    last = history[-1]
    _check_finite("loss history", [[r.l_pde, r.l_bc, r.l_asm, r.l_total] for r in history])
    _check_finite("checkpoint", net.params_u.data, net.params_v.data)
    print(f"train[{args.variant}]: epoch {last.epoch}  L_total {last.l_total:.6g}  L_pde {last.l_pde:.6g}  "
          f"L_bc {last.l_bc:.6g}  L_asm {last.l_asm:.6g}")
    return [hist_path, ckpt_path]


METHOD_FILES = (("pinn_std", "checkpoint_std.json"), ("pinn_asm", "checkpoint_asm.json"))


def cmd_evaluate(args) -> list[Path]:
    import numpy as np

    from .evaluation import comparison_table, method_metrics, write_metrics
    from .fem import interpolate
    from .network import DisplacementNet

    spec = _load_spec(args)
    measured = _measured(spec, args)
    if measured is None:
        raise InputError("no marker measurements: set markers.displacements or pass --markers")
    pts = measured.positions
    rows = []
    sol = _load_fem(spec)
    if sol is not None:
        rows.append(method_metrics("fem", interpolate(sol, pts), measured.displacements))
    for method, fname in METHOD_FILES:
        path = spec.out_dir / fname
        if path.is_file():
            u, v = DisplacementNet.load(path).displacement(pts[:, 0], pts[:, 1])
            rows.append(method_metrics(method, np.column_stack([u, v]), measured.displacements))
    if not rows:
        raise InputError(f"nothing to evaluate in {spec.out_dir}: run fem and/or train first")
    for r in rows:
        _check_finite(f"{r.method} metrics", [r.mae_u, r.mae_v, r.mae_disp], r.per_marker_ae)
    out = spec.out_dir
    write_metrics(out / "metrics.json", rows)
    table = comparison_table(rows)
    (out / "comparison.txt").write_text(table + "\n")
    print(table)
    return [out / "metrics.json", out / "comparison.txt"]


def cmd_export(args) -> list[Path]:
    from .evaluation import GridSpec, export_fields
    from .network import DisplacementNet

    spec = _load_spec(args)
    domain = spec.domain()
    grid = GridSpec.covering(domain.bbox, args.spacing).points()
    out = spec.out_dir / f"fields_{args.source}.csv"
    if args.source == "fem":
        source = _load_fem(spec)
        if source is None:
            raise InputError(f"no FEM solution in {spec.out_dir}: run fem first")
    else:
        source = DisplacementNet.load(_require_file(spec.out_dir / f"checkpoint_{args.source}.json"))
    n = export_fields(source, grid, out, spec.material_model(), domain, args.keep_outside)
    import numpy as np
    data = np.genfromtxt(out, delimiter=",", skip_header=1, ndmin=2)
    if not args.keep_outside:
        _check_finite("exported fields", data)
    print(f"export[{args.source}]: {n} rows -> {out}")
    return [out]


COMMANDS = {"geometry": cmd_geometry, "fem": cmd_fem, "train": cmd_train,
            "evaluate": cmd_evaluate, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # thread counts must be in the environment before numpy loads
        _configure_threads(args)
    except InputError as e:
        print(f"pinnray: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    from .errors import (AssemblyError, ConfigurationError, GeometryError, MeshParseError, PinnRayError,
                         SingularSystemError)
    from .evaluation import MarkerDataError

    try:
        COMMANDS[args.command](args)
    except (InputError, FileNotFoundError) as e:
        print(f"pinnray: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, GeometryError, MeshParseError, MarkerDataError, json.JSONDecodeError) as e:
        print(f"pinnray: invalid input: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OutputError, SingularSystemError, AssemblyError, PinnRayError, ArithmeticError) as e:
        print(f"pinnray: failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
