"""Command-line entry point: ``rtmsim {simulate,generate,evaluate,mesh-info}``.

Configuration comes from the packaged default file, overlaid by the file
named in ``--config`` (or the ``RTMSIM_CONFIG`` environment variable), then
by command-line flags. Every command writes ``manifest.json`` next to its
outputs with the resolved configuration, its hash, the seed and library
versions. Failures print a one-line JSON error to stderr and exit with the
category's code (see ``EXIT_CODES``).
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import os
import platform
import sys
from importlib import metadata, resources

import numpy as np
import yaml

from . import __version__
from .bioheat.solver import SolverConfig, temperature_csv
from .cohort.dataset import Dataset, atomic_write_text, load_csv, save_csv
from .cohort.generate import CohortConfig, generate_cohort, generate_original_surrogate
from .cohort.splits import GROUPS
from .errors import EXIT_CODES, ConfigError, GroupUndefined, IOFailure, RtmError
from .evaluation import evaluate_all, render_table, results_csv
from .learners import ALGORITHMS, LearnerSpec
from .phantom.geometry import PhantomSpec, build_phantom
from .phantom.mesh import mesh_quality, tetrahedralize
from .phantom.tissues import TissueType
from .phantom.vtk import export_vtk
from .radiometry.measure import N_POINTS, RadiometryConfig, measure_phantom

ENV_CONFIG = "RTMSIM_CONFIG"
SECTIONS = ("phantom", "solver", "radiometry", "cohort", "learners", "evaluation")


# --- configuration -----------------------------------------------------------

def default_config() -> dict:
    text = resources.files("rtmsim.data").joinpath("default_config.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _numbers(obj):
    """Turn numeric-looking strings into floats.

    YAML 1.1 reads exponent literals without a sign or dot (``1.5e9``) as
    strings; this undoes that for every value in the tree.
    """
    if isinstance(obj, dict):
        return {k: _numbers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_numbers(v) for v in obj]
    if isinstance(obj, str):
        try:
            return float(obj)
        except ValueError:
            return obj
    return obj


def load_config(path: str | None = None) -> dict:
    """Packaged defaults overlaid by ``path`` (or ``$RTMSIM_CONFIG``)."""
    cfg = default_config()
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                user = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise IOFailure(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config {path} must be a mapping of sections")
        unknown = set(user) - set(SECTIONS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        cfg = _merge(cfg, user)
    return _numbers(cfg)


def _build(cls, data: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {section} keys {sorted(unknown)}")
    data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    obj = cls(**data)
    obj.validate()
    return obj


def phantom_spec(cfg: dict) -> PhantomSpec:
    spec = PhantomSpec.from_dict({**cfg.get("phantom", {}), "seed": int(cfg["seed"])})
    spec.validate()
    return spec


def solver_config(cfg: dict) -> SolverConfig:
    return _build(SolverConfig, cfg.get("solver", {}), "solver")


def radiometry_config(cfg: dict) -> RadiometryConfig:
    return _build(RadiometryConfig, cfg.get("radiometry", {}), "radiometry")


def cohort_config(cfg: dict) -> CohortConfig:
    return _build(CohortConfig, {**cfg.get("cohort", {}), "seed": int(cfg["seed"])}, "cohort")


def learner_specs(cfg: dict, classifiers, seed: int) -> list:
    params = cfg.get("learners", {}) or {}
    unknown = set(params) - set(ALGORITHMS)
    if unknown:
        raise ConfigError(f"unknown learners {sorted(unknown)}")
    return [LearnerSpec(a, dict(params.get(a) or {}), seed) for a in classifiers]


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _versions() -> dict:
    out = {"rtmsim": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba", "PyYAML"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def write_manifest(out_dir: str, command: str, cfg: dict, outputs: list) -> dict:
    manifest = {
        "command": command,
        "seed": int(cfg["seed"]),
        "config_hash": config_hash(cfg),
        "config": cfg,
        "versions": _versions(),
        "outputs": sorted(outputs),
    }
    atomic_write_text(os.path.join(out_dir, "manifest.json"),
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise IOFailure(f"output directory {path} is not writable")
    return path


def _split_list(values):
    out = []
    for v in values or []:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def _set(cfg: dict, section: str, key: str, value) -> None:
    if value is not None:
        cfg.setdefault(section, {})[key] = value


def _progress(label):
    def report(done, total):
        if sys.stderr.isatty() or done == total:
            print(f"\r{label}: {done}/{total}", end="\n" if done == total else "", file=sys.stderr)
    return report


# --- commands ----------------------------------------------------------------

def cmd_simulate(args, cfg: dict) -> int:
    if args.no_tumor:
        _set(cfg, "phantom", "tumor", {**cfg["phantom"].get("tumor", {}), "present": False})
    elif args.tumor_point is not None or args.tumor_radius is not None or args.tumor_depth is not None:
        tumor = dict(cfg["phantom"].get("tumor", {}), present=True)
        for key, val in (("point", args.tumor_point), ("radius_m", args.tumor_radius),
                         ("depth_m", args.tumor_depth)):
            if val is not None:
                tumor[key] = val
        cfg["phantom"]["tumor"] = tumor
    spec = phantom_spec(cfg)
    solver = solver_config(cfg)
    rad = radiometry_config(cfg)
    out = _ensure_dir(args.out)
    phantom = build_phantom(spec)
    mesh = tetrahedralize(phantom, solver.mesh_edge_m)
    rec, T, pds = measure_phantom(phantom, solver, rad, "S0000", "model", mesh=mesh, return_fields=True)
    fields = {"T": T.values}
    cell_fields = {}
    for i, pd in enumerate(pds):
        (fields if pd.location == "node" else cell_fields)[f"P_d_{i}"] = pd.values
    export_vtk(mesh, os.path.join(out, "temperature.vtk"), fields, cell_fields)
    atomic_write_text(os.path.join(out, "temperature.csv"), temperature_csv(T))
    save_csv(Dataset((rec,), "model"), os.path.join(out, "measurements.csv"))
    write_manifest(out, "simulate", cfg, ["temperature.vtk", "temperature.csv", "measurements.csv"])
    print(f"{'point':>5}  {'T_B (C)':>9}  {'T_IR (C)':>9}")
    for i in range(N_POINTS):
        print(f"{i:>5}  {rec.t_mw[i]:>9.3f}  {rec.t_ir[i]:>9.3f}")
    return 0


def cmd_generate(args, cfg: dict) -> int:
    for key, val in (("n_healthy", args.n_healthy), ("n_cancer", args.n_cancer),
                     ("original_n_healthy", args.original_n_healthy),
                     ("original_n_cancer", args.original_n_cancer)):
        _set(cfg, "cohort", key, val)
    ccfg = cohort_config(cfg)
    spec = phantom_spec(cfg)
    solver = solver_config(cfg)
    rad = radiometry_config(cfg)
    out = _ensure_dir(args.out)
    seed = int(cfg["seed"])
    model = generate_cohort(ccfg.n_healthy, ccfg.n_cancer, spec, seed, solver, rad, ccfg, args.jobs,
                            _progress("model"))
    save_csv(model, os.path.join(out, "model.csv"))
    original = generate_original_surrogate(seed, spec, solver, rad, ccfg, args.jobs,
                                           progress=_progress("original-surrogate"))
    save_csv(original, os.path.join(out, "original_surrogate.csv"))
    write_manifest(out, "generate", cfg, ["model.csv", "original_surrogate.csv"])
    print(f"model.csv: {len(model)} rows {model.counts()}")
    print(f"original_surrogate.csv: {len(original)} rows {original.counts()}")
    return 0


def cmd_evaluate(args, cfg: dict) -> int:
    ev = cfg.setdefault("evaluation", {})
    if args.classifiers:
        ev["classifiers"] = _split_list(args.classifiers)
    if args.groups:
        ev["groups"] = _split_list(args.groups)
    if args.repeats is not None:
        ev["repeats"] = args.repeats
    classifiers = list(ev.get("classifiers") or ALGORITHMS)
    groups = list(ev.get("groups") or GROUPS)
    repeats = int(ev.get("repeats", 10))
    bad = [c for c in classifiers if c not in ALGORITHMS]
    if bad:
        raise ConfigError(f"unknown classifiers {bad}; choose from {list(ALGORITHMS)}")
    bad = [g for g in groups if g not in GROUPS]
    if bad:
        raise GroupUndefined(f"unknown groups {bad}; choose from {list(GROUPS)}")
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    out = _ensure_dir(args.out)
    model_path = args.model or os.path.join(out, "model.csv")
    original_path = args.original or os.path.join(out, "original_surrogate.csv")
    model = load_csv(model_path)
    original = load_csv(original_path)
    seed = int(cfg["seed"])
    specs = learner_specs(cfg, classifiers, seed)
    results = evaluate_all(specs, original, model, groups, repeats, seed, args.jobs)
    table = render_table(results)
    atomic_write_text(os.path.join(out, "report.txt"), table)
    atomic_write_text(os.path.join(out, "results.csv"), results_csv(results))
    cfg = dict(cfg, inputs={
        "model_csv": hashlib.sha256(open(model_path, "rb").read()).hexdigest(),
        "original_csv": hashlib.sha256(open(original_path, "rb").read()).hexdigest(),
    })
    write_manifest(out, "evaluate", cfg, ["report.txt", "results.csv"])
    print(table, end="")
    for r in results:
        if not r.ok:
            print(f"{r.classifier}/{r.group}: {r.error}", file=sys.stderr)
    return 0


def cmd_mesh_info(args, cfg: dict) -> int:
    spec = phantom_spec(cfg)
    solver = solver_config(cfg)
    phantom = build_phantom(spec)
    mesh = tetrahedralize(phantom, solver.mesh_edge_m)
    info = mesh_quality(mesh)
    tags, counts = np.unique(mesh.tissue, return_counts=True)
    info["elements_by_tissue"] = {TissueType(int(t)).name: int(c) for t, c in zip(tags, counts)}
    info["target_edge_m"] = solver.mesh_edge_m
    if args.vtk:
        export_vtk(mesh, args.vtk)
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


# --- argument parsing --------------------------------------------------------

def _exit_code_table() -> str:
    rows = sorted({(code, cat) for cat, code in EXIT_CODES.items()})
    return "exit codes:\n  0  success\n  2  usage\n" + "\n".join(f"  {c:<2} {cat}" for c, cat in rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtmsim", description=__doc__.split("\n\n")[0],
                                epilog=_exit_code_table(),
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"rtmsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML config file (default: ${ENV_CONFIG} or packaged defaults)")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--mesh-edge", type=float, help="target tetrahedron edge length in metres")
    common.add_argument("--backend", choices=("analytic", "maxwell"), help="power-density backend")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="one phantom: temperature, T_B and skin temperature")
    s.add_argument("--tumor-point", type=int, help="measurement point (0-8) above the tumor")
    s.add_argument("--tumor-radius", type=float, help="tumor radius in metres")
    s.add_argument("--tumor-depth", type=float, help="tumor depth below the skin in metres")
    s.add_argument("--no-tumor", action="store_true", help="force a tumor-free phantom")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("generate", parents=[common], help="model and surrogate-original cohorts")
    g.add_argument("--n-healthy", type=int)
    g.add_argument("--n-cancer", type=int)
    g.add_argument("--original-n-healthy", type=int)
    g.add_argument("--original-n-cancer", type=int)
    g.add_argument("--jobs", type=int, default=1, help="worker processes")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", parents=[common], help="classifier-by-group effectiveness table")
    e.add_argument("--model", help="model database CSV (default: OUT/model.csv)")
    e.add_argument("--original", help="original database CSV (default: OUT/original_surrogate.csv)")
    e.add_argument("--classifiers", action="append", help="comma-separated subset of " + ",".join(ALGORITHMS))
    e.add_argument("--groups", action="append", help="comma-separated subset of A,B,C,D")
    e.add_argument("--repeats", type=int)
    e.add_argument("--jobs", type=int, default=1, help="worker processes")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("mesh-info", parents=[common], help="mesh the phantom and print quality statistics")
    m.add_argument("--vtk", help="also write the mesh to this VTK file")
    m.set_defaults(func=cmd_mesh_info)
    return p


def _error(exc: RtmError) -> int:
    print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
    return exc.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        _set(cfg, "solver", "mesh_edge_m", args.mesh_edge)
        if args.mesh_edge is not None and args.command == "generate":
            _set(cfg, "cohort", "mesh_edge_m", args.mesh_edge)
        _set(cfg, "radiometry", "backend", args.backend)
        return args.func(args, cfg)
    except RtmError as exc:
        return _error(exc)


if __name__ == "__main__":
    sys.exit(main())
