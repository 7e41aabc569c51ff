"""Command-line front end: single runs, benchmark matrices, plots, mesh generation.

Configs are JSON documents carrying ``"version": 1``. Relative paths inside
a config resolve against the directory of the config file.

Exit codes: 0 converged / success, 1 solver did not converge, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import math
import multiprocessing
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import kernels
from .assembly import HAVE_CHOLMOD, AssemblyError
from .energy import MODELS, EnergyModel, MaterialParams, ParameterError, _threads
from .mesh import (
    SCENARIO_KINDS,
    MeshError,
    ScenarioError,
    ScenarioSpec,
    apply_scenario,
    export_vtk,
    generate_beam,
    load_mesh,
    precompute_rest,
    write_tetgen,
)
from .newton import SolverConfig, newton_solve
from .projection import STRATEGY_KINDS, ProjectionStrategy

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2

TRACE_COLUMNS = ("iter", "energy", "decrement", "rho", "mode", "ls_iters", "step", "wall_time")
SUMMARY_COLUMNS = (
    "mesh", "scenario", "poisson", "strategy", "status", "iters", "mean_ls_iters",
    "total_time", "mean_iter_time", "pct_time_direction", "pct_time_linesearch", "pct_time_ratio",
)

# --------------------------------------------------------------- schemas

_NUM = {"type": "number"}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}

_MESH = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "generator": {"const": "beam"},
        "divisions": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3},
        "extent": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 3, "maxItems": 3},
        "path": {"type": "string"},
        "format": {"enum": ["tetgen", "msh", "vtk"]},
        "fixed_vertices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
    "oneOf": [{"required": ["generator", "divisions"]}, {"required": ["path"]}],
    "additionalProperties": False,
}

_SCENARIO = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "kind": {"enum": list(SCENARIO_KINDS)},
        "magnitude": _NUM,
        "axis": _VEC3,
        "fixed_region": {"type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
                         "minItems": 2, "maxItems": 2},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_STRATEGY = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "kind": {"enum": list(STRATEGY_KINDS)},
        "clamp_floor": {"type": "number", "minimum": 0},
        "blend_w": {"type": "number", "minimum": 0, "maximum": 1},
        "rho_eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "shift_growth": {"type": "number", "exclusiveMinimum": 1},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SOLVER = {
    "type": "object",
    "properties": {
        "max_iters": {"type": "integer", "minimum": 0},
        "decrement_tol": {"type": "number", "exclusiveMinimum": 0},
        "ls_shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "ls_armijo_c": {"type": "number", "minimum": 0},
        "ls_max_iters": {"type": "integer", "minimum": 1},
        "rho_guard": {"type": "number", "exclusiveMinimum": 0},
        "strategy": _STRATEGY,
    },
    "additionalProperties": False,
}

_MATERIAL = {
    "type": "object",
    "properties": {
        "young": {"type": "number", "exclusiveMinimum": 0},
        "poisson": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
        "model": {"enum": list(MODELS)},
    },
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": 1},
        "mesh": _MESH,
        "scenario": _SCENARIO,
        "material": _MATERIAL,
        "solver": _SOLVER,
        "output_dir": {"type": "string"},
        "emit_vtk": {"type": "boolean"},
        "seed": {"type": "integer"},
    },
    "required": ["version", "mesh", "scenario", "output_dir"],
    "additionalProperties": False,
}

_OVERRIDE = {
    "type": "object",
    "properties": {
        "match": {
            "type": "object",
            "properties": {k: {"type": ["string", "number"]} for k in ("mesh", "scenario", "poisson", "strategy")},
            "additionalProperties": False,
        },
        "solver": {"type": "object"},
        "material": {"type": "object"},
        "scenario": {"type": "object"},
    },
    "required": ["match"],
    "additionalProperties": False,
}

BENCH_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": 1},
        "meshes": {"type": "array", "items": _MESH, "minItems": 1},
        "mesh_dir": {"type": "string"},
        "mesh_format": {"enum": ["tetgen", "msh"]},
        "scenarios": {"type": "array", "items": _SCENARIO, "minItems": 1},
        "poisson": {"type": "array", "items": _MATERIAL["properties"]["poisson"], "minItems": 1},
        "strategies": {"type": "array", "items": _STRATEGY, "minItems": 1},
        "material": _MATERIAL,
        "solver": _SOLVER,
        "overrides": {"type": "array", "items": _OVERRIDE},
        "output_dir": {"type": "string"},
        "emit_vtk": {"type": "boolean"},
        "seed": {"type": "integer"},
    },
    "required": ["version", "scenarios", "poisson", "strategies", "output_dir"],
    "anyOf": [{"required": ["meshes"]}, {"required": ["mesh_dir"]}],
    "additionalProperties": False,
}

GEN_MESH_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": 1},
        "divisions": _MESH["properties"]["divisions"],
        "extent": _MESH["properties"]["extent"],
        "out": {"type": "string"},
    },
    "required": ["version", "divisions", "out"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def _key_line(text: str, path) -> int | None:
    """Best-effort line number of the last string key on a JSON path."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    needle = f'"{keys[-1]}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def load_config(path, schema) -> dict:
    """Parse and validate a JSON config; errors carry file and line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(cfg), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        msgs = []
        for err in errors:
            loc = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
            line = _key_line(text, list(err.absolute_path))
            where = f"{path}:{line}" if line else str(path)
            msgs.append(f"{where}: {loc}: {err.message}")
        raise ConfigError("\n".join(msgs))
    cfg["_base_dir"] = str(path.resolve().parent)
    return cfg


def _resolve(base, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(base) / p


# --------------------------------------------------------------- building blocks

def build_mesh(spec: dict, base_dir):
    """TetMesh and explicit fixed list (or None) from a mesh entry."""
    if "path" in spec:
        mesh = load_mesh(_resolve(base_dir, spec["path"]), spec.get("format", "tetgen"),
                         spec.get("fixed_vertices", ()))
    else:
        mesh = generate_beam(tuple(spec["divisions"]), tuple(spec.get("extent", (1.0, 1.0, 1.0))))
    fixed = spec.get("fixed_vertices")
    return mesh, (list(fixed) if fixed else None)


def mesh_name(spec: dict) -> str:
    if "name" in spec:
        return spec["name"]
    if "path" in spec:
        return Path(spec["path"]).stem
    return "beam_" + "x".join(str(d) for d in spec["divisions"])


def build_scenario(spec: dict) -> ScenarioSpec:
    kw = {k: v for k, v in spec.items() if k != "name"}
    if "axis" in kw:
        kw["axis"] = tuple(kw["axis"])
    if "fixed_region" in kw:
        kw["fixed_region"] = tuple(kw["fixed_region"])
    return ScenarioSpec(**kw)


def build_strategy(spec: dict) -> ProjectionStrategy:
    return ProjectionStrategy(**{k: v for k, v in spec.items() if k != "name"})


def strategy_name(spec: dict) -> str:
    return spec.get("name") or build_strategy(spec).label


def build_solver(spec: dict) -> SolverConfig:
    kw = dict(spec or {})
    strategy = build_strategy(kw.pop("strategy", {"kind": "adaptive"}))
    return SolverConfig(strategy=strategy, **kw)


def decided_parameters(model: str, cfg: SolverConfig, scenario: ScenarioSpec, explicit_fixed) -> dict:
    """Choices the method leaves open, recorded with every run."""
    energy = {
        "stable_neo_hookean": "mu/2 (I_C - 3) + lam/2 (J - 1 - mu/lam)^2, no log term",
        "arap_vol": "mu/2 ||F - R||^2 + lam/2 (J - 1)^2, R from signed SVD",
        "symmetric_dirichlet_vol": "mu/2 (||F||^2 + ||F^-1||^2 - 6) + lam/2 (J - 1)^2, +inf for J <= 0",
    }[model]
    return {
        "energy_variant": energy,
        "lame_lambda": "unreparameterized, from young and poisson",
        "first_iteration_mode": "abs",
        "armijo_c": cfg.ls_armijo_c,
        "rho_model_hessian": "unprojected, element-wise",
        "decrement": "-0.5 g^T u, absolute threshold",
        "dirichlet": "elimination",
        "fixed_vertices": "explicit list" if explicit_fixed else f"axial end slabs {list(scenario.fixed_region)}",
        "pod_shift": "identity shift starting at 1e-8 trace(H)/n" if cfg.strategy.kind == "pod_shift" else None,
    }


def _fmt(v, exact_digits=True) -> str:
    """CSV cell text; floats get 17 significant digits, or shortest round-trip form."""
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}" if exact_digits and math.isfinite(v) else repr(v)
    return str(v)


def write_trace(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in TRACE_COLUMNS])


def read_trace(path) -> dict:
    """Columns of a trace.csv as arrays (rho blanks become NaN)."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read trace ({exc.strerror})") from exc
    if not rows:
        raise ConfigError(f"{path}: trace has no data rows")
    missing = set(TRACE_COLUMNS) - set(rows[0])
    if missing:
        raise ConfigError(f"{path}: missing trace columns {sorted(missing)}")
    try:
        out = {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows])
               for c in TRACE_COLUMNS if c != "mode"}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: unparsable trace ({exc})") from exc
    out["mode"] = [r["mode"] for r in rows]
    return out


def timing_breakdown(records) -> dict:
    total = sum(r.wall_time for r in records)

    def pct(attr):
        return 100.0 * sum(getattr(r, attr) for r in records) / total if total > 0 else 0.0

    return {
        "total_time": total,
        "mean_iter_time": total / len(records) if records else 0.0,
        "pct_time_direction": pct("time_direction"),
        "pct_time_linesearch": pct("time_linesearch"),
        "pct_time_ratio": pct("time_ratio"),
    }


def execute(cell: dict) -> dict:
    """Solve one fully specified run and write its outputs.

    ``cell`` holds plain-JSON sections (mesh, scenario, material, solver)
    plus ``output_dir``, ``emit_vtk`` and ``_base_dir``. Returns a summary.
    """
    base = cell.get("_base_dir", ".")
    material = {"young": 1e8, "poisson": 0.3, "model": "stable_neo_hookean", **cell.get("material", {})}
    mesh, explicit_fixed = build_mesh(cell["mesh"], base)
    scenario = build_scenario(cell["scenario"])
    solver = build_solver(cell.get("solver"))
    params = MaterialParams.from_young_poisson(material["young"], material["poisson"])
    model = EnergyModel(material["model"])
    rest = precompute_rest(mesh)
    np.random.seed(int(cell.get("seed", 0)))

    out = Path(cell["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    trace = newton_solve(mesh, rest, model, params, scenario, solver, explicit_fixed)
    elapsed = time.perf_counter() - t0

    write_trace(out / "trace.csv", trace.records)
    if cell.get("emit_vtk"):
        export_vtk(mesh, trace.final_positions, out / "final.vtk")
    _, fixed = apply_scenario(mesh, scenario, explicit_fixed)
    summary = {
        "status": trace.status,
        "iterations": trace.iterations,
        "records": len(trace.records),
        "final_energy": trace.records[-1].energy if trace.records else None,
        "mean_ls_iters": trace.mean_ls_iters,
        "solve_time": elapsed,
        **timing_breakdown(trace.records),
        "config": {
            "mesh": cell["mesh"],
            "mesh_stats": {"vertices": mesh.n_vertices, "tets": mesh.n_tets, "fixed_vertices": len(fixed)},
            "scenario": {"kind": scenario.kind, "magnitude": scenario.magnitude, "axis": list(scenario.axis),
                         "fixed_region": list(scenario.fixed_region)},
            "material": {**material, "mu": params.mu, "lambda": params.lam},
            "solver": solver.as_dict(),
            "emit_vtk": bool(cell.get("emit_vtk", False)),
            "seed": int(cell.get("seed", 0)),
        },
        "decided_parameters": decided_parameters(model.kind, solver, scenario, explicit_fixed),
        "runtime": {
            "kernel_backend": kernels.BACKEND,
            "factorization": "cholmod" if HAVE_CHOLMOD else "dense",
            "threads": _threads(),
        },
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def _validate_sections(cell: dict) -> None:
    """Surface semantic errors (e.g. strategy parameter mismatch) before solving."""
    build_scenario(cell["scenario"])
    build_solver(cell.get("solver"))
    m = {"young": 1e8, "poisson": 0.3, **cell.get("material", {})}
    MaterialParams.from_young_poisson(m["young"], m["poisson"])


# --------------------------------------------------------------- commands

def cmd_run(args) -> int:
    cfg = load_config(args.config, RUN_SCHEMA)
    cell = {k: v for k, v in cfg.items() if k != "version"}
    cell["output_dir"] = str(_resolve(cfg["_base_dir"], cfg["output_dir"]))
    _validate_sections(cell)
    summary = execute(cell)
    print(f"{summary['status']}: {summary['iterations']} iterations, "
          f"mean line search {summary['mean_ls_iters']:.2f}, {summary['total_time']:.3f} s -> {cell['output_dir']}")
    return EXIT_OK if summary["status"] == "converged" else EXIT_NOT_CONVERGED


def _merge(base: dict, delta: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in delta.items():
        out[k] = _merge(out.get(k, {}), v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _slug(v) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in str(v)).strip("_")


def expand_matrix(cfg: dict) -> list[dict]:
    """Cells of a benchmark matrix in deterministic order: mesh, scenario, poisson, strategy."""
    base = cfg["_base_dir"]
    meshes = list(cfg.get("meshes", []))
    if "mesh_dir" in cfg:
        fmt = cfg.get("mesh_format", "tetgen")
        d = _resolve(base, cfg["mesh_dir"])
        if not d.is_dir():
            raise ConfigError(f"mesh_dir {d} is not a directory")
        pattern = "*.node" if fmt == "tetgen" else "*.msh"
        found = sorted(d.glob(pattern))
        if not found:
            raise ConfigError(f"mesh_dir {d} holds no {pattern} files")
        meshes += [{"path": str(p), "format": fmt} for p in found]
    out_root = _resolve(base, cfg["output_dir"])
    cells = []
    for mesh, scen, nu, strat in itertools.product(meshes, cfg["scenarios"], cfg["poisson"], cfg["strategies"]):
        key = {
            "mesh": mesh_name(mesh),
            "scenario": scen.get("name") or f"{scen['kind']}_{scen.get('magnitude', 1.0):g}",
            "poisson": nu,
            "strategy": strategy_name(strat),
        }
        cell = {
            "mesh": mesh,
            "scenario": {k: v for k, v in scen.items() if k != "name"},
            "material": {**cfg.get("material", {}), "poisson": nu},
            "solver": {**cfg.get("solver", {}), "strategy": {k: v for k, v in strat.items() if k != "name"}},
            "emit_vtk": cfg.get("emit_vtk", False),
            "seed": cfg.get("seed", 0),
            "_base_dir": base,
        }
        # a strategy matches by its label or by its bare kind
        names = {k: [str(v)] for k, v in key.items()}
        names["strategy"].append(strat["kind"])
        for ov in cfg.get("overrides", []):
            if all(str(v) in names[k] for k, v in ov["match"].items()):
                for section in ("solver", "material", "scenario"):
                    if section in ov:
                        cell[section] = _merge(cell[section], ov[section])
        if "name" not in strat:
            key["strategy"] = strategy_name(cell["solver"]["strategy"])
        cell["output_dir"] = str(out_root.joinpath(*(_slug(key[k]) for k in ("mesh", "scenario", "poisson", "strategy"))))
        cells.append((key, cell))
    return cells


def _bench_cell(item):
    key, cell = item
    row = dict(key)
    try:
        s = execute(cell)
        row.update(status=s["status"], iters=s["iterations"], mean_ls_iters=s["mean_ls_iters"],
                   **{k: s[k] for k in ("total_time", "mean_iter_time", "pct_time_direction",
                                        "pct_time_linesearch", "pct_time_ratio")})
        row["_not_pd"] = s["status"] == "not_positive_definite"
    except Exception as exc:  # recorded in the row; the matrix keeps going
        row.update(status=f"error: {type(exc).__name__}: {exc}", iters="", mean_ls_iters="", total_time="",
                   mean_iter_time="", pct_time_direction="", pct_time_linesearch="", pct_time_ratio="")
    return row


def speedup_rows(rows) -> list[dict]:
    """iters(strategy) / iters(adaptive) per (mesh, scenario, poisson) group."""
    out = []
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["mesh"], r["scenario"], r["poisson"]), []).append(r)
    for (m, s, nu), rs in groups.items():
        ref = next((r for r in rs if str(r["strategy"]).startswith("adaptive")), None)
        if ref is None or not isinstance(ref["iters"], int):
            continue
        for r in rs:
            if r is ref or not isinstance(r["iters"], int):
                continue
            ratio = r["iters"] / ref["iters"] if ref["iters"] > 0 else float("nan")
            out.append({"mesh": m, "scenario": s, "poisson": nu, "strategy": r["strategy"], "iters": r["iters"],
                        "adaptive_iters": ref["iters"], "speedup": ratio,
                        "both_converged": r["status"] == "converged" and ref["status"] == "converged"})
    return out


def cmd_bench(args) -> int:
    cfg = load_config(args.config, BENCH_SCHEMA)
    cells = expand_matrix(cfg)
    for _, cell in cells:
        _validate_sections(cell)
    jobs = max(1, args.jobs)
    if jobs == 1:
        rows = [_bench_cell(c) for c in cells]
    else:
        # spawn: forking a process that already runs BLAS/thread pools can deadlock
        with ProcessPoolExecutor(jobs, mp_context=multiprocessing.get_context("spawn")) as pool:
            rows = list(pool.map(_bench_cell, cells))

    out_root = _resolve(cfg["_base_dir"], cfg["output_dir"])
    out_root.mkdir(parents=True, exist_ok=True)
    with open(out_root / "bench_summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v, False) for k, v in r.items()})
    speed = speedup_rows(rows)
    with open(out_root / "speedup.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["mesh", "scenario", "poisson", "strategy", "iters", "adaptive_iters",
                                "speedup", "both_converged"])
        w.writeheader()
        for r in speed:
            w.writerow({k: _fmt(v, False) for k, v in r.items()})

    print(f"{'mesh':<16} {'scenario':<14} {'nu':>6} {'strategy':<22} {'status':<22} {'iters':>5} {'ls':>6}")
    for r in rows:
        ls = f"{r['mean_ls_iters']:.2f}" if isinstance(r["mean_ls_iters"], float) else ""
        print(f"{r['mesh']:<16} {r['scenario']:<14} {r['poisson']:>6} {r['strategy']:<22} "
              f"{r['status'][:22]:<22} {r['iters']!s:>5} {ls:>6}")
    if speed:
        print("\nspeedup iters(strategy)/iters(adaptive)")
        for r in speed:
            print(f"{r['mesh']:<16} {r['scenario']:<14} {r['poisson']:>6} {r['strategy']:<22} {r['speedup']:.2f}")
    return EXIT_OK if all(r["status"] == "converged" for r in rows) else EXIT_NOT_CONVERGED


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    traces = [(Path(p), read_trace(p)) for p in args.traces]
    fmin = min(float(np.nanmin(t["energy"])) for _, t in traces)
    # floor keeps the final point visible on the log axis
    floor = max(abs(fmin), 1.0) * 1e-16
    fig, ax = plt.subplots(figsize=(6, 4))
    for path, t in traces:
        label = path.parent.name if path.name == "trace.csv" and path.parent.name else path.stem
        ax.semilogy(t["iter"], np.maximum(t["energy"] - fmin, floor), marker=".", label=label)
    ax.set_xlabel("Newton iteration")
    ax.set_ylabel("energy above minimum")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    out = Path(args.out)
    try:
        fig.savefig(out, format="svg")
    except OSError as exc:
        raise ConfigError(f"{out}: cannot write plot ({exc.strerror})") from exc
    finally:
        plt.close(fig)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_gen_mesh(args) -> int:
    cfg = load_config(args.config, GEN_MESH_SCHEMA)
    mesh = generate_beam(tuple(cfg["divisions"]), tuple(cfg.get("extent", (1.0, 1.0, 1.0))))
    prefix = _resolve(cfg["_base_dir"], cfg["out"])
    try:
        prefix.parent.mkdir(parents=True, exist_ok=True)
        node, ele = write_tetgen(mesh, prefix)
    except OSError as exc:
        raise ConfigError(f"{prefix}: cannot write mesh ({exc.strerror})") from exc
    print(f"wrote {node} and {ele}: {mesh.n_vertices} vertices, {mesh.n_tets} tets")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve one scenario")
    r.add_argument("--config", required=True)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run a strategy matrix")
    b.add_argument("--config", required=True)
    b.add_argument("--jobs", type=int, default=1, help="concurrent cells (processes)")
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plot", help="energy convergence curves as SVG")
    pl.add_argument("--out", required=True)
    pl.add_argument("traces", nargs="+")
    pl.set_defaults(func=cmd_plot)

    g = sub.add_parser("gen-mesh", help="write a beam as a TetGen .node/.ele pair")
    g.add_argument("--config", required=True)
    g.set_defaults(func=cmd_gen_mesh)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _threads()
        return args.func(args)
    except (ConfigError, MeshError, ScenarioError, ParameterError, AssemblyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
