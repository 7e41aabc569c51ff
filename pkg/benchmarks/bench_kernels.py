#!/usr/bin/env python3
"""Compiled vs numpy element kernels: timing and agreement.

Times the stable Neo-Hookean energy and quadratics kernels and the ordered
Hessian scatter on beams of growing size, plus one full adaptive solve per
backend. Prints a table and optionally writes it as CSV.

    python benchmarks/bench_kernels.py --divisions 4,4,16 8,8,32 --csv kernels.csv
"""

import argparse
import csv
import os
import subprocess
import sys
import timeit

import numpy as np

from trnewton.assembly import build_pattern, make_dofmap
from trnewton.energy import MaterialParams
from trnewton.kernels import get_backend
from trnewton.mesh import ScenarioSpec, apply_scenario, generate_beam, precompute_rest


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_mesh(divisions, repeat):
    mesh = generate_beam(divisions, (1.0, 1.0, 4.0))
    rest = precompute_rest(mesh)
    x, fixed = apply_scenario(mesh, ScenarioSpec("twist", 1.0))
    x = x + 1e-3 * np.random.default_rng(0).standard_normal(x.shape)
    p = MaterialParams.from_young_poisson(1e8, 0.45)
    pattern = build_pattern(mesh.tets, make_dofmap(mesh.n_vertices, fixed))
    py, cy = get_backend("python"), get_backend("cython")
    args = (x, mesh.tets, rest.dm_inv, rest.volume, p.mu, p.lam)
    H = py.snh_quadratics(*args)[2]

    rows = []
    for name, call in [
        ("snh_energies", lambda k: k.snh_energies(*args)),
        ("snh_quadratics", lambda k: k.snh_quadratics(*args)),
        ("scatter_hessian", lambda k: k.scatter_add(pattern.slots, H, pattern.nnz)),
    ]:
        ref, got = call(py), call(cy)
        ref = ref if isinstance(ref, tuple) else (ref,)
        got = got if isinstance(got, tuple) else (got,)
        err = max(
            float(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300)) for a, b in zip(ref, got)
        )
        t_py = _best(lambda: call(py), repeat)
        t_cy = _best(lambda: call(cy), repeat)
        rows.append({
            "mesh": "x".join(map(str, divisions)), "tets": mesh.n_tets, "kernel": name,
            "python_s": t_py, "cython_s": t_cy, "speedup": t_py / t_cy, "max_rel_diff": err,
        })
    return rows


def bench_solve(divisions):
    """Wall time of one adaptive solve per backend, each in a fresh interpreter."""
    code = (
        "import time;from trnewton import *;from trnewton.kernels import BACKEND;"
        f"m=generate_beam({tuple(divisions)},(0.1,0.1,0.2));r=precompute_rest(m);"
        "p=MaterialParams.from_young_poisson(1e8,0.45);t=time.perf_counter();"
        "tr=newton_solve(m,r,'stable_neo_hookean',p,ScenarioSpec('stretch',2.0),SolverConfig());"
        "print(BACKEND,time.perf_counter()-t,tr.iterations,repr(tr.records[-1].energy))"
    )
    out = {}
    for backend in ("python", "cython"):
        env = dict(os.environ, TRN_BACKEND=backend)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, t, iters, energy = res.stdout.split()
        out[name] = (float(t), int(iters), float(energy))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--divisions", nargs="+", default=["2,2,8", "4,4,16", "8,8,32"])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv")
    ap.add_argument("--skip-solve", action="store_true")
    args = ap.parse_args()

    rows = []
    for d in args.divisions:
        rows += bench_mesh(tuple(int(v) for v in d.split(",")), args.repeat)

    print(f"{'mesh':<10} {'tets':>7} {'kernel':<16} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'rel diff':>9}")
    for r in rows:
        print(f"{r['mesh']:<10} {r['tets']:>7} {r['kernel']:<16} {1e3 * r['python_s']:>10.3f} "
              f"{1e3 * r['cython_s']:>10.3f} {r['speedup']:>8.2f} {r['max_rel_diff']:>9.1e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    if not args.skip_solve:
        d = tuple(int(v) for v in args.divisions[0].split(","))
        res = bench_solve(d)
        print(f"\nfull adaptive solve on {'x'.join(map(str, d))} beam, stretch x2, nu 0.45")
        for name, (t, iters, energy) in res.items():
            print(f"  {name:<7} {t:8.3f} s  {iters} iterations  final energy {energy!r}")


if __name__ == "__main__":
    main()
