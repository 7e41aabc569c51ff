"""Acceptance criteria, one test each, at the stated tolerances.

Each test appends a ``criterion N: PASS|FAIL ...`` line that conftest prints
in a dedicated section after the run.
"""

import json
import time
from functools import lru_cache

import numpy as np
from conftest import ACCEPTANCE_LINES
from helpers import filter_bound_violations, perturbed_positions, random_element, small_meshes
from trnewton.assembly import assemble, build_pattern, dense_scatter, make_dofmap, quadratic_form
from trnewton.cli import main
from trnewton.energy import MODELS, MaterialParams, element_quadratics, element_quadratics_batch, fd_gradient, fd_hessian
from trnewton.mesh import ScenarioSpec, generate_beam, precompute_rest
from trnewton.newton import SolverConfig, newton_solve
from trnewton.projection import ProjectionStrategy, resolve_adaptive

SNH = "stable_neo_hookean"
BEAM_DIVISIONS = (2, 2, 8)
BEAM_EXTENT = (0.02, 0.02, 0.04)
BEAM = generate_beam(BEAM_DIVISIONS, BEAM_EXTENT)
REST = precompute_rest(BEAM)
YOUNG = 1e8
MAX_ITERS = 200
POISSON_SWEEP = (0.3, 0.4, 0.45, 0.49, 0.495)


def report(n, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@lru_cache(maxsize=None)
def solve(model, nu, kind, magnitude, strategy, rho_eps=None, blend_w=None):
    if strategy == "adaptive":
        strat = ProjectionStrategy("adaptive", rho_eps=rho_eps)
    elif strategy == "fixed_blend":
        strat = ProjectionStrategy("fixed_blend", blend_w=blend_w)
    else:
        strat = ProjectionStrategy(strategy)
    cfg = SolverConfig(max_iters=MAX_ITERS, strategy=strat)
    params = MaterialParams.from_young_poisson(YOUNG, nu)
    t0 = time.perf_counter()
    tr = newton_solve(BEAM, REST, model, params, ScenarioSpec(kind, magnitude), cfg)
    tr.elapsed = time.perf_counter() - t0
    return tr


def trio(model, nu, kind, magnitude, eps=0.01):
    return {s: solve(model, nu, kind, magnitude, s, rho_eps=eps if s == "adaptive" else None)
            for s in ("clamp", "abs", "adaptive")}


def iters(tr):
    return tr.iterations if tr.converged else MAX_ITERS


def summary(runs):
    return ", ".join(f"{s} {tr.iterations}{'' if tr.converged else '(' + tr.status + ')'}"
                     for s, tr in runs.items())


def hard_regime():
    return trio(SNH, 0.495, "stretch", 4.0, eps=0.01)


def test_abs_bound_and_clamp_midpoint_identity():
    t0 = time.perf_counter()
    bad_ineq, bad_ident = filter_bound_violations(1000, seed=2024)
    dt = time.perf_counter() - t0
    ok = bad_ineq == 0 and bad_ident == 0 and dt < 10.0
    report(1, ok, f"1000 trials, inequality violations {bad_ineq}, identity violations {bad_ident}, {dt:.2f} s")


def test_derivative_oracle():
    rng = np.random.default_rng(7)
    params = MaterialParams.from_young_poisson(YOUNG, 0.45)
    t0 = time.perf_counter()
    worst = {}
    for model in MODELS:
        sd = model == "symmetric_dirichlet_vol"
        eg = eh = 0.0
        for _ in range(100):
            r, y = random_element(rng, allow_inversion=not sd, min_det=0.05 if sd else None)
            q = element_quadratics(model, params, y, r)
            g_fd = fd_gradient(model, params, y, r)
            H_fd = fd_hessian(model, params, y, r)
            eg = max(eg, np.linalg.norm(q.gradient - g_fd) / np.linalg.norm(g_fd))
            eh = max(eh, np.linalg.norm(q.hessian - H_fd) / np.linalg.norm(H_fd))
        worst[model] = (eg, eh)
    dt = time.perf_counter() - t0
    ok = all(eg < 1e-4 and eh < 1e-3 for eg, eh in worst.values()) and dt < 30.0
    detail = "; ".join(f"{m} grad {eg:.1e} hess {eh:.1e}" for m, (eg, eh) in worst.items())
    report(2, ok, f"100 states per model, {detail}, {dt:.2f} s")


def test_assembly_oracle():
    rng = np.random.default_rng(11)
    params = MaterialParams.from_young_poisson(YOUNG, 0.45)
    worst = 0.0
    meshes = small_meshes()
    for _, mesh, fixed in meshes:
        rest = precompute_rest(mesh)
        pattern = build_pattern(mesh.tets, make_dofmap(mesh.n_vertices, fixed))
        elems = element_quadratics_batch(SNH, params, perturbed_positions(mesh, rng), mesh.tets, rest)
        ref = dense_scatter(elems.hessian, pattern)
        H = assemble(elems, pattern).hessian.toarray()
        worst = max(worst, np.linalg.norm(H - ref) / np.linalg.norm(ref))
        for _ in range(10):
            u = rng.standard_normal(pattern.size)
            exact = u @ ref @ u
            worst = max(worst, abs(quadratic_form(elems.hessian, pattern, u) - exact) / abs(exact))
    report(3, worst < 1e-10, f"{len(meshes)} meshes of <= 20 vertices, max rel err {worst:.1e}")


def test_positive_definite_guarantee():
    runs = hard_regime()
    npd = sum(tr.status == "not_positive_definite" for tr in runs.values())
    steps = sum(len(tr.records) for tr in runs.values())
    report(4, npd == 0, f"{npd} NotPositiveDefinite events over {steps} factorizations (clamp/abs/adaptive)")


def test_strategy_equivalence():
    def key(tr):
        return [(r.iter, r.energy, r.decrement, r.rho, r.ls_iters, r.step) for r in tr.records], tr.status

    clamp = solve(SNH, 0.45, "stretch", 2.0, "clamp")
    abs_ = solve(SNH, 0.45, "stretch", 2.0, "abs")
    half = solve(SNH, 0.45, "stretch", 2.0, "fixed_blend", blend_w=0.5)
    one = solve(SNH, 0.45, "stretch", 2.0, "fixed_blend", blend_w=1.0)
    same_clamp = key(half) == key(clamp)
    same_abs = key(one) == key(abs_)
    same_pos = np.array_equal(half.final_positions, clamp.final_positions) and np.array_equal(
        one.final_positions, abs_.final_positions)
    report(5, same_clamp and same_abs and same_pos,
           f"blend(0.5)==clamp {same_clamp} ({clamp.iterations} iters), "
           f"blend(1)==abs {same_abs} ({abs_.iterations} iters), positions identical {same_pos}")


def test_hard_regime():
    runs = hard_regime()
    elapsed = sum(tr.elapsed for tr in runs.values())
    ad, cl = runs["adaptive"], runs["clamp"]
    faster = iters(ad) < iters(cl) or not cl.converged
    ls_ok = ad.mean_ls_iters <= 2.0 and cl.mean_ls_iters >= 2.0 * ad.mean_ls_iters
    ok = ad.converged and faster and ls_ok and elapsed < 120.0
    report(6, ok, f"{summary(runs)}; mean ls adaptive {ad.mean_ls_iters:.2f}, clamp {cl.mean_ls_iters:.2f}, "
                  f"{elapsed:.1f} s")


def test_easy_regime():
    runs = trio(SNH, 0.3, "stretch", 1.1)
    ok = all(tr.converged for tr in runs.values()) and iters(runs["adaptive"]) <= iters(runs["clamp"]) + 1
    report(7, ok, summary(runs))


def test_poisson_sweep():
    ok, parts = True, []
    for nu in POISSON_SWEEP:
        runs = trio(SNH, nu, "stretch", 4.0)
        a, b, c = iters(runs["adaptive"]), iters(runs["abs"]), iters(runs["clamp"])
        ok &= a <= b + 1 and (nu < 0.49 or a < c)
        parts.append(f"nu {nu}: clamp {c} abs {b} adaptive {a}")
    report(8, ok, "; ".join(parts))


def test_compression_threshold():
    tr = solve(SNH, 0.495, "compress", 0.25, "adaptive", rho_eps=0.1)
    report(9, tr.converged and tr.iterations <= MAX_ITERS, f"adaptive eps 0.1: {tr.status} in {tr.iterations} iters")


def adaptive_runs():
    runs = [("hard", hard_regime()["adaptive"], 0.01),
            ("easy", trio(SNH, 0.3, "stretch", 1.1)["adaptive"], 0.01),
            ("compress", solve(SNH, 0.495, "compress", 0.25, "adaptive", rho_eps=0.1), 0.1)]
    runs += [(f"nu {nu}", trio(SNH, nu, "stretch", 4.0)["adaptive"], 0.01) for nu in POISSON_SWEEP]
    return runs


def test_adaptive_trace_structure():
    tol = SolverConfig().decrement_tol
    problems = []
    for name, tr, eps in adaptive_runs():
        recs = tr.records
        if not recs or recs[0].mode != "abs":
            problems.append(f"{name}: first mode {recs[0].mode if recs else None}")
        for r in recs[1:]:
            if r.mode != str(resolve_adaptive(r.rho, eps)):
                problems.append(f"{name}: iter {r.iter} mode {r.mode} for rho {r.rho}")
        last = recs[-1]
        rho_settled = last.rho is not None and abs(last.rho - 1) <= 10 * eps
        converged_at_start = len(recs) == 1 and last.decrement < tol
        if tr.converged and not (rho_settled or converged_at_start):
            problems.append(f"{name}: final rho {last.rho}")
    detail = "; ".join(problems) if problems else f"{len(adaptive_runs())} adaptive traces consistent"
    report(10, not problems, detail)


def test_determinism(tmp_path):
    cfg = {
        "version": 1,
        "mesh": {"generator": "beam", "divisions": list(BEAM_DIVISIONS), "extent": list(BEAM_EXTENT)},
        "scenario": {"kind": "stretch", "magnitude": 4.0},
        "material": {"young": YOUNG, "poisson": 0.495},
        "solver": {"strategy": {"kind": "adaptive"}},
    }
    traces = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(dict(cfg, output_dir=name)))
        assert main(["run", "--config", str(path)]) == 0
        lines = (tmp_path / name / "trace.csv").read_text().splitlines()
        drop = lines[0].split(",").index("wall_time")
        traces.append([[v for i, v in enumerate(line.split(",")) if i != drop] for line in lines])
    report(11, traces[0] == traces[1], f"two runs, {len(traces[0]) - 1} trace rows, identical modulo wall_time")


def test_energy_variants():
    ok, parts = True, []
    for model in ("arap_vol", "symmetric_dirichlet_vol"):
        for nu in (0.495, 0.3):
            runs = trio(model, nu, "stretch", 2.0)
            a = iters(runs["adaptive"])
            best = min(iters(runs["clamp"]), iters(runs["abs"]))
            ok &= runs["adaptive"].converged and a <= best + 2
            parts.append(f"{model} nu {nu}: {summary(runs)}")
    report(12, ok, "; ".join(parts))
