"""Projected Newton driver with per-iteration eigenvalue-filter selection.

The adaptive strategy measures how well the previous step's quadratic
model predicted the actual energy change::

    rho = (f(x_prev) - f(x)) / -(g_prev^T u + 0.5 u^T H_prev u)

and uses clamped element Hessians when ``|rho - 1| <= eps``, absolute-value
filtered ones otherwise. The first iteration always uses the absolute-value
filter. ``H_prev`` is the unfiltered Hessian, applied element by element.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import (
    AssemblyError,
    Factorization,
    GlobalSystem,
    NotPositiveDefinite,
    assemble_gradient,
    assemble_hessian,
    build_pattern,
    make_dofmap,
    quadratic_form,
)
from .energy import EnergyModel, MaterialParams, element_energies, element_quadratics_batch
from .mesh import RestData, ScenarioSpec, TetMesh, apply_scenario
from .projection import ABS, ProjectionStrategy, project_element, resolve_adaptive, static_mode

STATUSES = ("converged", "max_iters", "line_search_failed", "not_positive_definite")


class LineSearchFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 200
    decrement_tol: float = 1e-5
    ls_shrink: float = 0.8
    ls_armijo_c: float = 1e-4
    ls_max_iters: int = 64
    strategy: ProjectionStrategy = field(default_factory=ProjectionStrategy)
    rho_guard: float = 1e-12

    def __post_init__(self):
        if self.max_iters < 0 or self.ls_max_iters < 1:
            raise ValueError("iteration limits must be positive")
        if not 0.0 < self.ls_shrink < 1.0:
            raise ValueError("ls_shrink must lie in (0, 1)")
        if self.decrement_tol <= 0 or self.ls_armijo_c < 0 or self.rho_guard <= 0:
            raise ValueError("tolerances must be positive")

    def as_dict(self) -> dict:
        return {
            "max_iters": self.max_iters,
            "decrement_tol": self.decrement_tol,
            "ls_shrink": self.ls_shrink,
            "ls_armijo_c": self.ls_armijo_c,
            "ls_max_iters": self.ls_max_iters,
            "rho_guard": self.rho_guard,
            "strategy": self.strategy.as_dict(),
        }


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    energy: float
    decrement: float
    rho: float | None
    mode: str
    ls_iters: int
    step: float
    wall_time: float
    time_direction: float = 0.0
    time_linesearch: float = 0.0
    time_ratio: float = 0.0
    factorizations: int = 1


@dataclass
class SolveTrace:
    records: list
    status: str
    final_positions: np.ndarray

    @property
    def iterations(self) -> int:
        """Number of accepted Newton steps."""
        return sum(1 for r in self.records if r.step > 0)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def mean_ls_iters(self) -> float:
        ls = [r.ls_iters for r in self.records if r.step > 0]
        return float(np.mean(ls)) if ls else 0.0

    @property
    def total_time(self) -> float:
        return float(sum(r.wall_time for r in self.records))


def trust_region_ratio(f_prev, f_cur, g_prev, u, uHu, guard=1e-12) -> float:
    """Actual over predicted energy decrease for the accepted displacement ``u``."""
    predicted = -(float(np.dot(g_prev, u)) + 0.5 * uHu)
    if abs(predicted) < guard * max(1.0, abs(f_prev)):
        return 1.0
    return (f_prev - f_cur) / predicted


def newton_decrement(g, u) -> float:
    return -0.5 * float(np.dot(g, u))


def line_search(objective, x, u, g, cfg: SolverConfig, f0=None):
    """Backtracking from step 1 by ``cfg.ls_shrink`` until Armijo holds.

    Returns ``(step, trials, f_new)``. Non-finite trial energies count as
    failures. Raises :class:`LineSearchFailed` after ``cfg.ls_max_iters`` trials.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    f0 = objective(x) if f0 is None else f0
    slope = float(np.dot(g, u))
    step = 1.0
    for trial in range(1, cfg.ls_max_iters + 1):
        f = objective(x + step * u)
        if math.isfinite(f) and f <= f0 + cfg.ls_armijo_c * step * slope:
            return step, trial, f
        step *= cfg.ls_shrink
    raise LineSearchFailed(f"no Armijo step after {cfg.ls_max_iters} trials")


def pod_shift_scale(H) -> float:
    n = H.shape[0]
    diag = H.diagonal()
    scale = float(diag.sum()) / n
    if scale <= 0:
        # trace gives no scale for indefinite matrices; fall back to the mean diagonal magnitude
        scale = float(np.abs(diag).mean()) or 1.0
    return scale


def resolve_pod_shift(system: GlobalSystem, growth: float = 10.0, factorization: Factorization | None = None):
    """Factor H + delta*I for the smallest delta in 0, d0, d0*growth, ... that succeeds.

    Returns ``(factorization, delta, attempts)``.
    """
    f = factorization or Factorization()
    H = system.hessian
    try:
        return f.factor(H), 0.0, 1
    except NotPositiveDefinite:
        pass
    scale = pod_shift_scale(H)
    delta, attempts = 1e-8 * scale, 1
    while delta <= 1e8 * scale:
        attempts += 1
        try:
            return f.factor(H, shift=delta), delta, attempts
        except NotPositiveDefinite:
            delta *= growth
    raise NotPositiveDefinite(f"no diagonal shift up to {1e8 * scale:g} made the Hessian positive definite")


@dataclass
class Problem:
    """Discrete energy over the free vertices of a mesh."""

    mesh: TetMesh
    rest: RestData
    model: EnergyModel
    params: MaterialParams
    fixed: tuple

    def __post_init__(self):
        self.dofmap = make_dofmap(self.mesh.n_vertices, self.fixed)
        self.pattern = build_pattern(self.mesh.tets, self.dofmap)

    def energy(self, x) -> float:
        return float(np.sum(element_energies(self.model, self.params, x, self.mesh.tets, self.rest)))

    def quadratics(self, x):
        return element_quadratics_batch(self.model, self.params, x, self.mesh.tets, self.rest)


def minimize(problem: Problem, x0, cfg: SolverConfig) -> SolveTrace:
    """Run projected Newton from positions ``x0`` (fixed vertices stay put)."""
    strategy = cfg.strategy
    fixed_mode = static_mode(strategy)
    dm = problem.dofmap
    x = np.array(x0, dtype=float, copy=True)
    records: list[IterationRecord] = []
    factorization = Factorization()

    def objective(v):
        y = x.copy()
        y[dm.free_index >= 0] = v.reshape(-1, 3)
        return problem.energy(y)

    if dm.free_count == 0:
        raise AssemblyError("zero-dimensional system: every vertex is fixed")
    if not math.isfinite(problem.energy(x)):
        return SolveTrace(records, "line_search_failed", x)

    prev = None  # (energy, gradient, raw element Hessians, accepted displacement)
    status = "max_iters"
    for k in range(cfg.max_iters + 1):
        t_start = time.perf_counter()
        elems = problem.quadratics(x)
        f = float(np.sum(elems.value))
        g = assemble_gradient(elems.gradient, problem.pattern)

        rho, t_ratio = None, 0.0
        if prev is not None:
            t0 = time.perf_counter()
            uHu = quadratic_form(prev[2], problem.pattern, prev[3])
            rho = trust_region_ratio(prev[0], f, prev[1], prev[3], uHu, cfg.rho_guard)
            t_ratio = time.perf_counter() - t0

        if strategy.kind == "adaptive":
            mode = ABS if rho is None else resolve_adaptive(rho, strategy.rho_eps)
        else:
            mode = fixed_mode
        H_elem = elems.hessian if mode is None else project_element(elems.hessian, mode, strategy.clamp_floor)
        system = GlobalSystem(f, g, assemble_hessian(H_elem, problem.pattern))

        attempts = 1
        try:
            if strategy.kind == "pod_shift":
                _, delta, attempts = resolve_pod_shift(system, strategy.shift_growth, factorization)
                label = f"pod_shift({delta:.6g})"
            else:
                factorization.factor(system.hessian)
                label = "unprojected" if mode is None else str(mode)
            u = factorization.solve(-g)
        except NotPositiveDefinite:
            status = "not_positive_definite"
            break
        dec = newton_decrement(g, u)
        t_dir = time.perf_counter() - t_start - t_ratio

        def record(ls_iters, step, t_ls):
            records.append(
                IterationRecord(
                    k, f, dec, rho, label, ls_iters, step,
                    time.perf_counter() - t_start, t_dir, t_ls, t_ratio, attempts,
                )
            )

        if dec < cfg.decrement_tol:
            record(0, 0.0, 0.0)
            status = "converged"
            break
        if k == cfg.max_iters:
            record(0, 0.0, 0.0)
            break

        t0 = time.perf_counter()
        v = dm.gather(x)
        try:
            step, ls_iters, _ = line_search(objective, v, u, g, cfg, f0=f)
        except LineSearchFailed:
            record(cfg.ls_max_iters, 0.0, time.perf_counter() - t0)
            status = "line_search_failed"
            break
        du = step * u
        x = dm.scatter(x, du)
        prev = (f, g, elems.hessian, du)
        record(ls_iters, step, time.perf_counter() - t0)

    return SolveTrace(records, status, x)


def newton_solve(mesh: TetMesh, rest: RestData, model, params: MaterialParams, scenario: ScenarioSpec,
                 cfg: SolverConfig, fixed_vertices=None) -> SolveTrace:
    """Apply a scenario to ``mesh`` and minimize the elastic energy."""
    x0, fixed = apply_scenario(mesh, scenario, fixed_vertices)
    model = model if isinstance(model, EnergyModel) else EnergyModel(model)
    problem = Problem(mesh, rest, model, params, fixed)
    return minimize(problem, x0, cfg)


def with_strategy(cfg: SolverConfig, **kw) -> SolverConfig:
    return replace(cfg, strategy=ProjectionStrategy(**kw))
