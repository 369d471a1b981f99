"""Solution algorithms for joint chance-constrained LPs.

The primary method relaxes every scenario row with a shortfall variable
s >= 0, then alternates two convex subproblems under a bisected objective
level f:

* shortfall step: over the polytope intersected with {c'x <= f}, minimize
  the activation-weighted mean shortfall (an LP);
* activation step: per group, re-pick scenario weights z in [0,1] with
  mean z >= 1-epsilon to minimize the weighted shortfall (closed form:
  drop the largest shortfalls, spending a floor(eps*n) budget plus one
  fractional slot).

A level f is accepted when the weighted shortfall mass Gamma hits zero
(all activated scenarios exactly satisfied); bisection then tightens the
level from above.  Baselines: a single-group variant, a pooled variant
that cannot re-weight scenarios, a CVaR restriction, and an exhaustive
scenario-subset oracle for small instances.

All subproblems are plain LPs; Wasserstein margins enter through dual-norm
bound variables (see model.robustified_constraint).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import CapacityError, ModelError, NumericError
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, LpSolution
from .model import (TOL_ZERO, CcpProblem, JccGroup, RelaxationState, SampleSet,
                    evaluate_group)

FEASIBLE = "feasible"
INFEASIBLE_STATUS = "infeasible"

METHOD_ALSO_X = "also-x"
METHOD_ALSO_X_SINGLE = "also-x-single"
METHOD_INTUITIVE = "intuitive"
METHOD_CVAR = "cvar"
METHOD_ORACLE = "oracle"

ORACLE_CAP = 10 ** 6


@dataclass
class BisectionConfig:
    """Level-bisection controls.  delta1 = None resolves to the scale-aware
    default 1e-4 * max(1, f_upper + f_lower)."""

    f_lower: float
    f_upper: float
    delta1: float | None = None
    delta2: float = 1e-4
    gamma_tol: float = 1e-8
    max_outer: int = 100
    max_inner: int = 50
    tol_zero: float = TOL_ZERO

    def resolved_delta1(self) -> float:
        if self.delta1 is not None:
            return self.delta1
        return 1e-4 * max(1.0, self.f_upper + self.f_lower)

    @classmethod
    def from_problem(cls, problem: CcpProblem, backend=None, **overrides):
        f_lo, f_hi = init_bounds(problem, backend=backend)
        return cls(f_lower=f_lo, f_upper=f_hi, **overrides)


@dataclass
class GroupStats:
    label: str
    epsilon: float
    rho: float
    violation_rate: float
    satisfied: bool

    def to_dict(self):
        return {"label": self.label, "epsilon": self.epsilon, "rho": self.rho,
                "violation_rate": self.violation_rate, "satisfied": self.satisfied}


@dataclass
class OuterRecord:
    """One bisection level: tested f, final alternation state, and the
    candidate point's per-group violation rates."""

    f: float
    gamma: float | None
    delta: float | None
    inner_iterations: int
    accepted: bool
    objective: float | None
    violation_rates: list[float] | None

    def to_dict(self):
        return {"f": self.f, "gamma": self.gamma, "delta": self.delta,
                "inner_iterations": self.inner_iterations,
                "accepted": self.accepted, "objective": self.objective,
                "violation_rates": self.violation_rates}


@dataclass
class SolveReport:
    method: str
    status: str
    x: np.ndarray | None
    objective: float | None
    per_group: list[GroupStats]
    trace: list[OuterRecord] = field(default_factory=list)
    f_lower: float | None = None
    f_upper: float | None = None

    @property
    def is_feasible(self) -> bool:
        return self.status == FEASIBLE

    def to_dict(self):
        return {
            "method": self.method,
            "status": self.status,
            "objective": self.objective,
            "x": None if self.x is None else [float(v) for v in self.x],
            "per_group": [g.to_dict() for g in self.per_group],
            "f_lower": self.f_lower,
            "f_upper": self.f_upper,
            "trace": [r.to_dict() for r in self.trace],
        }


# -- LP assembly -------------------------------------------------------------

def _margin_columns(group: JccGroup, rho: float):
    """Per-constraint auxiliary column plan for the Wasserstein margin.

    Returns a list (one entry per constraint) of lists of component row
    indices that need +-(A[r] x + a0[r]) <= bound rows.  For the l1
    uncertainty norm (dual linf) one shared bound variable covers all
    components; for linf (dual l1) each component gets its own, and the
    margin is rho times their sum.  Identically-zero components are
    skipped: they contribute nothing to either norm.
    """
    if rho == 0.0:
        return None
    if group.norm == "l2":
        raise ModelError(
            f"group {group.label!r}: l2 uncertainty norm has a second-order "
            "worst case and cannot be embedded in an LP; use l1 or linf")
    plans = []
    for con in group.constraints:
        nz = [r for r in range(con.xi_dim)
              if con.a0[r] != 0.0 or np.any(con.A[r] != 0.0)]
        plans.append(nz)
    return plans


class _ScenarioLpBuilder:
    """Shared row assembly for all scenario-based LPs over a CcpProblem.

    Column layout: decision x first, then caller-registered blocks
    (shortfalls, CVaR tails, margin bounds, ...).  Rows are collected
    densely and stacked once.
    """

    def __init__(self, problem: CcpProblem):
        self.problem = problem
        self.n = problem.n_vars
        self.cols = self.n
        self.blocks: dict[str, slice] = {}
        self.rows: list[np.ndarray] = []
        self.rhs: list[np.ndarray] = []
        self.lo_extra: list[np.ndarray] = []
        self.hi_extra: list[np.ndarray] = []

    def add_block(self, name: str, size: int, lo=0.0, hi=np.inf) -> slice:
        blk = slice(self.cols, self.cols + size)
        self.blocks[name] = blk
        self.cols += size
        self.lo_extra.append(np.full(size, lo))
        self.hi_extra.append(np.full(size, hi))
        return blk

    def append_rows(self, mat: np.ndarray, rhs: np.ndarray) -> None:
        self.rows.append(mat)
        self.rhs.append(np.atleast_1d(rhs))

    def margin_rows(self, group: JccGroup, plans, col_of):
        """Bound-variable rows +-(A[r] x + a0[r]) <= bound_col."""
        for j, con in enumerate(group.constraints):
            for r in plans[j]:
                cols = col_of(j, r)
                for sign in (1.0, -1.0):
                    row = np.zeros(self.cols)
                    row[:self.n] = sign * con.A[r]
                    row[cols] = -1.0
                    self.append_rows(row[None, :], np.array([-sign * con.a0[r]]))

    def scenario_rows(self, group: JccGroup, j: int, mask, extra_cols,
                      rhs_shift=0.0):
        """Rows  xi_i'(A_j x + a0_j) + c_j'x + d_j + extra <= rhs_shift  for
        the masked scenarios; ``extra_cols`` maps column index -> coeff."""
        con = group.constraints[j]
        data = group.samples.data[mask]
        cnt = data.shape[0]
        if cnt == 0:
            return
        block = np.zeros((cnt, self.cols))
        block[:, :self.n] = data @ con.A + con.c
        for col, coeff in extra_cols.items():
            block[:, col] = coeff
        rhs = rhs_shift - (data @ con.a0 + con.d)
        self.append_rows(block, rhs)

    def finish(self, objective: np.ndarray) -> LpProblem:
        poly = self.problem.polytope
        pieces = []
        rhs_pieces = []
        if poly.G is not None:
            side = np.zeros((poly.G.shape[0], self.cols - self.n))
            pieces.append(np.hstack([poly.G, side]))
            rhs_pieces.append(poly.h)
        if self.rows:
            pieces.extend(self._padded(self.rows))
            rhs_pieces.extend(self.rhs)
        G = np.vstack(pieces) if pieces else None
        h = np.concatenate(rhs_pieces) if pieces else None
        A_eq = b_eq = None
        if poly.A_eq is not None:
            A_eq = np.hstack([poly.A_eq,
                              np.zeros((poly.A_eq.shape[0], self.cols - self.n))])
            b_eq = poly.b_eq
        lo = np.concatenate([poly.lower] + self.lo_extra) if self.lo_extra else poly.lower
        hi = np.concatenate([poly.upper] + self.hi_extra) if self.hi_extra else poly.upper
        return LpProblem(objective, G, h, A_eq, b_eq, lo, hi)

    def _padded(self, rows):
        out = []
        for mat in rows:
            if mat.shape[1] < self.cols:
                pad = np.zeros((mat.shape[0], self.cols - mat.shape[1]))
                out.append(np.hstack([mat, pad]))
            else:
                out.append(mat)
        return out


def _register_margins(builder: _ScenarioLpBuilder, group: JccGroup, gi: int,
                      rho: float):
    """Adds margin bound columns+rows; returns (per-constraint extra-cols
    factory) mapping constraint j to {col: coeff} terms for scenario rows."""
    plans = _margin_columns(group, rho)
    if plans is None:
        return lambda j: {}
    if group.norm == "l1":
        blk = builder.add_block(f"margin{gi}", len(group.constraints))
        builder.margin_rows(group, plans, lambda j, r: blk.start + j)
        return lambda j: {blk.start + j: rho}
    # linf uncertainty norm: dual l1, one bound column per component
    offsets = []
    for j, nz in enumerate(plans):
        blk = builder.add_block(f"margin{gi}c{j}", len(nz))
        offsets.append({r: blk.start + kk for kk, r in enumerate(nz)})
    builder.margin_rows(group, plans, lambda j, r: offsets[j][r])
    return lambda j: {col: rho for col in offsets[j].values()}


class SStepAssembler:
    """Reusable skeleton of the shortfall-step LP.

    The constraint matrix is identical across bisection levels and inner
    iterations; only the level row's rhs and the shortfall weights in the
    objective change.  Build once per solve, stamp cheap copies after.
    """

    def __init__(self, problem: CcpProblem):
        self.problem = problem
        builder = _ScenarioLpBuilder(problem)
        self.s_blocks = []
        margin_factories = []
        for gi, g in enumerate(problem.groups):
            self.s_blocks.append(builder.add_block(f"s{gi}", g.n))
        for gi, g in enumerate(problem.groups):
            margin_factories.append(_register_margins(builder, g, gi, g.rho))
        # level row c'x <= f (rhs patched per level)
        level = np.zeros(builder.cols)
        level[:problem.n_vars] = problem.objective
        builder.append_rows(level[None, :], np.array([0.0]))
        self.level_row_local = sum(m.shape[0] for m in builder.rows[:-1])
        for gi, g in enumerate(problem.groups):
            mask = np.ones(g.n, dtype=bool)
            srow = self.s_blocks[gi]
            for j in range(len(g.constraints)):
                builder.scenario_rows(g, j, mask, dict(margin_factories[gi](j)))
                block = builder.rows[-1]
                block[np.arange(g.n), srow.start + np.arange(g.n)] = -1.0
        self.lp_template = builder.finish(np.zeros(builder.cols))
        self.cols = builder.cols
        n_poly = problem.polytope.n_ineq
        self.level_row = n_poly + self.level_row_local

    def lp_at(self, f: float, z: list[np.ndarray]) -> LpProblem:
        t = self.lp_template
        h = t.h.copy()
        h[self.level_row] = f
        return LpProblem(self.objective_for(z), t.G, h, t.A_eq, t.b_eq,
                         t.lower, t.upper)

    def objective_for(self, z: list[np.ndarray]) -> np.ndarray:
        c = np.zeros(self.cols)
        m = len(self.problem.groups)
        for gi, g in enumerate(self.problem.groups):
            zi = np.asarray(z[gi], dtype=float)
            if zi.shape != (g.n,):
                raise ModelError(f"weights for group {gi} must have length {g.n}")
            c[self.s_blocks[gi]] = zi / (m * g.n)
        return c

    def split(self, y: np.ndarray):
        x = y[:self.problem.n_vars]
        s = [y[blk] for blk in self.s_blocks]
        return x, s


def shortfalls(problem: CcpProblem, x: np.ndarray) -> list[np.ndarray]:
    """Canonical per-scenario shortfalls max(0, worst robustified value)."""
    out = []
    for g in problem.groups:
        worst = np.full(g.n, -np.inf)
        for rob in g.robustified():
            worst = np.maximum(worst, rob.evaluate_many(x, g.samples.data))
        out.append(np.maximum(worst, 0.0))
    return out


def s_step(problem: CcpProblem, z, f: float, backend=None):
    """Weighted-shortfall LP at level f.

    ``z`` is a RelaxationState or a list of per-group weight vectors.
    Returns (x, shortfall list, lp status); (None, None, 'infeasible') when
    the polytope cannot reach the level.  Shortfalls are recomputed from x
    (zero-weight scenarios have free LP slots, the canonical value is what
    the activation step should rank).
    """
    weights = z.z if isinstance(z, RelaxationState) else z
    asm = SStepAssembler(problem)
    sol = lp.solve_lp(asm.lp_at(f, weights), backend)
    if sol.status == UNBOUNDED:
        raise NumericError(
            "shortfall LP unbounded: the polytope is unbounded along a "
            "direction that the level row does not cap")
    if sol.status != OPTIMAL:
        return None, None, sol.status
    x, _ = asm.split(sol.x)
    return x, shortfalls(problem, x), sol.status


def z_step(s: np.ndarray, epsilon: float) -> np.ndarray:
    """Optimal activation weights for one group given shortfalls s >= 0.

    Minimizes sum(z*s) over 0 <= z <= 1 with mean(z) >= 1-epsilon: sort by
    shortfall descending (ties by ascending scenario index), zero out the
    floor(eps*n) largest, and leave 1 - frac(eps*n) on the next one.  The
    count is unconditional; with more satisfied scenarios than the keep
    quota, low-index zero-shortfall ones are demoted too, which is what
    lets later shortfall steps walk off them.  A fully zero s keeps every
    scenario active (any z is optimal there; all-ones is the useful one,
    downstream cleanup re-imposes exactly the active scenarios).
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    z = np.ones(n)
    if epsilon <= 0.0 or n == 0 or not np.any(s > 0.0):
        return z
    budget = epsilon * n
    whole = int(math.floor(budget + 1e-9))
    frac = budget - whole
    if frac < 1e-9:
        frac = 0.0
    order = np.argsort(-s, kind="stable")
    z[order[:whole]] = 0.0
    if frac > 0.0 and whole < n:
        z[order[whole]] = 1.0 - frac
    return z


def z_step_lp(s: np.ndarray, epsilon: float, backend=None) -> np.ndarray:
    """LP formulation of the activation step (test cross-check for z_step)."""
    s = np.asarray(s, dtype=float)
    n = s.size
    p = LpProblem(s, G=-np.ones((1, n)) / n, h=np.array([-(1.0 - epsilon)]),
                  lower=np.zeros(n), upper=np.ones(n))
    sol = lp.solve_lp(p, backend)
    if sol.status != OPTIMAL:
        raise NumericError(f"activation LP came back {sol.status}")
    return sol.x


def gamma_value(z: list[np.ndarray], s: list[np.ndarray]) -> float:
    m = len(z)
    return float(sum(float(zi @ si) / si.size for zi, si in zip(z, s)) / m)


@dataclass
class InnerResult:
    x: np.ndarray | None
    s: list[np.ndarray] | None
    z: list[np.ndarray] | None
    gamma: float | None
    delta: float | None
    iterations: int
    reason: str  # 'gamma' | 'delta' | 'max_inner' | 'lp-infeasible'
    gammas: list[float] = field(default_factory=list)

    @property
    def lp_feasible(self) -> bool:
        return self.reason != "lp-infeasible"


def _inner_alternation(problem, session_factory, f, cfg: BisectionConfig):
    """Alternate shortfall and activation steps at a fixed level f."""
    session, asm = session_factory(f)
    state = RelaxationState.full_activation(problem)
    gamma_prev = None
    delta = None
    gammas: list[float] = []
    for k in range(cfg.max_inner):
        sol = session.solve(asm.objective_for(state.z))
        if sol.status == UNBOUNDED:
            raise NumericError("shortfall LP unbounded (pathological polytope)")
        if sol.status != OPTIMAL:
            return InnerResult(None, None, None, None, None, k, "lp-infeasible")
        x, _ = asm.split(sol.x)
        s = shortfalls(problem, x)
        z = [z_step(s[gi], g.epsilon) for gi, g in enumerate(problem.groups)]
        gamma = gamma_value(z, s)
        if gamma_prev is not None and gamma > gamma_prev + 1e-9 * max(1.0, gamma_prev):
            raise NumericError(
                f"weighted shortfall increased ({gamma_prev} -> {gamma}); "
                "alternation lost monotonicity")
        gammas.append(gamma)
        delta = None if gamma_prev is None else abs(gamma - gamma_prev)
        state = RelaxationState(z=z, s=s)
        if gamma <= cfg.gamma_tol:
            return InnerResult(x, s, z, gamma, delta, k + 1, "gamma", gammas)
        if delta is not None and delta < cfg.delta2:
            return InnerResult(x, s, z, gamma, delta, k + 1, "delta", gammas)
        gamma_prev = gamma
    return InnerResult(x, s, z, gamma, delta, cfg.max_inner, "max_inner", gammas)


def inner_alternation(problem: CcpProblem, f: float,
                      cfg: BisectionConfig | None = None,
                      backend=None) -> InnerResult:
    """Public single-level alternation (fresh LP skeleton per call)."""
    cfg = cfg or BisectionConfig(f_lower=0.0, f_upper=f)
    asm = SStepAssembler(problem)
    factory = _session_factory(asm, backend)
    return _inner_alternation(problem, factory, f, cfg)


def _session_factory(asm: SStepAssembler, backend):
    backend = backend or lp.default_backend()

    def make(f):
        lp_f = asm.lp_at(f, [np.ones(g.n) for g in asm.problem.groups])
        if hasattr(backend, "start_session"):
            return backend.start_session(lp_f), asm
        return _ColdSession(backend, lp_f), asm

    return make


class _ColdSession:
    """Session shim for backends without warm restarts."""

    def __init__(self, backend, problem: LpProblem):
        self.backend = backend
        self.problem = problem

    def solve(self, c=None):
        p = self.problem
        if c is not None:
            p = LpProblem(np.asarray(c, float), p.G, p.h, p.A_eq, p.b_eq,
                          p.lower, p.upper)
        return self.backend.solve(p)


# -- hard-constrained LPs ----------------------------------------------------

def scenario_hard_lp(problem: CcpProblem, masks: list[np.ndarray],
                     rho_by_group: list[float] | None = None) -> LpProblem:
    """min objective'x over the polytope with the masked scenarios' rows
    imposed hard (robustified at each group's radius unless overridden)."""
    builder = _ScenarioLpBuilder(problem)
    for gi, g in enumerate(problem.groups):
        rho = g.rho if rho_by_group is None else rho_by_group[gi]
        factory = _register_margins(builder, g, gi, rho)
        mask = np.asarray(masks[gi], dtype=bool)
        if mask.shape != (g.n,):
            raise ModelError(f"mask for group {gi} must have length {g.n}")
        for j in range(len(g.constraints)):
            builder.scenario_rows(g, j, mask, dict(factory(j)))
    obj = np.zeros(builder.cols)
    obj[:problem.n_vars] = problem.objective
    return builder.finish(obj)


def mean_value_lp(problem: CcpProblem) -> LpProblem:
    """Deterministic counterpart: every group constraint at its scenario
    mean, no margin, no relaxation."""
    builder = _ScenarioLpBuilder(problem)
    for g in problem.groups:
        mean = g.samples.mean
        for con in g.constraints:
            row = np.zeros((1, builder.cols))
            row[0, :builder.n] = mean @ con.A + con.c
            builder.append_rows(row, np.array([-(mean @ con.a0 + con.d)]))
    obj = np.zeros(builder.cols)
    obj[:problem.n_vars] = problem.objective
    return builder.finish(obj)


def _polish(problem: CcpProblem, masks, backend, fallback_x):
    """Re-minimize the true cost subject to the accepted scenario selection
    imposed hard.  Falls back to the raw accepted point if the cleanup LP
    stumbles numerically (it is feasible by construction)."""
    try:
        sol = lp.solve_lp(scenario_hard_lp(problem, masks), backend)
    except NumericError:
        return fallback_x
    if sol.status != OPTIMAL:
        return fallback_x
    return sol.x[:problem.n_vars]


# -- bound initialization ----------------------------------------------------

def init_bounds(problem: CcpProblem, backend=None) -> tuple[float, float]:
    """Level bracket: lower from the mean-value LP, upper from the CVaR
    restriction when it is feasible, otherwise a multiplicative guess."""
    sol = lp.solve_lp(mean_value_lp(problem), backend)
    if sol.status != OPTIMAL:
        raise ModelError(
            f"mean-value problem is {sol.status}; provide explicit level "
            "bounds instead")
    f_lo = float(sol.objective)
    cvar = solve_cvar(problem, backend=backend)
    if cvar.is_feasible:
        return f_lo, float(cvar.objective)
    if f_lo > 0:
        return f_lo, 2.0 * f_lo
    return f_lo, f_lo + max(1.0, abs(f_lo))


# -- report helpers ----------------------------------------------------------

def _group_stats(problem: CcpProblem, x: np.ndarray) -> list[GroupStats]:
    out = []
    for g in problem.groups:
        rep = evaluate_group(g, x)
        out.append(GroupStats(g.label, g.epsilon, g.rho,
                              rep.violation_rate, rep.satisfied))
    return out


def _violation_rates(problem: CcpProblem, x: np.ndarray) -> list[float]:
    return [evaluate_group(g, x).violation_rate for g in problem.groups]


def _objective(problem: CcpProblem, x: np.ndarray) -> float:
    return float(problem.objective @ x)


def _infeasible_report(method, problem, cfg, trace) -> SolveReport:
    return SolveReport(method=method, status=INFEASIBLE_STATUS, x=None,
                       objective=None, per_group=[], trace=trace,
                       f_lower=cfg.f_lower, f_upper=cfg.f_upper)


# -- main solvers ------------------------------------------------------------

def solve_also_x_multi(problem: CcpProblem, cfg: BisectionConfig | None = None,
                       backend=None) -> SolveReport:
    """Alternating relaxation under level bisection (any number of groups).

    A level is accepted exactly when the alternation reaches Gamma <=
    gamma_tol; the report carries the last accepted point, cost-polished
    over its final scenario selection.  If no midpoint is ever accepted the
    initial upper level gets one direct test before declaring Infeasible.
    """
    cfg = cfg or BisectionConfig.from_problem(problem, backend=backend)
    asm = SStepAssembler(problem)
    factory = _session_factory(asm, backend)
    delta1 = cfg.resolved_delta1()
    f_lo, f_hi = float(cfg.f_lower), float(cfg.f_upper)
    best = None
    trace = []
    cfg_run = BisectionConfig(f_lo, f_hi, cfg.delta1, cfg.delta2,
                              cfg.gamma_tol, cfg.max_outer, cfg.max_inner,
                              cfg.tol_zero)

    def run_level(f: float):
        inner = _inner_alternation(problem, factory, f, cfg_run)
        ok = (inner.lp_feasible and inner.gamma is not None
              and inner.gamma <= cfg.gamma_tol)
        trace.append(OuterRecord(
            f=f, gamma=inner.gamma, delta=inner.delta,
            inner_iterations=inner.iterations, accepted=ok,
            objective=None if inner.x is None else _objective(problem, inner.x),
            violation_rates=None if inner.x is None else _violation_rates(problem, inner.x)))
        return inner, ok

    for _ in range(cfg.max_outer):
        if f_hi - f_lo <= delta1:
            break
        f = 0.5 * (f_lo + f_hi)
        inner, accepted = run_level(f)
        if accepted:
            f_hi = f
            best = inner
        else:
            f_lo = f
    if best is None:
        # No midpoint certified; the initial upper level may still be
        # achievable (always is when it came from a feasible CVaR warm
        # start and the optimum sits in the top delta1 sliver).
        inner, accepted = run_level(float(cfg.f_upper))
        if accepted:
            best = inner
            f_hi = float(cfg.f_upper)
    final_cfg = BisectionConfig(f_lo, f_hi, cfg.delta1, cfg.delta2,
                                cfg.gamma_tol, cfg.max_outer, cfg.max_inner,
                                cfg.tol_zero)
    if best is None:
        return _infeasible_report(METHOD_ALSO_X, problem, final_cfg, trace)
    masks = [zi > 0.0 for zi in best.z]
    x = _polish(problem, masks, backend, best.x)
    return SolveReport(method=METHOD_ALSO_X, status=FEASIBLE, x=x,
                       objective=_objective(problem, x),
                       per_group=_group_stats(problem, x), trace=trace,
                       f_lower=f_lo, f_upper=f_hi)


def _bisect_full_activation(problem, method, accept, cfg, backend):
    """Shared driver for the z == 1 variants: bisection with a single
    full-activation shortfall step per level and a rate-based accept test."""
    cfg = cfg or BisectionConfig.from_problem(problem, backend=backend)
    asm = SStepAssembler(problem)
    factory = _session_factory(asm, backend)
    delta1 = cfg.resolved_delta1()
    f_lo, f_hi = float(cfg.f_lower), float(cfg.f_upper)
    ones = [np.ones(g.n) for g in problem.groups]
    best = None
    trace = []

    def run_level(f: float):
        session, _ = factory(f)
        sol = session.solve(asm.objective_for(ones))
        if sol.status == UNBOUNDED:
            raise NumericError("shortfall LP unbounded (pathological polytope)")
        if sol.status != OPTIMAL:
            x, s, ok = None, None, False
        else:
            x, _ = asm.split(sol.x)
            s = shortfalls(problem, x)
            ok = accept(s)
        trace.append(OuterRecord(
            f=f, gamma=None if s is None else gamma_value(ones, s),
            delta=None, inner_iterations=1, accepted=ok,
            objective=None if x is None else _objective(problem, x),
            violation_rates=None if x is None else _violation_rates(problem, x)))
        return (x, s), ok

    for _ in range(cfg.max_outer):
        if f_hi - f_lo <= delta1:
            break
        f = 0.5 * (f_lo + f_hi)
        cand, ok = run_level(f)
        if ok:
            f_hi = f
            best = cand
        else:
            f_lo = f
    if best is None:
        # last resort: certify the initial upper level itself
        cand, ok = run_level(float(cfg.f_upper))
        if ok:
            best = cand
            f_hi = float(cfg.f_upper)
    final_cfg = BisectionConfig(f_lo, f_hi, cfg.delta1, cfg.delta2,
                                cfg.gamma_tol, cfg.max_outer, cfg.max_inner,
                                cfg.tol_zero)
    if best is None:
        return _infeasible_report(method, problem, final_cfg, trace)
    x_raw, s = best
    masks = [si <= cfg.tol_zero for si in s]
    x = _polish(problem, masks, backend, x_raw)
    return SolveReport(method=method, status=FEASIBLE, x=x,
                       objective=_objective(problem, x),
                       per_group=_group_stats(problem, x), trace=trace,
                       f_lower=f_lo, f_upper=f_hi)


def solve_also_x_single(problem: CcpProblem, cfg: BisectionConfig | None = None,
                        backend=None) -> SolveReport:
    """Single-group variant: full activation, accept a level when the
    fraction of exactly-satisfied scenarios reaches 1 - epsilon."""
    if problem.n_groups != 1:
        raise ModelError(
            f"single-group solver got {problem.n_groups} groups; use "
            "solve_also_x_multi")
    g = problem.groups[0]
    tol = (cfg.tol_zero if cfg else TOL_ZERO)

    def accept(s):
        rate = float(np.mean(s[0] <= tol))
        return rate >= 1.0 - g.epsilon - 1e-12

    report = _bisect_full_activation(problem, METHOD_ALSO_X_SINGLE, accept,
                                     cfg, backend)
    return report


def solve_intuitive_extension(problem: CcpProblem,
                              cfg: BisectionConfig | None = None,
                              backend=None) -> SolveReport:
    """Pooled baseline: one full-activation shortfall step per level and a
    level is accepted only when every group hits its rate simultaneously.
    No per-group re-weighting, which is exactly its handicap."""
    tol = (cfg.tol_zero if cfg else TOL_ZERO)
    epsilons = [g.epsilon for g in problem.groups]

    def accept(s):
        return all(float(np.mean(si <= tol)) >= 1.0 - eps - 1e-12
                   for si, eps in zip(s, epsilons))

    return _bisect_full_activation(problem, METHOD_INTUITIVE, accept, cfg,
                                   backend)


def solve_cvar(problem: CcpProblem, backend=None) -> SolveReport:
    """CVaR restriction: per group, a tail-average certificate that the
    worst constraint stays nonpositive.  Convex, conservative, one LP.

    Groups with epsilon == 0 degenerate to hard (worst-case) scenario rows,
    the eps -> 0 limit, so the method stays defined on sweeps that include
    zero risk.
    """
    builder = _ScenarioLpBuilder(problem)
    tails = []
    for gi, g in enumerate(problem.groups):
        factory = _register_margins(builder, g, gi, g.rho)
        if g.epsilon == 0.0:
            for j in range(len(g.constraints)):
                builder.scenario_rows(g, j, np.ones(g.n, dtype=bool),
                                      dict(factory(j)))
            tails.append(None)
            continue
        t_blk = builder.add_block(f"tail{gi}", 1, lo=-np.inf)
        w_blk = builder.add_block(f"excess{gi}", g.n, lo=0.0)
        tails.append((t_blk, w_blk))
        for j in range(len(g.constraints)):
            extra = dict(factory(j))
            extra[t_blk.start] = -1.0
            builder.scenario_rows(g, j, np.ones(g.n, dtype=bool), extra)
            block = builder.rows[-1]
            block[np.arange(g.n), w_blk.start + np.arange(g.n)] = -1.0
        # tail budget: t + mean excess / epsilon <= 0
        row = np.zeros((1, builder.cols))
        row[0, t_blk.start] = 1.0
        row[0, w_blk] = 1.0 / (g.epsilon * g.n)
        builder.append_rows(row, np.array([0.0]))
    obj = np.zeros(builder.cols)
    obj[:problem.n_vars] = problem.objective
    sol = lp.solve_lp(builder.finish(obj), backend)
    if sol.status == UNBOUNDED:
        raise NumericError("CVaR LP unbounded (pathological polytope)")
    if sol.status != OPTIMAL:
        return SolveReport(method=METHOD_CVAR, status=INFEASIBLE_STATUS,
                           x=None, objective=None, per_group=[])
    x = sol.x[:problem.n_vars]
    return SolveReport(method=METHOD_CVAR, status=FEASIBLE, x=x,
                       objective=_objective(problem, x),
                       per_group=_group_stats(problem, x))


def oracle_enumeration_count(problem: CcpProblem) -> int:
    total = 1
    for g in problem.groups:
        keep = math.ceil((1.0 - g.epsilon) * g.n - 1e-9)
        total *= sum(math.comb(g.n, k) for k in range(keep, g.n + 1))
    return total


def solve_oracle(problem: CcpProblem, backend=None) -> SolveReport:
    """Exhaustive scenario-subset search (exact sample optimum).

    Per group, any keep-set of ceil((1-eps)*n) scenarios certifies the rate;
    larger keep-sets only shrink the feasible region, so minimizing over the
    exact-size subsets equals minimizing over all subsets of at least that
    size.  Guarded by the full enumeration count.
    """
    count = oracle_enumeration_count(problem)
    if count > ORACLE_CAP:
        raise CapacityError(
            f"oracle enumeration would visit {count} subset combinations "
            f"(cap {ORACLE_CAP})")
    keeps = [math.ceil((1.0 - g.epsilon) * g.n - 1e-9) for g in problem.groups]
    pools = [list(itertools.combinations(range(g.n), k))
             for g, k in zip(problem.groups, keeps)]
    best_obj = np.inf
    best_x = None
    for combo in itertools.product(*pools):
        masks = []
        for g, subset in zip(problem.groups, combo):
            mask = np.zeros(g.n, dtype=bool)
            mask[list(subset)] = True
            masks.append(mask)
        sol = lp.solve_lp(scenario_hard_lp(problem, masks), backend)
        if sol.status == OPTIMAL and sol.objective < best_obj:
            best_obj = sol.objective
            best_x = sol.x[:problem.n_vars]
        elif sol.status == UNBOUNDED:
            raise NumericError("oracle subproblem unbounded (pathological polytope)")
    if best_x is None:
        return SolveReport(method=METHOD_ORACLE, status=INFEASIBLE_STATUS,
                           x=None, objective=None, per_group=[])
    return SolveReport(method=METHOD_ORACLE, status=FEASIBLE, x=best_x,
                       objective=float(best_obj),
                       per_group=_group_stats(problem, best_x))


def out_of_sample_reliability(x: np.ndarray, groups: list[JccGroup],
                              test_sets: list[SampleSet]) -> list[float]:
    """Per-group fraction of held-out scenarios fully satisfied at x.
    Raw constraints: the Wasserstein margin is a training-side hedge and is
    not applied to test-set measurement."""
    if len(groups) != len(test_sets):
        raise ModelError("one test set per group required")
    for g, ts in zip(groups, test_sets):
        if ts.n == 0:
            raise ModelError(f"group {g.label!r}: empty test set")
    return [evaluate_group(g, x, scenarios=ts, rho_override=0.0).rate
            for g, ts in zip(groups, test_sets)]


SOLVERS = {
    METHOD_ALSO_X: solve_also_x_multi,
    METHOD_ALSO_X_SINGLE: solve_also_x_single,
    METHOD_INTUITIVE: solve_intuitive_extension,
    METHOD_CVAR: lambda p, cfg=None, backend=None: solve_cvar(p, backend=backend),
    METHOD_ORACLE: lambda p, cfg=None, backend=None: solve_oracle(p, backend=backend),
}
