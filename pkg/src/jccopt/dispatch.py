"""Multiperiod reserve dispatch compiled into a chance-constrained LP.

Generators sell energy over piecewise-linear cost segments and hold
asymmetric up/down reserve; aggregated distribution networks (ADNs)
absorb renewable surplus inside uncertain power-energy boundaries; line
flows follow PTDF sensitivities.  Renewable forecast errors enter per
scenario through their system-wide positive/negative aggregates (computed
as data, never as an optimization-side max), and every probabilistic
requirement lands in one JccGroup per generator, ADN, and line.

Units: MW, MWh, $/MWh, hours.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelError
from .model import (BiAffineConstraint, CcpProblem, JccGroup, Polytope,
                    SampleSet)

VARIANTS = {"day-ahead": (24, 1.0), "intraday": (4, 0.25)}


@dataclass
class Segment:
    """One generation cost segment: width in MW, marginal cost in $/MWh."""

    width: float
    cost: float

    def __post_init__(self):
        self.width = float(self.width)
        self.cost = float(self.cost)
        if self.width < 0:
            raise ModelError("segment width must be nonnegative")


@dataclass
class Generator:
    bus: int
    p_min: float
    p_max: float
    ramp_dn: float          # MW/h, nonpositive (downward rate)
    ramp_up: float          # MW/h, nonnegative
    segments: list[Segment]
    fixed_cost: float = 0.0
    reserve_cost_up: float = 0.0
    reserve_cost_dn: float = 0.0
    epsilon: float = 0.05
    rho: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise ModelError(f"generator {self.name!r}: p_min > p_max")
        if not self.segments:
            raise ModelError(f"generator {self.name!r}: needs >= 1 cost segment")
        costs = [s.cost for s in self.segments]
        if any(b < a for a, b in zip(costs, costs[1:])):
            raise ModelError(
                f"generator {self.name!r}: segment costs must be nondecreasing "
                "(convex piecewise cost keeps the LP binary-free)")
        total = sum(s.width for s in self.segments)
        if abs(total - (self.p_max - self.p_min)) > 1e-9:
            raise ModelError(
                f"generator {self.name!r}: segment widths sum to {total}, "
                f"expected p_max - p_min = {self.p_max - self.p_min}")
        if not self.ramp_dn <= 0.0 <= self.ramp_up:
            raise ModelError(
                f"generator {self.name!r}: need ramp_dn <= 0 <= ramp_up "
                "(down-rate stored as a negative number)")
        if not 0.0 <= self.epsilon < 1.0:
            raise ModelError(f"generator {self.name!r}: epsilon outside [0, 1)")
        if self.rho < 0.0:
            raise ModelError(f"generator {self.name!r}: negative rho")


@dataclass
class Adn:
    """Aggregated distribution network with uncertain flexibility boundaries.

    Per boundary scenario: instantaneous power window [p_lower, p_upper]
    (MW) and cumulative energy window [e_lower, e_upper] (MWh), each over
    the full horizon.  ADNs offer up-reserve only: they can absorb
    renewable surplus by raising consumption, never the reverse.
    """

    bus: int
    p_lower: np.ndarray     # (n, T)
    p_upper: np.ndarray
    e_lower: np.ndarray
    e_upper: np.ndarray
    reserve_cost_up: float = 0.0
    epsilon: float = 0.05
    rho: float = 0.0
    name: str = ""

    def __post_init__(self):
        arrs = {}
        for key in ("p_lower", "p_upper", "e_lower", "e_upper"):
            arrs[key] = np.atleast_2d(np.asarray(getattr(self, key), dtype=float))
            setattr(self, key, arrs[key])
        shapes = {a.shape for a in arrs.values()}
        if len(shapes) != 1:
            raise ModelError(f"adn {self.name!r}: boundary arrays must share a "
                             f"shape, got {sorted(shapes)}")
        if np.any(self.p_lower > self.p_upper + 1e-12):
            raise ModelError(f"adn {self.name!r}: p_lower > p_upper in a scenario")
        if np.any(self.e_lower > self.e_upper + 1e-12):
            raise ModelError(f"adn {self.name!r}: e_lower > e_upper in a scenario")
        if not 0.0 <= self.epsilon < 1.0:
            raise ModelError(f"adn {self.name!r}: epsilon outside [0, 1)")
        if self.rho < 0.0:
            raise ModelError(f"adn {self.name!r}: negative rho")

    @property
    def n(self) -> int:
        return self.p_lower.shape[0]

    @property
    def horizon(self) -> int:
        return self.p_lower.shape[1]

    @classmethod
    def from_rows(cls, bus: int, rows, horizon: int, **kw) -> "Adn":
        """Rows of width 4T ordered p_lower[T], p_upper[T], e_lower[T],
        e_upper[T] (the boundary CSV layout)."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != 4 * horizon:
            raise ModelError(
                f"adn {kw.get('name', '')!r}: boundary rows are "
                f"{rows.shape[1]} wide, expected 4*T = {4 * horizon}")
        T = horizon
        return cls(bus=bus, p_lower=rows[:, 0:T], p_upper=rows[:, T:2 * T],
                   e_lower=rows[:, 2 * T:3 * T], e_upper=rows[:, 3 * T:4 * T],
                   **kw)

    def to_rows(self) -> np.ndarray:
        return np.hstack([self.p_lower, self.p_upper, self.e_lower, self.e_upper])


@dataclass
class WindFarm:
    bus: int
    forecast: np.ndarray    # (T,) MW

    def __post_init__(self):
        self.forecast = np.atleast_1d(np.asarray(self.forecast, dtype=float))


@dataclass
class WindScenarioSet:
    farms: list[WindFarm]
    errors: np.ndarray      # (n, W, T) MW forecast errors

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=float)
        if self.errors.ndim != 3:
            raise ModelError("wind errors must be a (scenario, farm, time) tensor")
        if self.errors.shape[1] != len(self.farms):
            raise ModelError(
                f"wind errors cover {self.errors.shape[1]} farms, "
                f"{len(self.farms)} declared")

    @property
    def n(self) -> int:
        return self.errors.shape[0]

    @property
    def horizon(self) -> int:
        return self.errors.shape[2]

    @classmethod
    def from_rows(cls, farms, rows, horizon: int) -> "WindScenarioSet":
        """Rows of width W*T, farm-major then time (the wind CSV layout)."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        w = len(farms)
        if rows.shape[1] != w * horizon:
            raise ModelError(
                f"wind error rows are {rows.shape[1]} wide, expected "
                f"W*T = {w * horizon}")
        return cls(farms=farms, errors=rows.reshape(rows.shape[0], w, horizon))

    def to_rows(self) -> np.ndarray:
        return self.errors.reshape(self.n, -1)


def aggregate_errors(wind: WindScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-(scenario, t) system surplus and deficit of renewable output.

    omega_plus = max(0, sum over farms), omega_minus = min(0, sum): plain
    data transforms, so the kink never reaches the LP.  Exactly one of the
    two is nonzero per entry.
    """
    total = wind.errors.sum(axis=1)
    return np.maximum(total, 0.0), np.minimum(total, 0.0)


@dataclass
class Bus:
    id: int
    fixed_load: np.ndarray  # (T,) MW

    def __post_init__(self):
        self.fixed_load = np.atleast_1d(np.asarray(self.fixed_load, dtype=float))


@dataclass
class Line:
    from_bus: int
    to_bus: int
    capacity: float
    reactance: float | None = None
    epsilon: float = 0.1
    rho: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.capacity <= 0:
            raise ModelError(f"line {self.name!r}: capacity must be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise ModelError(f"line {self.name!r}: epsilon outside [0, 1)")
        if self.rho < 0.0:
            raise ModelError(f"line {self.name!r}: negative rho")


@dataclass
class Network:
    buses: list[Bus]
    lines: list[Line] = field(default_factory=list)
    slack_bus: int = 0
    ptdf: np.ndarray | None = None  # (L, B), columns in bus list order

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate bus ids")
        if self.ptdf is not None:
            self.ptdf = np.atleast_2d(np.asarray(self.ptdf, dtype=float))
            if self.ptdf.shape != (len(self.lines), len(self.buses)):
                raise ModelError(
                    f"ptdf must be (lines x buses) = "
                    f"{(len(self.lines), len(self.buses))}, got {self.ptdf.shape}")

    def bus_pos(self, bus_id: int) -> int:
        for k, b in enumerate(self.buses):
            if b.id == bus_id:
                return k
        raise ModelError(f"unknown bus id {bus_id}")

    def resolved_ptdf(self) -> np.ndarray:
        if self.ptdf is not None:
            return self.ptdf
        return compute_ptdf(self)


def compute_ptdf(network: Network) -> np.ndarray:
    """DC power-transfer distribution factors relative to the slack bus.

    Entry (l, k) is the flow change on line l (oriented from_bus -> to_bus)
    per MW injected at bus k and withdrawn at the slack.  The slack column
    is identically zero.
    """
    nb = len(network.buses)
    nl = len(network.lines)
    if nl == 0:
        return np.zeros((0, nb))
    for ln in network.lines:
        if ln.reactance is None or ln.reactance <= 0:
            raise ModelError(
                f"line {ln.name!r}: positive reactance required to compute "
                "the ptdf (or supply network.ptdf directly)")
    # connectivity first: a singular reduced matrix gives a worse message
    adj = {b.id: set() for b in network.buses}
    for ln in network.lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    seen = {network.buses[0].id}
    stack = [network.buses[0].id]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != nb:
        raise ModelError("network is disconnected; ptdf undefined")

    B = np.zeros((nb, nb))
    for ln in network.lines:
        i = network.bus_pos(ln.from_bus)
        j = network.bus_pos(ln.to_bus)
        b = 1.0 / ln.reactance
        B[i, i] += b
        B[j, j] += b
        B[i, j] -= b
        B[j, i] -= b
    s = network.bus_pos(network.slack_bus)
    keep = [k for k in range(nb) if k != s]
    X = np.zeros((nb, nb))
    try:
        X[np.ix_(keep, keep)] = np.linalg.inv(B[np.ix_(keep, keep)])
    except np.linalg.LinAlgError:
        raise ModelError("singular susceptance matrix; ptdf undefined") from None
    ptdf = np.zeros((nl, nb))
    for li, ln in enumerate(network.lines):
        i = network.bus_pos(ln.from_bus)
        j = network.bus_pos(ln.to_bus)
        ptdf[li] = (X[i] - X[j]) / ln.reactance
    return ptdf


@dataclass
class DispatchCase:
    horizon: int
    step: float             # hours
    network: Network
    generators: list[Generator]
    adns: list[Adn] = field(default_factory=list)
    wind: WindScenarioSet | None = None
    options: dict = field(default_factory=dict)
    test_wind_rows: np.ndarray | None = None        # (n_test, W*T)
    test_boundary_rows: list[np.ndarray] | None = None  # per adn (n_test, 4T)

    def validate(self) -> None:
        T = self.horizon
        if T < 1 or self.step <= 0:
            raise ModelError("horizon must be >= 1 and step positive")
        if not self.generators:
            raise ModelError("at least one generator required")
        for b in self.network.buses:
            if b.fixed_load.shape != (T,):
                raise ModelError(f"bus {b.id}: fixed_load must have length {T}")
        for g in self.generators:
            self.network.bus_pos(g.bus)
        for d in self.adns:
            self.network.bus_pos(d.bus)
            if d.horizon != T:
                raise ModelError(f"adn {d.name!r}: boundaries cover "
                                 f"{d.horizon} steps, horizon is {T}")
        if self.wind is not None:
            if self.wind.horizon != T:
                raise ModelError("wind scenarios do not match the horizon")
            for f in self.wind.farms:
                self.network.bus_pos(f.bus)
                if f.forecast.shape != (T,):
                    raise ModelError("wind forecast must have length T")
            for d in self.adns:
                if d.n != self.wind.n:
                    raise ModelError(
                        f"adn {d.name!r} has {d.n} boundary scenarios, wind has "
                        f"{self.wind.n}; scenario-paired groups need equal counts")
        counts = {d.n for d in self.adns}
        if len(counts) > 1:
            raise ModelError("all adns must carry the same scenario count")

    @property
    def n_scenarios(self) -> int:
        if self.wind is not None:
            return self.wind.n
        if self.adns:
            return self.adns[0].n
        return 1


# -- variable indexing ---------------------------------------------------------

GEN_KINDS = ("p", "r_up", "r_dn", "a_up", "a_dn")
ADN_KINDS = ("adn_p", "adn_r_up", "adn_a_up")


class VarIndex:
    """Flat column layout of the dispatch decision vector.

    Order: per generator all segment powers (s-major then t), then the
    five per-(g,t) series, then per ADN the three per-(d,t) series.
    """

    def __init__(self, case: DispatchCase):
        self.case = case
        T = case.horizon
        self._col: dict[tuple, int] = {}
        self.names: list[str] = []

        def add(key: tuple, name: str):
            self._col[key] = len(self.names)
            self.names.append(name)

        for gi, g in enumerate(case.generators):
            tag = g.name or f"g{gi}"
            for s in range(len(g.segments)):
                for t in range(T):
                    add(("seg", gi, s, t), f"seg[{tag},{s},{t}]")
            for kind in GEN_KINDS:
                for t in range(T):
                    add((kind, gi, t), f"{kind}[{tag},{t}]")
        for di, d in enumerate(case.adns):
            tag = d.name or f"d{di}"
            for kind in ADN_KINDS:
                for t in range(T):
                    add((kind, di, t), f"{kind}[{tag},{t}]")

    def col(self, kind: str, *ids: int) -> int:
        return self._col[(kind, *ids)]

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def value(self, x: np.ndarray, kind: str, *ids: int) -> float:
        return float(x[self.col(kind, *ids)])

    def series(self, x: np.ndarray, kind: str, *ids: int) -> np.ndarray:
        T = self.case.horizon
        return np.array([x[self.col(kind, *ids, t)] for t in range(T)])


# -- model assembly --------------------------------------------------------------

@dataclass
class DispatchModel:
    """Compiled dispatch: the chance-constrained LP plus bookkeeping."""

    problem: CcpProblem
    index: VarIndex
    cost_offset: float      # fixed generator cost, not part of the LP vector
    case: DispatchCase

    def group_labels(self) -> list[str]:
        return [g.label for g in self.problem.groups]

    def test_sample_sets(self) -> list[SampleSet] | None:
        """Held-out per-group scenario sets from the case's embedded test
        data, stacked exactly like the training groups."""
        case = self.case
        if case.test_wind_rows is None and case.test_boundary_rows is None:
            return None
        W = len(case.wind.farms) if case.wind is not None else 0
        T = case.horizon
        if case.test_wind_rows is not None:
            flat = np.atleast_2d(np.asarray(case.test_wind_rows, dtype=float))
            errors = flat.reshape(flat.shape[0], W, T) if W else \
                np.zeros((flat.shape[0], 0, T))
        else:
            n_test = np.atleast_2d(case.test_boundary_rows[0]).shape[0]
            errors = np.zeros((n_test, 0, T))
        boundaries = None
        if case.adns:
            if case.test_boundary_rows is None:
                raise ModelError("case embeds wind test data but no adn "
                                 "boundary test data")
            boundaries = [Adn.from_rows(d.bus, rows, T, name=d.name + "-test")
                          for d, rows in zip(case.adns, case.test_boundary_rows)]
        stacks = _group_scenario_stacks(case, errors, boundaries)
        return [SampleSet(s) for s in stacks]


def _group_scenario_stacks(case: DispatchCase, errors: np.ndarray,
                           adns: list[Adn] | None) -> list[np.ndarray]:
    """Per-group stacked scenario matrices, in group order (generators,
    ADNs, lines).  ``errors`` is an (n, W, T) tensor; ``adns`` supplies the
    boundary realizations (defaults to the case's own)."""
    adns = case.adns if adns is None else adns
    n = errors.shape[0]
    total = errors.sum(axis=1)
    omega_p = np.maximum(total, 0.0)
    omega_m = np.minimum(total, 0.0)
    gen_stack = np.hstack([omega_p, omega_m])
    stacks = [gen_stack for _ in case.generators]
    for d in adns:
        if d.n != n:
            raise ModelError(f"adn {d.name!r}: {d.n} boundary scenarios vs "
                             f"{n} wind scenarios")
        stacks.append(np.hstack([omega_p, d.p_lower, d.p_upper,
                                 d.e_lower, d.e_upper]))
    flat_errors = errors.reshape(n, -1)
    line_stack = np.hstack([flat_errors, omega_p, omega_m])
    stacks.extend(line_stack for _ in case.network.lines)
    return stacks


def build_ccp(case: DispatchCase, rho_override: float | None = None) -> DispatchModel:
    """Compile the dispatch case into min-cost LP + one JCC per generator,
    ADN, and line.

    Deterministic rows: segment anchoring P = p_min + sum(seg), system
    balance, participation partitions (up: generators only; down:
    generators plus ADNs), capacity-with-reserve, ramping.  Scenario rows
    (in the groups): reserve adequacy against the error aggregates,
    ADN power/energy boundaries, PTDF line limits under recourse.
    ``rho_override`` replaces every group's Wasserstein radius (sweeps).
    """
    case.validate()
    T, dt = case.horizon, case.step
    idx = VarIndex(case)
    nv = idx.n_vars
    gens, adns, lines = case.generators, case.adns, case.network.lines
    printed_low = bool(case.options.get("printed_low_reserve_bound", False))

    c = np.zeros(nv)
    for gi, g in enumerate(gens):
        for s, seg in enumerate(g.segments):
            for t in range(T):
                c[idx.col("seg", gi, s, t)] = seg.cost * dt
        for t in range(T):
            c[idx.col("r_up", gi, t)] = g.reserve_cost_up * dt
            c[idx.col("r_dn", gi, t)] = g.reserve_cost_dn * dt
    for di, d in enumerate(adns):
        for t in range(T):
            c[idx.col("adn_r_up", di, t)] = d.reserve_cost_up * dt
    cost_offset = dt * T * sum(g.fixed_cost for g in gens)

    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    for gi, g in enumerate(gens):
        for s, seg in enumerate(g.segments):
            for t in range(T):
                col = idx.col("seg", gi, s, t)
                lower[col] = 0.0
                upper[col] = seg.width
        for kind in ("r_up", "r_dn"):
            for t in range(T):
                lower[idx.col(kind, gi, t)] = 0.0
        for kind in ("a_up", "a_dn"):
            for t in range(T):
                col = idx.col(kind, gi, t)
                lower[col] = 0.0
                upper[col] = 1.0
    for di in range(len(adns)):
        for t in range(T):
            lower[idx.col("adn_r_up", di, t)] = 0.0
            col = idx.col("adn_a_up", di, t)
            lower[col] = 0.0
            upper[col] = 1.0

    eq_rows, eq_rhs = [], []
    # segment anchoring: p[g,t] - sum_s seg[g,s,t] = p_min
    for gi, g in enumerate(gens):
        for t in range(T):
            row = np.zeros(nv)
            row[idx.col("p", gi, t)] = 1.0
            for s in range(len(g.segments)):
                row[idx.col("seg", gi, s, t)] = -1.0
            eq_rows.append(row)
            eq_rhs.append(g.p_min)
    # balance: sum_g p + sum_w forecast = sum_d adn_p + fixed load
    wind_fc = np.zeros(T)
    if case.wind is not None:
        for f in case.wind.farms:
            wind_fc = wind_fc + f.forecast
    load = np.zeros(T)
    for b in case.network.buses:
        load = load + b.fixed_load
    for t in range(T):
        row = np.zeros(nv)
        for gi in range(len(gens)):
            row[idx.col("p", gi, t)] = 1.0
        for di in range(len(adns)):
            row[idx.col("adn_p", di, t)] = -1.0
        eq_rows.append(row)
        eq_rhs.append(load[t] - wind_fc[t])
    # participation partitions
    for t in range(T):
        row = np.zeros(nv)
        for gi in range(len(gens)):
            row[idx.col("a_up", gi, t)] = 1.0
        eq_rows.append(row)
        eq_rhs.append(1.0)
    for t in range(T):
        row = np.zeros(nv)
        for gi in range(len(gens)):
            row[idx.col("a_dn", gi, t)] = 1.0
        for di in range(len(adns)):
            row[idx.col("adn_a_up", di, t)] = 1.0
        eq_rows.append(row)
        eq_rhs.append(1.0)

    ineq_rows, ineq_rhs = [], []
    for gi, g in enumerate(gens):
        for t in range(T):
            # p + r_up <= p_max
            row = np.zeros(nv)
            row[idx.col("p", gi, t)] = 1.0
            row[idx.col("r_up", gi, t)] = 1.0
            ineq_rows.append(row)
            ineq_rhs.append(g.p_max)
            # headroom below: p - r_dn >= p_min.  The printed form
            # p - r_dn <= p_min is available as an option.
            row = np.zeros(nv)
            if printed_low:
                row[idx.col("p", gi, t)] = 1.0
                row[idx.col("r_dn", gi, t)] = -1.0
                ineq_rhs.append(g.p_min)
            else:
                row[idx.col("p", gi, t)] = -1.0
                row[idx.col("r_dn", gi, t)] = 1.0
                ineq_rhs.append(-g.p_min)
            ineq_rows.append(row)
        for t in range(T - 1):
            # ramp_dn*dt <= p[t+1] - p[t] <= ramp_up*dt
            row = np.zeros(nv)
            row[idx.col("p", gi, t + 1)] = 1.0
            row[idx.col("p", gi, t)] = -1.0
            ineq_rows.append(row)
            ineq_rhs.append(g.ramp_up * dt)
            ineq_rows.append(-row)
            ineq_rhs.append(-g.ramp_dn * dt)

    polytope = Polytope(
        G=np.array(ineq_rows), h=np.array(ineq_rhs),
        A_eq=np.array(eq_rows), b_eq=np.array(eq_rhs),
        lower=lower, upper=upper)

    # -- chance groups --
    if case.wind is not None:
        errors = case.wind.errors
    else:
        errors = np.zeros((case.n_scenarios, 0, T))
    stacks = _group_scenario_stacks(case, errors, None)
    groups = []
    gi_stack = 0

    def rho_of(base: float) -> float:
        return base if rho_override is None else float(rho_override)

    for gi, g in enumerate(gens):
        # xi = [omega_plus (T), omega_minus (T)]
        cons = []
        for t in range(T):
            A = np.zeros((2 * T, nv))
            A[t, idx.col("a_dn", gi, t)] = 1.0      # a_dn * omega_plus
            cv = np.zeros(nv)
            cv[idx.col("r_dn", gi, t)] = -1.0
            cons.append(BiAffineConstraint(A=A, a0=np.zeros(2 * T), c=cv))
        for t in range(T):
            A = np.zeros((2 * T, nv))
            A[T + t, idx.col("a_up", gi, t)] = -1.0  # -a_up * omega_minus
            cv = np.zeros(nv)
            cv[idx.col("r_up", gi, t)] = -1.0
            cons.append(BiAffineConstraint(A=A, a0=np.zeros(2 * T), c=cv))
        groups.append(JccGroup(
            constraints=cons, samples=SampleSet(stacks[gi_stack]),
            epsilon=g.epsilon, rho=rho_of(g.rho),
            label=g.name or f"gen{gi}"))
        gi_stack += 1

    for di, d in enumerate(adns):
        # xi = [omega_plus (T), p_lo (T), p_hi (T), e_lo (T), e_hi (T)]
        k = 5 * T
        cons = []
        for t in range(T):      # p_lo_t - adn_p_t <= 0
            a0 = np.zeros(k)
            a0[T + t] = 1.0
            cv = np.zeros(nv)
            cv[idx.col("adn_p", di, t)] = -1.0
            cons.append(BiAffineConstraint(A=np.zeros((k, nv)), a0=a0, c=cv))
        for t in range(T):      # adn_p_t + r_t - p_hi_t <= 0
            a0 = np.zeros(k)
            a0[2 * T + t] = -1.0
            cv = np.zeros(nv)
            cv[idx.col("adn_p", di, t)] = 1.0
            cv[idx.col("adn_r_up", di, t)] = 1.0
            cons.append(BiAffineConstraint(A=np.zeros((k, nv)), a0=a0, c=cv))
        for t in range(T):      # e_lo_t - dt*sum_{tau<=t} adn_p_tau <= 0
            a0 = np.zeros(k)
            a0[3 * T + t] = 1.0
            cv = np.zeros(nv)
            for tau in range(t + 1):
                cv[idx.col("adn_p", di, tau)] = -dt
            cons.append(BiAffineConstraint(A=np.zeros((k, nv)), a0=a0, c=cv))
        for t in range(T):      # dt*sum_{tau<=t} (adn_p + r) - e_hi_t <= 0
            a0 = np.zeros(k)
            a0[4 * T + t] = -1.0
            cv = np.zeros(nv)
            for tau in range(t + 1):
                cv[idx.col("adn_p", di, tau)] = dt
                cv[idx.col("adn_r_up", di, tau)] = dt
            cons.append(BiAffineConstraint(A=np.zeros((k, nv)), a0=a0, c=cv))
        for t in range(T):      # a_up * omega_plus - r <= 0
            A = np.zeros((k, nv))
            A[t, idx.col("adn_a_up", di, t)] = 1.0
            cv = np.zeros(nv)
            cv[idx.col("adn_r_up", di, t)] = -1.0
            cons.append(BiAffineConstraint(A=A, a0=np.zeros(k), c=cv))
        groups.append(JccGroup(
            constraints=cons, samples=SampleSet(stacks[gi_stack]),
            epsilon=d.epsilon, rho=rho_of(d.rho),
            label=d.name or f"adn{di}"))
        gi_stack += 1

    if lines:
        psi = case.network.resolved_ptdf()
        W = errors.shape[1]
        k = (W + 2) * T
        for li, ln in enumerate(lines):
            cons = []
            psi_g = [psi[li, case.network.bus_pos(g.bus)] for g in gens]
            psi_d = [psi[li, case.network.bus_pos(d.bus)] for d in adns]
            psi_w = ([psi[li, case.network.bus_pos(f.bus)]
                      for f in case.wind.farms] if case.wind is not None else [])
            psi_b = [psi[li, case.network.bus_pos(b.id)]
                     for b in case.network.buses]
            for t in range(T):
                const = 0.0
                if case.wind is not None:
                    const += sum(pw * f.forecast[t]
                                 for pw, f in zip(psi_w, case.wind.farms))
                const -= sum(pb * b.fixed_load[t]
                             for pb, b in zip(psi_b, case.network.buses))
                for sign in (1.0, -1.0):
                    A = np.zeros((k, nv))
                    a0 = np.zeros(k)
                    cv = np.zeros(nv)
                    for gpos, pg in enumerate(psi_g):
                        cv[idx.col("p", gpos, t)] = sign * pg
                        A[W * T + t, idx.col("a_dn", gpos, t)] = -sign * pg
                        A[W * T + T + t, idx.col("a_up", gpos, t)] = -sign * pg
                    for dpos, pd in enumerate(psi_d):
                        cv[idx.col("adn_p", dpos, t)] = -sign * pd
                        A[W * T + t, idx.col("adn_a_up", dpos, t)] = -sign * pd
                    for w in range(W):
                        a0[w * T + t] = sign * psi_w[w]
                    cons.append(BiAffineConstraint(
                        A=A, a0=a0, c=cv, d=sign * const - ln.capacity))
            groups.append(JccGroup(
                constraints=cons, samples=SampleSet(stacks[gi_stack]),
                epsilon=ln.epsilon, rho=rho_of(ln.rho),
                label=ln.name or f"line{li}"))
            gi_stack += 1

    problem = CcpProblem(objective=c, polytope=polytope, groups=groups,
                         var_names=idx.names)
    return DispatchModel(problem=problem, index=idx, cost_offset=cost_offset,
                         case=case)


# -- audits ----------------------------------------------------------------------

def audit_dispatch(model: DispatchModel, x: np.ndarray) -> dict[str, float]:
    """Physical-consistency residuals of a dispatch vector.

    Keys: balance (max |MW| mismatch), partition_up / partition_down (max
    deviation from 1), min_factor (most negative participation factor),
    segment_sum (max |p - p_min - sum seg|), segment_order (largest amount
    by which a segment is used while a cheaper one below it has slack).
    """
    case, idx = model.case, model.index
    T = case.horizon
    x = np.asarray(x, dtype=float)
    wind_fc = np.zeros(T)
    if case.wind is not None:
        for f in case.wind.farms:
            wind_fc = wind_fc + f.forecast
    load = np.zeros(T)
    for b in case.network.buses:
        load = load + b.fixed_load

    balance = 0.0
    part_up = 0.0
    part_dn = 0.0
    min_factor = np.inf
    seg_sum = 0.0
    seg_order = 0.0
    for t in range(T):
        gen_p = sum(idx.value(x, "p", gi, t) for gi in range(len(case.generators)))
        adn_p = sum(idx.value(x, "adn_p", di, t) for di in range(len(case.adns)))
        balance = max(balance, abs(gen_p + wind_fc[t] - adn_p - load[t]))
        su = sum(idx.value(x, "a_up", gi, t) for gi in range(len(case.generators)))
        sd = sum(idx.value(x, "a_dn", gi, t) for gi in range(len(case.generators)))
        sd += sum(idx.value(x, "adn_a_up", di, t) for di in range(len(case.adns)))
        part_up = max(part_up, abs(su - 1.0))
        part_dn = max(part_dn, abs(sd - 1.0))
        for gi in range(len(case.generators)):
            for kind in ("a_up", "a_dn"):
                min_factor = min(min_factor, idx.value(x, kind, gi, t))
        for di in range(len(case.adns)):
            min_factor = min(min_factor, idx.value(x, "adn_a_up", di, t))
    for gi, g in enumerate(case.generators):
        for t in range(T):
            segs = [idx.value(x, "seg", gi, s, t)
                    for s in range(len(g.segments))]
            seg_sum = max(seg_sum, abs(
                idx.value(x, "p", gi, t) - g.p_min - sum(segs)))
            for s in range(len(segs) - 1):
                slack = g.segments[s].width - segs[s]
                seg_order = max(seg_order, min(slack, segs[s + 1]))
    return {"balance": balance, "partition_up": part_up,
            "partition_down": part_dn, "min_factor": float(min_factor),
            "segment_sum": seg_sum, "segment_order": seg_order}


# -- solves ----------------------------------------------------------------------

def deterministic_dispatch(case: DispatchCase, scenario_reduction: str = "mean",
                           backend=None):
    """Dispatch with every uncertain quantity at its scenario mean and all
    group constraints imposed hard (no relaxation, no margin).  Supplies
    the lower level bound."""
    from . import algorithms
    from . import lp as lp_mod
    if scenario_reduction != "mean":
        raise ModelError(f"unsupported scenario reduction {scenario_reduction!r}")
    model = build_ccp(case)
    sol = lp_mod.solve_lp(algorithms.mean_value_lp(model.problem), backend)
    if sol.status != lp_mod.OPTIMAL:
        return model, algorithms.SolveReport(
            method="deterministic", status=algorithms.INFEASIBLE_STATUS,
            x=None, objective=None, per_group=[])
    x = sol.x[:model.problem.n_vars]
    return model, algorithms.SolveReport(
        method="deterministic", status=algorithms.FEASIBLE, x=x,
        objective=float(model.problem.objective @ x),
        per_group=algorithms._group_stats(model.problem, x))


def rho_sweep(case: DispatchCase, rho_grid, methods=("also-x", "cvar"),
              backend=None) -> list[dict]:
    """Solve the case across a shared-radius grid.

    One row per (rho, method): status, objective (LP part), full cost
    (objective + fixed), per-group out-of-sample reliability when the case
    embeds test data (in-sample satisfaction rates otherwise).
    """
    from . import algorithms
    rows = []
    for rho in rho_grid:
        if rho < 0:
            raise ModelError("rho grid entries must be nonnegative")
        model = build_ccp(case, rho_override=float(rho))
        test_sets = model.test_sample_sets()
        for method in methods:
            solver = algorithms.SOLVERS.get(method)
            if solver is None:
                raise ModelError(f"unknown method {method!r}")
            report = solver(model.problem, backend=backend)
            if report.is_feasible:
                if test_sets is not None:
                    rel = algorithms.out_of_sample_reliability(
                        report.x, model.problem.groups, test_sets)
                else:
                    rel = [1.0 - g.violation_rate for g in report.per_group]
            else:
                rel = None
            rows.append({
                "rho": float(rho), "method": method, "status": report.status,
                "objective": report.objective,
                "cost": (None if report.objective is None
                         else report.objective + model.cost_offset),
                "reliability": rel,
                "labels": model.group_labels(),
                "report": report,
            })
    return rows


# -- case (de)serialization --------------------------------------------------------

def _need(data: dict, key: str, where: str):
    if key not in data:
        raise ModelError(f"{where}: missing field {key!r}")
    return data[key]


def _rows_or_csv(value, where: str, base_dir: Path | None):
    """Scenario payloads are either inline rows or {"csv": path}."""
    if isinstance(value, dict):
        path = Path(_need(value, "csv", where))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return SampleSet.from_csv(path).data
    return np.atleast_2d(np.asarray(value, dtype=float))


def case_from_dict(data: dict, base_dir: Path | None = None) -> DispatchCase:
    options = dict(data.get("options", {}))
    variant = options.get("variant")
    if variant is not None and variant not in VARIANTS:
        raise ModelError(f"/options/variant: unknown variant {variant!r}")
    horizon = data.get("horizon", VARIANTS[variant][0] if variant else None)
    step = data.get("step", VARIANTS[variant][1] if variant else None)
    if horizon is None or step is None:
        raise ModelError("/horizon,/step: give both, or set options.variant")
    horizon = int(horizon)

    net_data = _need(data, "network", "/")
    buses = []
    for bi, bd in enumerate(net_data.get("buses", [])):
        where = f"/network/buses/{bi}"
        buses.append(Bus(id=int(_need(bd, "id", where)),
                         fixed_load=_need(bd, "fixed_load", where)))
    lines = []
    for li, ld in enumerate(net_data.get("lines", [])):
        where = f"/network/lines/{li}"
        lines.append(Line(
            from_bus=int(_need(ld, "from_bus", where)),
            to_bus=int(_need(ld, "to_bus", where)),
            capacity=float(_need(ld, "capacity", where)),
            reactance=ld.get("reactance"),
            epsilon=float(ld.get("epsilon", 0.1)),
            rho=float(ld.get("rho", 0.0)),
            name=ld.get("name", f"line{li}")))
    network = Network(buses=buses, lines=lines,
                      slack_bus=int(net_data.get("slack_bus", 0)),
                      ptdf=net_data.get("ptdf"))
    if lines and network.ptdf is None:
        missing = [ln.name for ln in lines if ln.reactance is None]
        if missing:
            raise ModelError(
                f"/network: no 'ptdf' given and lines {missing} lack "
                "'reactance'; provide one of the two")

    generators = []
    for gi, gd in enumerate(data.get("generators", [])):
        where = f"/generators/{gi}"
        segs = [Segment(width=_need(sd, "width", f"{where}/segments/{si}"),
                        cost=_need(sd, "cost", f"{where}/segments/{si}"))
                for si, sd in enumerate(_need(gd, "segments", where))]
        generators.append(Generator(
            bus=int(_need(gd, "bus", where)),
            p_min=float(_need(gd, "p_min", where)),
            p_max=float(_need(gd, "p_max", where)),
            ramp_dn=float(_need(gd, "ramp_dn", where)),
            ramp_up=float(_need(gd, "ramp_up", where)),
            segments=segs,
            fixed_cost=float(gd.get("fixed_cost", 0.0)),
            reserve_cost_up=float(gd.get("reserve_cost_up", 0.0)),
            reserve_cost_dn=float(gd.get("reserve_cost_dn", 0.0)),
            epsilon=float(gd.get("epsilon", 0.05)),
            rho=float(gd.get("rho", 0.0)),
            name=gd.get("name", f"g{gi}")))

    adns = []
    test_boundary_rows = []
    for di, dd in enumerate(data.get("adns", [])):
        where = f"/adns/{di}"
        rows = _rows_or_csv(_need(dd, "boundary_samples", where), where, base_dir)
        adns.append(Adn.from_rows(
            bus=int(_need(dd, "bus", where)), rows=rows, horizon=horizon,
            reserve_cost_up=float(dd.get("reserve_cost_up", 0.0)),
            epsilon=float(dd.get("epsilon", 0.05)),
            rho=float(dd.get("rho", 0.0)),
            name=dd.get("name", f"d{di}")))
        if "test_boundary_samples" in dd:
            test_boundary_rows.append(
                _rows_or_csv(dd["test_boundary_samples"], where, base_dir))

    wind = None
    test_wind_rows = None
    if "wind" in data and data["wind"] is not None:
        wd = data["wind"]
        farms = [WindFarm(bus=int(_need(fd, "bus", f"/wind/farms/{fi}")),
                          forecast=_need(fd, "forecast", f"/wind/farms/{fi}"))
                 for fi, fd in enumerate(_need(wd, "farms", "/wind"))]
        rows = _rows_or_csv(_need(wd, "errors", "/wind"), "/wind", base_dir)
        wind = WindScenarioSet.from_rows(farms, rows, horizon)
        if "test_errors" in wd:
            test_wind_rows = _rows_or_csv(wd["test_errors"], "/wind", base_dir)

    if test_boundary_rows and len(test_boundary_rows) != len(adns):
        raise ModelError("/adns: test_boundary_samples must be given for "
                         "every adn or none")
    case = DispatchCase(
        horizon=horizon, step=float(step), network=network,
        generators=generators, adns=adns, wind=wind, options=options,
        test_wind_rows=test_wind_rows,
        test_boundary_rows=test_boundary_rows or None)
    case.validate()
    return case


def case_to_dict(case: DispatchCase) -> dict:
    data = {
        "horizon": case.horizon,
        "step": case.step,
        "options": dict(case.options),
        "network": {
            "slack_bus": case.network.slack_bus,
            "buses": [{"id": b.id, "fixed_load": b.fixed_load.tolist()}
                      for b in case.network.buses],
            "lines": [{"from_bus": ln.from_bus, "to_bus": ln.to_bus,
                       "capacity": ln.capacity, "reactance": ln.reactance,
                       "epsilon": ln.epsilon, "rho": ln.rho, "name": ln.name}
                      for ln in case.network.lines],
        },
        "generators": [{
            "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
            "ramp_dn": g.ramp_dn, "ramp_up": g.ramp_up,
            "segments": [{"width": s.width, "cost": s.cost} for s in g.segments],
            "fixed_cost": g.fixed_cost,
            "reserve_cost_up": g.reserve_cost_up,
            "reserve_cost_dn": g.reserve_cost_dn,
            "epsilon": g.epsilon, "rho": g.rho, "name": g.name,
        } for g in case.generators],
        "adns": [{
            "bus": d.bus,
            "boundary_samples": d.to_rows().tolist(),
            "reserve_cost_up": d.reserve_cost_up,
            "epsilon": d.epsilon, "rho": d.rho, "name": d.name,
        } for d in case.adns],
    }
    if case.network.ptdf is not None:
        data["network"]["ptdf"] = case.network.ptdf.tolist()
    if case.wind is not None:
        data["wind"] = {
            "farms": [{"bus": f.bus, "forecast": f.forecast.tolist()}
                      for f in case.wind.farms],
            "errors": case.wind.to_rows().tolist(),
        }
        if case.test_wind_rows is not None:
            data["wind"]["test_errors"] = np.asarray(case.test_wind_rows).tolist()
    if case.test_boundary_rows is not None:
        for dd, rows in zip(data["adns"], case.test_boundary_rows):
            dd["test_boundary_samples"] = np.asarray(rows).tolist()
    return data


def load_case(path) -> DispatchCase:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from None
    return case_from_dict(data, base_dir=path.parent)
