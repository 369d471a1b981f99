"""Problem model: scenario sets, bi-affine constraints, chance groups.

A problem is  min c'x  over a polytope, subject to one joint chance
constraint per group:  P[ g_j(x, xi) <= 0  for all j ] >= 1 - epsilon,
estimated on that group's scenario set.  Every g is bi-affine,

    g(x, xi) = xi'(A x + a0) + c'x + d,

which keeps the scenario rows linear in x and admits a closed-form
worst-case over a Wasserstein ball of radius rho around the empirical
scenarios:  gbar(x, xi) = rho * ||A x + a0||_dual + g(x, xi),
where the dual norm pairs with the chosen uncertainty norm.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

# A scenario counts as satisfied when its worst constraint value is below
# this; absorbs LP vertex noise without hiding real violations.
TOL_ZERO = 1e-6

NORMS = ("l1", "l2", "linf")
_DUAL = {"l1": "linf", "l2": "l2", "linf": "l1"}


def dual_norm(norm: str) -> str:
    """Name of the norm dual to an uncertainty norm."""
    try:
        return _DUAL[norm]
    except KeyError:
        raise ModelError(f"unknown norm {norm!r}; expected one of {NORMS}") from None


def norm_value(v: np.ndarray, norm: str) -> float:
    v = np.asarray(v, dtype=float)
    if norm == "l1":
        return float(np.sum(np.abs(v)))
    if norm == "l2":
        return float(np.sqrt(np.sum(v * v)))
    if norm == "linf":
        return float(np.max(np.abs(v), initial=0.0))
    raise ModelError(f"unknown norm {norm!r}; expected one of {NORMS}")


@dataclass
class SampleSet:
    """n scenarios of a k-dimensional uncertain vector, one per row."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.ndim != 2:
            raise ModelError("samples must form a 2-d array (scenarios x dim)")
        if not np.all(np.isfinite(self.data)):
            raise ModelError("samples must be finite")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.data.mean(axis=0)

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for i, row in enumerate(reader):
                row = [cell.strip() for cell in row if cell.strip() != ""]
                if not row:
                    continue
                try:
                    rows.append([float(cell) for cell in row])
                except ValueError:
                    if i == 0:
                        continue  # header row
                    raise ModelError(f"{path}: non-numeric value on line {i + 1}") from None
        if not rows:
            raise ModelError(f"{path}: no scenario rows found")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ModelError(f"{path}: ragged rows (widths {sorted(widths)})")
        return cls(np.asarray(rows))

    def to_csv(self, path, header: list[str] | None = None) -> None:
        names = header or [f"xi{j}" for j in range(self.dim)]
        if len(names) != self.dim:
            raise ModelError("header length must match sample dimension")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for row in self.data:
                writer.writerow([repr(float(v)) for v in row])


@dataclass
class BiAffineConstraint:
    """g(x, xi) = xi'(A x + a0) + c'x + d  <= 0 (target form)."""

    A: np.ndarray
    a0: np.ndarray
    c: np.ndarray
    d: float = 0.0

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.a0 = np.atleast_1d(np.asarray(self.a0, dtype=float))
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        self.d = float(self.d)
        k, n = self.A.shape
        if self.a0.shape != (k,):
            raise ModelError(f"a0 must have length {k} (rows of A), got {self.a0.shape}")
        if self.c.shape != (n,):
            raise ModelError(f"c must have length {n} (cols of A), got {self.c.shape}")
        for name, arr in (("A", self.A), ("a0", self.a0), ("c", self.c)):
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} must be finite")
        if not np.isfinite(self.d):
            raise ModelError("d must be finite")

    @property
    def xi_dim(self) -> int:
        return self.A.shape[0]

    @property
    def x_dim(self) -> int:
        return self.A.shape[1]

    def a(self, x: np.ndarray) -> np.ndarray:
        """Uncertainty-facing coefficient vector at decision x."""
        return self.A @ x + self.a0

    def b(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.d)

    def evaluate(self, x: np.ndarray, xi: np.ndarray) -> float:
        return float(np.asarray(xi, dtype=float) @ self.a(x)) + self.b(x)

    def evaluate_many(self, x: np.ndarray, scenarios: np.ndarray) -> np.ndarray:
        """Constraint values across scenario rows (n,)."""
        return np.asarray(scenarios, dtype=float) @ self.a(x) + self.b(x)


@dataclass
class RobustifiedConstraint:
    """Worst case of a bi-affine constraint over a Wasserstein ball.

    gbar(x, xi) = rho * ||a(x)||_dual + g(x, xi).  rho = 0 reduces exactly
    to the plain constraint.
    """

    base: BiAffineConstraint
    rho: float
    norm: str = "l1"

    def __post_init__(self):
        self.rho = float(self.rho)
        if self.rho < 0:
            raise ModelError("rho must be nonnegative")
        dual_norm(self.norm)  # validates the name

    def margin(self, x: np.ndarray) -> float:
        if self.rho == 0.0:
            return 0.0
        return self.rho * norm_value(self.base.a(x), dual_norm(self.norm))

    def evaluate(self, x: np.ndarray, xi: np.ndarray) -> float:
        return self.margin(x) + self.base.evaluate(x, xi)

    def evaluate_many(self, x: np.ndarray, scenarios: np.ndarray) -> np.ndarray:
        return self.margin(x) + self.base.evaluate_many(x, scenarios)


def robustified_constraint(g: BiAffineConstraint, rho: float,
                           norm: str = "l1") -> RobustifiedConstraint:
    """Wrap a bi-affine constraint with its Wasserstein worst-case margin.

    Point evaluation works for any of {l1, l2, linf}.  Embedding into an LP
    is only possible for l1 (dual linf: one bound variable per constraint)
    and linf (dual l1: one bound variable per uncertainty component); the
    LP assemblers reject l2 groups with a ModelError.
    """
    return RobustifiedConstraint(g, rho, norm)


@dataclass
class Polytope:
    """Deterministic feasible set: G x <= h, A_eq x = b_eq, lower/upper."""

    G: np.ndarray | None = None
    h: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def validate(self, n: int) -> None:
        if (self.G is None) != (self.h is None):
            raise ModelError("polytope: G and h must be given together")
        if (self.A_eq is None) != (self.b_eq is None):
            raise ModelError("polytope: A_eq and b_eq must be given together")
        if self.G is not None:
            self.h = np.atleast_1d(np.asarray(self.h, dtype=float))
            self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
            if self.G.shape != (self.h.size, n):
                raise ModelError(f"polytope: G must be {(self.h.size, n)}, got {self.G.shape}")
        if self.A_eq is not None:
            self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            if self.A_eq.shape != (self.b_eq.size, n):
                raise ModelError(
                    f"polytope: A_eq must be {(self.b_eq.size, n)}, got {self.A_eq.shape}")
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.atleast_1d(np.asarray(self.lower, dtype=float)))
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.atleast_1d(np.asarray(self.upper, dtype=float)))
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ModelError("polytope: bounds must match the variable count")

    @property
    def n_ineq(self) -> int:
        return 0 if self.G is None else self.G.shape[0]

    @property
    def n_eq(self) -> int:
        return 0 if self.A_eq is None else self.A_eq.shape[0]


@dataclass
class JccGroup:
    """One joint chance constraint: all member constraints must hold
    simultaneously with probability >= 1 - epsilon on this group's samples."""

    constraints: list[BiAffineConstraint]
    samples: SampleSet
    epsilon: float
    rho: float = 0.0
    norm: str = "l1"
    label: str = ""

    def __post_init__(self):
        if not self.constraints:
            raise ModelError(f"group {self.label!r}: needs at least one constraint")
        self.epsilon = float(self.epsilon)
        self.rho = float(self.rho)
        if not 0.0 <= self.epsilon < 1.0:
            raise ModelError(f"group {self.label!r}: epsilon must be in [0, 1)")
        if self.rho < 0.0:
            raise ModelError(f"group {self.label!r}: rho must be nonnegative")
        dual_norm(self.norm)
        k = self.samples.dim
        for j, g in enumerate(self.constraints):
            if g.xi_dim != k:
                raise ModelError(
                    f"group {self.label!r}: constraint {j} expects xi of dim "
                    f"{g.xi_dim}, samples have dim {k}")

    @property
    def n(self) -> int:
        return self.samples.n

    @property
    def x_dim(self) -> int:
        return self.constraints[0].x_dim

    def robustified(self, rho: float | None = None) -> list[RobustifiedConstraint]:
        r = self.rho if rho is None else rho
        return [robustified_constraint(g, r, self.norm) for g in self.constraints]


@dataclass
class CcpProblem:
    """min objective'x over polytope, s.t. one JCC per group."""

    objective: np.ndarray
    polytope: Polytope
    groups: list[JccGroup]
    var_names: list[str] | None = None

    def __post_init__(self):
        self.objective = np.atleast_1d(np.asarray(self.objective, dtype=float))
        n = self.objective.size
        if n == 0:
            raise ModelError("objective must be nonempty")
        self.polytope.validate(n)
        for g in self.groups:
            for j, con in enumerate(g.constraints):
                if con.x_dim != n:
                    raise ModelError(
                        f"group {g.label!r}: constraint {j} has x-dim "
                        f"{con.x_dim}, problem has {n} variables")
        if self.var_names is not None and len(self.var_names) != n:
            raise ModelError("var_names must match the variable count")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_groups(self) -> int:
        return len(self.groups)


@dataclass
class RelaxationState:
    """Per-group relaxation variables of the alternation: shortfalls s and
    activation weights z.  s is None before the first shortfall solve
    (the infinite-sentinel start, which skips the first delta test)."""

    z: list[np.ndarray]
    s: list[np.ndarray] | None = None

    @classmethod
    def full_activation(cls, problem: CcpProblem) -> "RelaxationState":
        return cls(z=[np.ones(g.n) for g in problem.groups], s=None)


@dataclass
class ViolationReport:
    """In-sample (or test-set) evaluation of one group at a point.

    Rates are formed by a single integer-count division so that, e.g.,
    16 violations out of 20 compares bit-equal to 16/20."""

    label: str
    epsilon: float
    n_satisfied: int
    n: int
    worst: np.ndarray            # per-scenario max constraint value
    tol: float = TOL_ZERO

    @property
    def rate(self) -> float:
        """Fraction of scenarios fully satisfied."""
        return self.n_satisfied / self.n

    @property
    def violation_rate(self) -> float:
        return (self.n - self.n_satisfied) / self.n

    @property
    def satisfied(self) -> bool:
        return self.violation_rate <= self.epsilon + 1e-12


def evaluate_group(group: JccGroup, x: np.ndarray,
                   scenarios: SampleSet | None = None,
                   rho_override: float | None = None,
                   tol: float = TOL_ZERO) -> ViolationReport:
    """Fraction of scenarios on which every group constraint holds at x.

    Uses the group's own samples unless ``scenarios`` is given (e.g. a
    held-out test set).  ``rho_override`` replaces the group's radius:
    pass 0.0 to measure raw (non-robustified) satisfaction.
    """
    data = (group.samples if scenarios is None else scenarios).data
    if data.shape[1] != group.samples.dim:
        raise ModelError(
            f"group {group.label!r}: test scenarios have dim {data.shape[1]}, "
            f"expected {group.samples.dim}")
    x = np.asarray(x, dtype=float)
    worst = np.full(data.shape[0], -np.inf)
    for rob in group.robustified(rho_override):
        worst = np.maximum(worst, rob.evaluate_many(x, data))
    n_sat = int(np.count_nonzero(worst <= tol))
    return ViolationReport(group.label, group.epsilon, n_sat, data.shape[0],
                           worst, tol)


def validate_problem(problem: CcpProblem) -> list[str]:
    """Non-throwing consistency scan; returns human-readable diagnostics."""
    notes = []
    n = problem.n_vars
    if not np.all(np.isfinite(problem.objective)):
        notes.append("objective has non-finite entries")
    if np.any(problem.polytope.lower > problem.polytope.upper):
        notes.append("polytope box is empty (lower > upper somewhere)")
    if not problem.groups:
        notes.append("problem has no chance groups (plain LP)")
    labels = [g.label for g in problem.groups]
    if len(set(labels)) != len(labels):
        notes.append("group labels are not unique")
    for g in problem.groups:
        where = f"group {g.label!r}"
        if g.samples.n == 0:
            notes.append(f"{where}: empty scenario set")
        if not np.all(np.isfinite(g.samples.data)):
            notes.append(f"{where}: NaN/inf in samples")
        if not 0.0 <= g.epsilon < 1.0:
            notes.append(f"{where}: epsilon {g.epsilon} outside [0, 1)")
        if g.rho < 0:
            notes.append(f"{where}: negative rho {g.rho}")
        if g.norm not in NORMS:
            notes.append(f"{where}: unknown norm {g.norm!r}")
        if g.epsilon * g.samples.n < 1.0 and g.epsilon > 0.0:
            notes.append(
                f"{where}: epsilon*n = {g.epsilon * g.samples.n:.3g} < 1, "
                "no whole scenario can be dropped")
        for j, con in enumerate(g.constraints):
            if con.x_dim != n:
                notes.append(f"{where}: constraint {j} x-dim {con.x_dim} != {n}")
            if con.xi_dim != g.samples.dim:
                notes.append(f"{where}: constraint {j} xi-dim {con.xi_dim} "
                             f"!= sample dim {g.samples.dim}")
    return notes


# -- serialization -----------------------------------------------------------

def _bounds_to_json(lower, upper):
    out = []
    for lo, hi in zip(lower, upper):
        entry = {}
        if np.isfinite(lo):
            entry["lower"] = float(lo)
        if np.isfinite(hi):
            entry["upper"] = float(hi)
        out.append(entry)
    return out


def _bounds_from_json(entries, n):
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for j, entry in enumerate(entries):
        if "lower" in entry:
            lower[j] = float(entry["lower"])
        if "upper" in entry:
            upper[j] = float(entry["upper"])
    return lower, upper


def problem_to_dict(problem: CcpProblem) -> dict:
    """JSON-ready dict; numbers survive a round trip bit-exactly."""
    poly = problem.polytope
    out = {
        "objective": problem.objective.tolist(),
        "polytope": {
            "bounds": _bounds_to_json(poly.lower, poly.upper),
        },
        "groups": [],
    }
    if problem.var_names is not None:
        out["var_names"] = list(problem.var_names)
    if poly.G is not None:
        out["polytope"]["ineq_lhs"] = poly.G.tolist()
        out["polytope"]["ineq_rhs"] = poly.h.tolist()
    if poly.A_eq is not None:
        out["polytope"]["eq_lhs"] = poly.A_eq.tolist()
        out["polytope"]["eq_rhs"] = poly.b_eq.tolist()
    for g in problem.groups:
        out["groups"].append({
            "label": g.label,
            "epsilon": g.epsilon,
            "rho": g.rho,
            "norm": g.norm,
            "constraints": [
                {"A": c.A.tolist(), "a0": c.a0.tolist(),
                 "c": c.c.tolist(), "d": c.d}
                for c in g.constraints
            ],
            "samples": g.samples.data.tolist(),
        })
    return out


def problem_from_dict(data: dict) -> CcpProblem:
    try:
        objective = np.asarray(data["objective"], dtype=float)
    except KeyError:
        raise ModelError("/objective: missing") from None
    n = objective.size
    poly_data = data.get("polytope", {})
    lower = upper = None
    if "bounds" in poly_data:
        lower, upper = _bounds_from_json(poly_data["bounds"], n)
    poly = Polytope(
        G=poly_data.get("ineq_lhs"), h=poly_data.get("ineq_rhs"),
        A_eq=poly_data.get("eq_lhs"), b_eq=poly_data.get("eq_rhs"),
        lower=lower, upper=upper)
    groups = []
    for gi, gd in enumerate(data.get("groups", [])):
        where = f"/groups/{gi}"
        try:
            constraints = [BiAffineConstraint(cd["A"], cd["a0"], cd["c"], cd["d"])
                           for cd in gd["constraints"]]
            group = JccGroup(
                constraints=constraints,
                samples=SampleSet(np.asarray(gd["samples"], dtype=float)),
                epsilon=gd["epsilon"],
                rho=gd.get("rho", 0.0),
                norm=gd.get("norm", "l1"),
                label=gd.get("label", f"group{gi}"))
        except KeyError as exc:
            raise ModelError(f"{where}: missing field {exc.args[0]!r}") from None
        groups.append(group)
    return CcpProblem(objective=objective, polytope=poly, groups=groups,
                      var_names=data.get("var_names"))
