"""Convex-weight quantifiers with machine-checkable dual certificates.

Each weight is the smallest mixing coefficient of a non-free component over
the relevant free set: local-hidden-state assemblages for steering, jointly
measurable sets for incompatibility, and PPT states for entanglement (exact
separability on 2x2 and 2x3, a lower bound otherwise).  All three programs
are driven through :func:`solve_conic`, and every result carries a dual
certificate renormalized so that its value on any free member is at least 1
while the input achieves ``1 - weight`` up to the reported gap.

Only the level-1 free sets are supported: no tractable membership
characterization is available for the level-``n`` sets with ``n >= 2``, so
those requests are rejected at the interface.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .qcore import (
    BipartiteState,
    MeasurementSet,
    ValidationError,
    dagger,
    hermitize,
    matrix_to_json,
)
from .steering import Assemblage, steer

__all__ = [
    "GAP_TOL",
    "RESIDUAL_TOL",
    "DESK_MAX_DIM",
    "DESK_MAX_STRATEGIES",
    "DESK_MAX_PRODUCT_DIM",
    "DeskScaleError",
    "SolverError",
    "DeterministicStrategySet",
    "PsdVariable",
    "ConstraintTerm",
    "OperatorConstraint",
    "ConicProblem",
    "ConicSolution",
    "solve_conic",
    "SteeringInequality",
    "IncompatibilityInequality",
    "EntanglementWitnessCertificate",
    "WeightResult",
    "WeightInequalityResult",
    "steering_weight",
    "incompatibility_weight",
    "entanglement_weight_ppt",
    "check_weight_inequality",
]

GAP_TOL = 1e-6
RESIDUAL_TOL = 1e-7

DESK_MAX_DIM = 6
DESK_MAX_STRATEGIES = 4096
DESK_MAX_PRODUCT_DIM = 36

# Deterministic escalation ladder: the interior-point solvers are fast but
# can stall on degenerate faces; the tight first-order pass is the fallback.
_SOLVER_LADDER: tuple[tuple[str, dict], ...] = (
    ("CLARABEL", {}),
    ("CVXOPT", {"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9}),
    ("SCS", {"eps_abs": 1e-9, "eps_rel": 1e-9, "max_iters": 50_000}),
)

# CVXOPT's dense factorizations become impractical once the real dilation of
# a Hermitian block passes this size; skip straight to the first-order pass.
_CVXOPT_MAX_BLOCK = 16

# Below this weight (resp. above 1 minus it) the decomposition collapses to
# a one-sided form so the reconstruction identity stays within 1e-7.
_EDGE = 2e-8


class DeskScaleError(ValidationError):
    """Problem size exceeds the supported desk scale."""


class SolverError(RuntimeError):
    """The conic solver failed to meet the primal/dual certificate contract."""

    def __init__(self, message: str, *, status: str | None = None, residual: float | None = None, gap: float | None = None):
        details = []
        if status is not None:
            details.append(f"status={status}")
        if residual is not None:
            details.append(f"max_residual={residual:.3e}")
        if gap is not None:
            details.append(f"gap={gap:.3e}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.status = status
        self.residual = residual
        self.gap = gap


def _require_level_one(n: int) -> None:
    if n != 1:
        raise ValueError(
            "convex weights are implemented for the level-1 free sets only; "
            "membership in the level-n sets has no tractable characterization "
            f"for n >= 2 (got n={n})"
        )


@dataclass(frozen=True)
class DeterministicStrategySet:
    """All deterministic response functions for ``n_inputs`` with ``n_outcomes`` each."""

    n_inputs: int
    n_outcomes: int
    strategies: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.n_inputs < 1 or self.n_outcomes < 1:
            raise ValidationError("strategy set needs positive input/outcome counts")
        size = self.n_outcomes**self.n_inputs
        if size > DESK_MAX_STRATEGIES:
            raise DeskScaleError(
                f"{size} deterministic strategies exceed the desk limit {DESK_MAX_STRATEGIES}"
            )
        object.__setattr__(
            self,
            "strategies",
            tuple(itertools.product(range(self.n_outcomes), repeat=self.n_inputs)),
        )

    def __len__(self) -> int:
        return len(self.strategies)

    def responds(self, a: int, x: int, mu: int) -> bool:
        return self.strategies[mu][x] == a


def _strategies(outcome_counts: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    size = 1
    for k in outcome_counts:
        size *= k
    if size > DESK_MAX_STRATEGIES:
        raise DeskScaleError(
            f"{size} deterministic strategies exceed the desk limit {DESK_MAX_STRATEGIES}"
        )
    return tuple(itertools.product(*(range(k) for k in outcome_counts)))


# --------------------------------------------------------------------------
# Conic problem facade
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PsdVariable:
    """Hermitian PSD block; ``subsystems`` enables the partial-transpose term."""

    name: str
    dim: int
    subsystems: tuple[int, int] | None = None


@dataclass(frozen=True)
class ConstraintTerm:
    """One linear term ``coeff * op(X_variable)``.

    ``op`` is ``"identity"``, ``"partial_transpose"`` (transpose on the
    second subsystem), or ``"trace_identity"`` (``Tr(X) * I``).
    """

    variable: str
    coeff: float
    op: str = "identity"


@dataclass(frozen=True, eq=False)
class OperatorConstraint:
    """Affine operator constraint ``constant + sum(terms) {>= , ==} 0``."""

    name: str
    constant: np.ndarray
    terms: tuple[ConstraintTerm, ...]
    kind: str = "psd"  # "psd" or "eq"


@dataclass(frozen=True, eq=False)
class ConicProblem:
    """Maximize ``sum_b Re Tr[C_b X_b]`` over Hermitian PSD blocks ``X_b``."""

    variables: tuple[PsdVariable, ...]
    constraints: tuple[OperatorConstraint, ...]
    objective: tuple[tuple[str, np.ndarray], ...]  # (variable name, Hermitian C)


@dataclass(frozen=True, eq=False)
class ConicSolution:
    objective_value: float
    variables: dict[str, np.ndarray]
    duals: dict[str, np.ndarray]
    gap: float
    max_residual: float
    status: str


def _term_matrix(term: ConstraintTerm, value: np.ndarray, subsystems: tuple[int, int] | None) -> np.ndarray:
    if term.op == "identity":
        out = value
    elif term.op == "partial_transpose":
        if subsystems is None:
            raise ValidationError(f"variable {term.variable} has no subsystem split")
        out = _partial_transpose(value, subsystems)
    elif term.op == "trace_identity":
        out = np.trace(value).real * np.eye(value.shape[0])
    else:
        raise ValidationError(f"unknown constraint term op {term.op!r}")
    return term.coeff * out


def _residuals(problem: ConicProblem, primal: dict[str, np.ndarray]) -> float:
    var_spec = {v.name: v for v in problem.variables}
    residuals = [max(0.0, -_min_eig(primal[v.name])) for v in problem.variables]
    for con in problem.constraints:
        value = np.asarray(con.constant, dtype=complex).copy()
        for term in con.terms:
            value = value + _term_matrix(term, primal[term.variable], var_spec[term.variable].subsystems)
        if con.kind == "psd":
            residuals.append(max(0.0, -_min_eig(value)))
        else:
            residuals.append(float(np.max(np.abs(value))))
    return max(residuals) if residuals else 0.0


def _solve_once(
    problem: ConicProblem, solver: str, options: dict, *, need_duals: bool
) -> tuple[float, dict, dict, float]:
    var_spec = {v.name: v for v in problem.variables}
    cp_vars = {
        v.name: cp.Variable((v.dim, v.dim), hermitian=True, name=v.name)
        for v in problem.variables
    }
    cp_constraints = [cp_vars[v.name] >> 0 for v in problem.variables]
    handles = []
    for con in problem.constraints:
        expr = cp.Constant(con.constant)
        for term in con.terms:
            x = cp_vars[term.variable]
            if term.op == "identity":
                piece = x
            elif term.op == "partial_transpose":
                spec = var_spec[term.variable]
                if spec.subsystems is None:
                    raise ValidationError(f"variable {term.variable} has no subsystem split")
                piece = cp.partial_transpose(x, dims=list(spec.subsystems), axis=1)
            elif term.op == "trace_identity":
                piece = cp.real(cp.trace(x)) * np.eye(con.constant.shape[0])
            else:
                raise ValidationError(f"unknown constraint term op {term.op!r}")
            expr = expr + float(term.coeff) * piece
        handle = (expr >> 0) if con.kind == "psd" else (expr == 0)
        cp_constraints.append(handle)
        handles.append((con, handle))

    objective = cp.Constant(0.0)
    for name, coeff in problem.objective:
        objective = objective + cp.real(cp.trace(cp.Constant(coeff) @ cp_vars[name]))
    prob = cp.Problem(cp.Maximize(objective), cp_constraints)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        # cvxpy's complex2real pass builds nested-list Constants internally
        warnings.filterwarnings("ignore", message="Initializing a Constant with a nested list")
        prob.solve(solver=solver, **options)
    # "inaccurate" only means the solver missed its own tolerances; the
    # residual and gap checks in solve_conic are the binding contract.
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverError("conic solve did not reach optimality", status=prob.status)

    primal: dict[str, np.ndarray] = {}
    for v in problem.variables:
        value = cp_vars[v.name].value
        if value is None:
            raise SolverError(f"no primal value for block {v.name}", status=prob.status)
        primal[v.name] = hermitize(np.asarray(value, dtype=complex))

    duals: dict[str, np.ndarray] = {}
    if need_duals:
        for con, handle in handles:
            dv = handle.dual_value
            if dv is None:
                raise SolverError(f"no dual value for constraint {con.name}", status=prob.status)
            dv = hermitize(np.asarray(dv, dtype=complex))
            # cvxpy's complex-to-real dilation halves the duals of Hermitian
            # PSD constraints; equality duals come back unscaled.
            duals[con.name] = 2.0 * dv if con.kind == "psd" else dv

    return float(prob.value), primal, duals, _residuals(problem, primal)


def _solve_raw(problem: ConicProblem, *, need_duals: bool) -> tuple[float, dict, dict, float]:
    """Walk the solver ladder until the primal residual contract is met."""
    largest_block = max(
        [v.dim for v in problem.variables]
        + [con.constant.shape[0] for con in problem.constraints],
        default=0,
    )
    failures = []
    best = None
    for solver, options in _SOLVER_LADDER:
        if solver == "CVXOPT" and largest_block > _CVXOPT_MAX_BLOCK:
            continue
        try:
            value, primal, duals, max_residual = _solve_once(
                problem, solver, options, need_duals=need_duals
            )
        except (SolverError, cp.error.SolverError) as exc:
            failures.append(f"{solver}: {exc}")
            continue
        if max_residual <= RESIDUAL_TOL:
            return value, primal, duals, max_residual
        failures.append(f"{solver}: residual {max_residual:.3e}")
        if best is None or max_residual < best[3]:
            best = (value, primal, duals, max_residual)
    raise SolverError(
        "no solver met the residual contract: " + "; ".join(failures),
        residual=best[3] if best else None,
    )


def _dual_objective(problem: ConicProblem, duals: dict[str, np.ndarray]) -> float:
    return sum(
        float(np.trace(duals[con.name] @ con.constant).real) for con in problem.constraints
    )


def _dual_infeasibility(problem: ConicProblem, duals: dict[str, np.ndarray]) -> float:
    """Violation of stationarity ``C_b + sum_j coeff op(Y_j) <= 0`` and of
    ``Y_j >= 0`` for inequality-constraint duals."""
    var_spec = {v.name: v for v in problem.variables}
    obj_map = {name: coeff for name, coeff in problem.objective}
    worst = 0.0
    for con in problem.constraints:
        if con.kind == "psd":
            worst = max(worst, -_min_eig(duals[con.name]))
    for v in problem.variables:
        coeff = obj_map.get(v.name)
        station = (
            np.asarray(coeff, dtype=complex).copy()
            if coeff is not None
            else np.zeros((v.dim, v.dim), dtype=complex)
        )
        for con in problem.constraints:
            for term in con.terms:
                if term.variable != v.name:
                    continue
                station = station + _term_matrix(term, duals[con.name], var_spec[v.name].subsystems)
        worst = max(worst, _max_eig(station))
    return worst


def _dual_problem(problem: ConicProblem) -> ConicProblem:
    """Explicit dual in the same standard form.

    Every term operation is self-adjoint, so the dual of
    ``max sum Re<C_b, X_b>`` subject to ``R_j + sum coeff op(X_b) {>=,==} 0``
    is ``min sum Re<Y_j, R_j>`` subject to
    ``C_b + sum_j coeff_jb op(Y_j) <= 0`` with ``Y_j >= 0`` for inequality
    constraints and ``Y_j`` Hermitian (split as ``P - N``) for equalities.
    The minimization is posed as maximization of the negated objective.
    """
    var_spec = {v.name: v for v in problem.variables}
    obj_map = {name: coeff for name, coeff in problem.objective}
    variables: list[PsdVariable] = []
    objective: list[tuple[str, np.ndarray]] = []
    split: dict[str, tuple[str, str | None]] = {}
    for con in problem.constraints:
        dim = con.constant.shape[0]
        # a partial-transpose term forces the same subsystem split on the
        # constraint space, hence on its dual variable
        subsystems = None
        for term in con.terms:
            if term.op == "partial_transpose":
                subsystems = var_spec[term.variable].subsystems
        if con.kind == "psd":
            variables.append(PsdVariable(f"y_{con.name}", dim, subsystems))
            objective.append((f"y_{con.name}", -np.asarray(con.constant)))
            split[con.name] = (f"y_{con.name}", None)
        else:
            variables.append(PsdVariable(f"y_{con.name}_pos", dim, subsystems))
            variables.append(PsdVariable(f"y_{con.name}_neg", dim, subsystems))
            objective.append((f"y_{con.name}_pos", -np.asarray(con.constant)))
            objective.append((f"y_{con.name}_neg", +np.asarray(con.constant)))
            split[con.name] = (f"y_{con.name}_pos", f"y_{con.name}_neg")

    constraints = []
    for v in problem.variables:
        coeff = obj_map.get(v.name)
        constant = -np.asarray(coeff) if coeff is not None else np.zeros((v.dim, v.dim), dtype=complex)
        terms: list[ConstraintTerm] = []
        for con in problem.constraints:
            for term in con.terms:
                if term.variable != v.name:
                    continue
                pos, neg = split[con.name]
                terms.append(ConstraintTerm(pos, -term.coeff, op=term.op))
                if neg is not None:
                    terms.append(ConstraintTerm(neg, +term.coeff, op=term.op))
        constraints.append(OperatorConstraint(f"stationarity_{v.name}", constant, tuple(terms)))
    return ConicProblem(tuple(variables), tuple(constraints), tuple(objective))


def solve_conic(problem: ConicProblem) -> ConicSolution:
    """Solve the block SDP and return a primal/dual pair meeting the contract.

    The primal is solved first; if the solver's extracted duals leave a gap
    above ``GAP_TOL``, the explicit dual program is solved as a second pass
    and its (accurate) primal blocks replace the extracted duals.  Raises
    :class:`SolverError` unless the final pair has constraint residuals
    below ``RESIDUAL_TOL`` and gap below ``GAP_TOL``.  Deterministic for
    identical inputs.
    """
    value, primal, duals, max_residual = _solve_raw(problem, need_duals=True)
    gap = abs(value - _dual_objective(problem, duals))
    if gap > GAP_TOL or _dual_infeasibility(problem, duals) > RESIDUAL_TOL:
        # The extracted multipliers are not reliable enough; solve the
        # explicit dual program, whose primal blocks are residual-checked
        # by the same ladder.
        dual_value, dual_primal, _, _ = _solve_raw(_dual_problem(problem), need_duals=False)
        refined: dict[str, np.ndarray] = {}
        for con in problem.constraints:
            if con.kind == "psd":
                refined[con.name] = dual_primal[f"y_{con.name}"]
            else:
                refined[con.name] = (
                    dual_primal[f"y_{con.name}_pos"] - dual_primal[f"y_{con.name}_neg"]
                )
        duals = refined
        # dual_value is the maximized negated objective of the minimization
        gap = abs(value - (-dual_value))
        if gap > GAP_TOL:
            raise SolverError(
                "duality gap violates the certificate contract",
                residual=max_residual,
                gap=gap,
            )
    return ConicSolution(value, primal, duals, gap, max_residual, "optimal")


# --------------------------------------------------------------------------
# numeric helpers
# --------------------------------------------------------------------------


def _min_eig(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(mat))[0])


def _max_eig(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(mat))[-1])


def _psd_clip(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(mat))
    w = np.clip(w, 0.0, None)
    return hermitize((v * w) @ dagger(v))


def _partial_transpose(mat: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    da, db = dims
    return mat.reshape(da, db, da, db).transpose(0, 3, 2, 1).reshape(da * db, da * db)


def _part_atol(value: float) -> float:
    # Slack blocks may sit RESIDUAL_TOL outside the cone, and dividing by
    # the weight (or its complement) amplifies that when normalizing the
    # decomposition parts.
    edge = min(max(value, _EDGE), max(1.0 - value, _EDGE))
    return max(1e-7, 1.5 * RESIDUAL_TOL / edge)


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SteeringInequality:
    """Dual certificate: ``sum Tr[Y sigma] >= 1`` for every LHS assemblage."""

    operators: tuple[tuple[np.ndarray, ...], ...]
    free_bound: float = 1.0

    def evaluate(self, assemblage: Assemblage) -> float:
        total = 0.0
        for y_row, s_row in zip(self.operators, assemblage.inputs):
            for y, s in zip(y_row, s_row):
                total += float(np.trace(y @ s).real)
        return total

    def to_json(self) -> dict:
        return {
            "type": "steering",
            "free_bound": self.free_bound,
            "operators": [[matrix_to_json(y) for y in row] for row in self.operators],
        }


@dataclass(frozen=True, eq=False)
class IncompatibilityInequality:
    """Dual certificate: ``sum Tr[Y M] >= Tr[W] = 1`` for jointly measurable sets."""

    operators: tuple[tuple[np.ndarray, ...], ...]
    parent_bound: np.ndarray
    free_bound: float = 1.0

    def evaluate(self, measurements: MeasurementSet) -> float:
        total = 0.0
        for y_row, m_row in zip(self.operators, measurements.inputs):
            for y, m in zip(y_row, m_row):
                total += float(np.trace(y @ m).real)
        return total

    def to_json(self) -> dict:
        return {
            "type": "incompatibility",
            "free_bound": self.free_bound,
            "operators": [[matrix_to_json(y) for y in row] for row in self.operators],
            "parent_bound": matrix_to_json(self.parent_bound),
        }


@dataclass(frozen=True, eq=False)
class EntanglementWitnessCertificate:
    """Dual certificate: ``Tr[Y rho] >= 1`` for every PPT state."""

    operator: np.ndarray
    ppt_operator: np.ndarray
    dims: tuple[int, int]
    free_bound: float = 1.0

    def evaluate(self, state: BipartiteState) -> float:
        return float(np.trace(self.operator @ state.matrix).real)

    def to_json(self) -> dict:
        return {
            "type": "entanglement",
            "free_bound": self.free_bound,
            "operator": matrix_to_json(self.operator),
            "ppt_operator": matrix_to_json(self.ppt_operator),
            "dims": list(self.dims),
        }


@dataclass(frozen=True, eq=False)
class WeightResult:
    """Optimal weight with primal decomposition and renormalized dual.

    ``(1 - value) * free_part + value * residual`` reconstructs the input
    within 1e-7, and ``dual_value = 1 - certificate(input)`` matches
    ``value`` within ``gap``.  ``exact`` is False when the free set was
    relaxed (PPT beyond 2x2/2x3), in which case ``value`` is a lower bound.
    """

    value: float
    free_part: object
    residual: object
    certificate: object
    dual_value: float
    gap: float
    exact: bool = True

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "exact": self.exact,
            "certificate": self.certificate.to_json(),
            "free_part": _object_to_json(self.free_part),
            "residual": _object_to_json(self.residual),
        }


def _object_to_json(obj) -> dict:
    if isinstance(obj, (Assemblage, MeasurementSet)):
        return obj.to_json()
    if isinstance(obj, BipartiteState):
        return {"dim_a": obj.dim_a, "dim_b": obj.dim_b, "matrix": matrix_to_json(obj.matrix)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass(frozen=True)
class WeightInequalityResult:
    lhs: float
    rhs: float
    holds: bool
    steering: WeightResult
    incompatibility: WeightResult
    entanglement: WeightResult

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "steering_weight": self.steering.value,
            "incompatibility_weight": self.incompatibility.value,
            "entanglement_weight": self.entanglement.value,
        }


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


def _check_desk_scale(dim: int, outcome_counts: tuple[int, ...]) -> None:
    if dim > DESK_MAX_DIM:
        raise DeskScaleError(f"dimension {dim} exceeds the desk limit {DESK_MAX_DIM}")
    _strategies(outcome_counts)  # raises on strategy blow-up


def steering_weight(assemblage: Assemblage, n: int = 1) -> WeightResult:
    """Convex weight over local-hidden-state assemblages."""
    _require_level_one(n)
    d = assemblage.dim
    counts = assemblage.outcome_counts
    _check_desk_scale(d, counts)
    strategies = _strategies(counts)

    variables = tuple(PsdVariable(f"tau_{mu}", d) for mu in range(len(strategies)))
    constraints = []
    for x in range(assemblage.n_inputs):
        for a in range(counts[x]):
            terms = tuple(
                ConstraintTerm(f"tau_{mu}", -1.0)
                for mu, s in enumerate(strategies)
                if s[x] == a
            )
            constraints.append(
                OperatorConstraint(f"slack_{x}_{a}", assemblage.inputs[x][a], terms)
            )
    objective = tuple((f"tau_{mu}", np.eye(d, dtype=complex)) for mu in range(len(strategies)))
    sol = solve_conic(ConicProblem(variables, tuple(constraints), objective))

    taus = [_psd_clip(sol.variables[f"tau_{mu}"]) for mu in range(len(strategies))]
    t_hat = float(sum(np.trace(tau).real for tau in taus))
    value = float(np.clip(1.0 - t_hat, 0.0, 1.0))

    def lhs_rows(tau_list, scale):
        return tuple(
            tuple(
                hermitize(
                    sum(
                        (tau_list[mu] for mu, s in enumerate(strategies) if s[x] == a),
                        start=np.zeros((d, d), dtype=complex),
                    )
                )
                / scale
                for a in range(counts[x])
            )
            for x in range(assemblage.n_inputs)
        )

    atol = _part_atol(value)
    if value >= 1.0 - _EDGE:
        uniform = tuple(
            tuple(np.eye(d, dtype=complex) / (counts[x] * d) for _ in range(counts[x]))
            for x in range(assemblage.n_inputs)
        )
        free = Assemblage(d, uniform)
        residual_rows = tuple(
            tuple(
                (assemblage.inputs[x][a] - (1.0 - value) * free.inputs[x][a]) / value
                for a in range(counts[x])
            )
            for x in range(assemblage.n_inputs)
        )
        residual = Assemblage(d, residual_rows, tol_psd=atol, tol_nosignaling=atol, tol_trace=atol)
    else:
        free = Assemblage(d, lhs_rows(taus, t_hat), tol_psd=1e-7, tol_nosignaling=1e-7, tol_trace=1e-7)
        if value <= _EDGE:
            residual = assemblage
        else:
            residual_rows = tuple(
                tuple(
                    (assemblage.inputs[x][a] - t_hat * free.inputs[x][a]) / value
                    for a in range(counts[x])
                )
                for x in range(assemblage.n_inputs)
            )
            residual = Assemblage(
                d, residual_rows, tol_psd=atol, tol_nosignaling=atol, tol_trace=atol
            )

    raw = tuple(
        tuple(_psd_clip(sol.duals[f"slack_{x}_{a}"]) for a in range(counts[x]))
        for x in range(assemblage.n_inputs)
    )
    bound = min(
        _min_eig(sum(raw[x][s[x]] for x in range(assemblage.n_inputs)))
        for s in strategies
    )
    if bound <= 1e-9:
        raise SolverError("degenerate steering dual certificate", gap=sol.gap)
    certificate = SteeringInequality(
        tuple(tuple(y / bound for y in row) for row in raw)
    )
    dual_value = 1.0 - certificate.evaluate(assemblage)
    return WeightResult(value, free, residual, certificate, dual_value, value - dual_value)


def incompatibility_weight(measurements: MeasurementSet, n: int = 1) -> WeightResult:
    """Convex weight over jointly measurable sets."""
    _require_level_one(n)
    d = measurements.dim
    counts = measurements.outcome_counts
    _check_desk_scale(d, counts)
    strategies = _strategies(counts)
    n_strat = len(strategies)

    variables = tuple(PsdVariable(f"g_{mu}", d) for mu in range(n_strat))
    constraints = []
    for x in range(measurements.n_inputs):
        for a in range(counts[x]):
            terms = tuple(
                ConstraintTerm(f"g_{mu}", -1.0) for mu, s in enumerate(strategies) if s[x] == a
            )
            constraints.append(
                OperatorConstraint(f"slack_{x}_{a}", measurements.inputs[x][a], terms)
            )
    parent_terms = tuple(ConstraintTerm(f"g_{mu}", 1.0) for mu in range(n_strat)) + tuple(
        ConstraintTerm(f"g_{mu}", -1.0 / d, op="trace_identity") for mu in range(n_strat)
    )
    constraints.append(
        OperatorConstraint("parent_norm", np.zeros((d, d), dtype=complex), parent_terms, kind="eq")
    )
    objective = tuple((f"g_{mu}", np.eye(d, dtype=complex) / d) for mu in range(n_strat))
    sol = solve_conic(ConicProblem(variables, tuple(constraints), objective))

    parents = [_psd_clip(sol.variables[f"g_{mu}"]) for mu in range(n_strat)]
    t_hat = float(sum(np.trace(g).real for g in parents)) / d
    value = float(np.clip(1.0 - t_hat, 0.0, 1.0))

    atol = _part_atol(value)
    eye = np.eye(d, dtype=complex)
    if value >= 1.0 - _EDGE:
        free = MeasurementSet(
            d,
            tuple(tuple(eye / counts[x] for _ in range(counts[x])) for x in range(measurements.n_inputs)),
        )
    else:
        rows = tuple(
            tuple(
                hermitize(
                    sum(
                        (parents[mu] for mu, s in enumerate(strategies) if s[x] == a),
                        start=np.zeros((d, d), dtype=complex),
                    )
                )
                / t_hat
                for a in range(counts[x])
            )
            for x in range(measurements.n_inputs)
        )
        free = MeasurementSet(d, rows, tol_psd=max(1e-7, atol), tol_completeness=max(1e-7, atol))
    if value <= _EDGE:
        residual = measurements
    else:
        residual_rows = tuple(
            tuple(
                (measurements.inputs[x][a] - (1.0 - value) * free.inputs[x][a]) / value
                for a in range(counts[x])
            )
            for x in range(measurements.n_inputs)
        )
        residual = MeasurementSet(d, residual_rows, tol_psd=atol, tol_completeness=atol)

    raw = tuple(
        tuple(_psd_clip(sol.duals[f"slack_{x}_{a}"]) for a in range(counts[x]))
        for x in range(measurements.n_inputs)
    )
    strategy_sums = [
        hermitize(sum(raw[x][s[x]] for x in range(measurements.n_inputs))) for s in strategies
    ]
    z = sol.duals["parent_norm"]
    candidates = []
    for sign in (1.0, -1.0):
        w = hermitize(sign * z + ((1.0 - sign * np.trace(z).real) / d) * eye)
        violation = max(_max_eig(w - a_mu) for a_mu in strategy_sums)
        shifted = w - max(violation, 0.0) * eye
        candidates.append((float(np.trace(shifted).real), shifted))
    floor = min(_min_eig(a_mu) for a_mu in strategy_sums)
    candidates.append((floor * d, floor * eye))
    beta, w_best = max(candidates, key=lambda item: item[0])
    if beta <= 1e-9:
        raise SolverError("degenerate incompatibility dual certificate", gap=sol.gap)
    certificate = IncompatibilityInequality(
        tuple(tuple(y / beta for y in row) for row in raw),
        parent_bound=w_best / beta,
    )
    dual_value = 1.0 - certificate.evaluate(measurements)
    return WeightResult(value, free, residual, certificate, dual_value, value - dual_value)


def entanglement_weight_ppt(state: BipartiteState, n: int = 1) -> WeightResult:
    """Convex weight over the PPT cone.

    Equals the separable-set weight on 2x2 and 2x3 systems; elsewhere it is
    a lower bound and ``exact`` is False.
    """
    _require_level_one(n)
    da, db = state.dim_a, state.dim_b
    total_dim = da * db
    if total_dim > DESK_MAX_PRODUCT_DIM:
        raise DeskScaleError(
            f"product dimension {total_dim} exceeds the desk limit {DESK_MAX_PRODUCT_DIM}"
        )
    exact = tuple(sorted((da, db))) in ((2, 2), (2, 3))

    variables = (PsdVariable("x", total_dim, subsystems=(da, db)),)
    constraints = (
        OperatorConstraint("dominated", state.matrix, (ConstraintTerm("x", -1.0),)),
        OperatorConstraint(
            "ppt",
            np.zeros((total_dim, total_dim), dtype=complex),
            (ConstraintTerm("x", 1.0, op="partial_transpose"),),
        ),
    )
    sol = solve_conic(ConicProblem(variables, constraints, (("x", np.eye(total_dim, dtype=complex)),)))

    x_hat = _psd_clip(sol.variables["x"])
    t_hat = float(np.trace(x_hat).real)
    value = float(np.clip(1.0 - t_hat, 0.0, 1.0))

    atol = _part_atol(value)
    if value >= 1.0 - _EDGE:
        free = BipartiteState.from_matrix(np.eye(total_dim, dtype=complex) / total_dim, da, db)
    else:
        free = BipartiteState.from_matrix(x_hat / t_hat, da, db, tol_psd=1e-7, tol_trace=1e-7)
    if value <= _EDGE:
        residual = state
    else:
        residual_mat = (state.matrix - (1.0 - value) * free.matrix) / value
        residual = BipartiteState.from_matrix(
            residual_mat, da, db, tol_herm=atol, tol_psd=atol, tol_trace=atol
        )

    y = _psd_clip(sol.duals["dominated"])
    v = _psd_clip(sol.duals["ppt"])
    scale = _min_eig(y - _partial_transpose(v, (da, db)))
    if scale <= 1e-9:
        raise SolverError("degenerate entanglement dual certificate", gap=sol.gap)
    certificate = EntanglementWitnessCertificate(y / scale, v / scale, (da, db))
    dual_value = 1.0 - certificate.evaluate(state)
    return WeightResult(
        value, free, residual, certificate, dual_value, value - dual_value, exact=exact
    )


def check_weight_inequality(
    measurements: MeasurementSet, state: BipartiteState, *, slack: float = 1e-5
) -> WeightInequalityResult:
    """Verify the multiplicative bound: steering weight of the steered
    assemblage never exceeds incompatibility weight times entanglement weight.

    Restricted to 2x2 and 2x3 states, where the PPT entanglement weight is
    exact and the check is rigorous.
    """
    if tuple(sorted((state.dim_a, state.dim_b))) not in ((2, 2), (2, 3)):
        raise DeskScaleError(
            "the inequality check requires a 2x2 or 2x3 state so the "
            "entanglement weight is exact"
        )
    if measurements.dim != state.dim_a:
        raise ValidationError(
            f"measurement dimension {measurements.dim} != dim_a {state.dim_a}"
        )
    sw = steering_weight(steer(state, measurements))
    iw = incompatibility_weight(measurements)
    ew = entanglement_weight_ppt(state)
    lhs = sw.value
    rhs = iw.value * ew.value
    return WeightInequalityResult(lhs, rhs, bool(lhs <= rhs + slack), sw, iw, ew)
