"""Lowering to standard form, the conic feasibility solve, and certificate checks.

Every LMI ``M(x) = F0 + sum_i x_i F_i`` is imposed as ``M(x) <= -margin I``
and every positive-definite variable as ``V >= margin I``.  The interior
point solve is delegated to CVXOPT; its answer is only trusted after
:func:`verify_solution` has recomputed the eigenvalues itself.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import cvxopt
import numpy as np
from cvxopt import solvers

from ddc.lmi.expr import Affine, BlockLmi, MatrixVariable

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 1e-6


class Status(enum.Enum):
    SUCCESS = "success"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"


class StructureViolation(AssertionError):
    """A structured matrix in a solution broke one of its ties."""


@dataclass(frozen=True)
class LmiSolution:
    status: Status
    assignment: dict[str, np.ndarray] = field(default_factory=dict)
    achieved_margin: float = float("-inf")
    lambda_max: dict[str, float] = field(default_factory=dict)
    solver_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.SUCCESS


class Layout:
    """Offsets of each variable's free parameters in the decision vector."""

    def __init__(self, variables: Sequence[MatrixVariable]):
        self.variables: list[MatrixVariable] = []
        self.offsets: dict[str, int] = {}
        size = 0
        for v in variables:
            if v.name in self.offsets:
                if self.by_name(v.name) != v:
                    raise ValueError(f"two different variables named {v.name!r}")
                continue
            self.variables.append(v)
            self.offsets[v.name] = size
            size += v.size
        self.size = size

    def by_name(self, name: str) -> MatrixVariable:
        return next(v for v in self.variables if v.name == name)

    def slice(self, var: MatrixVariable) -> slice:
        o = self.offsets[var.name]
        return slice(o, o + var.size)

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return {v.name: v.unpack(x[self.slice(v)]) for v in self.variables}

    def pack(self, assignment: Mapping[str, np.ndarray]) -> np.ndarray:
        x = np.zeros(self.size)
        for v in self.variables:
            x[self.slice(v)] = v.pack(assignment[v.name])
        return x


def _term_basis(left: np.ndarray, right: np.ndarray, var: MatrixVariable, transposed: bool) -> np.ndarray:
    """(var.size, rows, cols) stack of left @ B_k @ right over the variable's basis."""
    # full[a, b] = left @ E_ab @ right  (or E_ab^T when transposed)
    if transposed:
        full = np.einsum("ib,aj->abij", left, right)
    else:
        full = np.einsum("ia,bj->abij", left, right)
    if not var.symmetric:
        return full.reshape(var.rows * var.cols, left.shape[0], right.shape[1])
    iu, ju = np.triu_indices(var.rows)
    out = full[iu, ju].copy()
    off = iu != ju
    out[off] += full[ju[off], iu[off]]
    return out


def lower(expr: Affine, layout: Layout) -> tuple[np.ndarray, np.ndarray]:
    """Return ``F0`` and ``F`` (size x rows x cols) with expr(x) = F0 + sum_i x_i F_i."""
    F = np.zeros((layout.size,) + expr.shape)
    for t in expr.terms:
        if t.var.name not in layout.offsets:
            raise KeyError(f"variable {t.var.name!r} is not part of the problem")
        F[layout.slice(t.var)] += _term_basis(t.left, t.right, t.var, t.transposed)
    return expr.const.copy(), F


def evaluate_lowered(F0: np.ndarray, F: np.ndarray, x: np.ndarray) -> np.ndarray:
    return F0 + np.tensordot(x, F, axes=1)


def _sym_lambda_max(M: np.ndarray, name: str) -> float:
    asym = np.abs(M - M.T).max() if M.size else 0.0
    scale = max(1.0, np.abs(M).max()) if M.size else 1.0
    if asym > 1e-12 * scale:
        raise StructureViolation(f"{name} is not symmetric (max asymmetry {asym:.3g})")
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1]) if M.size else 0.0


def verify_solution(lmi: BlockLmi, sol: LmiSolution | Mapping[str, np.ndarray]) -> float:
    """Largest eigenvalue of the assembled LMI at the solution.

    Structured matrices attached to the LMI are audited exactly; a broken
    tie raises :class:`StructureViolation`.
    """
    assignment = sol.assignment if isinstance(sol, LmiSolution) else sol
    for s in lmi.structured:
        bad = s.check(assignment)
        if bad:
            raise StructureViolation(f"tie violated in {', '.join(bad)}")
    return _sym_lambda_max(lmi.evaluate(assignment), lmi.name)


def variable_margins(variables: Sequence[MatrixVariable], assignment: Mapping[str, np.ndarray]) -> dict[str, float]:
    """Smallest eigenvalue of each positive-constrained variable."""
    out = {}
    for v in variables:
        if v.structure == "spd":
            V = np.asarray(assignment[v.name])
            if not np.array_equal(V, V.T):
                raise StructureViolation(f"{v.name} is not exactly symmetric")
            out[v.name] = float(np.linalg.eigvalsh(V)[0])
        elif v.structure == "scalar":
            out[v.name] = float(np.asarray(assignment[v.name]).ravel()[0])
    return out


def check_certificate(
    lmis: Sequence[BlockLmi],
    variables: Sequence[MatrixVariable],
    assignment: Mapping[str, np.ndarray],
    margin: float,
) -> tuple[bool, dict[str, float], float]:
    """(passes, per-constraint lambda_max, achieved margin) at ``margin``."""
    lam = {lmi.name: verify_solution(lmi, assignment) for lmi in lmis}
    pos = variable_margins(variables, assignment)
    worst = min([-v for v in lam.values()] + list(pos.values()), default=float("inf"))
    return worst >= margin, lam, worst


def _solver_options(opts: dict | None) -> dict:
    base = {"show_progress": False, "maxiters": 200, "abstol": 1e-9, "reltol": 1e-8, "feastol": 1e-9}
    if opts:
        base.update(opts)
    return base


def _standard_form(lmis, layout: Layout, margin: float, bound: float | None):
    """Blocks (G, h) with G x + s = h, s >= 0, plus linear rows, for the margin-shifted problem."""
    Gs, hs = [], []
    for lmi in lmis:
        F0, F = lower(lmi.matrix, layout)
        d = F0.shape[0]
        m_i = lmi.margin if lmi.margin is not None else margin
        # -M(x) - m I = s >= 0   <=>   sum_i x_i F_i + s = -F0 - m I
        Gs.append(F.reshape(layout.size, d * d).T)
        hs.append(-F0 - m_i * np.eye(d))
    lin_rows, lin_h = [], []
    for v in layout.variables:
        if v.structure == "spd":
            basis = np.zeros((layout.size, v.rows, v.rows))
            basis[layout.slice(v)] = _term_basis(np.eye(v.rows), np.eye(v.rows), v, False)
            Gs.append(-basis.reshape(layout.size, -1).T)
            hs.append(-margin * np.eye(v.rows))
        elif v.structure == "scalar":
            row = np.zeros(layout.size)
            row[layout.offsets[v.name]] = -1.0
            lin_rows.append(row)
            lin_h.append(-margin)
    n_cone = len(lin_rows)
    if bound is not None:
        eye = np.eye(layout.size)
        lin_rows.extend(eye)
        lin_rows.extend(-eye)
        lin_h.extend([bound] * (2 * layout.size))
    return Gs, hs, np.array(lin_rows).reshape(-1, layout.size), np.array(lin_h), n_cone


def _cvx_blocks(Gs, hs):
    # cvxopt vectorises column-major
    Gs_c, hs_c = [], []
    for G, h in zip(Gs, hs):
        d = h.shape[0]
        Gs_c.append(cvxopt.matrix(np.ascontiguousarray(G.reshape(d, d, -1).transpose(1, 0, 2).reshape(d * d, -1))))
        hs_c.append(cvxopt.matrix(np.asfortranarray(h)))
    return Gs_c, hs_c


def _run_sdp(c, Gs, hs, Gl, hl, options):
    Gs_c, hs_c = _cvx_blocks(Gs, hs)
    kwargs = {}
    if Gl.shape[0]:
        kwargs = {"Gl": cvxopt.matrix(np.ascontiguousarray(Gl)), "hl": cvxopt.matrix(hl)}
    return solvers.sdp(cvxopt.matrix(c), Gs=Gs_c, hs=hs_c, options=options, **kwargs)


def _phase_one(Gs, hs, Gl, hl, n_cone, size, bound, options):
    """min t with every constraint relaxed by t; returns (t*, x) or None on solver failure."""
    Gs1 = [np.hstack([G, -np.eye(h.shape[0]).reshape(-1, 1)]) for G, h in zip(Gs, hs)]
    t_col = np.zeros((Gl.shape[0], 1))
    t_col[:n_cone] = -1.0
    Gl1 = np.vstack([np.hstack([Gl, t_col]), np.eye(1, size + 1, size) * -1.0])
    hl1 = np.append(hl, bound)  # t >= -bound keeps the program bounded
    c = np.zeros(size + 1)
    c[-1] = 1.0
    try:
        res = _run_sdp(c, Gs1, hs, Gl1, hl1, options)
    except (ValueError, ArithmeticError) as exc:
        log.warning("phase-one solve raised %s", exc)
        return None
    if res["x"] is None:
        return None
    x = np.array(res["x"]).ravel()
    return float(x[-1]), x[:-1], res["status"]


def solve_feasibility(
    lmis: Sequence[BlockLmi],
    variables: Sequence[MatrixVariable],
    margin: float = DEFAULT_MARGIN,
    bound: float | None = None,
    solver_options: dict | None = None,
) -> LmiSolution:
    """Find an assignment with every LMI <= -margin I and every spd/scalar variable >= margin.

    The returned point is re-verified at ``margin / 2``; solver-reported
    success without a passing certificate is a numerical failure.  ``bound``
    boxes every decision entry, which keeps homogeneous problems from
    drifting.  When the plain feasibility solve fails and a box is given, a
    phase-one problem (minimise the uniform slack t) decides: t* > 0 means no
    point inside the box meets the margin.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    all_vars = list(variables)
    for lmi in lmis:
        all_vars.extend(lmi.variables)
    layout = Layout(all_vars)
    Gs, hs, Gl, hl, n_cone = _standard_form(lmis, layout, margin, bound)
    options = _solver_options(solver_options)

    status, x = "error", None
    try:
        res = _run_sdp(np.zeros(layout.size), Gs, hs, Gl, hl, options)
        status = res["status"]
        if res["x"] is not None:
            x = np.array(res["x"]).ravel()
    except (ValueError, ArithmeticError) as exc:
        log.info("conic solver raised %s; falling back to phase one", exc)
    if x is not None and status != "primal infeasible":
        sol = _certify(lmis, layout, x, margin, status)
        if sol.ok:
            return sol
    if bound is None:
        final = Status.INFEASIBLE if status == "primal infeasible" else Status.NUMERICAL_FAILURE
        return LmiSolution(final, solver_status=status)

    one = _phase_one(Gs, hs, Gl, hl, n_cone, layout.size, bound, options)
    if one is None:
        return LmiSolution(Status.NUMERICAL_FAILURE, solver_status=f"{status}; phase one failed")
    t, x1, status1 = one
    sol = _certify(lmis, layout, x1, margin, f"phase one {status1}")
    if sol.ok:
        return sol
    if status1 == "optimal" and t > 0.0:
        return LmiSolution(Status.INFEASIBLE, sol.assignment, sol.achieved_margin, sol.lambda_max,
                           f"phase one optimal, slack {t:.3g}")
    return LmiSolution(Status.NUMERICAL_FAILURE, sol.assignment, sol.achieved_margin, sol.lambda_max,
                       f"phase one {status1}, slack {t:.3g}")


def _certify(lmis, layout: Layout, x: np.ndarray, margin: float, status: str) -> LmiSolution:
    assignment = layout.unpack(x)
    try:
        passed, lam, worst = check_certificate(lmis, layout.variables, assignment, margin / 2)
    except StructureViolation as exc:
        log.info("returned point breaks structure: %s", exc)
        return LmiSolution(Status.NUMERICAL_FAILURE, assignment, solver_status=status)
    if passed:
        return LmiSolution(Status.SUCCESS, assignment, worst, lam, status)
    return LmiSolution(Status.NUMERICAL_FAILURE, assignment, worst, lam, status)
