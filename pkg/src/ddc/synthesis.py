"""Controller synthesis from the data-based descriptor.

Both procedures solve one LMI feasibility problem and read the gain off the
certificate: F = Z K^-1 for the robust condition and F = K1 P1^-1 for the
H-infinity condition.  Feasibility is not proof of closed-loop behaviour on
the true plant; :mod:`ddc.verify` decides that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ddc.descriptor import DescriptorData, augment
from ddc.linalg import lu_inverse, rcond
from ddc.lmi import DEFAULT_MARGIN, LmiSolution, assemble_hinf_lmi, assemble_robust_lmi, solve_feasibility

# Box on every decision entry.  The conditions are homogeneous apart from the
# margin, so without it the interior-point iterates can drift to huge scales.
DEFAULT_BOUND = 1e4
K_RCOND_FLOOR = 1e-10
EXTRACTION_TOL = 1e-8


class SynthesisError(RuntimeError):
    """No controller gain could be produced."""

    def __init__(self, message: str, solution: LmiSolution | None = None):
        super().__init__(message)
        self.solution = solution


class SynthesisInfeasible(SynthesisError):
    """The LMI solve did not return a verified certificate."""


class ExtractionSingular(SynthesisError):
    """The matrix inverted to extract F is numerically singular."""


@dataclass(frozen=True)
class ControllerGain:
    F: np.ndarray
    method: str
    eps: float
    margins: dict[str, float]
    gamma: float | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("robust", "hinf"):
            raise ValueError(f"unknown method {self.method!r}")
        F = np.array(self.F, dtype=float)
        if F.ndim != 2 or not np.isfinite(F).all():
            raise ValueError("F must be a finite matrix")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    def to_dict(self) -> dict:
        return {
            "F": self.F,
            "method": self.method,
            "gamma": self.gamma,
            "eps": self.eps,
            "margins": dict(self.margins),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ControllerGain":
        return cls(
            F=np.asarray(doc["F"], dtype=float),
            method=doc["method"],
            eps=float(doc.get("eps", 0.0)),
            margins={k: float(v) for k, v in doc.get("margins", {}).items()},
            gamma=None if doc.get("gamma") is None else float(doc["gamma"]),
            provenance=dict(doc.get("provenance", {})),
        )


def _solve(lmi, variables, margin: float, bound: float | None) -> LmiSolution:
    sol = solve_feasibility([lmi], variables, margin=margin, bound=bound)
    if not sol.ok:
        raise SynthesisInfeasible(f"{lmi.name} LMI: {sol.status.value} (solver: {sol.solver_status})", sol)
    return sol


def _extract(numer: np.ndarray, denom: np.ndarray, name: str, sol: LmiSolution) -> np.ndarray:
    rc = rcond(denom)
    if rc < K_RCOND_FLOOR:
        raise ExtractionSingular(f"{name} is numerically singular (rcond={rc:.3g})", sol)
    F = numer @ lu_inverse(denom)
    resid = np.abs(F @ denom - numer).max() / max(1.0, np.abs(numer).max())
    if not resid <= EXTRACTION_TOL:
        raise ExtractionSingular(f"extraction residual {resid:.3g} through {name}", sol)
    return F


def synth_robust(
    d: DescriptorData,
    margin: float = DEFAULT_MARGIN,
    bound: float | None = DEFAULT_BOUND,
    provenance: dict | None = None,
) -> ControllerGain:
    lmi, v = assemble_robust_lmi(augment(d))
    sol = _solve(lmi, v.all(), margin, bound)
    a = sol.assignment
    F = _extract(a["Z"], a["K"], "K", sol)
    return ControllerGain(
        F=F, method="robust", eps=float(a["eps"][0, 0]),
        margins=dict(sol.lambda_max), provenance=dict(provenance or {}),
    )


def synth_hinf(
    d: DescriptorData,
    gamma: float,
    margin: float = DEFAULT_MARGIN,
    bound: float | None = DEFAULT_BOUND,
    provenance: dict | None = None,
) -> ControllerGain:
    lmi, v = assemble_hinf_lmi(augment(d), gamma)
    sol = _solve(lmi, v.all(), margin, bound)
    a = sol.assignment
    F = _extract(a["K1"], a["P1"], "P1", sol)
    return ControllerGain(
        F=F, method="hinf", eps=float(a["eps"][0, 0]), gamma=float(gamma),
        margins=dict(sol.lambda_max), provenance=dict(provenance or {}),
    )
