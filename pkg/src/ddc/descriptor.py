"""Data-based descriptor model and its augmented form.

From the aggregates we get nominal matrices

    E_d = M N^-1,   A_d = V T^-1,   B_d = M N^-1 R1 - V T^-1 R0,
    C_d = Y X^-1,   D_d = Y' - Y X^-1 X',

which equal (s0 I - A)^-1 (I, A, B) up to a structured error
Bwd Delta (K_e, K_a, K_b) with Delta Delta^T <= I, and C, D exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddc.experiments import ExperimentConfig, Experiment1Aggregate, Experiment2Aggregate
from ddc.linalg import lu_inverse, rcond
from ddc.plant import PlantModel, true_descriptor


SHIFT_FLOOR = 1e-10


class DescriptorConditioningError(ValueError):
    """N, T or X is numerically singular."""


@dataclass(frozen=True)
class DescriptorData:
    Ed: np.ndarray
    Ad: np.ndarray
    Bd: np.ndarray
    Cd: np.ndarray
    Dd: np.ndarray
    Ke: np.ndarray
    Ka: np.ndarray
    Kb: np.ndarray
    s0: float
    delta: float
    l: int

    @property
    def n(self) -> int:
        return self.Ed.shape[0]

    @property
    def m(self) -> int:
        return self.Bd.shape[1]

    @property
    def p(self) -> int:
        return self.Cd.shape[0]

    def to_dict(self) -> dict:
        names = ("Ed", "Ad", "Bd", "Cd", "Dd", "Ke", "Ka", "Kb")
        doc = {k: getattr(self, k) for k in names}
        doc.update(s0=self.s0, delta=self.delta, l=self.l, n=self.n, m=self.m)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "DescriptorData":
        mats = {k: np.asarray(doc[k], dtype=float) for k in ("Ed", "Ad", "Bd", "Cd", "Dd", "Ke", "Ka", "Kb")}
        return cls(**mats, s0=float(doc["s0"]), delta=float(doc["delta"]), l=int(doc["l"]))


@dataclass(frozen=True)
class AugmentedDescriptor:
    """Descriptor in the stacked state (x_k, x_{k+1})."""

    Ehat: np.ndarray
    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    Dhat: np.ndarray
    Ka_hat: np.ndarray
    Kb_hat: np.ndarray

    @property
    def n(self) -> int:
        return self.Ehat.shape[0] // 2

    @property
    def m(self) -> int:
        return self.Bhat.shape[1]

    @property
    def p(self) -> int:
        return self.Chat.shape[0]


def input_padding(n: int, m: int) -> np.ndarray:
    """[I_m; 0_{(n-m) x m}]."""
    if m > n:
        raise ValueError(f"need m <= n, got m={m}, n={n}")
    return np.vstack([np.eye(m), np.zeros((n - m, m))])


def _checked_inverse(M: np.ndarray, name: str, floor: float) -> np.ndarray:
    rc = rcond(M)
    if rc < floor:
        raise DescriptorConditioningError(f"{name} is numerically singular (rcond={rc:.3g})")
    return lu_inverse(M)


def build_descriptor(
    agg1: Experiment1Aggregate,
    agg2: Experiment2Aggregate,
    config: ExperimentConfig,
    rcond_floor: float = 1e-14,
) -> DescriptorData:
    n, m = config.n, config.m
    if agg1.N.shape != (n, n) or agg2.R1.shape != (n, m):
        raise ValueError("aggregate shapes do not match the config dimensions")
    s0, delta, l = config.s0, config.delta, config.l
    # N = (s0 I - A) M - Bw W and T likewise: if they vanish next to M and V,
    # s0 sits on the spectrum of A and rcond (scale-free) cannot tell
    for small, big, name in ((agg1.N, agg1.M, "N"), (agg1.T, agg1.V, "T")):
        if np.abs(small).max() <= SHIFT_FLOOR * np.abs(big).max():
            raise DescriptorConditioningError(f"{name} is negligible next to the state sums; s0={s0} "
                                              "is (nearly) an eigenvalue of the plant")
    N_inv = _checked_inverse(agg1.N, "N", rcond_floor)
    T_inv = _checked_inverse(agg1.T, "T", rcond_floor)
    X_inv = _checked_inverse(agg1.X, "X", rcond_floor)

    Ed = agg1.M @ N_inv
    Ad = agg1.V @ T_inv
    Bd = Ed @ agg2.R1 - Ad @ agg2.R0
    Cd = agg1.Y @ X_inv
    Dd = agg2.Yp - Cd @ agg2.Xp

    scale = l * np.sqrt(delta * n)
    Ke = -scale * N_inv
    Ka = -s0 * scale * T_inv
    Kb = -scale * (N_inv @ agg2.R1 - s0 * T_inv @ agg2.R0) - np.sqrt(delta * m) * input_padding(n, m)
    return DescriptorData(Ed=Ed, Ad=Ad, Bd=Bd, Cd=Cd, Dd=Dd, Ke=Ke, Ka=Ka, Kb=Kb, s0=s0, delta=delta, l=l)


def augment(d: DescriptorData) -> AugmentedDescriptor:
    n, m, p = d.n, d.m, d.p
    I, O = np.eye(n), np.zeros((n, n))
    return AugmentedDescriptor(
        Ehat=np.block([[I, O], [O, O]]),
        Ahat=np.block([[O, I], [d.Ad, -d.Ed]]),
        Bhat=np.vstack([np.zeros((n, m)), d.Bd]),
        Chat=np.hstack([d.Cd, np.zeros((p, n))]),
        Dhat=d.Dd.copy(),
        Ka_hat=np.hstack([d.Ka, -d.Ke]),
        Kb_hat=d.Kb.copy(),
    )


@dataclass(frozen=True)
class ResidualReport:
    """Relative residuals of the exact data identities, given the true noise.

    ``E``, ``A`` and ``B`` refer to the three identities expressing
    (s0 I - A)^-1, (s0 I - A)^-1 A and (s0 I - A)^-1 B through data plus the
    noise correction; ``C`` and ``D`` compare against the true output matrices.
    """

    E: float
    A: float
    B: float
    C: float
    D: float

    def max(self) -> float:
        return max(self.E, self.A, self.B, self.C, self.D)


def _rel(diff: np.ndarray, ref: np.ndarray) -> float:
    return float(np.abs(diff).max() / max(1.0, np.abs(ref).max()))


def residual_report(
    d: DescriptorData,
    plant: PlantModel,
    oracle_W: np.ndarray,
    oracle_W0: np.ndarray,
    agg1: Experiment1Aggregate,
    agg2: Experiment2Aggregate,
) -> ResidualReport:
    """Check the nominal matrices against the truth plus the recorded-noise terms."""
    E_true, A_true, B_true, Bwd = true_descriptor(plant, d.s0)
    N_inv, T_inv = lu_inverse(agg1.N), lu_inverse(agg1.T)
    E_pred = d.Ed - Bwd @ oracle_W @ N_inv
    A_pred = d.Ad - d.s0 * Bwd @ oracle_W @ T_inv
    noise_B = oracle_W @ (N_inv @ agg2.R1 - d.s0 * T_inv @ agg2.R0) + oracle_W0
    B_pred = d.Bd - Bwd @ noise_B
    return ResidualReport(
        E=_rel(E_pred - E_true, E_true),
        A=_rel(A_pred - A_true, A_true),
        B=_rel(B_pred - B_true, B_true),
        C=_rel(d.Cd - plant.C, plant.C),
        D=_rel(d.Dd - plant.D, plant.D),
    )
