"""The four LMI conditions on the augmented descriptor, plus Petersen's test.

``robust`` and ``hinf`` use only data.  ``model_robust`` and ``model_hinf``
need the unobservable disturbance channel and exist as simulator-side
oracles for the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddc.descriptor import AugmentedDescriptor
from ddc.lmi.expr import Affine, BlockLmi, MatrixVariable, StructuredMatrix, bmat


@dataclass(frozen=True)
class RobustVariables:
    P: MatrixVariable
    Q: MatrixVariable
    Z: MatrixVariable
    K: MatrixVariable
    H3: MatrixVariable
    H4: MatrixVariable
    G3: MatrixVariable
    G4: MatrixVariable
    eps: MatrixVariable
    H: StructuredMatrix
    G: StructuredMatrix

    def all(self) -> list[MatrixVariable]:
        return [self.P, self.Q, self.Z, self.K, self.H3, self.H4, self.G3, self.G4, self.eps]


@dataclass(frozen=True)
class HinfVariables:
    P1: MatrixVariable
    P4: MatrixVariable
    S1: MatrixVariable
    S2: MatrixVariable
    K1: MatrixVariable
    eps: MatrixVariable

    def all(self) -> list[MatrixVariable]:
        return [self.P1, self.P4, self.S1, self.S2, self.K1, self.eps]


@dataclass(frozen=True)
class AnalysisVariables:
    Phat: MatrixVariable
    Shat: MatrixVariable

    def all(self) -> list[MatrixVariable]:
        return [self.Phat, self.Shat]


def scaled_identity(var: MatrixVariable, size: int, coef: float = 1.0) -> Affine:
    """coef * var * I_size for a 1x1 variable."""
    E = np.eye(size)
    return sum((coef * (E[:, [k]] @ var.expr() @ E[[k], :]) for k in range(1, size)),
               coef * (E[:, [0]] @ var.expr() @ E[[0], :]))


def scaled_gram(var: MatrixVariable, B: np.ndarray) -> Affine:
    """var * B B^T for a 1x1 variable, as rank-one terms."""
    return sum((B[:, [k]] @ var.expr() @ B[:, [k]].T for k in range(1, B.shape[1])),
               B[:, [0]] @ var.expr() @ B[:, [0]].T)


def robust_variables(n: int, m: int) -> RobustVariables:
    K = MatrixVariable("K", n, n)
    H3, H4 = MatrixVariable("H3", n, n), MatrixVariable("H4", n, n)
    G3, G4 = MatrixVariable("G3", n, n), MatrixVariable("G4", n, n)
    return RobustVariables(
        P=MatrixVariable("P", 2 * n, 2 * n, "spd"),
        Q=MatrixVariable("Q", 2 * n, n),
        Z=MatrixVariable("Z", m, n),
        K=K, H3=H3, H4=H4, G3=G3, G4=G4,
        eps=MatrixVariable("eps", 1, 1, "scalar"),
        H=StructuredMatrix.from_blocks("H", [[K, (n, n)], [H3, H4]]),
        G=StructuredMatrix.from_blocks("G", [[K, (n, n)], [G3, G4]]),
    )


def _robust_grid(aug: AugmentedDescriptor, v: RobustVariables, Bw_hat: np.ndarray | None):
    n = aug.n
    I_hat = np.hstack([np.eye(n), np.zeros((n, n))])
    S = np.vstack([np.zeros((n, n)), np.eye(n)])
    AmE = aug.Ahat - aug.Ehat
    H, G = v.H.expr, v.G.expr
    ZI = v.Z @ I_hat
    BZI = aug.Bhat @ ZI
    phi11 = AmE @ H + H.T @ AmE.T + BZI + BZI.T
    if Bw_hat is not None:
        phi11 = phi11 + scaled_gram(v.eps, Bw_hat)
    phi12 = aug.Ehat @ v.P.expr() + v.Q @ S.T - H.T + AmE @ G + BZI
    phi13 = (aug.Ka_hat @ H + aug.Kb_hat @ ZI).T
    phi22 = -G - G.T + v.P.expr()
    phi23 = (aug.Ka_hat @ G + aug.Kb_hat @ ZI).T
    phi33 = scaled_identity(v.eps, n, -1.0)
    return ((phi11, phi12, phi13), (None, phi22, phi23), (None, None, phi33))


def assemble_robust_lmi(aug: AugmentedDescriptor) -> tuple[BlockLmi, RobustVariables]:
    """Data-only robust stabilisation condition (5n x 5n); gain F = Z K^-1."""
    v = robust_variables(aug.n, aug.m)
    return BlockLmi("robust", _robust_grid(aug, v, None), structured=(v.H, v.G)), v


def assemble_model_robust(aug: AugmentedDescriptor, Bwd: np.ndarray) -> tuple[BlockLmi, RobustVariables]:
    """The robust condition with the true-channel term eps * Bw_hat Bw_hat^T restored."""
    v = robust_variables(aug.n, aug.m)
    Bw_hat = np.vstack([np.zeros((aug.n, Bwd.shape[1])), Bwd])
    return BlockLmi("model_robust", _robust_grid(aug, v, Bw_hat), structured=(v.H, v.G)), v


def hinf_variables(n: int, m: int) -> HinfVariables:
    return HinfVariables(
        P1=MatrixVariable("P1", n, n, "spd"),
        P4=MatrixVariable("P4", n, n, "spd"),
        S1=MatrixVariable("S1", n, n),
        S2=MatrixVariable("S2", n, n),
        K1=MatrixVariable("K1", m, n),
        eps=MatrixVariable("eps", 1, 1, "scalar"),
    )


def assemble_hinf_lmi(aug: AugmentedDescriptor, gamma: float) -> tuple[BlockLmi, HinfVariables]:
    """Data-only H-infinity condition ((5n+p) square); gain F = K1 P1^-1."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    n, m, p = aug.n, aug.m, aug.p
    Ed, Ad = -aug.Ahat[n:, n:], aug.Ahat[n:, :n]
    Bd, Cd, Dd = aug.Bhat[n:], aug.Chat[:, :n], aug.Dhat
    Ke = -aug.Ka_hat[:, n:]
    v = hinf_variables(n, m)
    P1, P4, S1, S2, K1 = v.P1.expr(), v.P4.expr(), v.S1.expr(), v.S2.expr(), v.K1.expr()
    On = np.zeros((n, n))

    psi11 = _bmat2(S1 + S1.T - P1, -S1 @ Ed.T + S2.T,
                   None, -Ed @ S2.T - S2 @ Ed.T)
    psi13 = _bmat2(On, -P4,
                   Ad @ P1 + Bd @ K1, -Ed @ P4)
    psi14 = _vstack(-S1 @ Ke.T, -S2 @ Ke.T)
    psi23 = _hstack(Cd @ P1 + Dd @ K1, np.zeros((p, n)))
    Phat = _bmat2(P1, On, None, P4)
    grid = (
        (psi11, np.zeros((2 * n, p)), psi13, psi14),
        (None, -gamma**2 * np.eye(p), psi23, np.zeros((p, n))),
        (None, None, -Phat, np.zeros((2 * n, n))),
        (None, None, None, scaled_identity(v.eps, n, -1.0)),
    )
    return BlockLmi("hinf", grid), v


def assemble_model_hinf(
    Ehat: np.ndarray,
    Ahat_closed: np.ndarray,
    Bw_hat: np.ndarray,
    Chat_closed: np.ndarray,
    gamma: float,
) -> tuple[BlockLmi, AnalysisVariables]:
    """Bounded-real analysis LMI for E x+ = A x + Bw w, y = C x (model oracle).

    Uses R = [0; I_n], which spans the left null space of the stacked E.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    nn = Ehat.shape[0]
    n = nn // 2
    q, p = Bw_hat.shape[1], Chat_closed.shape[0]
    R = np.vstack([np.zeros((n, n)), np.eye(n)])
    if np.abs(Ehat.T @ R).max() != 0.0:
        raise ValueError("R = [0; I] does not annihilate E^T for this E")
    v = AnalysisVariables(Phat=MatrixVariable("Phat", nn, nn, "spd"), Shat=MatrixVariable("Shat", nn, n))
    P, S = v.Phat.expr(), v.Shat.expr()
    SRA = S @ R.T @ Ahat_closed
    theta11 = SRA + SRA.T - Ehat.T @ P @ Ehat
    grid = (
        (theta11, S @ R.T @ Bw_hat, Ahat_closed.T @ P, Chat_closed.T),
        (None, -gamma**2 * np.eye(q), Bw_hat.T @ P, np.zeros((q, p))),
        (None, None, -P, np.zeros((nn, p))),
        (None, None, None, -np.eye(p)),
    )
    return BlockLmi("model_hinf", grid), v


def model_augmented(Acl: np.ndarray, Bw: np.ndarray, Ccl: np.ndarray, s0: float | None = None):
    """(Ehat, Ahat, Bw_hat, Chat) of the stacked descriptor form of x+ = Acl x + Bw w, y = Ccl x.

    Simulator-side: uses the true matrices.  The transfer from w to y is
    unchanged by the lifting, so the bounded-real test on it is a test on
    the original system.
    """
    n = Acl.shape[0]
    if s0 is None:
        s0 = 1.0 + 2.0 * np.linalg.norm(Acl, 2)  # outside the spectrum
    shift = s0 * np.eye(n) - Acl
    Ed = np.linalg.solve(shift, np.eye(n))
    Ad, Bwd = Ed @ Acl, Ed @ Bw
    I, O = np.eye(n), np.zeros((n, n))
    Ehat = np.block([[I, O], [O, O]])
    Ahat = np.block([[O, I], [Ad, -Ed]])
    Bw_hat = np.vstack([np.zeros_like(Bw), Bwd])
    Chat = np.hstack([Ccl, np.zeros((Ccl.shape[0], n))])
    return Ehat, Ahat, Bw_hat, Chat


def petersen_sufficient(Zh: np.ndarray, Xh: np.ndarray, Yh: np.ndarray, eps: float) -> bool:
    """True iff Zh + eps Xh Xh^T + Yh^T Yh / eps is negative definite."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    Zh, Xh, Yh = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (Zh, Xh, Yh))
    d = Zh.shape[0]
    if Zh.shape != (d, d) or Xh.shape[0] != d or Yh.shape[1] != d:
        raise ValueError(f"inconsistent shapes Z{Zh.shape} X{Xh.shape} Y{Yh.shape}")
    M = Zh + eps * Xh @ Xh.T + Yh.T @ Yh / eps
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T))[-1] < 0.0)


def _bmat2(a, b, c, d):
    return bmat([[a, b], [Affine.lift(b).T if c is None else c, d]])


def _vstack(a, b):
    return bmat([[a], [b]])


def _hstack(a, b):
    return bmat([[a, b]])
