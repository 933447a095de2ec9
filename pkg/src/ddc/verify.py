"""Ground-truth checks of a state-feedback gain against the true plant.

The H-infinity norm is computed by a frequency sweep, independently of the
LMI machinery whose output it checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ddc.plant import NoiseProcess, PlantModel, simulate_closed_loop

GRID_POINTS = 512
# grid local maxima refined by golden-section search
REFINE_PEAKS = 4
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class VerificationReport:
    spectral_radius: float
    stable: bool
    hinf_norm: float
    empirical_energy_ratios: list[float] = field(default_factory=list)
    skipped_trials: list[int] = field(default_factory=list)
    gamma_target: float | None = None

    @property
    def meets_gamma(self) -> bool | None:
        if self.gamma_target is None:
            return None
        return self.stable and self.hinf_norm <= self.gamma_target + 1e-6

    @property
    def passed(self) -> bool:
        if not self.stable:
            return False
        if self.gamma_target is None:
            return True
        bound = self.gamma_target**2 * 1.05
        return bool(self.meets_gamma) and all(r <= bound for r in self.empirical_energy_ratios)

    def to_dict(self) -> dict:
        return {
            "spectral_radius": self.spectral_radius,
            "stable": self.stable,
            "hinf_norm": self.hinf_norm if math.isfinite(self.hinf_norm) else "inf",
            "empirical_energy_ratios": list(self.empirical_energy_ratios),
            "skipped_trials": list(self.skipped_trials),
            "gamma_target": self.gamma_target,
            "passed": self.passed,
        }


def spectral_radius(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got shape {M.shape}")
    if M.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(M)).max())


def closed_loop(plant: PlantModel, F) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=float)
    if F.shape != (plant.m, plant.n):
        raise ValueError(f"F must be {plant.m}x{plant.n}, got {F.shape}")
    return plant.A + plant.B @ F, plant.C + plant.D @ F


def _gain(Acl: np.ndarray, Bw: np.ndarray, Ccl: np.ndarray, theta: float) -> float:
    z = np.exp(1j * theta)
    G = Ccl @ np.linalg.solve(z * np.eye(Acl.shape[0]) - Acl, Bw)
    return float(np.linalg.norm(G, 2))


def _golden_max(f, a: float, b: float, tol: float, f_seed: float) -> float:
    """Maximum of f on [a, b] by golden-section search; never below f_seed."""
    c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = max(f_seed, fc, fd)
    while b - a > 1e-12:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        prev, best = best, max(best, fc, fd)
        # flat enough near the peak: further shrinking cannot move the value by tol
        if abs(fc - fd) <= tol * best * 1e-3 and best - prev <= tol * best * 1e-3:
            break
    return best


def frequency_grid_norm(Acl: np.ndarray, Bw: np.ndarray, Ccl: np.ndarray, points: int = GRID_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Grid on [0, pi] (real systems are symmetric in frequency) and the gains on it."""
    thetas = np.linspace(0.0, np.pi, points)
    n = Acl.shape[0]
    shifted = np.exp(1j * thetas)[:, None, None] * np.eye(n) - Acl
    G = Ccl @ np.linalg.solve(shifted, np.broadcast_to(Bw, (points,) + Bw.shape))
    return thetas, np.linalg.svd(G, compute_uv=False)[:, 0]


def hinf_norm_matrices(Acl: np.ndarray, Bw: np.ndarray, Ccl: np.ndarray, tol: float = 1e-6,
                       points: int = GRID_POINTS) -> float:
    """sup over |z| = 1 of sigma_max(Ccl (zI - Acl)^-1 Bw); inf if Acl is not Schur."""
    if spectral_radius(Acl) >= 1.0:
        return math.inf
    thetas, gains = frequency_grid_norm(Acl, Bw, Ccl, points)
    h = thetas[1] - thetas[0]
    interior = np.flatnonzero((gains[1:-1] >= gains[:-2]) & (gains[1:-1] >= gains[2:])) + 1
    peaks = set(interior.tolist())
    peaks.update(i for i in (0, len(gains) - 1) if gains[i] >= gains[i - 1 if i else 1])
    ranked = sorted(peaks, key=lambda i: -gains[i])[:REFINE_PEAKS]
    f = lambda t: _gain(Acl, Bw, Ccl, t)  # noqa: E731
    best = float(gains.max())
    for i in ranked:
        lo, hi = max(0.0, thetas[i] - h), min(np.pi, thetas[i] + h)
        best = max(best, _golden_max(f, lo, hi, tol, float(gains[i])))
    return best


def hinf_norm(plant: PlantModel, F, tol: float = 1e-6) -> float:
    Acl, Ccl = closed_loop(plant, F)
    return hinf_norm_matrices(Acl, plant.Bw, Ccl, tol)


def empirical_energy_ratio(
    plant: PlantModel,
    F,
    noise: NoiseProcess,
    L: int = 10_000,
    trials: int = 1,
) -> tuple[list[float], list[int]]:
    """Sum ||y||^2 / sum ||w||^2 per trial from zero state; all-zero-noise trials are skipped and listed."""
    if L < 100:
        raise ValueError("L must be >= 100")
    ratios, skipped = [], []
    x0 = np.zeros(plant.n)
    for t in range(trials):
        tr = simulate_closed_loop(plant, F, x0, noise.substream(t), L)
        energy_w = float(np.sum(tr.w**2))
        if energy_w == 0.0:
            skipped.append(t)
            continue
        ratios.append(float(np.sum(tr.y**2)) / energy_w)
    return ratios, skipped


def verify_gain(
    plant: PlantModel,
    F,
    gamma: float | None = None,
    noise: NoiseProcess | None = None,
    L: int = 10_000,
    trials: int = 0,
) -> VerificationReport:
    Acl, Ccl = closed_loop(plant, F)
    rho = spectral_radius(Acl)
    stable = rho < 1.0
    norm = hinf_norm_matrices(Acl, plant.Bw, Ccl) if stable else math.inf
    ratios, skipped = [], []
    if stable and trials > 0 and noise is not None:
        ratios, skipped = empirical_energy_ratio(plant, F, noise, L, trials)
    return VerificationReport(rho, stable, norm, ratios, skipped, gamma)
