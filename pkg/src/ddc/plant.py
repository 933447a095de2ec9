"""Ground-truth discrete LTI plant with energy-bounded disturbances.

Everything in this module is simulator-side: the plant matrices are the
secret the data-driven design never gets to see.  Synthesis code only ever
receives experiment data; tests and the verifier use the true model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ddc.linalg import rcond
from ddc.rng import counter_generator, stream_key


class DimensionError(ValueError):
    """Raised when a vector or matrix does not fit the plant."""


class SingularShiftError(ValueError):
    """Raised when ``s0*I - A`` is singular or too badly conditioned."""


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PlantModel:
    """x_{k+1} = A x_k + B u_k + Bw w_k,  y_k = C x_k + D u_k."""

    A: np.ndarray
    B: np.ndarray
    Bw: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "Bw", "C", "D"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n or self.Bw.shape[0] != n:
            raise DimensionError("B and Bw must have as many rows as A")
        if self.C.shape[1] != n:
            raise DimensionError("C must have as many columns as A")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise DimensionError(
                f"D must be {self.C.shape[0]}x{self.B.shape[1]}, got {self.D.shape}"
            )
        if self.m > n:
            raise DimensionError(f"need m <= n, got m={self.m}, n={n}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return self.Bw.shape[1]

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "Bw": self.Bw, "C": self.C, "D": self.D}

    @classmethod
    def from_dict(cls, doc: dict) -> "PlantModel":
        missing = [k for k in ("A", "B", "Bw", "C", "D") if k not in doc]
        if missing:
            raise DimensionError(f"plant document missing {', '.join(missing)}")
        return cls(doc["A"], doc["B"], doc["Bw"], doc["C"], doc["D"])


def paper_plant() -> PlantModel:
    """The open-loop unstable 3-state, 2-input benchmark plant."""
    return PlantModel(
        A=[[0.850, -0.038, -0.380], [0.735, 0.815, 1.594], [-0.664, 0.697, -0.064]],
        B=[[1.431, 0.705], [1.620, -1.129], [0.913, 0.369]],
        Bw=np.eye(3),
        C=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        D=np.eye(2),
    )


@dataclass(frozen=True)
class NoiseProcess:
    """Disturbance with ``||w_k||_2^2 <= delta`` at every step.

    Draw ``k`` is a pure function of ``(seed, stream, k)``, so any sub-sequence
    can be regenerated without replaying the ones before it.
    """

    delta: float
    seed: int = 0
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.delta >= 0.0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")

    def substream(self, *path: int) -> "NoiseProcess":
        return NoiseProcess(self.delta, self.seed, self.stream + tuple(path))


def _ball_draw(key, q: int, delta: float, index: int) -> np.ndarray:
    gen = counter_generator(key, index)
    direction = gen.standard_normal(q)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = gen.standard_normal(q)
        norm = np.linalg.norm(direction)
    radius = np.sqrt(delta) * gen.random() ** (1.0 / q)
    w = radius * direction / norm
    # rounding can overshoot the sphere by an ulp
    energy = w @ w
    if energy > delta:
        w *= np.sqrt(delta / energy) * (1.0 - 1e-15)
    return w


def sample_noise(noise: NoiseProcess, q: int, index: int = 0) -> np.ndarray:
    """Uniform draw from the closed ball of radius sqrt(delta) in R^q."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if noise.delta == 0.0:
        return np.zeros(q)
    return _ball_draw(stream_key(noise.seed, *noise.stream), q, noise.delta, index)


def noise_sequence(noise: NoiseProcess, q: int, length: int) -> np.ndarray:
    """Rows are draws 0..length-1 of ``noise``; row k equals ``sample_noise(noise, q, k)``."""
    out = np.zeros((length, q))
    if noise.delta == 0.0:
        return out
    key = stream_key(noise.seed, *noise.stream)
    for k in range(length):
        out[k] = _ball_draw(key, q, noise.delta, k)
    return out


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_L and inputs, noises, outputs for steps 0..L-1 (row-wise)."""

    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        for name in ("x", "u", "w", "y"):
            getattr(self, name).setflags(write=False)

    @property
    def length(self) -> int:
        return self.u.shape[0]

    def to_csv(self, path) -> None:
        """Header ``k,x1..xn,u1..um,w1..wq,y1..yp``; x_L is not written."""
        n, m, q, p = self.x.shape[1], self.u.shape[1], self.w.shape[1], self.y.shape[1]
        header = ["k"]
        for sym, size in (("x", n), ("u", m), ("w", q), ("y", p)):
            header += [f"{sym}{i + 1}" for i in range(size)]
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.length):
                row = [k, *self.x[k], *self.u[k], *self.w[k], *self.y[k]]
                writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _check_vec(v, size: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (size,):
        raise DimensionError(f"{name} must have shape ({size},), got {arr.shape}")
    return arr


def step(plant: PlantModel, x, u, w) -> tuple[np.ndarray, np.ndarray]:
    x = _check_vec(x, plant.n, "x")
    u = _check_vec(u, plant.m, "u")
    w = _check_vec(w, plant.q, "w")
    x_next = plant.A @ x + plant.B @ u + plant.Bw @ w
    y = plant.C @ x + plant.D @ u
    return x_next, y


def simulate(plant: PlantModel, x0, inputs, noise: NoiseProcess) -> Trajectory:
    """Open-loop run of ``len(inputs)`` steps; the noise is recorded."""
    u = np.asarray(inputs, dtype=float)
    if u.ndim != 2 or u.shape[0] == 0 or u.shape[1] != plant.m:
        raise DimensionError(f"inputs must be a nonempty (L, {plant.m}) array, got {u.shape}")
    L = u.shape[0]
    w = noise_sequence(noise, plant.q, L)
    x = np.empty((L + 1, plant.n))
    y = np.empty((L, plant.p))
    x[0] = _check_vec(x0, plant.n, "x0")
    for k in range(L):
        x[k + 1], y[k] = step(plant, x[k], u[k], w[k])
    return Trajectory(x=x, u=u.copy(), w=w, y=y)


def simulate_closed_loop(plant: PlantModel, F, x0, noise: NoiseProcess, L: int) -> Trajectory:
    """Run u_k = F x_k for L steps."""
    if L < 1:
        raise ValueError("L must be >= 1")
    F = np.asarray(F, dtype=float)
    if F.shape != (plant.m, plant.n):
        raise DimensionError(f"F must be {plant.m}x{plant.n}, got {F.shape}")
    w = noise_sequence(noise, plant.q, L)
    x = np.empty((L + 1, plant.n))
    u = np.empty((L, plant.m))
    y = np.empty((L, plant.p))
    x[0] = _check_vec(x0, plant.n, "x0")
    Acl = plant.A + plant.B @ F
    Ccl = plant.C + plant.D @ F
    for k in range(L):
        u[k] = F @ x[k]
        y[k] = Ccl @ x[k]
        x[k + 1] = Acl @ x[k] + plant.Bw @ w[k]
    return Trajectory(x=x, u=u, w=w, y=y)


def true_descriptor(plant: PlantModel, s0: float, rcond_floor: float = 1e-10):
    """Oracle (E*, A*, B*, Bwd) = (s0 I - A)^-1 (I, A, B, Bw).  Test/verification use only."""
    shift = s0 * np.eye(plant.n) - plant.A
    if rcond(shift) < rcond_floor:
        raise SingularShiftError(f"s0={s0} is (nearly) an eigenvalue of A")
    rhs = np.hstack([np.eye(plant.n), plant.A, plant.B, plant.Bw])
    sol = np.linalg.solve(shift, rhs)
    n, m = plant.n, plant.m
    return sol[:, :n], sol[:, n:2 * n], sol[:, 2 * n:2 * n + m], sol[:, 2 * n + m:]
