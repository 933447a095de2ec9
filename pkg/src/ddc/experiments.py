"""The two data-collection experiments and their aggregate data matrices.

Experiment 1 runs n sub-experiments of l steps with zero-sum inputs and
yields N, M, V, T, X, Y.  Experiment 2 runs m sub-experiments with a
constant unit input e_i and yields R0, R1, X', Y'.  The summed disturbances
(W, W0) are kept as ``oracle_*`` fields for tests; they are never consumed
by the descriptor construction.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from ddc.linalg import rcond
from ddc.plant import NoiseProcess, PlantModel, Trajectory, simulate
from ddc.rng import keyed_generator

log = logging.getLogger(__name__)

EXP1, EXP2 = 1, 2
# last stream-path word: which random quantity of a sub-experiment
_DRAWS, _NOISE = 0, 1


class ConditioningError(RuntimeError):
    """Experiment 1 kept producing near-singular N, T or X."""


class Conditioning(enum.Enum):
    OK = "ok"
    RETRY = "retry"


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    l: int = 4
    s0: float = 0.5
    delta: float = 0.2
    cond_threshold: float = 1e-8
    max_retries: int = 10
    seed: int = 0
    input_scale: float = 1.0

    def __post_init__(self):
        if self.l < 1:
            raise ValueError(f"l must be >= 1, got {self.l}")
        if not 0.0 < self.cond_threshold < 1.0:
            raise ValueError("cond_threshold must lie in (0, 1)")
        if self.m > self.n:
            raise ValueError(f"need m <= n, got m={self.m}, n={self.n}")
        if self.max_retries < 1:
            raise ValueError("max_retries must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @classmethod
    def for_plant(cls, plant: PlantModel, **kwargs) -> "ExperimentConfig":
        return cls(n=plant.n, m=plant.m, **kwargs)


@dataclass(frozen=True)
class ExperimentRecord:
    """Raw sub-experiment trajectories of one experiment."""

    experiment: int
    trajectories: tuple[Trajectory, ...]

    @property
    def l(self) -> int:
        return self.trajectories[0].length


@dataclass(frozen=True)
class Experiment1Aggregate:
    N: np.ndarray
    M: np.ndarray
    V: np.ndarray
    T: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    oracle_W: np.ndarray | None = None

    def data_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("N", "M", "V", "T", "X", "Y")}


@dataclass(frozen=True)
class Experiment2Aggregate:
    R0: np.ndarray
    R1: np.ndarray
    Xp: np.ndarray
    Yp: np.ndarray
    oracle_W0: np.ndarray | None = None

    def data_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("R0", "R1", "Xp", "Yp")}


def design_exp1_inputs(m: int, l: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """l random inputs (rows) whose sum is exactly zero.

    The first l-1 rows are uniform on [0, scale)^m and the last one cancels
    their sum.  With l = 1 the only admissible input is zero.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    u = np.zeros((l, m))
    if l >= 2:
        u[:-1] = scale * rng.random((l - 1, m))
        u[-1] = -u[:-1].sum(axis=0)
    return u


def _sub_noise(config: ExperimentConfig, attempt: int, experiment: int, i: int) -> NoiseProcess:
    return NoiseProcess(config.delta, config.seed, (attempt, experiment, i, _NOISE))


def run_experiment1(plant: PlantModel, config: ExperimentConfig, attempt: int = 0) -> ExperimentRecord:
    trajs = []
    for i in range(plant.n):
        rng = keyed_generator(config.seed, attempt, EXP1, i, _DRAWS)
        x0 = rng.random(plant.n)
        u = design_exp1_inputs(plant.m, config.l, rng, config.input_scale)
        trajs.append(simulate(plant, x0, u, _sub_noise(config, attempt, EXP1, i)))
    return ExperimentRecord(EXP1, tuple(trajs))


def run_experiment2(plant: PlantModel, config: ExperimentConfig, attempt: int = 0) -> ExperimentRecord:
    trajs = []
    for i in range(plant.m):
        rng = keyed_generator(config.seed, attempt, EXP2, i, _DRAWS)
        x0 = rng.random(plant.n)
        u = np.tile(np.eye(plant.m)[i], (config.l, 1))
        trajs.append(simulate(plant, x0, u, _sub_noise(config, attempt, EXP2, i)))
    return ExperimentRecord(EXP2, tuple(trajs))


def aggregate_exp1(record: ExperimentRecord, s0: float) -> Experiment1Aggregate:
    cols = {k: [] for k in ("N", "M", "V", "T", "X", "Y", "W")}
    for tr in record.trajectories:
        L = tr.length
        head = tr.x[:L].sum(axis=0)  # sum_{k=0}^{l-1} x_k
        tail = tr.x[1:].sum(axis=0)  # sum_{k=1}^{l} x_k
        drop = tr.x[0] - tr.x[L]
        cols["N"].append((s0 - 1.0) * head + drop)
        cols["M"].append(head)
        cols["V"].append(tail)
        cols["T"].append((s0 - 1.0) * tail + s0 * drop)
        cols["X"].append(head)
        cols["Y"].append(tr.y.sum(axis=0))
        cols["W"].append(tr.w.sum(axis=0))
    mats = {k: np.column_stack(v) for k, v in cols.items()}
    return Experiment1Aggregate(
        N=mats["N"], M=mats["M"], V=mats["V"], T=mats["T"], X=mats["X"], Y=mats["Y"],
        oracle_W=mats["W"],
    )


def aggregate_exp2(record: ExperimentRecord) -> Experiment2Aggregate:
    last = [tr.length - 1 for tr in record.trajectories]
    trajs = record.trajectories
    R0 = np.column_stack([tr.x[k] for tr, k in zip(trajs, last)])
    R1 = np.column_stack([tr.x[k + 1] for tr, k in zip(trajs, last)])
    Yp = np.column_stack([tr.y[k] for tr, k in zip(trajs, last)])
    W0 = np.column_stack([tr.w[k] for tr, k in zip(trajs, last)])
    return Experiment2Aggregate(R0=R0, R1=R1, Xp=R0.copy(), Yp=Yp, oracle_W0=W0)


def check_conditioning(agg: Experiment1Aggregate, threshold: float) -> Conditioning:
    worst = min(rcond(agg.N), rcond(agg.T), rcond(agg.X))
    return Conditioning.OK if worst > threshold else Conditioning.RETRY


@dataclass(frozen=True)
class Dataset:
    """Everything produced by one successful round of both experiments."""

    exp1: Experiment1Aggregate
    exp2: Experiment2Aggregate
    record1: ExperimentRecord
    record2: ExperimentRecord
    config: ExperimentConfig
    attempts: int

    def fingerprint(self) -> str:
        """sha256 over the controller-visible matrices only."""
        h = hashlib.sha256()
        for name, mat in {**self.exp1.data_dict(), **self.exp2.data_dict()}.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(mat, dtype="<f8").tobytes())
        return h.hexdigest()


def collect(plant: PlantModel, config: ExperimentConfig) -> Dataset:
    """Run both experiments, rerunning Experiment 1 on bad conditioning."""
    if (config.n, config.m) != (plant.n, plant.m):
        raise ValueError("config dimensions do not match the plant")
    for attempt in range(config.max_retries):
        rec1 = run_experiment1(plant, config, attempt)
        agg1 = aggregate_exp1(rec1, config.s0)
        if check_conditioning(agg1, config.cond_threshold) is Conditioning.OK:
            rec2 = run_experiment2(plant, config, attempt)
            return Dataset(agg1, aggregate_exp2(rec2), rec1, rec2, config, attempt + 1)
        log.info("experiment 1 ill-conditioned (seed=%d, attempt %d); retrying", config.seed, attempt)
    raise ConditioningError(
        f"N, T or X stayed below rcond {config.cond_threshold} after {config.max_retries} attempts"
    )
