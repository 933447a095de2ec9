"""Pipeline orchestration and the benchmark runs: controller pipeline,
Monte Carlo stabilisation table and closed-loop output traces.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ddc.descriptor import DescriptorData, build_descriptor, residual_report
from ddc.experiments import (
    ConditioningError,
    Dataset,
    Experiment1Aggregate,
    Experiment2Aggregate,
    ExperimentConfig,
    collect,
)
from ddc.io import MatrixFileError, load_matrix_file, save_matrix_file
from ddc.plant import NoiseProcess, PlantModel, paper_plant, simulate_closed_loop, true_descriptor
from ddc.rng import derive_seed
from ddc.synthesis import ControllerGain, SynthesisError, synth_hinf, synth_robust
from ddc.verify import spectral_radius, verify_gain

log = logging.getLogger(__name__)

# stream tags under the run seed
_TAG_MONTECARLO, _TAG_FIGURE, _TAG_VERIFY = 1, 2, 3
NOISELESS_TOL = 1e-8


class ConfigError(ValueError):
    """Invalid or unreadable benchmark configuration."""


@dataclass(frozen=True)
class BenchConfig:
    plant: str | None = None
    s0: float = 0.5
    l: int = 4
    delta: float = 0.2
    gamma: float = 0.5
    noise_levels: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.2, 2.4)
    trials: int = 100
    seed: int = 0
    out: str = "out"
    methods: tuple[str, ...] = ("robust", "hinf")
    figure_steps: int = 100
    energy_trials: int = 5
    energy_steps: int = 10_000
    margin: float = 1e-6
    cond_threshold: float = 1e-8
    max_retries: int = 10
    with_oracle: bool = False
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "noise_levels", tuple(float(d) for d in self.noise_levels))
        object.__setattr__(self, "methods", tuple(self.methods))
        if any(d < 0 for d in self.noise_levels) or self.delta < 0:
            raise ConfigError("noise levels must be nonnegative")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.trials < 0 or self.l < 1 or self.jobs < 1:
            raise ConfigError("trials must be >= 0, l >= 1, jobs >= 1")
        unknown = set(self.methods) - {"robust", "hinf"}
        if unknown or not self.methods:
            raise ConfigError(f"methods must be a nonempty subset of robust, hinf; got {self.methods}")

    @classmethod
    def from_file(cls, path, **overrides) -> "BenchConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict({**doc, **overrides})

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in doc.items() if v is not None})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def experiment(self, plant: PlantModel, delta: float | None = None, seed: int | None = None) -> ExperimentConfig:
        return ExperimentConfig.for_plant(
            plant, l=self.l, s0=self.s0, delta=self.delta if delta is None else delta,
            cond_threshold=self.cond_threshold, max_retries=self.max_retries,
            seed=self.seed if seed is None else seed,
        )


@dataclass(frozen=True)
class MonteCarloRow:
    delta: float
    trials: int
    successes: int
    feasible: int = 0

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("a Monte Carlo row needs at least one trial")

    @property
    def percentage(self) -> float:
        return 100.0 * self.successes / self.trials


@dataclass(frozen=True)
class TrialOutcome:
    delta: float
    trial: int
    seed: int
    status: str
    feasible: bool
    stabilizing: bool
    spectral_radius: float = math.nan


def load_plant(config: BenchConfig) -> PlantModel:
    if config.plant is None:
        return paper_plant()
    try:
        return PlantModel.from_dict(load_matrix_file(config.plant))
    except FileNotFoundError as exc:
        raise ConfigError(f"plant file not found: {config.plant}") from exc
    except (MatrixFileError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad plant file {config.plant}: {exc}") from exc


# ---------------------------------------------------------------- documents

def dataset_documents(ds: Dataset, with_oracle: bool) -> tuple[dict, dict]:
    cfg = dataclasses.asdict(ds.config)
    meta = {"config": cfg, "attempts": ds.attempts, "fingerprint": ds.fingerprint()}

    def record(rec):
        out = []
        for tr in rec.trajectories:
            doc = {"x": tr.x, "u": tr.u, "y": tr.y}
            if with_oracle:
                doc["w"] = tr.w
            out.append(doc)
        return out

    exp1 = {**meta, **ds.exp1.data_dict(), "trajectories": record(ds.record1)}
    exp2 = {**meta, **ds.exp2.data_dict(), "trajectories": record(ds.record2)}
    if with_oracle:
        exp1["oracle_W"] = ds.exp1.oracle_W
        exp2["oracle_W0"] = ds.exp2.oracle_W0
    return exp1, exp2


def descriptor_from_documents(exp1: dict, exp2: dict) -> DescriptorData:
    cfg = ExperimentConfig(**exp1["config"])
    agg1 = Experiment1Aggregate(**{k: np.asarray(exp1[k]) for k in ("N", "M", "V", "T", "X", "Y")})
    agg2 = Experiment2Aggregate(**{k: np.asarray(exp2[k]) for k in ("R0", "R1", "Xp", "Yp")})
    return build_descriptor(agg1, agg2, cfg)


def _provenance(ds: Dataset) -> dict:
    return {"dataset": ds.fingerprint(), "seed": ds.config.seed, "delta": ds.config.delta,
            "attempts": ds.attempts}


def _synthesize(method: str, d: DescriptorData, config: BenchConfig, provenance: dict) -> ControllerGain:
    if method == "robust":
        return synth_robust(d, config.margin, provenance=provenance)
    return synth_hinf(d, config.gamma, config.margin, provenance=provenance)


def _noiseless_recovery(d: DescriptorData, plant: PlantModel) -> dict:
    E, A, B, _ = true_descriptor(plant, d.s0)
    inf = np.inf
    errs = {
        "E": np.linalg.norm(d.Ed - E, inf), "A": np.linalg.norm(d.Ad - A, inf),
        "B": np.linalg.norm(d.Bd - B, inf), "C": np.linalg.norm(d.Cd - plant.C, inf),
        "D": np.linalg.norm(d.Dd - plant.D, inf),
    }
    errs = {k: float(v) for k, v in errs.items()}
    return {"errors": errs, "passed": all(v <= NOISELESS_TOL for v in errs.values())}


# ---------------------------------------------------------------- commands

def cmd_pipeline(config: BenchConfig) -> tuple[int, dict]:
    """gen -> build-descriptor -> synth -> verify; returns (exit code, summary)."""
    out = Path(config.out)
    summary: dict[str, Any] = {"config": config.to_dict(), "stages": {}}
    stages = summary["stages"]
    try:
        plant = load_plant(config)
    except ConfigError as exc:
        stages["config"] = {"ok": False, "error": str(exc)}
        return 2, summary
    try:
        ds = collect(plant, config.experiment(plant))
    except ConditioningError as exc:
        stages["gen"] = {"ok": False, "error": str(exc)}
        save_matrix_file(out / "summary.json", summary)
        return 1, summary
    exp1, exp2 = dataset_documents(ds, config.with_oracle)
    save_matrix_file(out / "exp1.json", exp1)
    save_matrix_file(out / "exp2.json", exp2)
    stages["gen"] = {"ok": True, "attempts": ds.attempts, "fingerprint": ds.fingerprint()}

    d = build_descriptor(ds.exp1, ds.exp2, ds.config)
    save_matrix_file(out / "descriptor.json", d.to_dict())
    stage = {"ok": True}
    if config.with_oracle:
        rep = residual_report(d, plant, ds.exp1.oracle_W, ds.exp2.oracle_W0, ds.exp1, ds.exp2)
        stage["residuals"] = dataclasses.asdict(rep)
    if config.delta == 0.0:
        stage["noiseless_recovery"] = _noiseless_recovery(d, plant)
        stage["ok"] = stage["noiseless_recovery"]["passed"]
    stages["build-descriptor"] = stage

    all_ok = stage["ok"]
    for method in config.methods:
        try:
            gain = _synthesize(method, d, config, _provenance(ds))
        except SynthesisError as exc:
            stages[f"synth-{method}"] = {"ok": False, "error": str(exc)}
            all_ok = False
            continue
        save_matrix_file(out / f"controller_{method}.json", gain.to_dict())
        stages[f"synth-{method}"] = {"ok": True, "eps": gain.eps, "margins": gain.margins}
        gamma = config.gamma if method == "hinf" else None
        noise = NoiseProcess(config.delta, config.seed, (_TAG_VERIFY,))
        trials = config.energy_trials if method == "hinf" else 0
        rep = verify_gain(plant, gain.F, gamma, noise, config.energy_steps, trials)
        stages[f"verify-{method}"] = {"ok": rep.passed, **rep.to_dict()}
        all_ok = all_ok and rep.passed
    summary["verified"] = all_ok
    save_matrix_file(out / "summary.json", summary)
    return (0 if all_ok else 1), summary


def trial_seed(seed: int, level: int, trial: int) -> int:
    return derive_seed(seed, _TAG_MONTECARLO, level, trial)


def run_trial(plant: PlantModel, config: BenchConfig, delta: float, level: int, trial: int) -> TrialOutcome:
    """One dataset, one robust synthesis, one ground-truth stability check."""
    seed = trial_seed(config.seed, level, trial)
    try:
        ds = collect(plant, config.experiment(plant, delta=delta, seed=seed))
        d = build_descriptor(ds.exp1, ds.exp2, ds.config)
        gain = synth_robust(d, config.margin)
    except ConditioningError:
        return TrialOutcome(delta, trial, seed, "conditioning", False, False)
    except SynthesisError as exc:
        return TrialOutcome(delta, trial, seed, type(exc).__name__, False, False)
    rho = spectral_radius(plant.A + plant.B @ gain.F)
    return TrialOutcome(delta, trial, seed, "solved", True, rho < 1.0, rho)


def _run_trial_args(args) -> TrialOutcome:
    return run_trial(*args)


def run_montecarlo(config: BenchConfig, plant: PlantModel | None = None) -> tuple[list[MonteCarloRow], list[TrialOutcome]]:
    if not config.noise_levels:
        raise ConfigError("noise_levels must be nonempty")
    if config.trials <= 0:
        raise ConfigError("trials must be positive")
    plant = plant or load_plant(config)
    jobs = [(plant, config, delta, lev, t) for lev, delta in enumerate(config.noise_levels)
            for t in range(config.trials)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_run_trial_args, jobs, chunksize=4))
    else:
        outcomes = [run_trial(*j) for j in jobs]
    rows = []
    for lev, delta in enumerate(config.noise_levels):
        mine = outcomes[lev * config.trials:(lev + 1) * config.trials]
        rows.append(MonteCarloRow(delta, config.trials, sum(o.stabilizing for o in mine), sum(o.feasible for o in mine)))
    return rows, outcomes


def cmd_montecarlo(config: BenchConfig) -> tuple[int, list[MonteCarloRow]]:
    rows, outcomes = run_montecarlo(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "trials", "successes", "percentage"])
        for r in rows:
            w.writerow([repr(r.delta), r.trials, r.successes, repr(r.percentage)])
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "trial", "seed", "status", "feasible", "stabilizing", "spectral_radius"])
        for o in outcomes:
            w.writerow([repr(o.delta), o.trial, o.seed, o.status, int(o.feasible), int(o.stabilizing),
                        repr(o.spectral_radius)])
    manifest = {
        "config": config.to_dict(),
        "levels": [{"delta": r.delta, "trials": r.trials, "verified": r.successes, "feasible": r.feasible,
                    "seeds": [o.seed for o in outcomes if o.delta == r.delta]} for r in rows],
    }
    save_matrix_file(out / "manifest.json", manifest)
    return 0, rows


def _write_outputs(path: Path, y: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k"] + [f"y{i + 1}" for i in range(y.shape[1])])
        for k, row in enumerate(y):
            w.writerow([k] + [repr(float(v)) for v in row])


def noise_digest(w: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(w, dtype="<f8").tobytes()).hexdigest()


def figure1_traces(plant: PlantModel, F_robust, F_hinf, delta: float, seed: int, steps: int):
    """Both closed loops from x0 = 0 driven by one shared noise realisation."""
    noise = NoiseProcess(delta, seed, (_TAG_FIGURE,))
    x0 = np.zeros(plant.n)
    tr_r = simulate_closed_loop(plant, F_robust, x0, noise, steps)
    tr_h = simulate_closed_loop(plant, F_hinf, x0, noise, steps)
    return tr_r, tr_h


def cmd_figure1(
    config: BenchConfig,
    robust: ControllerGain | None = None,
    hinf: ControllerGain | None = None,
) -> tuple[int, dict]:
    plant = load_plant(config)
    if robust is None or hinf is None:
        ds = collect(plant, config.experiment(plant))
        d = build_descriptor(ds.exp1, ds.exp2, ds.config)
        try:
            robust = robust or synth_robust(d, config.margin, provenance=_provenance(ds))
            hinf = hinf or synth_hinf(d, config.gamma, config.margin, provenance=_provenance(ds))
        except SynthesisError as exc:
            raise SynthesisError(f"figure1 needs both gains: {exc}") from exc
    tr_r, tr_h = figure1_traces(plant, robust.F, hinf.F, config.delta, config.seed, config.figure_steps)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_outputs(out / "y_robust.csv", tr_r.y)
    _write_outputs(out / "y_hinf.csv", tr_h.y)
    info = {
        "noise_sha256": {"robust": noise_digest(tr_r.w), "hinf": noise_digest(tr_h.w)},
        "energy": {"robust": float(np.sum(tr_r.y**2)), "hinf": float(np.sum(tr_h.y**2))},
        "F_robust": robust.F, "F_hinf": hinf.F,
    }
    save_matrix_file(out / "figure1.json", info)
    return 0, info


def summarize_rows(rows: Sequence[MonteCarloRow]) -> str:
    return "\n".join(f"delta={r.delta:g}: {r.successes}/{r.trials} verified ({r.percentage:.0f}%), "
                     f"{r.feasible} LMI-feasible" for r in rows)
