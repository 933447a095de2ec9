"""``ddc`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ddc.bench import (
    BenchConfig,
    ConfigError,
    cmd_figure1,
    cmd_montecarlo,
    cmd_pipeline,
    dataset_documents,
    descriptor_from_documents,
    load_plant,
    summarize_rows,
)
from ddc.descriptor import DescriptorData
from ddc.experiments import ConditioningError, collect
from ddc.io import MatrixFileError, dumps, load_matrix_file, save_matrix_file
from ddc.plant import NoiseProcess, simulate, simulate_closed_loop
from ddc.synthesis import ControllerGain, SynthesisError, synth_hinf, synth_robust
from ddc.verify import verify_gain

log = logging.getLogger("ddc")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON file with BenchConfig fields")
    parser.add_argument("--seed", type=int, default=default, help="base seed (u64)")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--with-oracle", action="store_true", default=default if suppress else False,
                        help="also write simulator-side noise records")
    parser.add_argument("-v", "--verbose", action="store_true", default=default if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ddc", description="Data-driven robust and H-infinity state feedback.")
    _global_flags(top, suppress=False)
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("gen", "run both experiments and write exp1.json, exp2.json")
    p.add_argument("--plant")
    p.add_argument("--delta", type=float)
    p.add_argument("--s0", type=float)
    p.add_argument("--l", type=int)

    p = add("build-descriptor", "build descriptor.json from experiment data")
    p.add_argument("--data", required=True, help="directory holding exp1.json and exp2.json")

    p = add("synth", "synthesise a gain from descriptor.json")
    p.add_argument("method", choices=["robust", "hinf"])
    p.add_argument("--descriptor", required=True)
    p.add_argument("--gamma", type=float)

    p = add("verify", "check a gain against the true plant")
    p.add_argument("--plant")
    p.add_argument("--controller", required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--energy-trials", type=int, default=0)

    p = add("simulate", "simulate the plant open loop or under a gain")
    p.add_argument("--plant")
    p.add_argument("--controller")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--delta", type=float)
    p.add_argument("--x0", type=float, nargs="+")

    p = add("pipeline", "gen, build-descriptor, synth and verify in one go")
    p.add_argument("--plant")
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--methods", nargs="+", choices=["robust", "hinf"])

    p = add("montecarlo", "stabilisation rate per noise level")
    p.add_argument("--plant")
    p.add_argument("--noise-levels", type=float, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int)

    p = add("figure1", "closed-loop output traces under both gains with shared noise")
    p.add_argument("--plant")
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--steps", type=int, dest="figure_steps")
    p.add_argument("--robust-controller")
    p.add_argument("--hinf-controller")
    return top


_CONFIG_KEYS = ("plant", "delta", "gamma", "s0", "l", "seed", "out", "noise_levels", "trials",
                "jobs", "methods", "figure_steps", "with_oracle")


def make_config(args: argparse.Namespace) -> BenchConfig:
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) not in (None, False)}
    if args.config:
        return BenchConfig.from_file(args.config, **overrides)
    return BenchConfig.from_dict(overrides)


def _target(out: str, default_name: str) -> Path:
    p = Path(out)
    return p if p.suffix == ".json" else p / default_name


def _load_gain(path) -> ControllerGain:
    return ControllerGain.from_dict(load_matrix_file(path))


def run(args: argparse.Namespace) -> int:
    cfg = make_config(args)
    cmd = args.command
    if cmd == "gen":
        plant = load_plant(cfg)
        ds = collect(plant, cfg.experiment(plant))
        exp1, exp2 = dataset_documents(ds, cfg.with_oracle)
        save_matrix_file(Path(cfg.out) / "exp1.json", exp1)
        save_matrix_file(Path(cfg.out) / "exp2.json", exp2)
        print(f"wrote {cfg.out}/exp1.json, {cfg.out}/exp2.json (attempts={ds.attempts})")
        return 0
    if cmd == "build-descriptor":
        data = Path(args.data)
        d = descriptor_from_documents(load_matrix_file(data / "exp1.json"), load_matrix_file(data / "exp2.json"))
        target = save_matrix_file(_target(cfg.out, "descriptor.json"), d.to_dict())
        print(f"wrote {target}")
        return 0
    if cmd == "synth":
        d = DescriptorData.from_dict(load_matrix_file(args.descriptor))
        prov = {"descriptor": str(args.descriptor)}
        if args.method == "robust":
            gain = synth_robust(d, cfg.margin, provenance=prov)
        else:
            gain = synth_hinf(d, cfg.gamma, cfg.margin, provenance=prov)
        target = save_matrix_file(_target(cfg.out, "controller.json"), gain.to_dict())
        print(f"wrote {target}")
        return 0
    if cmd == "verify":
        plant = load_plant(cfg)
        gain = _load_gain(args.controller)
        gamma = args.gamma if args.gamma is not None else gain.gamma
        noise = NoiseProcess(cfg.delta, cfg.seed)
        rep = verify_gain(plant, gain.F, gamma, noise, cfg.energy_steps, args.energy_trials)
        sys.stdout.write(dumps(rep.to_dict()))
        return 0 if rep.passed else 1
    if cmd == "simulate":
        plant = load_plant(cfg)
        x0 = np.asarray(args.x0, dtype=float) if args.x0 else np.zeros(plant.n)
        noise = NoiseProcess(cfg.delta, cfg.seed)
        if args.controller:
            tr = simulate_closed_loop(plant, _load_gain(args.controller).F, x0, noise, args.steps)
        else:
            tr = simulate(plant, x0, np.zeros((args.steps, plant.m)), noise)
        target = Path(cfg.out) if cfg.out.endswith(".csv") else Path(cfg.out) / "trajectory.csv"
        target.parent.mkdir(parents=True, exist_ok=True)
        tr.to_csv(target)
        print(f"wrote {target}")
        return 0
    if cmd == "pipeline":
        code, summary = cmd_pipeline(cfg)
        sys.stdout.write(dumps({"verified": summary.get("verified", False),
                                "stages": {k: v.get("ok") for k, v in summary["stages"].items()}}))
        return code
    if cmd == "montecarlo":
        code, rows = cmd_montecarlo(cfg)
        print(summarize_rows(rows))
        return code
    if cmd == "figure1":
        robust = _load_gain(args.robust_controller) if args.robust_controller else None
        hinf = _load_gain(args.hinf_controller) if args.hinf_controller else None
        code, info = cmd_figure1(cfg, robust, hinf)
        print(json.dumps(info["energy"]))
        return code
    raise AssertionError(cmd)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, MatrixFileError, FileNotFoundError) as exc:
        print(f"ddc: error: {exc}", file=sys.stderr)
        return 2
    except (SynthesisError, ConditioningError) as exc:
        print(f"ddc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
