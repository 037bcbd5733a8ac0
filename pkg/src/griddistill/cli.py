"""Command-line pipeline: collect -> distill -> train -> eval, driven by a
JSON experiment config with full-default fallback.

Flag precedence is flags > config file > built-in defaults. Every command
writes config.echo.json with the fully resolved configuration so runs are
self-describing, and every output lands under the configured output
directory.
"""

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field

from . import checks, datasets, evaluate, expert, tinynet
from .distill import DistillConfig, distill, load_synthetic, save_synthetic
from .evaluate import EvalConfig
from .gridenv import EnvConfig
from .rng import derive_stream
from .trainer import TrainConfig, train_cohort


@dataclass
class CollectConfig:
    episodes: int = 100
    epsilons: list = field(default_factory=lambda: [0.0, 0.1, 0.3])
    seed_start: int = 0
    seed_count: int = 200
    gamma: float = 0.99

    def seeds(self) -> list:
        return list(range(self.seed_start, self.seed_start + self.seed_count))


@dataclass
class StudentConfig:
    n_students: int = 10
    bc: TrainConfig = field(default_factory=TrainConfig.for_real)
    synthetic: TrainConfig = field(default_factory=TrainConfig.for_synthetic)


@dataclass
class EvalSection:
    id_seed_start: int = 0
    id_seed_count: int = 200
    ood_seed_start: int = 10000
    ood_seed_count: int = 100
    episodes_per_seed: int = 1
    action_rule: str = "argmax"

    def to_eval_config(self) -> EvalConfig:
        return EvalConfig(
            id_seeds=list(range(self.id_seed_start, self.id_seed_start + self.id_seed_count)),
            ood_seeds=list(range(self.ood_seed_start, self.ood_seed_start + self.ood_seed_count)),
            episodes_per_seed=self.episodes_per_seed,
            action_rule=self.action_rule,
        )


@dataclass
class ExperimentConfig:
    root_seed: int = 42
    env: EnvConfig = field(default_factory=EnvConfig)
    collect: CollectConfig = field(default_factory=CollectConfig)
    percentiles: list = field(default_factory=lambda: [10, 25, 40, 100])
    distill: DistillConfig = field(default_factory=DistillConfig)
    student: StudentConfig = field(default_factory=StudentConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    output_dir: str = "out"

    def methods(self) -> list:
        return [f"bc{int(x)}" for x in self.percentiles] + ["synthetic"]

    def net_shape(self) -> tinynet.NetShape:
        return tinynet.NetShape(in_dim=self.env.obs_dim)


_SECTIONS = {
    "env": EnvConfig,
    "collect": CollectConfig,
    "distill": DistillConfig,
    "student": StudentConfig,
    "eval": EvalSection,
}


def _build_section(cls, data: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = dict(data)
    if cls is StudentConfig:
        for key in ("bc", "synthetic"):
            if key in kwargs:
                kwargs[key] = TrainConfig(**kwargs[key])
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value)
        elif key in ("root_seed", "percentiles", "output_dir"):
            kwargs[key] = value
        else:
            raise ValueError(f"unknown config key: {key}")
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def write_echo(config: ExperimentConfig) -> None:
    os.makedirs(config.output_dir, exist_ok=True)
    echo = dataclasses.asdict(config)
    with open(os.path.join(config.output_dir, "config.echo.json"), "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _offline_path(config: ExperimentConfig) -> str:
    return os.path.join(config.output_dir, "offline.jsonl")


def _synthetic_path(config: ExperimentConfig) -> str:
    return os.path.join(config.output_dir, "synthetic.json")


def _method_dir(config: ExperimentConfig, method: str) -> str:
    return os.path.join(config.output_dir, "checkpoints", method)


def cmd_collect(config: ExperimentConfig) -> None:
    os.makedirs(config.output_dir, exist_ok=True)
    episodes = expert.collect_rollouts(
        config.env,
        config.collect.seeds(),
        config.collect.episodes,
        config.collect.epsilons,
        root_seed=config.root_seed,
        gamma=config.collect.gamma,
    )
    meta = {
        "env": dataclasses.asdict(config.env),
        "seeds": config.collect.seeds(),
        "episode_count": len(episodes),
        "root_seed": config.root_seed,
        "epsilons": config.collect.epsilons,
    }
    ds = datasets.from_episodes(episodes, meta)
    datasets.save(ds, _offline_path(config))
    print(f"collected {len(episodes)} episodes, {len(ds)} transitions -> {_offline_path(config)}")


def cmd_distill(config: ExperimentConfig) -> None:
    os.makedirs(config.output_dir, exist_ok=True)
    ds = datasets.load(_offline_path(config))
    rng = derive_stream(config.root_seed, "distill")
    syn, history = distill(ds, config.distill, config.net_shape(), rng)
    syn.provenance["root_seed"] = config.root_seed
    save_synthetic(syn, _synthetic_path(config))
    loss_path = os.path.join(config.output_dir, "distill_loss.csv")
    with open(loss_path, "w") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(history):
            fh.write(f"{i},{loss!r}\n")
    final = history[-1] if history else float("nan")
    print(f"distilled {len(syn)} rows over {config.distill.epochs} epochs, final loss {final:.6g}")


def _train_source(config: ExperimentConfig, method: str):
    """(source, dataset_size, train config) for one method name."""
    if method == "synthetic":
        syn = load_synthetic(_synthetic_path(config))
        return syn, len(syn), config.student.synthetic
    if method.startswith("bc"):
        x = float(method[2:])
        ds = datasets.load(_offline_path(config))
        _, filtered = datasets.percentile_filter(ds, x)
        return filtered, len(filtered), config.student.bc
    raise ValueError(f"unknown training method {method!r}")


def cmd_train(config: ExperimentConfig, method: str, jobs: int = 1) -> None:
    source, size, train_cfg = _train_source(config, method)
    cohort_seed = derive_stream(config.root_seed, f"train:{method}").next_u64()
    runs = train_cohort(
        source,
        train_cfg,
        config.net_shape(),
        config.student.n_students,
        cohort_seed,
        jobs=jobs,
    )
    method_dir = _method_dir(config, method)
    os.makedirs(method_dir, exist_ok=True)
    for run in runs:
        tinynet.save_checkpoint(
            run.params, os.path.join(method_dir, f"student_{run.student_index}.json")
        )
    with open(os.path.join(method_dir, "meta.json"), "w") as fh:
        json.dump(
            {
                "method": method,
                "dataset_size": size,
                "steps": train_cfg.steps,
                "batch": train_cfg.batch,
                "lr": train_cfg.lr,
                "n_students": len(runs),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"trained {len(runs)} students on {method} (dataset size {size}) -> {method_dir}")


def _load_cohort(config: ExperimentConfig, method: str):
    from .trainer import StudentRun

    method_dir = _method_dir(config, method)
    meta_path = os.path.join(method_dir, "meta.json")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(
            f"no trained cohort for method '{method}' (expected {meta_path}); "
            f"run `train --method {method}` first"
        )
    with open(meta_path) as fh:
        meta = json.load(fh)
    runs = []
    for i in range(meta["n_students"]):
        path = os.path.join(method_dir, f"student_{i}.json")
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing checkpoint for method '{method}': {path}")
        params = tinynet.load_checkpoint(path)
        runs.append(
            StudentRun(
                student_index=i,
                params=params,
                final_train_loss=float("nan"),
                config=TrainConfig(steps=meta["steps"], batch=meta["batch"], lr=meta["lr"]),
            )
        )
    return runs, meta["dataset_size"]


def cmd_eval(config: ExperimentConfig) -> None:
    eval_cfg = config.eval.to_eval_config()
    reports = []
    rep_id, rep_ood = evaluate.evaluate_expert(
        config.env, eval_cfg, root_seed=config.root_seed, gamma=config.collect.gamma
    )
    reports.extend([rep_id, rep_ood])
    for method in config.methods():
        runs, size = _load_cohort(config, method)
        rep_id, rep_ood = evaluate.evaluate_cohort(
            runs, config.env, eval_cfg, method, size, root_seed=config.root_seed
        )
        reports.extend([rep_id, rep_ood])
    evaluate.emit_report(reports, config.output_dir)
    print(f"wrote {len(reports)} report rows -> {config.output_dir}/results.csv")


def cmd_run_all(config: ExperimentConfig, jobs: int = 1) -> None:
    cmd_collect(config)
    cmd_distill(config)
    for method in config.methods():
        cmd_train(config, method, jobs=jobs)
    cmd_eval(config)


def cmd_selfcheck() -> bool:
    return checks.run_selfcheck(verbose=True)


def _parse_seed_range(text: str) -> tuple[int, int]:
    """'a..b' (inclusive) -> (start, count); a bare 'a' means one seed."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        start, end = int(lo), int(hi)
        if end < start:
            raise ValueError(f"bad seed range {text!r}")
        return start, end - start + 1
    value = int(text)
    return value, 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="griddistill",
        description="Distill a synthetic training set from offline gridworld "
        "trajectories and benchmark student policies against percentile "
        "behavioral cloning.",
    )
    parser.add_argument("--config", type=str, default=None, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")
    parser.add_argument("--out", type=str, default=None, help="output directory (overrides config)")
    parser.add_argument("--jobs", type=int, default=1, help="worker cap for parallel stages")
    sub = parser.add_subparsers(dest="command", required=True)

    p_collect = sub.add_parser("collect", help="roll out experts and write offline.jsonl")
    p_collect.add_argument("--episodes", type=int, default=None)
    p_collect.add_argument("--seeds", type=str, default=None, help="seed range 'a..b' (inclusive)")
    p_collect.add_argument("--epsilons", type=str, default=None, help="comma-separated epsilons")

    p_distill = sub.add_parser("distill", help="learn the synthetic dataset from offline.jsonl")
    p_distill.add_argument("--synthetic-size", type=int, default=None)
    p_distill.add_argument("--epochs", type=int, default=None)
    p_distill.add_argument("--learn-labels", action="store_true", default=None)
    p_distill.add_argument("--balanced-init", action="store_true", default=None)

    p_train = sub.add_parser("train", help="train a 10-student cohort for one method")
    p_train.add_argument(
        "--method",
        required=True,
        help="bc<percentile> (e.g. bc10, bc100) or synthetic",
    )

    sub.add_parser("eval", help="evaluate expert and all trained cohorts on ID/OOD seeds")
    sub.add_parser("run-all", help="collect, distill, train all methods, evaluate")
    sub.add_parser("selfcheck", help="run gradient and planner oracle checks")
    return parser


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config.root_seed = args.seed
    if args.out is not None:
        config.output_dir = args.out
    if getattr(args, "episodes", None) is not None:
        config.collect.episodes = args.episodes
    if getattr(args, "seeds", None) is not None:
        start, count = _parse_seed_range(args.seeds)
        config.collect.seed_start = start
        config.collect.seed_count = count
    if getattr(args, "epsilons", None) is not None:
        config.collect.epsilons = [float(tok) for tok in args.epsilons.split(",")]
    if getattr(args, "synthetic_size", None) is not None:
        config.distill.synthetic_size = args.synthetic_size
    if getattr(args, "epochs", None) is not None:
        config.distill.epochs = args.epochs
    if getattr(args, "learn_labels", None):
        config.distill.learn_labels = True
    if getattr(args, "balanced_init", None):
        config.distill.balanced_init = True
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selfcheck":
        return 0 if cmd_selfcheck() else 1
    config = resolve_config(args)
    write_echo(config)
    if args.command == "collect":
        cmd_collect(config)
    elif args.command == "distill":
        cmd_distill(config)
    elif args.command == "train":
        cmd_train(config, args.method, jobs=args.jobs)
    elif args.command == "eval":
        cmd_eval(config)
    elif args.command == "run-all":
        cmd_run_all(config, jobs=args.jobs)
    return 0


if __name__ == "__main__":
    sys.exit(main())
