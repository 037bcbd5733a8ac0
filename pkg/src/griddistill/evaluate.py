"""Monte Carlo evaluation of trained students (and the planner itself) on
in-distribution and out-of-distribution seed sets, plus report emission.

Students act by argmax over the policy distribution by default, so cohort
comparisons reflect training rather than action-sampling noise; a
stochastic rule is available behind a flag. Reports carry both pooled
statistics over every episode and the mean of per-student statistics; the
CSV holds the pooled numbers, the markdown tables the per-student ones.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import expert, gridenv, tinynet
from .gridenv import EnvConfig
from .rng import RngStream, derive_stream

METHOD_ORDER = ("expert", "bc10", "bc25", "bc40", "bc100", "synthetic")


@dataclass
class EvalConfig:
    id_seeds: list = field(default_factory=lambda: list(range(200)))
    ood_seeds: list = field(default_factory=lambda: list(range(10000, 10100)))
    episodes_per_seed: int = 1
    action_rule: str = "argmax"  # or "stochastic"

    def __post_init__(self):
        if set(self.id_seeds) & set(self.ood_seeds):
            raise ValueError("ID and OOD seed sets must be disjoint")
        if self.episodes_per_seed < 1:
            raise ValueError("episodes_per_seed must be >= 1")
        if self.action_rule not in ("argmax", "stochastic"):
            raise ValueError(f"unknown action rule {self.action_rule!r}")


@dataclass
class EvalReport:
    method: str
    split: str  # "ID" | "OOD"
    mean_return: float
    std_return: float
    n_episodes: int
    dataset_size: int
    # mean of per-student means / population stds; equals the pooled stats
    # for a cohort of one
    student_mean: float | None = None
    student_std: float | None = None


def _sample_from(probs: np.ndarray, rng: RngStream) -> int:
    u = rng.next_uniform()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def run_policy(
    params: tinynet.PolicyParams,
    spec: gridenv.GridSpec,
    action_rule: str = "argmax",
    rng: RngStream | None = None,
) -> float:
    """Roll one episode with the network policy; undiscounted return."""
    state = gridenv.initial_state(spec)
    total = 0.0
    while not state.terminated:
        probs = tinynet.forward(params, gridenv.observe(state))
        if action_rule == "argmax":
            action = int(np.argmax(probs))  # ties break to the lowest index
        else:
            action = _sample_from(probs, rng)
        state, reward, _done = gridenv.step(state, action)
        total += reward
    return total


def _pooled_and_per_student(returns_by_student: list) -> tuple:
    pooled = np.concatenate(returns_by_student)
    means = [float(np.mean(r)) for r in returns_by_student]
    stds = [float(np.std(r)) for r in returns_by_student]
    return (
        float(pooled.mean()),
        float(pooled.std()),
        len(pooled),
        float(np.mean(means)),
        float(np.mean(stds)),
    )


def _spec_cache(config: EnvConfig, seeds: list) -> dict:
    return {seed: gridenv.generate(config, seed) for seed in seeds}


def evaluate_cohort(
    runs: list,
    env_config: EnvConfig,
    eval_cfg: EvalConfig,
    method: str,
    dataset_size: int,
    root_seed: int,
) -> tuple[EvalReport, EvalReport]:
    """Pool episode returns across all students and seeds per split."""
    if not runs:
        raise ValueError("cohort is empty")
    reports = []
    for split, seeds in (("ID", eval_cfg.id_seeds), ("OOD", eval_cfg.ood_seeds)):
        specs = _spec_cache(env_config, seeds)
        by_student = []
        for run in runs:
            returns = []
            for seed in seeds:
                for e in range(eval_cfg.episodes_per_seed):
                    rng = None
                    if eval_cfg.action_rule == "stochastic":
                        rng = derive_stream(
                            root_seed, f"eval:{split}:{run.student_index}:{seed}:{e}"
                        )
                    returns.append(run_policy(run.params, specs[seed], eval_cfg.action_rule, rng))
            by_student.append(np.asarray(returns))
        mean, std, n, smean, sstd = _pooled_and_per_student(by_student)
        reports.append(
            EvalReport(
                method=method,
                split=split,
                mean_return=mean,
                std_return=std,
                n_episodes=n,
                dataset_size=dataset_size,
                student_mean=smean,
                student_std=sstd,
            )
        )
    return reports[0], reports[1]


def evaluate_expert(
    env_config: EnvConfig,
    eval_cfg: EvalConfig,
    root_seed: int,
    epsilon: float = 0.0,
    gamma: float = 0.99,
) -> tuple[EvalReport, EvalReport]:
    """The planner evaluated as a cohort of one (dataset_size 0: it never
    trains on the offline data)."""
    reports = []
    for split, seeds in (("ID", eval_cfg.id_seeds), ("OOD", eval_cfg.ood_seeds)):
        returns = []
        for seed in seeds:
            spec = gridenv.generate(env_config, seed)
            table = expert.value_iteration(spec, gamma=gamma)
            policy = expert.ExpertPolicy(table=table, epsilon=epsilon)
            for e in range(eval_cfg.episodes_per_seed):
                rng = derive_stream(root_seed, f"eval-expert:{split}:{seed}:{e}")
                episode = expert.rollout(policy, spec, rng)
                returns.append(sum(s[3] for s in episode.steps))
        arr = np.asarray(returns)
        reports.append(
            EvalReport(
                method="expert",
                split=split,
                mean_return=float(arr.mean()),
                std_return=float(arr.std()),
                n_episodes=len(arr),
                dataset_size=0,
                student_mean=float(arr.mean()),
                student_std=float(arr.std()),
            )
        )
    return reports[0], reports[1]


CSV_HEADER = "method,split,mean_return,std_return,n_episodes,dataset_size"


def write_csv(reports: list, path: str) -> None:
    rows = sorted(reports, key=lambda r: (r.split, r.method))
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{r.method},{r.split},{r.mean_return!r},{r.std_return!r},"
                f"{r.n_episodes},{r.dataset_size}\n"
            )


def read_csv(path: str) -> list:
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    reports = []
    for line in lines[1:]:
        method, split, mean, std, n, size = line.split(",")
        reports.append(
            EvalReport(
                method=method,
                split=split,
                mean_return=float(mean),
                std_return=float(std),
                n_episodes=int(n),
                dataset_size=int(size),
            )
        )
    return reports


def _method_sort_key(method: str):
    try:
        return (0, METHOD_ORDER.index(method))
    except ValueError:
        return (1, method)


def _markdown_perf_table(title: str, reports: list) -> list:
    methods = sorted({r.method for r in reports}, key=_method_sort_key)
    by_method = {r.method: r for r in reports}
    lines = [f"## {title}", ""]
    lines.append("| Environment | " + " | ".join(m for m in methods) + " |")
    lines.append("|---" * (len(methods) + 1) + "|")
    cells = []
    for m in methods:
        r = by_method[m]
        mean = r.student_mean if r.student_mean is not None else r.mean_return
        std = r.student_std if r.student_std is not None else r.std_return
        cells.append(f"{mean:.2f} ± {std:.2f}")
    lines.append("| grid | " + " | ".join(cells) + " |")
    lines.append("")
    return lines


def emit_report(reports: list, out_dir: str) -> None:
    """results.csv (pooled stats, canonical row order) and results.md
    (mean +/- std per method for each split, plus a dataset-size table)."""
    if not reports:
        raise ValueError("no reports to emit")
    os.makedirs(out_dir, exist_ok=True)
    write_csv(reports, os.path.join(out_dir, "results.csv"))
    lines = ["# Evaluation results", ""]
    for split, title in (("ID", "ID performance"), ("OOD", "OOD performance")):
        split_reports = [r for r in reports if r.split == split]
        if split_reports:
            lines.extend(_markdown_perf_table(title, split_reports))
    sized = [r for r in reports if r.split == "ID" and r.method != "expert"]
    if sized:
        methods = sorted({r.method for r in sized}, key=_method_sort_key)
        by_method = {r.method: r for r in sized}
        lines.extend(["## Dataset size", ""])
        lines.append("| Environment | " + " | ".join(methods) + " |")
        lines.append("|---" * (len(methods) + 1) + "|")
        lines.append(
            "| grid | " + " | ".join(str(by_method[m].dataset_size) for m in methods) + " |"
        )
        lines.append("")
    with open(os.path.join(out_dir, "results.md"), "w") as fh:
        fh.write("\n".join(lines))
