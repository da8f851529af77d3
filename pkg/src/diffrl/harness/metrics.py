"""Measurement rows, CSV/JSONL emission, and the evaluation-derived statistics.

The per-seed metrics CSV has the fixed column order

    seed, epoch, agent, task, mean_return, disagreement

written with shortest round-trip float formatting, so identical runs produce
byte-identical files.  Wall-clock timings are deliberately kept out of the
CSV (they land in the run-info sidecar) to preserve that property.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..agents import AgentNets
from .. import envs

CSV_COLUMNS = ("seed", "epoch", "agent", "task", "mean_return", "disagreement")


@dataclass(frozen=True)
class MetricsRecord:
    seed: int
    epoch: int
    agent: int
    task: int
    mean_return: float
    disagreement: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.mean_return):
            raise ValueError("mean_return must be finite")


def write_metrics_csv(path: str | Path, records: Sequence[MetricsRecord]) -> None:
    seen = set()
    for r in records:
        key = (r.seed, r.epoch, r.agent, r.task)
        if key in seen:
            raise ValueError(f"duplicate metrics record {key}")
        seen.add(key)
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(
            f"{r.seed},{r.epoch},{r.agent},{r.task},{r.mean_return!r},{r.disagreement!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics_csv(path: str | Path) -> list[MetricsRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"{path} does not start with the documented header")
    records = []
    for line in lines[1:]:
        seed, epoch, agent, task, ret, dis = line.split(",")
        records.append(
            MetricsRecord(int(seed), int(epoch), int(agent), int(task), float(ret), float(dis))
        )
    return records


def write_jsonl(path: str | Path, rows: Sequence[dict]) -> None:
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def aggregate_epochs(records: Sequence[MetricsRecord]) -> list[dict]:
    """Per-epoch quartiles of the mean returns across seeds and agents."""
    by_epoch: dict[int, list[float]] = {}
    for r in records:
        by_epoch.setdefault(r.epoch, []).append(r.mean_return)
    rows = []
    for epoch in sorted(by_epoch):
        values = np.asarray(by_epoch[epoch])
        rows.append(
            {
                "epoch": epoch,
                "n": int(values.size),
                "mean": float(values.mean()),
                "median": float(np.median(values)),
                "q1": float(np.quantile(values, 0.25)),
                "q3": float(np.quantile(values, 0.75)),
            }
        )
    return rows


# -- parameter statistics -------------------------------------------------------------


def parameter_deviation_details(
    vectors: Sequence[np.ndarray], exclusion_threshold: float = 1e-8
) -> tuple[float, int, int]:
    """Mean per-coordinate std/|mean| in percent, plus the exclusion count.

    Uses the population standard deviation over agents.  Coordinates whose
    cross-agent mean is below the threshold in magnitude are excluded from the
    average (the ratio is ill-defined there) and reported.
    """
    if len(vectors) < 2:
        raise ValueError("parameter deviation needs at least two agents")
    stacked = np.stack(vectors)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    included = np.abs(mean) >= exclusion_threshold
    n_excluded = int((~included).sum())
    if not included.any():
        raise ValueError("every coordinate fell below the mean-magnitude threshold")
    percent = float(np.mean(std[included] / np.abs(mean[included]))) * 100.0
    return percent, n_excluded, mean.size


def parameter_deviation(vectors: Sequence[np.ndarray]) -> float:
    """Table-1-style relative deviation of per-agent parameters, in percent."""
    percent, _, _ = parameter_deviation_details(vectors)
    return percent


# -- cross-task and held-out evaluation --------------------------------------------------


def episode_returns(
    agent_nets: AgentNets,
    task: envs.EnvParams,
    episodes: int,
    seed_material: Sequence[int],
) -> np.ndarray:
    """Undiscounted deterministic-policy return of each evaluation episode."""
    from .. import nets as _nets

    out = np.empty(episodes)
    for episode in range(episodes):
        seed = int(np.random.default_rng([*map(int, seed_material), episode]).integers(2**63))
        state = envs.reset(task, seed)
        total = 0.0
        while not state.terminal:
            action = _nets.mean_action(agent_nets.policy_output(state.observation))
            state, reward, _ = envs.step(state, action, task)
            total += reward
        out[episode] = total
    return out


def cross_task_eval(
    nets_by_agent: Sequence[AgentNets],
    tasks: Sequence[envs.EnvParams],
    episodes: int,
    seed_material: Sequence[int] = (0,),
) -> tuple[np.ndarray, float, float]:
    """Every agent's mean return on every task, plus the own-vs-peer summary.

    Returns (matrix, mean of own-task minus peer-task difference, population
    std of that difference over agents).
    """
    n = len(nets_by_agent)
    if len(tasks) != n:
        raise ValueError("tasks must align with agents")
    matrix = np.empty((n, n))
    for i, agent_nets in enumerate(nets_by_agent):
        for j, task in enumerate(tasks):
            matrix[i, j] = episode_returns(
                agent_nets, task, episodes, [*seed_material, 7000, i, j]
            ).mean()
    if n == 1:
        return matrix, 0.0, 0.0
    diffs = np.array(
        [matrix[i, i] - np.delete(matrix[i], i).mean() for i in range(n)]
    )
    return matrix, float(diffs.mean()), float(diffs.std())


def zero_shot_eval(
    nets_by_seed: Sequence[AgentNets],
    held_out_tasks: Sequence[envs.EnvParams],
    episodes: int,
    seed_material: Sequence[int] = (0,),
) -> list[dict]:
    """Frozen-policy evaluation on unseen tasks with normal-approximation 95% CIs.

    Per-episode returns are pooled over the given per-seed policies.
    """
    rows = []
    for j, task in enumerate(held_out_tasks):
        pooled = np.concatenate(
            [
                episode_returns(an, task, episodes, [*seed_material, 8000, s, j])
                for s, an in enumerate(nets_by_seed)
            ]
        )
        mean = float(pooled.mean())
        half = 1.96 * float(pooled.std(ddof=1)) / float(np.sqrt(pooled.size)) if pooled.size > 1 else 0.0
        rows.append(
            {
                "task": j,
                "mean": mean,
                "ci_low": mean - half,
                "ci_high": mean + half,
                "episodes": int(pooled.size),
            }
        )
    return rows
