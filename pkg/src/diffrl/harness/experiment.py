"""Experiment orchestration: task allocation, epoch loops, metrics emission.

One experiment runs every configured seed independently.  A seed builds the
task family, the agent network and the scheduler, then alternates training
rounds with frozen-parameter evaluation sweeps.  Records are appended per
(seed, epoch, agent, task); epoch 0 is the evaluation of the initial
parameters, so a zero-epoch run still emits one full sweep.

Per-agent numerical failure aborts that seed with a diagnostic entry in
failures.jsonl and the remaining seeds continue.  Training/evaluation episode
budgets per epoch match across roles: with the episodic algorithm a diffusion
agent consumes episodes_per_update episodes per epoch while the centralised
role consumes episodes_per_update * n_tasks, the same total.
"""

from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import nets
from ..agents import Agent, AgentNets, CentralisedAgent, ParallelTrainer, SyncTrainer
from ..envs import EnvParams, sample_task_grid
from ..topology import build_topology, disagreement_norm, hastings_weights
from .config import ExperimentConfig
from .metrics import (
    MetricsRecord,
    aggregate_epochs,
    episode_returns,
    write_jsonl,
    write_metrics_csv,
)


class SeedFailure(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def build_tasks(config: ExperimentConfig) -> list[EnvParams]:
    tasks = sample_task_grid(
        config.env_kind, config.n_tasks, seed=config.task_seed, axes=config.grid_axes
    )
    overrides = {"discount": config.discount}
    if config.episode_max_steps is not None:
        overrides["episode_max_steps"] = config.episode_max_steps
    return [replace(t, **overrides) for t in tasks]


def _build_mixing(config: ExperimentConfig):
    """(topology, mixing matrix) for the configured role and agent count."""
    n = config.n_agents
    if config.agent.role == "centralised":
        return None, None
    if config.agent.role == "specialised" or n == 1:
        return None, np.eye(n)
    topo = build_topology(
        config.topology, n, config.target_avg_degree, seed=config.topology_seed
    )
    return topo, hastings_weights(topo)


def _agent_param_groups(agent_nets: AgentNets) -> np.ndarray:
    return np.concatenate([agent_nets.params[g] for g in agent_nets.group_names])


class SeedRun:
    """Training state and metric collection for one seed."""

    def __init__(self, config: ExperimentConfig, tasks: list[EnvParams], seed: int):
        self.config = config
        self.tasks = tasks
        self.seed = seed
        self.records: list[MetricsRecord] = []
        self.events: list[dict] = []
        cfg = config.agent
        if cfg.role == "centralised":
            self.central = CentralisedAgent(tasks, cfg, master_seed=seed)
            self.agents = []
            self.trainer = None
        else:
            self.central = None
            self.agents = [Agent(k, tasks[k], cfg, master_seed=seed) for k in range(len(tasks))]
            topo, mixing = _build_mixing(config)
            trainer_cls = SyncTrainer if config.mode == "sync" else ParallelTrainer
            self.trainer = trainer_cls(
                self.agents, mixing, topo,
                drop_probability=config.drop_prob, failure_seed=seed,
            )

    # -- training -------------------------------------------------------------

    def train_epoch(self) -> None:
        rounds = self.config.rounds_per_epoch()
        started = time.perf_counter()
        if self.central is not None:
            for _ in range(rounds):
                self.central.round()
                self.events.append(
                    {
                        "round": len(self.events),
                        "disagreement": 0.0,
                        "links_dropped": 0,
                        "grad_norms": [self.central.last_grad_norms],
                    }
                )
        elif isinstance(self.trainer, ParallelTrainer):
            self.trainer.run(rounds)
            self.events.append(
                {
                    "round": len(self.events),
                    "disagreement": self._disagreement(),
                    "links_dropped": 0,
                    "grad_norms": [a.last_grad_norms for a in self.agents],
                }
            )
        else:
            for _ in range(rounds):
                record = self.trainer.round()
                event = {
                    "round": record.round_index,
                    "disagreement": record.disagreement,
                    "links_dropped": record.links_dropped,
                    "grad_norms": record.grad_norms,
                }
                if record.dropped_edges is not None:
                    event["dropped_edges"] = record.dropped_edges
                self.events.append(event)
        self.events[-1]["wall_clock"] = time.perf_counter() - started

    def _disagreement(self) -> float:
        if self.central is not None or len(self.agents) < 2:
            return 0.0
        return disagreement_norm([_agent_param_groups(a.nets) for a in self.agents])

    def _check_finite(self, epoch: int) -> None:
        nets_list = [self.central.nets] if self.central else [a.nets for a in self.agents]
        for k, an in enumerate(nets_list):
            for group, vec in an.params.items():
                if not np.isfinite(vec).all():
                    raise SeedFailure(
                        f"non-finite parameters (agent {k}, group {group}, epoch {epoch})",
                        {"seed": self.seed, "epoch": epoch, "agent": k, "group": group},
                    )

    # -- evaluation -----------------------------------------------------------

    def evaluate_epoch(self, epoch: int) -> None:
        # evaluation uses a fixed per-(seed, agent) episode suite across epochs
        # so curves reflect policy changes rather than start-state resampling
        self._check_finite(epoch)
        disagreement = self._disagreement()
        try:
            if self.central is not None:
                for j, task in enumerate(self.tasks):
                    mean = episode_returns(
                        self.central.nets, task, self.config.eval_episodes,
                        [self.seed, 5000, j],
                    ).mean()
                    self.records.append(
                        MetricsRecord(self.seed, epoch, 0, j, float(mean), disagreement)
                    )
            else:
                for agent in self.agents:
                    mean = episode_returns(
                        agent.nets, agent.task, self.config.eval_episodes,
                        [self.seed, 5000, agent.agent_id],
                    ).mean()
                    self.records.append(
                        MetricsRecord(
                            self.seed, epoch, agent.agent_id, agent.agent_id,
                            float(mean), disagreement,
                        )
                    )
        except ValueError as exc:
            raise SeedFailure(
                f"evaluation produced a non-finite return at epoch {epoch}: {exc}",
                {"seed": self.seed, "epoch": epoch},
            ) from exc

    def assert_episode_parity(self) -> None:
        # per-epoch episode budgets: role parity by construction, asserted here
        if self.config.agent.algorithm != "siac" or self.config.epochs == 0:
            return
        per_agent = self.config.agent.episodes_per_update * self.config.epochs
        if self.central is not None:
            expected = per_agent * len(self.tasks)
            actual = self.central.episodes_consumed
        else:
            expected = per_agent * len(self.agents)
            actual = sum(a.episodes_consumed for a in self.agents)
        if actual != expected:
            raise SeedFailure(
                f"episode budget mismatch: consumed {actual}, expected {expected}",
                {"seed": self.seed},
            )

    def consumed(self) -> dict:
        sources = [self.central] if self.central else self.agents
        return {
            "episodes": int(sum(s.episodes_consumed for s in sources)),
            "steps": int(sum(s.steps_consumed for s in sources)),
        }

    def nets_by_agent(self) -> list[AgentNets]:
        return [self.central.nets] if self.central else [a.nets for a in self.agents]


def save_checkpoints(run: SeedRun, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for k, an in enumerate(run.nets_by_agent()):
        for group in an.group_names:
            nets.save_params(directory / f"agent{k}_{group}.pv", an.specs[group], an.params[group])


def load_checkpoints(config: ExperimentConfig, tasks: list[EnvParams], directory: Path) -> list[AgentNets]:
    """Rebuild the per-agent networks from a config and load saved parameters."""
    n = config.n_agents
    out = []
    for k in range(n):
        an = AgentNets(tasks[min(k, len(tasks) - 1)], config.agent, np.random.default_rng(0))
        for group in an.group_names:
            an.params[group] = nets.load_params(directory / f"agent{k}_{group}.pv", an.specs[group])
        out.append(an)
    return out


def run_experiment(config: ExperimentConfig) -> dict[str, Path]:
    """Train every seed, then write per-seed CSVs, event logs and an aggregate."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:  # abort before any training happens
        raise RuntimeError(f"output directory {out_dir} is not writable: {exc}") from exc

    (out_dir / "config_echo.ini").write_text(config.source_text or f"# {config.name}\n")
    tasks = build_tasks(config)
    paths: dict[str, Path] = {}
    failures: list[dict] = []
    all_records: list[MetricsRecord] = []

    for seed in config.seeds:
        started = time.perf_counter()
        run = SeedRun(config, tasks, seed)
        status = "ok"
        error = None
        try:
            run.evaluate_epoch(0)
            for epoch in range(1, config.epochs + 1):
                run.train_epoch()
                run.evaluate_epoch(epoch)
            run.assert_episode_parity()
        except SeedFailure as exc:
            status = "failed"
            error = str(exc)
            failures.append({"seed": seed, "error": error, **exc.diagnostics})
        except (ArithmeticError, ValueError) as exc:
            # per-agent numerical failure: halt this seed, keep the others
            status = "failed"
            error = f"{type(exc).__name__}: {exc}"
            failures.append({"seed": seed, "error": error})
        elapsed = time.perf_counter() - started

        if status == "ok":
            csv_path = out_dir / f"metrics_seed{seed}.csv"
            write_metrics_csv(csv_path, run.records)
            paths[f"metrics_seed{seed}"] = csv_path
            events_path = out_dir / f"events_seed{seed}.jsonl"
            write_jsonl(events_path, run.events)
            paths[f"events_seed{seed}"] = events_path
            save_checkpoints(run, out_dir / "checkpoints" / f"seed{seed}")
            all_records.extend(run.records)
        write_jsonl(
            out_dir / f"runinfo_seed{seed}.json",
            [
                {
                    "seed": seed,
                    "status": status,
                    "error": error,
                    "wall_clock_seconds": elapsed,
                    "consumed": run.consumed(),
                    "epochs": config.epochs,
                }
            ],
        )

    if failures:
        write_jsonl(out_dir / "failures.jsonl", failures)
        paths["failures"] = out_dir / "failures.jsonl"
    aggregate = aggregate_epochs(all_records)
    aggregate.append(
        {
            "summary": True,
            "name": config.name,
            "seeds_completed": len(config.seeds) - len(failures),
            "seeds_requested": len(config.seeds),
        }
    )
    agg_path = out_dir / "aggregate.jsonl"
    write_jsonl(agg_path, aggregate)
    paths["aggregate"] = agg_path
    return paths
