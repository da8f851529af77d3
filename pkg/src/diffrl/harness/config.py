"""Experiment configuration: a plain-text INI schema with nested sections.

The file format is ``configparser`` INI.  Top-level sections are ``[meta]``,
``[experiment]``, ``[env]``, ``[agent]`` and ``[network]``; nesting uses dotted
section names (currently ``[env.grid]``, whose keys are parameter-axis names
and whose values are whitespace-separated floats).  ``[meta]`` must carry
``schema_version = 1``.  Unknown sections or keys are rejected so typos fail
loudly.  See configs/ for complete examples.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..agents import AgentConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seeds: tuple[int, ...]
    epochs: int
    eval_episodes: int
    mode: str  # sync | parallel
    out_dir: str
    env_kind: str
    n_tasks: int
    discount: float
    episode_max_steps: int | None
    grid_axes: dict[str, tuple[float, ...]] | None
    task_seed: int
    agent: AgentConfig
    steps_per_epoch: int
    topology: str
    target_avg_degree: float | None
    drop_prob: float
    topology_seed: int
    source_text: str = field(default="", compare=False)

    @property
    def n_agents(self) -> int:
        return 1 if self.agent.role == "centralised" else self.n_tasks

    def rounds_per_epoch(self) -> int:
        if self.agent.algorithm == "siac":
            # one pooled update per epoch: an epoch is episodes_per_update
            # episodes per agent and the learning step happens once per batch
            return 1
        return max(1, -(-self.steps_per_epoch // self.agent.steps_per_update))


_KNOWN_SECTIONS = {"meta", "experiment", "env", "env.grid", "agent", "network"}

_KNOWN_KEYS = {
    "meta": {"schema_version", "name"},
    "experiment": {"seeds", "epochs", "eval_episodes", "mode", "out_dir"},
    "env": {"kind", "n_tasks", "discount", "episode_max_steps", "task_seed"},
    "agent": {
        "algorithm", "role", "hidden", "activation", "shared_trunk", "optimiser",
        "critic_lr", "actor_lr", "entropy_coef", "episodes_per_update",
        "steps_per_update", "steps_per_epoch", "staleness_limit",
        "combine_optimiser_state", "std_floor",
    },
    "network": {"topology", "target_avg_degree", "drop_prob", "topology_seed"},
}


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.split())


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.split())


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    unknown = set(parser.sections()) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    for section, keys in _KNOWN_KEYS.items():
        if parser.has_section(section):
            bad = set(parser[section]) - keys
            if bad:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(bad)}")

    def get(section: str, key: str, default=None):
        if parser.has_section(section) and key in parser[section]:
            return parser[section][key]
        return default

    version = get("meta", "schema_version")
    if version is None or int(version) != SCHEMA_VERSION:
        raise ConfigError(f"[meta] schema_version must be {SCHEMA_VERSION}")

    grid_axes = None
    if parser.has_section("env.grid"):
        grid_axes = {k: _floats(v) for k, v in parser["env.grid"].items()}

    agent = AgentConfig(
        algorithm=get("agent", "algorithm", "siac"),
        role=get("agent", "role", "diffusion"),
        hidden=_ints(get("agent", "hidden", "32 32")),
        activation=get("agent", "activation", "relu"),
        shared_trunk=_boolean(get("agent", "shared_trunk", "false")),
        optimiser=get("agent", "optimiser", "adam"),
        critic_lr=float(get("agent", "critic_lr", "0.01")),
        actor_lr=float(get("agent", "actor_lr", "0.001")),
        entropy_coef=float(get("agent", "entropy_coef", "0.0005")),
        episodes_per_update=int(get("agent", "episodes_per_update", "5")),
        steps_per_update=int(get("agent", "steps_per_update", "60")),
        discount=float(get("env", "discount", "0.99")),
        staleness_limit=int(get("agent", "staleness_limit", "5")),
        combine_optimiser_state=_boolean(get("agent", "combine_optimiser_state", "false")),
        std_floor=float(get("agent", "std_floor", "1e-3")),
    )

    max_steps = get("env", "episode_max_steps")
    degree = get("network", "target_avg_degree")
    config = ExperimentConfig(
        name=get("meta", "name", path.stem),
        seeds=_ints(get("experiment", "seeds", "0")),
        epochs=int(get("experiment", "epochs", "10")),
        eval_episodes=int(get("experiment", "eval_episodes", "10")),
        mode=get("experiment", "mode", "sync"),
        out_dir=get("experiment", "out_dir", "results/" + path.stem),
        env_kind=get("env", "kind", "pendulum"),
        n_tasks=int(get("env", "n_tasks", "1")),
        discount=float(get("env", "discount", "0.99")),
        episode_max_steps=int(max_steps) if max_steps is not None else None,
        grid_axes=grid_axes,
        task_seed=int(get("env", "task_seed", "0")),
        agent=agent,
        steps_per_epoch=int(get("agent", "steps_per_epoch", "600")),
        topology=get("network", "topology", "ring"),
        target_avg_degree=float(degree) if degree is not None else None,
        drop_prob=float(get("network", "drop_prob", "0.0")),
        topology_seed=int(get("network", "topology_seed", "0")),
        source_text=text,
    )
    validate_config(config)
    return config


def _boolean(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def validate_config(config: ExperimentConfig) -> None:
    problems = []
    if not config.seeds:
        problems.append("at least one seed is required")
    if config.epochs < 0:
        problems.append("epochs must be >= 0")
    if config.eval_episodes < 1:
        problems.append("eval_episodes must be >= 1")
    if config.mode not in ("sync", "parallel"):
        problems.append(f"mode must be sync or parallel, got {config.mode!r}")
    if config.env_kind not in ("pendulum", "cartpole_balance", "cartpole_swingup", "acrobot"):
        problems.append(f"unknown env kind {config.env_kind!r}")
    if config.n_tasks < 1:
        problems.append("n_tasks must be >= 1")
    if not 0.0 <= config.drop_prob < 1.0:
        problems.append("drop_prob must lie in [0, 1)")
    if config.topology not in ("ring", "random_connected", "complete"):
        problems.append(f"unknown topology {config.topology!r}")
    if config.topology == "random_connected" and config.target_avg_degree is None:
        problems.append("random_connected topology requires target_avg_degree")
    if config.agent.role == "centralised" and config.mode == "parallel":
        problems.append("parallel mode applies to networked roles only")
    if config.agent.role == "specialised" and config.drop_prob > 0:
        problems.append("specialised role has no links to drop")
    if config.agent.algorithm == "a2c" and config.steps_per_epoch < config.agent.steps_per_update:
        problems.append("steps_per_epoch must cover at least one update")
    if problems:
        raise ConfigError("; ".join(problems))


def apply_overrides(
    config: ExperimentConfig,
    seed: int | None = None,
    mode: str | None = None,
    out_dir: str | None = None,
    drop_prob: float | None = None,
) -> ExperimentConfig:
    if seed is not None:
        config = replace(config, seeds=(seed,))
    if mode is not None:
        config = replace(config, mode=mode)
    if out_dir is not None:
        config = replace(config, out_dir=out_dir)
    if drop_prob is not None:
        config = replace(config, drop_prob=drop_prob)
    validate_config(config)
    return config
