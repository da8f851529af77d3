"""Actor-critic agents and the adapt-then-combine training loops.

Two gradient estimators are provided.  The episodic one ("siac") turns each
complete episode into Monte-Carlo advantages, pooling a configurable number of
episodes into one averaged update.  The n-step one ("a2c") collects fixed-size
segments, bootstrapping the tail with the critic's value when a segment is cut
before a terminal state.

A training round is: every agent computes its local critic and actor gradients
from its own task, applies its local optimiser (adaptation), and then replaces
its parameters with a weighted average over its in-neighbours (combination).
Only parameters cross the network; optimiser moments stay local unless the
moment-averaging ablation is explicitly enabled.

Two schedulers share this machinery: a synchronous single-threaded one (the
determinism reference used for all acceptance runs) and a thread-per-agent one
that exchanges versioned parameter snapshots with bounded staleness.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import envs, nets
from .optim import Optimiser, make_optimiser
from .topology import combine, disagreement_norm, sample_link_failures


@dataclass
class Transition:
    state: np.ndarray
    action: object  # np.ndarray for continuous actions, int for discrete
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __post_init__(self) -> None:
        if not np.isfinite(self.reward):
            raise ValueError("transition reward must be finite")


@dataclass
class Trajectory:
    """One sampling window: at most one terminal transition, at the end.

    Non-terminal cuts carry the critic's value at the cut state so the n-step
    estimator can bootstrap.
    """

    transitions: list[Transition]
    bootstrap_value: float | None = None

    def __post_init__(self) -> None:
        for t in self.transitions[:-1]:
            if t.terminal:
                raise ValueError("terminal transition before the end of a trajectory")

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def ends_terminal(self) -> bool:
        return bool(self.transitions) and self.transitions[-1].terminal


# -- advantage estimators ---------------------------------------------------------


def advantage_episodic(traj: Trajectory, values: np.ndarray, gamma: float) -> np.ndarray:
    """Monte-Carlo advantages for a complete episode.

    A_t = sum_{j >= t} gamma^(j-t) r_{j+1} - v(s_t), one backward pass.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if not traj.ends_terminal:
        raise ValueError("episodic advantages require a complete episode")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(traj),):
        raise ValueError("values must align with the trajectory")
    out = np.empty(len(traj))
    ret = 0.0
    for t in range(len(traj) - 1, -1, -1):
        ret = traj.transitions[t].reward + gamma * ret
        out[t] = ret - values[t]
    return out


def advantage_nstep(traj: Trajectory, values: np.ndarray, gamma: float) -> np.ndarray:
    """n-step advantages with a bootstrapped tail.

    A_t = sum_{j >= t} gamma^(j-t) r_{j+1} + gamma^(T-t) v(s_T) - v(s_t),
    where v(s_T) is the stored bootstrap value, forced to zero when the
    segment ends in a terminal state.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(traj),):
        raise ValueError("values must align with the trajectory")
    if traj.ends_terminal:
        tail = 0.0
    elif traj.bootstrap_value is None:
        raise ValueError("non-terminal segment requires a bootstrap value")
    else:
        tail = float(traj.bootstrap_value)
    out = np.empty(len(traj))
    ret = tail
    for t in range(len(traj) - 1, -1, -1):
        ret = traj.transitions[t].reward + gamma * ret
        out[t] = ret - values[t]
    return out


# -- networks owned by one agent -----------------------------------------------------


@dataclass(frozen=True)
class AgentConfig:
    algorithm: str = "siac"  # siac | a2c
    role: str = "diffusion"  # diffusion | centralised | specialised
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "relu"
    shared_trunk: bool = False
    optimiser: str = "adam"
    critic_lr: float = 0.01
    actor_lr: float = 0.001
    entropy_coef: float = 0.0005
    episodes_per_update: int = 5
    steps_per_update: int = 60
    discount: float = 0.99
    staleness_limit: int = 5
    combine_optimiser_state: bool = False
    std_floor: float = 1e-3

    def __post_init__(self) -> None:
        if self.algorithm not in ("siac", "a2c"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.role not in ("diffusion", "centralised", "specialised"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.episodes_per_update < 1 or self.steps_per_update < 1:
            raise ValueError("update batch sizes must be >= 1")
        if self.staleness_limit < 0:
            raise ValueError("staleness_limit must be >= 0")


class AgentNets:
    """Critic and actor function approximators over flat parameter groups.

    With ``shared_trunk`` both heads sit on one trunk and there is a single
    parameter group "shared"; otherwise the groups are "critic" and "actor".
    """

    def __init__(self, task: envs.EnvParams, config: AgentConfig, rng: np.random.Generator):
        obs_dim = envs.observation_dim(task)
        spec = envs.action_spec(task)
        if spec.continuous:
            policy_head, out_dim = "gaussian", spec.dim
            low, high = spec.low, spec.high
        else:
            policy_head, out_dim = "categorical", spec.cardinality
            low = high = None
        if config.shared_trunk:
            self.specs = {
                "shared": nets.NetworkSpec(
                    obs_dim, config.hidden, config.activation, f"value+{policy_head}",
                    out_dim, action_low=low, action_high=high, std_floor=config.std_floor,
                )
            }
        else:
            self.specs = {
                "critic": nets.NetworkSpec(obs_dim, config.hidden, config.activation, "value", 1),
                "actor": nets.NetworkSpec(
                    obs_dim, config.hidden, config.activation, policy_head,
                    out_dim, action_low=low, action_high=high, std_floor=config.std_floor,
                ),
            }
        self.params = {name: nets.init_params(s, rng) for name, s in self.specs.items()}
        self._view_cache: dict[str, tuple[np.ndarray, dict[str, np.ndarray]]] = {}

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(self.specs)

    def _value_group(self) -> str:
        return "shared" if "shared" in self.specs else "critic"

    def _policy_group(self) -> str:
        return "shared" if "shared" in self.specs else "actor"

    def _tensors(self, name: str) -> dict[str, np.ndarray]:
        # tensor views stay valid for exactly one parameter vector object
        vec = self.params[name]
        cached = self._view_cache.get(name)
        if cached is None or cached[0] is not vec:
            views = nets.unflatten(self.specs[name], vec)
            self._view_cache[name] = (vec, views)
            return views
        return cached[1]

    def policy_output(self, obs: np.ndarray):
        name = self._policy_group()
        raw = nets.forward_raw(self.specs[name], self._tensors(name), obs)
        out = nets.output_from_raw(self.specs[name], raw)
        return out[1] if name == "shared" else out

    def value_single(self, obs: np.ndarray) -> float:
        name = self._value_group()
        raw = nets.forward_raw(self.specs[name], self._tensors(name), obs)
        return float(raw[0])

    def values(self, states: np.ndarray) -> np.ndarray:
        name = self._value_group()
        return nets.values_batch(self.specs[name], self.params[name], states)

    def critic_gradient(self, states: np.ndarray, advantages: np.ndarray) -> dict[str, np.ndarray]:
        name = self._value_group()
        g = nets.critic_gradient_batch(self.specs[name], self.params[name], states, advantages)
        return {name: g}

    def actor_gradient(
        self, states: np.ndarray, actions, advantages: np.ndarray, entropy_coef: float
    ) -> dict[str, np.ndarray]:
        name = self._policy_group()
        g = nets.actor_gradient_batch(
            self.specs[name], self.params[name], states, actions, advantages, entropy_coef
        )
        return {name: g}


def _stack_batch(transitions: Sequence[Transition], continuous: bool):
    states = np.stack([t.state for t in transitions])
    if continuous:
        actions = np.stack([np.asarray(t.action, dtype=np.float64).reshape(-1) for t in transitions])
    else:
        actions = np.array([int(t.action) for t in transitions])
    return states, actions


def _as_transitions(traj) -> list[Transition]:
    return list(traj.transitions) if isinstance(traj, Trajectory) else list(traj)


def local_gradients(
    traj,
    advantages: np.ndarray,
    agent_nets: AgentNets,
    entropy_coef: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample-averaged critic and actor gradients, both in descent convention.

    The critic gradient is the semi-gradient of the frozen-target squared
    error, -(1/T) sum_t A_t grad v(s_t); the actor gradient descends the loss
    -(1/T) sum_t (log pi(a_t|s_t) A_t + c H(s_t)).  Advantages are constants.
    """
    transitions = _as_transitions(traj)
    if not transitions:
        raise ValueError("no transitions")
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.shape != (len(transitions),):
        raise ValueError("advantages must align with the trajectory")
    continuous = not isinstance(transitions[0].action, (int, np.integer))
    states, actions = _stack_batch(transitions, continuous)
    critic = agent_nets.critic_gradient(states, advantages)
    actor = agent_nets.actor_gradient(states, actions, advantages, entropy_coef)
    return critic[agent_nets._value_group()], actor[agent_nets._policy_group()]


def centralised_gradients(
    trajs,
    advantages_by_task: Sequence[np.ndarray],
    agent_nets: AgentNets,
    entropy_coef: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled gradients over all tasks, weighting every sample equally."""
    pooled: list[Transition] = []
    for traj in trajs:
        pooled.extend(_as_transitions(traj))
    if not pooled:
        raise ValueError("no transitions in any trajectory")
    advantages = np.concatenate([np.asarray(a, dtype=np.float64) for a in advantages_by_task])
    return local_gradients(pooled, advantages, agent_nets, entropy_coef)


# -- a single learning agent ----------------------------------------------------------


class Agent:
    """One task, one pair of networks, strictly local optimiser state."""

    def __init__(self, agent_id: int, task: envs.EnvParams, config: AgentConfig, master_seed: int):
        self.agent_id = agent_id
        self.task = task
        self.config = config
        self.nets = AgentNets(task, config, np.random.default_rng([master_seed, 3000 + agent_id]))
        self._episode_seeds = np.random.default_rng([master_seed, 1000 + agent_id])
        self._action_rng = np.random.default_rng([master_seed, 2000 + agent_id])
        self._optimisers = self._build_optimisers()
        self._env_state: envs.EnvState | None = None
        self.episodes_consumed = 0
        self.steps_consumed = 0
        self.last_grad_norms: dict[str, float] = {}

    def _build_optimisers(self) -> dict[str, Optimiser]:
        return {
            "critic": make_optimiser(self.config.optimiser, self.config.critic_lr),
            "actor": make_optimiser(self.config.optimiser, self.config.actor_lr),
        }

    def _next_env_seed(self) -> int:
        return int(self._episode_seeds.integers(2**63))

    def _select_action(self, obs: np.ndarray):
        out = self.nets.policy_output(obs)
        action, _ = nets.sample_action(out, self._action_rng)
        return action

    def run_episode(self) -> Trajectory:
        state = envs.reset(self.task, self._next_env_seed())
        transitions = []
        while not state.terminal:
            action = self._select_action(state.observation)
            new_state, reward, terminal = envs.step(state, action, self.task)
            transitions.append(
                Transition(state.observation, action, reward, new_state.observation, terminal)
            )
            state = new_state
        self.episodes_consumed += 1
        self.steps_consumed += len(transitions)
        return Trajectory(transitions)

    def collect_segment(self) -> Trajectory:
        """Continue the running episode for up to steps_per_update transitions."""
        if self._env_state is None or self._env_state.terminal:
            self._env_state = envs.reset(self.task, self._next_env_seed())
            self.episodes_consumed += 1
        state = self._env_state
        transitions = []
        while len(transitions) < self.config.steps_per_update and not state.terminal:
            action = self._select_action(state.observation)
            new_state, reward, terminal = envs.step(state, action, self.task)
            transitions.append(
                Transition(state.observation, action, reward, new_state.observation, terminal)
            )
            state = new_state
        self._env_state = state
        self.steps_consumed += len(transitions)
        bootstrap = None
        if not transitions[-1].terminal:
            bootstrap = self.nets.value_single(transitions[-1].next_state)
        return Trajectory(transitions, bootstrap)

    def collect(self) -> list[Trajectory]:
        if self.config.algorithm == "siac":
            return [self.run_episode() for _ in range(self.config.episodes_per_update)]
        return [self.collect_segment()]

    def advantages_for(self, trajs: list[Trajectory]) -> list[np.ndarray]:
        gamma = self.config.discount
        out = []
        for traj in trajs:
            states = np.stack([t.state for t in traj.transitions])
            values = self.nets.values(states)
            if self.config.algorithm == "siac":
                out.append(advantage_episodic(traj, values, gamma))
            else:
                out.append(advantage_nstep(traj, values, gamma))
        return out

    def adapt(self) -> dict[str, np.ndarray]:
        """Collect a batch and take one local optimiser step per parameter group."""
        trajs = self.collect()
        advantages = self.advantages_for(trajs)
        pooled = [t for traj in trajs for t in traj.transitions]
        adv = np.concatenate(advantages)
        critic_grad, actor_grad = local_gradients(pooled, adv, self.nets, self.config.entropy_coef)
        self.last_grad_norms = {
            "critic": float(np.linalg.norm(critic_grad)),
            "actor": float(np.linalg.norm(actor_grad)),
        }
        self._apply_updates(critic_grad, actor_grad)
        return self.nets.params

    def _apply_updates(self, critic_grad: np.ndarray, actor_grad: np.ndarray) -> None:
        if "shared" in self.nets.specs:
            p = self.nets.params["shared"]
            p = self._optimisers["critic"].update(p, critic_grad)
            p = self._optimisers["actor"].update(p, actor_grad)
            self.nets.params["shared"] = p
        else:
            self.nets.params["critic"] = self._optimisers["critic"].update(
                self.nets.params["critic"], critic_grad
            )
            self.nets.params["actor"] = self._optimisers["actor"].update(
                self.nets.params["actor"], actor_grad
            )

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for name, vec in params.items():
            self.nets.params[name] = vec

    def optimiser_state_vectors(self) -> dict[str, dict[str, np.ndarray]]:
        return {name: opt.state_vectors() for name, opt in self._optimisers.items()}


class CentralisedAgent:
    """One parameter set updated from pooled batches over every task."""

    def __init__(self, tasks: list[envs.EnvParams], config: AgentConfig, master_seed: int):
        self.tasks = tasks
        self.config = config
        self.nets = AgentNets(tasks[0], config, np.random.default_rng([master_seed, 3000]))
        self._episode_seeds = [
            np.random.default_rng([master_seed, 1000 + k]) for k in range(len(tasks))
        ]
        self._action_rng = np.random.default_rng([master_seed, 2000])
        self._optimisers = {
            "critic": make_optimiser(config.optimiser, config.critic_lr),
            "actor": make_optimiser(config.optimiser, config.actor_lr),
        }
        self._env_states: list[envs.EnvState | None] = [None] * len(tasks)
        self.episodes_consumed = 0
        self.steps_consumed = 0
        self.last_grad_norms: dict[str, float] = {}

    def _run_episode(self, k: int) -> Trajectory:
        task = self.tasks[k]
        state = envs.reset(task, int(self._episode_seeds[k].integers(2**63)))
        transitions = []
        while not state.terminal:
            out = self.nets.policy_output(state.observation)
            action, _ = nets.sample_action(out, self._action_rng)
            new_state, reward, terminal = envs.step(state, action, task)
            transitions.append(
                Transition(state.observation, action, reward, new_state.observation, terminal)
            )
            state = new_state
        self.episodes_consumed += 1
        self.steps_consumed += len(transitions)
        return Trajectory(transitions)

    def _collect_segment(self, k: int) -> Trajectory:
        task = self.tasks[k]
        if self._env_states[k] is None or self._env_states[k].terminal:
            self._env_states[k] = envs.reset(task, int(self._episode_seeds[k].integers(2**63)))
            self.episodes_consumed += 1
        state = self._env_states[k]
        transitions = []
        while len(transitions) < self.config.steps_per_update and not state.terminal:
            out = self.nets.policy_output(state.observation)
            action, _ = nets.sample_action(out, self._action_rng)
            new_state, reward, terminal = envs.step(state, action, task)
            transitions.append(
                Transition(state.observation, action, reward, new_state.observation, terminal)
            )
            state = new_state
        self._env_states[k] = state
        self.steps_consumed += len(transitions)
        bootstrap = None
        if not transitions[-1].terminal:
            bootstrap = self.nets.value_single(transitions[-1].next_state)
        return Trajectory(transitions, bootstrap)

    def round(self) -> None:
        """One pooled update: for every task, the same batch a local agent takes."""
        trajs: list[Trajectory] = []
        for k in range(len(self.tasks)):
            if self.config.algorithm == "siac":
                trajs.extend(self._run_episode(k) for _ in range(self.config.episodes_per_update))
            else:
                trajs.append(self._collect_segment(k))
        gamma = self.config.discount
        advantages = []
        for traj in trajs:
            states = np.stack([t.state for t in traj.transitions])
            values = self.nets.values(states)
            if self.config.algorithm == "siac":
                advantages.append(advantage_episodic(traj, values, gamma))
            else:
                advantages.append(advantage_nstep(traj, values, gamma))
        critic_grad, actor_grad = centralised_gradients(
            trajs, advantages, self.nets, self.config.entropy_coef
        )
        self.last_grad_norms = {
            "critic": float(np.linalg.norm(critic_grad)),
            "actor": float(np.linalg.norm(actor_grad)),
        }
        if "shared" in self.nets.specs:
            p = self.nets.params["shared"]
            p = self._optimisers["critic"].update(p, critic_grad)
            self.nets.params["shared"] = self._optimisers["actor"].update(p, actor_grad)
        else:
            self.nets.params["critic"] = self._optimisers["critic"].update(
                self.nets.params["critic"], critic_grad
            )
            self.nets.params["actor"] = self._optimisers["actor"].update(
                self.nets.params["actor"], actor_grad
            )


# -- schedulers -------------------------------------------------------------------------


@dataclass
class RoundRecord:
    round_index: int
    grad_norms: list[dict[str, float]]
    disagreement: float
    links_dropped: int = 0
    dropped_edges: list[tuple[int, int]] | None = None  # realised failures, l < k


def run_diffusion_round(
    agents: list[Agent],
    c: np.ndarray,
    alive: np.ndarray | None = None,
) -> None:
    """One synchronous adapt-then-combine round over all agents, in index order."""
    adapted = [agent.adapt() for agent in agents]
    for group in agents[0].nets.group_names:
        mixed = combine([p[group] for p in adapted], c, alive)
        for agent, vec in zip(agents, mixed):
            agent.nets.params[group] = vec
    if agents[0].config.combine_optimiser_state:
        _combine_optimiser_state(agents, c, alive)


def _combine_optimiser_state(agents, c, alive):
    states = [a.optimiser_state_vectors() for a in agents]
    for opt_name in states[0]:
        for vec_name in states[0][opt_name]:
            vectors = [s[opt_name][vec_name] for s in states]
            if any(v.shape != vectors[0].shape for v in vectors):
                continue
            mixed = combine(vectors, c, alive)
            for v, new in zip(vectors, mixed):
                v[:] = new


class SyncTrainer:
    """Deterministic single-threaded scheduler; the correctness reference."""

    def __init__(
        self,
        agents: list[Agent],
        c: np.ndarray,
        topology=None,
        drop_probability: float = 0.0,
        failure_seed: int = 0,
    ):
        self.agents = agents
        self.c = c
        self.topology = topology
        self.drop_probability = drop_probability
        self._failure_rng = np.random.default_rng([failure_seed, 4000])
        self.round_index = 0
        self.records: list[RoundRecord] = []

    def round(self) -> RoundRecord:
        alive = None
        dropped_edges = None
        if self.drop_probability > 0.0:
            alive = sample_link_failures(self.topology, self.drop_probability, self._failure_rng)
            dead = self.topology.adjacency & ~alive
            dropped_edges = [(int(l), int(k)) for l, k in zip(*np.nonzero(np.triu(dead, 1)))]
        run_diffusion_round(self.agents, self.c, alive)
        record = RoundRecord(
            self.round_index,
            [a.last_grad_norms for a in self.agents],
            self._disagreement(),
            len(dropped_edges) if dropped_edges else 0,
            dropped_edges,
        )
        self.records.append(record)
        self.round_index += 1
        return record

    def _disagreement(self) -> float:
        stacked = [
            np.concatenate([a.nets.params[g] for g in a.nets.group_names])
            for a in self.agents
        ]
        return disagreement_norm(stacked) if len(stacked) > 1 else 0.0


class ParallelTrainer:
    """Thread-per-agent scheduler exchanging versioned parameter snapshots.

    Each agent adapts at its own pace, publishes its adapted parameters with a
    round version, and combines with the freshest neighbour snapshots that are
    at most ``staleness_limit`` rounds behind its own round, blocking until
    lagging neighbours catch up.  Satisfies the same invariants as the
    synchronous scheduler except bitwise determinism.
    """

    def __init__(
        self,
        agents: list[Agent],
        c: np.ndarray,
        topology=None,
        drop_probability: float = 0.0,
        failure_seed: int = 0,
    ):
        self.agents = agents
        self.c = np.asarray(c)
        self.topology = topology
        self.drop_probability = drop_probability
        self._failure_rng = np.random.default_rng([failure_seed, 4000])
        self._lock = threading.Condition()
        self._versions = [-1] * len(agents)
        self._snapshots: list[dict[str, np.ndarray] | None] = [None] * len(agents)
        self._alive_masks: list[np.ndarray] = []
        self._errors: list[BaseException] = []

    def _alive_for_round(self, i: int) -> np.ndarray | None:
        if self.drop_probability <= 0.0:
            return None
        with self._lock:
            while len(self._alive_masks) <= i:
                self._alive_masks.append(
                    sample_link_failures(self.topology, self.drop_probability, self._failure_rng)
                )
            return self._alive_masks[i]

    def _publish(self, k: int, version: int, params: dict[str, np.ndarray]) -> None:
        with self._lock:
            self._snapshots[k] = {name: vec.copy() for name, vec in params.items()}
            self._versions[k] = version
            self._lock.notify_all()

    def _neighbour_snapshots(self, k: int, round_index: int, alive) -> dict[int, dict[str, np.ndarray]]:
        staleness = self.agents[k].config.staleness_limit
        col = self.c[:, k]
        needed = [
            l
            for l in range(len(self.agents))
            if col[l] > 0 and (alive is None or alive[l, k] or l == k)
        ]
        with self._lock:
            deadline = round_index - staleness
            while any(
                self._snapshots[l] is None or self._versions[l] < deadline for l in needed
            ):
                if self._errors:
                    raise RuntimeError("peer agent failed") from self._errors[0]
                self._lock.wait(timeout=0.1)
            return {l: {n: v.copy() for n, v in self._snapshots[l].items()} for l in needed}

    def _agent_loop(self, k: int, n_rounds: int) -> None:
        agent = self.agents[k]
        try:
            self._publish(k, -1, agent.nets.params)
            for i in range(n_rounds):
                adapted = agent.adapt()
                self._publish(k, i, adapted)
                alive = self._alive_for_round(i)
                snapshots = self._neighbour_snapshots(k, i, alive)
                weights = self.c[:, k].copy()
                keep = np.zeros(len(self.agents), dtype=bool)
                keep[list(snapshots)] = True
                weights = np.where(keep, weights, 0.0)
                total = weights.sum()
                new_params = {}
                for group in agent.nets.group_names:
                    acc = np.zeros_like(agent.nets.params[group])
                    for l, snap in snapshots.items():
                        acc += (weights[l] / total) * snap[group]
                    new_params[group] = acc
                agent.set_params(new_params)
        except BaseException as exc:  # surfaced to the caller after join
            with self._lock:
                self._errors.append(exc)
                self._lock.notify_all()

    def run(self, n_rounds: int) -> None:
        threads = [
            threading.Thread(target=self._agent_loop, args=(k, n_rounds), daemon=True)
            for k in range(len(self.agents))
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if self._errors:
            raise RuntimeError("parallel training failed") from self._errors[0]


# -- evaluation ----------------------------------------------------------------------


def evaluate_policy(
    agent_nets: AgentNets,
    task: envs.EnvParams,
    episodes: int,
    seed_material: Sequence[int],
) -> float:
    """Mean undiscounted return of the deterministic policy over seeded episodes."""
    total = 0.0
    for episode in range(episodes):
        state = envs.reset(task, _derive_seed([*seed_material, episode]))
        while not state.terminal:
            action = nets.mean_action(agent_nets.policy_output(state.observation))
            state, reward, _ = envs.step(state, action, task)
            total += reward
    return total / episodes


def _derive_seed(material: Sequence[int]) -> int:
    return int(np.random.default_rng([int(m) for m in material]).integers(2**63))
