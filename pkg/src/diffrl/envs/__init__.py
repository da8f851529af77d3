"""Parameterised classic-control environments with seeded task-family samplers.

Four kinds are provided, each a fixed-step integration of the standard rigid
body dynamics with the physical parameters exposed for multitask training:

* ``pendulum``        torque-limited pendulum swing-up/balance (continuous)
* ``cartpole_balance``  cart-pole with continuous force, fail-fast termination
* ``cartpole_swingup``  cart-pole starting pole-down, shaped reward, no failure
* ``acrobot``         two-link underactuated arm, three discrete torques

The API is functional: ``reset(params, seed)`` returns an ``EnvState`` and
``step(state, action, params)`` returns the successor, the reward and the
terminal flag.  States carry both the raw coordinates used by the dynamics and
the (possibly trig-encoded) observation vector.  Identical (seed, params,
action sequence) triples reproduce trajectories bitwise on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import acrobot, cartpole, pendulum

KINDS = ("pendulum", "cartpole_balance", "cartpole_swingup", "acrobot")


@dataclass(frozen=True)
class EnvParams:
    """Environment kind plus its physical parameters (SI-style units).

    Only the fields applicable to ``kind`` are set; the rest stay None.
    """

    kind: str
    episode_max_steps: int
    discount: float = 0.99
    pole_mass: float | None = None
    pole_length: float | None = None  # pendulum: full pole length
    pole_half_length: float | None = None  # cart-pole variants
    cart_mass: float | None = None
    link_length: float | None = None  # acrobot, both links
    link_mass: float | None = None
    link_inertia: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown environment kind {self.kind!r}")
        if self.episode_max_steps < 1:
            raise ValueError("episode_max_steps must be positive")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        for name in _FIELDS_BY_KIND[self.kind]:
            value = getattr(self, name)
            if value is None or value <= 0:
                raise ValueError(f"{self.kind} requires {name} > 0, got {value}")


_FIELDS_BY_KIND = {
    "pendulum": ("pole_mass", "pole_length"),
    "cartpole_balance": ("pole_mass", "pole_half_length", "cart_mass"),
    "cartpole_swingup": ("pole_mass", "pole_half_length", "cart_mass"),
    "acrobot": ("link_length", "link_mass", "link_inertia"),
}


@dataclass
class EnvState:
    observation: np.ndarray
    internal: tuple[float, ...]
    step_count: int
    terminal: bool


@dataclass(frozen=True)
class ActionSpec:
    """Continuous (dimension + bounds) or discrete (cardinality) action set."""

    continuous: bool
    dim: int = 1
    low: tuple[float, ...] = ()
    high: tuple[float, ...] = ()
    cardinality: int = 0

    def __post_init__(self) -> None:
        if self.continuous:
            if any(lo >= hi for lo, hi in zip(self.low, self.high)):
                raise ValueError("bounds must satisfy low < high")
        elif self.cardinality < 2:
            raise ValueError("discrete action sets need cardinality >= 2")


_MODULES = {
    "pendulum": pendulum,
    "cartpole_balance": cartpole,
    "cartpole_swingup": cartpole,
    "acrobot": acrobot,
}


def default_params(kind: str) -> EnvParams:
    """The single-task parameterisation of each environment."""
    if kind == "pendulum":
        return EnvParams(kind, 200, pole_mass=1.0, pole_length=1.0)
    if kind == "cartpole_balance":
        return EnvParams(kind, 200, pole_mass=0.1, pole_half_length=0.5, cart_mass=1.0)
    if kind == "cartpole_swingup":
        return EnvParams(kind, 500, pole_mass=0.5, pole_half_length=0.25, cart_mass=0.5)
    if kind == "acrobot":
        return EnvParams(kind, 500, link_length=1.0, link_mass=1.0, link_inertia=1.0)
    raise ValueError(f"unknown environment kind {kind!r}")


@lru_cache(maxsize=None)
def action_spec(params: EnvParams) -> ActionSpec:
    return _MODULES[params.kind].action_spec(params)


@lru_cache(maxsize=None)
def _bounds_arrays(spec: ActionSpec) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(spec.low), np.asarray(spec.high)


def observation_dim(params: EnvParams) -> int:
    return _MODULES[params.kind].observation_dim(params)


def reset(params: EnvParams, seed: int) -> EnvState:
    """Seeded initial state; deterministic for a fixed (params, seed) pair."""
    rng = np.random.default_rng(seed)
    internal = _MODULES[params.kind].sample_initial(params, rng)
    obs = _MODULES[params.kind].observe(params, internal)
    return EnvState(obs, internal, 0, False)


def step(state: EnvState, action, params: EnvParams) -> tuple[EnvState, float, bool]:
    """Advance one time step; continuous actions are clipped to their bounds."""
    if state.terminal:
        raise ValueError("cannot step a terminal state")
    spec = action_spec(params)
    if spec.continuous:
        low, high = _bounds_arrays(spec)
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(-1), low, high)
        if a.shape != (spec.dim,):
            raise ValueError(f"expected action of dimension {spec.dim}")
    else:
        a = int(action)
        if not 0 <= a < spec.cardinality:
            raise ValueError(f"discrete action {a} outside [0, {spec.cardinality})")
    module = _MODULES[params.kind]
    internal, reward, failed = module.advance(params, state.internal, a)
    count = state.step_count + 1
    terminal = failed or count >= params.episode_max_steps
    obs = module.observe(params, internal)
    return EnvState(obs, internal, count, terminal), reward, terminal


_GRID_DEFAULTS: dict[str, dict[str, tuple[float, ...]]] = {
    "pendulum": {
        "pole_mass": (0.8, 0.9, 1.0, 1.1, 1.2),
        "pole_length": (0.8, 0.9, 1.0, 1.1, 1.2),
    },
    "cartpole_balance": {
        "pole_mass": (0.1, 0.325, 0.55, 0.775, 1.0),
        "pole_half_length": (0.05, 0.1625, 0.275, 0.3875, 0.5),
    },
    "cartpole_swingup": {
        "pole_mass": (0.1, 0.2, 0.3, 0.4, 0.5),
        "pole_half_length": (0.2, 0.4, 0.6, 0.8, 1.0),
    },
}


def sample_uniform_union(rng: np.random.Generator) -> float:
    """Uniform draw from [0.5, 0.75] union [1.25, 1.5]."""
    u = rng.uniform(0.0, 0.5)
    return 0.5 + u if u < 0.25 else 1.0 + u


def sample_task_grid(
    kind: str,
    n_tasks: int,
    seed: int = 0,
    axes: Mapping[str, Sequence[float]] | None = None,
) -> list[EnvParams]:
    """Task family: a Cartesian parameter grid, or i.i.d. draws for acrobot.

    For the grid kinds the axis lengths must multiply to ``n_tasks``
    (defaults give the 5 x 5 = 25-task families); ``n_tasks = 1`` returns the
    kind's single-task default parameters.
    """
    if n_tasks < 1:
        raise ValueError("n_tasks must be positive")
    if n_tasks == 1 and axes is None:
        return [default_params(kind)]
    base = default_params(kind)
    if kind == "acrobot":
        rng = np.random.default_rng(seed)
        return [
            replace(
                base,
                link_length=sample_uniform_union(rng),
                link_mass=sample_uniform_union(rng),
                link_inertia=sample_uniform_union(rng),
            )
            for _ in range(n_tasks)
        ]
    if axes is None:
        grid = {k: tuple(v) for k, v in _GRID_DEFAULTS[kind].items()}
    else:
        # explicit axes vary exactly the named fields; everything else stays
        # at the kind's single-task default
        unknown = set(axes) - set(_FIELDS_BY_KIND[kind])
        if unknown:
            raise ValueError(f"unknown grid axes for {kind}: {sorted(unknown)}")
        grid = {k: tuple(float(x) for x in v) for k, v in axes.items()}
    total = int(np.prod([len(v) for v in grid.values()]))
    if total != n_tasks:
        raise ValueError(f"grid of size {total} does not match n_tasks={n_tasks}")
    names = list(grid)
    tasks = []
    mesh = np.meshgrid(*[np.asarray(grid[n]) for n in names], indexing="ij")
    for values in zip(*(m.reshape(-1) for m in mesh)):
        tasks.append(replace(base, **{n: float(v) for n, v in zip(names, values)}))
    return tasks
