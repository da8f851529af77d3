"""Finite-state multitask MDPs and the primal-dual view of actor-critic.

The value function of a discounted MDP is the solution of a linear program
(minimise ``mu @ v`` subject to the Bellman inequalities); its dual variable is
the discounted state-action occupancy measure, and normalising the occupancy
rows recovers a policy.  This module implements that machinery exactly for
small state spaces: kernel averaging across a task family, policy evaluation
and optimal values by direct linear algebra, occupancy measures, advantages,
and a projected dual-ascent loop that alternates Bellman evaluation with a
gradient step on the occupancy.

Everything here operates on plain float64 numpy arrays and is side-effect
free, so it is safe to call from concurrent contexts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

_ATOL_DIST = 1e-12


@dataclass(frozen=True)
class TabularMdp:
    """A finite MDP: transition P[s, a, s'], reward r[s, a, s'], start dist, discount."""

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    discount: float

    def __post_init__(self) -> None:
        p = np.asarray(self.transition, dtype=np.float64)
        r = np.asarray(self.reward, dtype=np.float64)
        mu = np.asarray(self.initial_dist, dtype=np.float64)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "initial_dist", mu)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {p.shape}")
        if r.shape != p.shape:
            raise ValueError(f"reward shape {r.shape} != transition shape {p.shape}")
        if mu.shape != (p.shape[0],):
            raise ValueError(f"initial_dist shape {mu.shape} incompatible with {p.shape[0]} states")
        if np.any(p < 0) or np.any(mu < 0):
            raise ValueError("probabilities must be non-negative")
        rows = p.sum(axis=2)
        if not np.allclose(rows, 1.0, atol=_ATOL_DIST, rtol=0.0):
            raise ValueError(f"transition rows must sum to 1, max error {np.abs(rows - 1).max():.3g}")
        if abs(mu.sum() - 1.0) > _ATOL_DIST:
            raise ValueError(f"initial_dist sums to {mu.sum()!r}, expected 1")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must be in (0, 1), got {self.discount}")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class TabularTaskFamily:
    """Tasks sharing states, actions, reward, start distribution and discount.

    Only the transition kernel differs between members.
    """

    tasks: tuple[TabularMdp, ...]

    def __post_init__(self) -> None:
        if not self.tasks:
            raise ValueError("task family must contain at least one task")
        object.__setattr__(self, "tasks", tuple(self.tasks))
        first = self.tasks[0]
        for k, task in enumerate(self.tasks[1:], start=1):
            if task.transition.shape != first.transition.shape:
                raise ValueError(f"task {k} has mismatched shapes")
            if not (
                np.array_equal(task.reward, first.reward)
                and np.array_equal(task.initial_dist, first.initial_dist)
                and task.discount == first.discount
            ):
                raise ValueError(f"task {k} differs from task 0 in reward, start dist or discount")

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)


def validate_policy(pi: np.ndarray, n_states: int, n_actions: int) -> np.ndarray:
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (n_states, n_actions):
        raise ValueError(f"policy shape {pi.shape}, expected {(n_states, n_actions)}")
    if np.any(pi < 0) or not np.allclose(pi.sum(axis=1), 1.0, atol=_ATOL_DIST, rtol=0.0):
        raise ValueError("policy rows must be probability vectors")
    return pi


def average_kernel(family: TabularTaskFamily) -> TabularMdp:
    """MDP whose kernel is the arithmetic mean of the family's kernels.

    A convex combination of row-stochastic matrices is row-stochastic, so the
    result is a valid MDP; all other fields are copied from the family.
    """
    kernels = np.stack([t.transition for t in family.tasks])
    mean = kernels.mean(axis=0)
    first = family.tasks[0]
    return TabularMdp(mean, first.reward, first.initial_dist, first.discount)


def _policy_kernel(mdp: TabularMdp, pi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """State-to-state kernel P^pi and expected one-step reward r^pi under pi."""
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    r_sa = np.einsum("sat,sat->sa", mdp.transition, mdp.reward)
    r_pi = np.einsum("sa,sa->s", pi, r_sa)
    return p_pi, r_pi


def policy_evaluation(mdp: TabularMdp, pi: np.ndarray) -> np.ndarray:
    """Exact value of ``pi``: solve (I - gamma P^pi) v = r^pi."""
    pi = validate_policy(pi, mdp.n_states, mdp.n_actions)
    p_pi, r_pi = _policy_kernel(mdp, pi)
    a = np.eye(mdp.n_states) - mdp.discount * p_pi
    v = np.linalg.solve(a, r_pi)
    residual = np.abs(a @ v - r_pi).max()
    if residual > 1e-10:
        raise ArithmeticError(f"Bellman solve residual {residual:.3g} exceeds 1e-10")
    return v


def bellman_optimality_residual(mdp: TabularMdp, v: np.ndarray) -> float:
    """Max-norm distance between v and its optimal Bellman backup."""
    q = np.einsum("sat,sat->sa", mdp.transition, mdp.reward + mdp.discount * v[None, None, :])
    return float(np.abs(q.max(axis=1) - v).max())


def solve_primal_lp(mdp: TabularMdp, tol: float = 1e-10) -> np.ndarray:
    """Optimal value function, i.e. the minimiser of mu @ v over the Bellman polytope.

    Solved by value iteration followed by an exact evaluation of the greedy
    policy; equivalent to the linear-programming formulation for gamma < 1.
    Requires initial_dist > 0 everywhere so the LP optimum is the (unique)
    optimal value function.
    """
    if np.any(mdp.initial_dist <= 0):
        raise ValueError("solve_primal_lp requires strictly positive initial_dist")
    gamma = mdp.discount
    r_sa = np.einsum("sat,sat->sa", mdp.transition, mdp.reward)
    v = np.zeros(mdp.n_states)
    # |T v - v| contracts by gamma per sweep; cap generously.
    max_sweeps = int(np.ceil(np.log(max(tol, 1e-300)) / np.log(gamma))) + 200
    for _ in range(max_sweeps):
        q = r_sa + gamma * np.einsum("sat,t->sa", mdp.transition, v)
        v_next = q.max(axis=1)
        if np.abs(v_next - v).max() < tol:
            v = v_next
            break
        v = v_next
    # Polish: evaluate the greedy policy exactly, removing the geometric tail.
    q = r_sa + gamma * np.einsum("sat,t->sa", mdp.transition, v)
    greedy = np.zeros((mdp.n_states, mdp.n_actions))
    greedy[np.arange(mdp.n_states), q.argmax(axis=1)] = 1.0
    v = policy_evaluation(mdp, greedy)
    if bellman_optimality_residual(mdp, v) > tol:
        raise ArithmeticError("value iteration failed to reach requested residual")
    return v


def occupancy_of(mdp: TabularMdp, pi: np.ndarray) -> np.ndarray:
    """Discounted state-action visitation d(s,a) = pi(a|s) rho(s).

    rho solves rho = mu + gamma (P^pi)^T rho by direct linear solve; the total
    mass of d is 1/(1-gamma).
    """
    pi = validate_policy(pi, mdp.n_states, mdp.n_actions)
    p_pi, _ = _policy_kernel(mdp, pi)
    a = np.eye(mdp.n_states) - mdp.discount * p_pi.T
    rho = np.linalg.solve(a, mdp.initial_dist)
    return pi * rho[:, None]


def policy_from_occupancy(d: np.ndarray) -> np.ndarray:
    """Normalise occupancy rows into a policy; zero-mass states become uniform."""
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError("occupancy must be a (states, actions) matrix")
    if np.any(d < 0):
        raise ValueError("occupancy entries must be non-negative")
    row_mass = d.sum(axis=1)
    pi = np.empty_like(d)
    visited = row_mass > 0
    pi[visited] = d[visited] / row_mass[visited, None]
    pi[~visited] = 1.0 / d.shape[1]
    return pi


def advantage_exact(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    """A(s,a) = sum_s' P(s'|s,a) (r(s,a,s') + gamma v(s')) - v(s)."""
    v = np.asarray(v, dtype=np.float64)
    backup = np.einsum("sat,sat->sa", mdp.transition, mdp.reward + mdp.discount * v[None, None, :])
    return backup - v[:, None]


@dataclass
class DualAscentResult:
    policy: np.ndarray
    values: np.ndarray
    occupancy: np.ndarray
    converged: bool
    iterations: int
    kkt_residual: float


def _kkt_residual(d: np.ndarray, adv: np.ndarray) -> float:
    # Residual of the saddle-point conditions: advantages vanish on the support
    # of d and no off-support action is strictly attractive.
    support = d > 0
    on_support = np.abs(adv[support]).max() if support.any() else 0.0
    return float(max(on_support, adv.max(), 0.0))


def dual_ascent(
    family: TabularTaskFamily,
    step: float = 0.2,
    max_iters: int = 60_000,
    tol: float = 1e-6,
    step_decay: float = 0.0,
) -> DualAscentResult:
    """Saddle-point search on the family's averaged kernel.

    Alternates (i) the primal step, evaluating the policy implied by the
    current occupancy, with (ii) a projected gradient-ascent step on the
    occupancy along the advantage.  The occupancy starts at the uniform
    policy's visitation measure so every state has support.  ``step_decay``
    optionally shrinks the step as step / (1 + decay * iteration); the default
    keeps it constant.

    Stops once the KKT residual (max |A| on the support of d, and no positive
    advantage anywhere) falls below ``tol``; otherwise returns the iterate
    with the smallest residual seen, flagged unconverged.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    mdp = average_kernel(family)
    uniform = np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)
    d = occupancy_of(mdp, uniform)

    best: tuple[float, np.ndarray, np.ndarray, np.ndarray] | None = None
    for it in range(max_iters):
        pi = policy_from_occupancy(d)
        v = policy_evaluation(mdp, pi)
        adv = advantage_exact(mdp, v)
        residual = _kkt_residual(d, adv)
        if best is None or residual < best[0]:
            best = (residual, pi, v, d.copy())
        if residual < tol:
            return DualAscentResult(pi, v, d, True, it, residual)
        beta = step / (1.0 + step_decay * it)
        d = np.maximum(d + beta * adv, 0.0)

    residual, pi, v, d = best
    return DualAscentResult(pi, v, d, False, max_iters, residual)


def brute_force_objective(mdp: TabularMdp) -> float:
    """max over all deterministic policies of mu @ v, by exhaustive evaluation.

    Exponential in the state count; intended for verifying the dual-ascent
    route on instances with a handful of states.
    """
    n_s, n_a = mdp.n_states, mdp.n_actions
    best = -np.inf
    for code in range(n_a**n_s):
        pi = np.zeros((n_s, n_a))
        remaining = code
        for s in range(n_s):
            pi[s, remaining % n_a] = 1.0
            remaining //= n_a
        best = max(best, float(mdp.initial_dist @ policy_evaluation(mdp, pi)))
    return best


# -- seeded random instances -------------------------------------------------


def random_mdp(
    n_states: int,
    n_actions: int,
    rng: np.random.Generator,
    discount: float = 0.9,
) -> TabularMdp:
    """Random dense MDP with Dirichlet transition rows and uniform [0,1] rewards."""
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    reward = rng.uniform(0.0, 1.0, size=(n_states, n_actions, n_states))
    initial = rng.dirichlet(np.ones(n_states))
    return TabularMdp(transition, reward, initial, discount)


def random_task_family(
    n_states: int,
    n_actions: int,
    n_tasks: int,
    seed: int,
    discount: float = 0.9,
) -> TabularTaskFamily:
    """Seeded family: shared reward/start/discount, per-task transition kernels."""
    rng = np.random.default_rng(seed)
    base = random_mdp(n_states, n_actions, rng, discount)
    tasks = [base]
    for _ in range(n_tasks - 1):
        transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
        tasks.append(TabularMdp(transition, base.reward, base.initial_dist, discount))
    return TabularTaskFamily(tuple(tasks))


# -- plain-text tensor serialisation ------------------------------------------
#
# File layout (whitespace separated, '#' comments ignored):
#   line 1:            "tabular-mdp 1"
#   line 2:            "discount <float>"
#   then three blocks: "tensor <name> <ndim> <dim0> <dim1> ..." followed by the
#   row-major values, one row of the flattened tensor per line.


def _write_tensor(lines: list[str], name: str, arr: np.ndarray) -> None:
    dims = " ".join(str(d) for d in arr.shape)
    lines.append(f"tensor {name} {arr.ndim} {dims}")
    flat = arr.reshape(-1)
    width = arr.shape[-1]
    for off in range(0, flat.size, width):
        lines.append(" ".join(repr(float(x)) for x in flat[off : off + width]))


def save_mdp(mdp: TabularMdp, path: str | Path) -> None:
    lines = ["tabular-mdp 1", f"discount {float(mdp.discount)!r}"]
    _write_tensor(lines, "transition", mdp.transition)
    _write_tensor(lines, "reward", mdp.reward)
    _write_tensor(lines, "initial_dist", mdp.initial_dist)
    Path(path).write_text("\n".join(lines) + "\n")


def load_mdp(path: str | Path) -> TabularMdp:
    tokens: list[str] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    it = iter(tokens)

    def take(n: int) -> list[str]:
        return [next(it) for _ in range(n)]

    magic, version = take(2)
    if magic != "tabular-mdp" or version != "1":
        raise ValueError(f"unrecognised header {magic!r} {version!r}")
    key, value = take(2)
    if key != "discount":
        raise ValueError("expected discount line")
    discount = float(value)
    tensors: dict[str, np.ndarray] = {}
    try:
        while True:
            tag = next(it)
            if tag != "tensor":
                raise ValueError(f"expected tensor block, found {tag!r}")
            name = next(it)
            ndim = int(next(it))
            shape = tuple(int(x) for x in take(ndim))
            count = int(np.prod(shape))
            values = np.array([float(x) for x in take(count)])
            tensors[name] = values.reshape(shape)
    except StopIteration:
        pass
    missing = {"transition", "reward", "initial_dist"} - tensors.keys()
    if missing:
        raise ValueError(f"missing tensors: {sorted(missing)}")
    return TabularMdp(tensors["transition"], tensors["reward"], tensors["initial_dist"], discount)
