"""Agent communication graphs and the parameter-combination step.

A set of agents is connected by an undirected graph with self-loops.  Mixing
weights are assigned with the Hastings rule, which produces a doubly
stochastic, primitive connectivity matrix whenever the graph is connected;
repeatedly averaging with such a matrix contracts the disagreement between
agents at a rate given by ``contraction_factor``.  Link failures are modelled
as per-round symmetric Bernoulli drops with the surviving weights of each
agent renormalised, so every realised step remains a convex combination.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Undirected agent graph; adjacency is symmetric with a true diagonal."""

    adjacency: np.ndarray

    def __post_init__(self) -> None:
        adj = np.asarray(self.adjacency, dtype=bool)
        object.__setattr__(self, "adjacency", adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not adj.diagonal().all():
            raise ValueError("adjacency must include self-loops")
        if not _connected(adj):
            raise ValueError("graph must be connected")

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        """Neighbourhood sizes, self-loop included."""
        return self.adjacency.sum(axis=1)

    def average_degree(self) -> float:
        return float(self.degrees().mean())


def _connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    frontier = np.array([0])
    seen[0] = True
    while frontier.size:
        nxt = adj[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = np.flatnonzero(nxt)
    return bool(seen.all())


def build_topology(
    kind: str,
    n: int,
    target_avg_degree: float | None = None,
    seed: int | None = None,
) -> Topology:
    """Build a ring, complete, or random connected graph over ``n`` agents.

    ``target_avg_degree`` counts the self-loop, matching the neighbourhood
    size |N_k|; it applies to the random kind only, where a random spanning
    tree is grown and extra edges added uniformly until the average is met.
    """
    if n < 2:
        raise ValueError("need at least 2 agents")
    if kind == "complete":
        adj = np.ones((n, n), dtype=bool)
    elif kind == "ring":
        adj = np.eye(n, dtype=bool)
        idx = np.arange(n)
        adj[idx, (idx + 1) % n] = True
        adj[(idx + 1) % n, idx] = True
    elif kind == "random_connected":
        if target_avg_degree is None:
            raise ValueError("random_connected requires target_avg_degree")
        # avg |N_k| = 2 E / n + 1 for E undirected edges
        n_edges = int(round(n * (target_avg_degree - 1.0) / 2.0))
        min_edges, max_edges = n - 1, n * (n - 1) // 2
        if not min_edges <= n_edges <= max_edges:
            raise ValueError(
                f"target_avg_degree {target_avg_degree} infeasible for n={n}: "
                f"needs {n_edges} edges outside [{min_edges}, {max_edges}]"
            )
        rng = np.random.default_rng(seed)
        adj = np.eye(n, dtype=bool)
        order = rng.permutation(n)
        for i in range(1, n):  # random spanning tree
            j = order[rng.integers(i)]
            adj[order[i], j] = adj[j, order[i]] = True
        remaining = n_edges - (n - 1)
        free = [(i, j) for i in range(n) for j in range(i + 1, n) if not adj[i, j]]
        for pick in rng.permutation(len(free))[:remaining]:
            i, j = free[pick]
            adj[i, j] = adj[j, i] = True
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return Topology(adj)


def hastings_weights(t: Topology) -> np.ndarray:
    """Doubly stochastic mixing matrix from local degrees.

    Off-diagonal weights are 1 / max(deg_l, deg_k) for adjacent pairs with
    degrees counting the self-loop; the diagonal takes the remainder.
    """
    deg = t.degrees()
    pairwise = 1.0 / np.maximum(deg[:, None], deg[None, :])
    c = np.where(t.adjacency, pairwise, 0.0)
    np.fill_diagonal(c, 0.0)
    np.fill_diagonal(c, 1.0 - c.sum(axis=1))
    return c


def validate_connectivity(c: np.ndarray, adjacency: np.ndarray | None = None) -> None:
    """Check double stochasticity, non-negativity, positive trace, sparsity match."""
    c = np.asarray(c)
    if np.any(c < 0):
        raise ValueError("connectivity weights must be non-negative")
    if not np.allclose(c.sum(axis=0), 1.0, atol=1e-12, rtol=0.0):
        raise ValueError("columns must sum to 1")
    if not np.allclose(c.sum(axis=1), 1.0, atol=1e-12, rtol=0.0):
        raise ValueError("rows must sum to 1")
    if np.trace(c) <= 0:
        raise ValueError("trace must be positive")
    if adjacency is not None:
        off = ~np.eye(c.shape[0], dtype=bool)
        if np.any((c > 0) & off & ~adjacency):
            raise ValueError("positive weight on a missing edge")


def sample_link_failures(t: Topology, drop_probability: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric boolean mask of links that survive one combination round.

    Each undirected edge fails independently with ``drop_probability``; the
    self-loop never fails.
    """
    if not 0.0 <= drop_probability < 1.0:
        raise ValueError("drop_probability must lie in [0, 1)")
    n = t.n_agents
    u = np.triu(rng.random((n, n)), k=1)
    u = u + u.T  # one draw per unordered pair
    alive = t.adjacency & (u >= drop_probability)
    np.fill_diagonal(alive, True)
    return alive


def realised_weights(c: np.ndarray, alive: np.ndarray | None = None) -> np.ndarray:
    """Per-agent weights actually used in one round, rows = receiving agent.

    Without failures this is simply C transposed into receiver-major order.
    With failures, dropped in-neighbours are removed and each row renormalised
    over the survivors, keeping every row a probability vector.
    """
    w = np.asarray(c, dtype=np.float64).T.copy()
    if alive is not None:
        alive = np.asarray(alive, dtype=bool)
        if not alive.diagonal().all():
            raise ValueError("self-loops must always survive")
        w = np.where(alive, w, 0.0)
        w /= w.sum(axis=1, keepdims=True)
    return w


def combine(
    params_by_agent: list[np.ndarray],
    c: np.ndarray,
    alive: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Synchronous combination: each agent's new vector is its in-neighbour average."""
    n = len(params_by_agent)
    if c.shape != (n, n):
        raise ValueError(f"connectivity shape {c.shape} does not match {n} agents")
    length = params_by_agent[0].shape
    for p in params_by_agent[1:]:
        if p.shape != length:
            raise ValueError("all agents must share one parameter layout")
    stacked = np.stack(params_by_agent)
    w = realised_weights(c, alive)
    mixed = w @ stacked
    return [mixed[k] for k in range(n)]


def combine_one(
    agent: int,
    snapshots: dict[int, np.ndarray],
    c: np.ndarray,
    alive_row: np.ndarray | None = None,
) -> np.ndarray:
    """Per-agent combination from explicit neighbour snapshots.

    ``snapshots`` must hold a vector for every in-neighbour of ``agent`` that
    survives ``alive_row`` (a boolean mask over agents; the agent itself is
    always kept).  Used by the asynchronous trainer, where snapshots may be
    bounded-staleness copies rather than current values.
    """
    col = np.asarray(c, dtype=np.float64)[:, agent].copy()
    if alive_row is not None:
        keep = np.asarray(alive_row, dtype=bool).copy()
        keep[agent] = True
        col = np.where(keep, col, 0.0)
    total = col.sum()
    out = np.zeros_like(snapshots[agent])
    for l in np.flatnonzero(col > 0):
        out += (col[l] / total) * snapshots[l]
    return out


def disagreement_norm(params_by_agent: list[np.ndarray]) -> float:
    """Euclidean norm of the stacked deviations from the cross-agent mean."""
    stacked = np.stack(params_by_agent)
    return float(np.linalg.norm(stacked - stacked.mean(axis=0)))


def contraction_factor(c: np.ndarray, tol: float = 1e-10, max_iters: int = 100_000) -> float:
    """Spectral norm of C - (1 1^T)/N, the per-round disagreement contraction.

    Computed by power iteration on M^T M; strictly below 1 for any connected
    graph's Hastings matrix, exactly 1 when the graph is disconnected, and 0
    for uniform (complete-graph) weights.
    """
    n = c.shape[0]
    m = np.asarray(c, dtype=np.float64) - 1.0 / n
    b = m.T @ m
    rng = np.random.default_rng(0)
    best = 0.0
    # a few deterministic random starts guard against a start vector that is
    # nearly orthogonal to the top eigenvector (the all-ones vector is null)
    for _ in range(3):
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        lam = 0.0
        stable = 0
        for _ in range(max_iters):
            y = b @ x
            norm = np.linalg.norm(y)
            if norm < 1e-300:
                lam = 0.0
                break
            x = y / norm
            lam_next = float(x @ (b @ x))
            stable = stable + 1 if abs(lam_next - lam) <= tol * max(1.0, abs(lam_next)) else 0
            lam = lam_next
            if stable >= 10:
                break
        best = max(best, lam)
    return float(np.sqrt(max(best, 0.0)))


# -- plain-text export ---------------------------------------------------------


def save_matrix_text(mat: np.ndarray, path: str | Path, header: str = "") -> None:
    """Write a matrix as plain text: optional comment, shape line, rows of values."""
    mat = np.asarray(mat)
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append(f"{mat.shape[0]} {mat.shape[1]}")
    for row in mat:
        lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix_text(path: str | Path) -> np.ndarray:
    rows = []
    shape = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if shape is None:
            shape = tuple(int(x) for x in line.split())
            continue
        rows.append([float(x) for x in line.split()])
    mat = np.array(rows)
    if shape is None or mat.shape != shape:
        raise ValueError(f"matrix shape {mat.shape} does not match header {shape}")
    return mat
