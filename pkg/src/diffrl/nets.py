"""Dense networks with hand-written backpropagation and flat parameter views.

Networks are pure functions of a flat float64 parameter vector whose layout is
fully determined by a ``NetworkSpec``; two networks built from the same spec
always index their tensors identically, which is what makes cross-agent
parameter averaging meaningful.  Heads cover a scalar value, a bounded
Gaussian policy (tanh-squashed mean, softplus standard deviation with a hard
floor) and a categorical policy; composite ``value+...`` heads put both a
value slot and a policy on one shared trunk.

Gradients are exact and analytic.  The batched entry points fold the
per-sample weights into the head derivative so one backward pass yields an
averaged training gradient; the single-sample functions are the same code
path with a batch of one.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

_MAGIC = b"DRLPV1\x00\x00"

_HEADS = ("value", "gaussian", "categorical", "value+gaussian", "value+categorical")

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NetworkSpec:
    """Shape and head description of one dense network."""

    input_dim: int
    hidden: tuple[int, ...]
    activation: str  # relu | tanh
    head: str
    output_dim: int  # action dimension / number of actions; 1 for a bare value head
    action_low: tuple[float, ...] | None = None
    action_high: tuple[float, ...] | None = None
    std_floor: float = 1e-3

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("all dimensions must be >= 1")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.head not in _HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.head == "value" and self.output_dim != 1:
            raise ValueError("value head has output_dim 1")
        if "categorical" in self.head and self.output_dim < 2:
            raise ValueError("categorical head needs at least 2 actions")
        if "gaussian" in self.head:
            if self.action_low is None or self.action_high is None:
                raise ValueError("gaussian head requires action bounds")
            object.__setattr__(self, "action_low", tuple(float(x) for x in self.action_low))
            object.__setattr__(self, "action_high", tuple(float(x) for x in self.action_high))
            if len(self.action_low) != self.output_dim or len(self.action_high) != self.output_dim:
                raise ValueError("bounds must match output_dim")
            if any(lo >= hi for lo, hi in zip(self.action_low, self.action_high)):
                raise ValueError("action bounds must satisfy low < high")
            if self.std_floor <= 0:
                raise ValueError("std_floor must be positive")

    @property
    def raw_dim(self) -> int:
        """Width of the final affine layer."""
        if self.head == "value":
            return 1
        if self.head == "gaussian":
            return 2 * self.output_dim
        if self.head == "categorical":
            return self.output_dim
        if self.head == "value+gaussian":
            return 1 + 2 * self.output_dim
        return 1 + self.output_dim  # value+categorical

    @property
    def has_value(self) -> bool:
        return self.head == "value" or self.head.startswith("value+")

    @property
    def policy_kind(self) -> str | None:
        if "gaussian" in self.head:
            return "gaussian"
        if "categorical" in self.head:
            return "categorical"
        return None

    @property
    def policy_slice(self) -> slice:
        start = 1 if self.head.startswith("value+") else 0
        return slice(start, self.raw_dim)


# -- layouts and flat views -----------------------------------------------------


@lru_cache(maxsize=None)
def layout(spec: NetworkSpec) -> tuple[tuple[str, tuple[int, ...], int, int], ...]:
    """Ordered (name, shape, start, end) entries covering [0, param_count)."""
    entries = []
    offset = 0
    dims = (spec.input_dim, *spec.hidden, spec.raw_dim)
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        for name, shape in ((f"w{i}", (n_out, n_in)), (f"b{i}", (n_out,))):
            size = int(np.prod(shape))
            entries.append((name, shape, offset, offset + size))
            offset += size
    return tuple(entries)


def param_count(spec: NetworkSpec) -> int:
    return layout(spec)[-1][-1]


def unflatten(spec: NetworkSpec, flat: np.ndarray) -> dict[str, np.ndarray]:
    """Name -> tensor views into ``flat`` (no copies)."""
    if flat.shape != (param_count(spec),):
        raise ValueError(f"expected {param_count(spec)} parameters, got {flat.shape}")
    return {name: flat[a:b].reshape(shape) for name, shape, a, b in layout(spec)}


def flatten(spec: NetworkSpec, tensors: dict[str, np.ndarray]) -> np.ndarray:
    flat = np.empty(param_count(spec))
    for name, shape, a, b in layout(spec):
        flat[a:b] = np.asarray(tensors[name]).reshape(-1)
    return flat


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform fan-in initialisation: He-style for relu trunks, Xavier for tanh.

    The head layer always uses the Xavier bound; biases start at zero.
    """
    flat = np.zeros(param_count(spec))
    tensors = unflatten(spec, flat)
    n_layers = len(spec.hidden) + 1
    for i in range(n_layers):
        w = tensors[f"w{i}"]
        fan_out, fan_in = w.shape
        if i == n_layers - 1 or spec.activation == "tanh":
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        else:
            limit = np.sqrt(6.0 / fan_in)
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return flat


# -- head outputs ----------------------------------------------------------------


@dataclass
class ValueOutput:
    value: float


@dataclass
class GaussianOutput:
    mean: np.ndarray
    std: np.ndarray
    low: np.ndarray
    high: np.ndarray


@dataclass
class CategoricalOutput:
    logits: np.ndarray
    probs: np.ndarray


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# -- forward / backward core -------------------------------------------------------


def _forward_cached(spec: NetworkSpec, params: np.ndarray, x_batch: np.ndarray):
    """Run the trunk, keeping the activations needed for one backward pass."""
    tensors = unflatten(spec, params)
    h = x_batch
    inputs = [x_batch]  # input to affine layer i
    post = []  # activation output per hidden layer (for tanh')
    pre = []  # pre-activation per hidden layer (for relu')
    with np.errstate(over="ignore", invalid="ignore"):  # finiteness checked per layer
        for i in range(len(spec.hidden)):
            z = h @ tensors[f"w{i}"].T + tensors[f"b{i}"]
            if not np.isfinite(z).all():
                raise ArithmeticError(f"non-finite pre-activation at layer {i}")
            h = np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)
            pre.append(z)
            post.append(h)
            inputs.append(h)
        last = len(spec.hidden)
        raw = h @ tensors[f"w{last}"].T + tensors[f"b{last}"]
        if not np.isfinite(raw).all():
            raise ArithmeticError(f"non-finite pre-activation at layer {last}")
    return tensors, inputs, pre, post, raw


def _backward(spec, tensors, inputs, pre, post, d_raw) -> np.ndarray:
    """Accumulate the gradient of sum_t <d_raw[t], raw[t]> into a flat vector."""
    grad = np.zeros(param_count(spec))
    gviews = unflatten(spec, grad)
    last = len(spec.hidden)
    gviews[f"w{last}"][...] = d_raw.T @ inputs[last]
    gviews[f"b{last}"][...] = d_raw.sum(axis=0)
    dh = d_raw @ tensors[f"w{last}"]
    for i in reversed(range(len(spec.hidden))):
        if spec.activation == "relu":
            dz = dh * (pre[i] > 0)
        else:
            dz = dh * (1.0 - post[i] ** 2)
        gviews[f"w{i}"][...] = dz.T @ inputs[i]
        gviews[f"b{i}"][...] = dz.sum(axis=0)
        dh = dz @ tensors[f"w{i}"]
    return grad


def _check_input(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} != spec input_dim {spec.input_dim}")
    if not np.isfinite(x).all():
        raise ValueError("non-finite input")
    return x


@lru_cache(maxsize=None)
def _gaussian_constants(spec: NetworkSpec):
    low = np.asarray(spec.action_low)
    high = np.asarray(spec.action_high)
    return low, high, (low + high) / 2.0, (high - low) / 2.0


def _decode_gaussian(spec: NetworkSpec, raw_policy: np.ndarray):
    p = spec.output_dim
    *_, centre, halfspan = _gaussian_constants(spec)
    u = raw_policy[..., :p]
    s = raw_policy[..., p:]
    tanh_u = np.tanh(u)
    mean = centre + halfspan * tanh_u
    std = spec.std_floor + _softplus(s)
    return mean, std, tanh_u, halfspan, _sigmoid(s)


def forward_raw(spec: NetworkSpec, tensors: dict[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    """Single-sample trunk pass over prebuilt tensor views, no caches.

    Hot path for action selection; non-finite detection happens on the final
    layer only (training gradients use the fully checked cached pass).
    """
    h = x
    if spec.activation == "relu":
        for i in range(len(spec.hidden)):
            h = np.maximum(tensors[f"w{i}"] @ h + tensors[f"b{i}"], 0.0)
    else:
        for i in range(len(spec.hidden)):
            h = np.tanh(tensors[f"w{i}"] @ h + tensors[f"b{i}"])
    last = len(spec.hidden)
    raw = tensors[f"w{last}"] @ h + tensors[f"b{last}"]
    if not np.isfinite(raw).all():
        raise ArithmeticError(f"non-finite pre-activation at layer {last}")
    return raw


def output_from_raw(spec: NetworkSpec, raw: np.ndarray):
    value = ValueOutput(float(raw[0])) if spec.has_value else None
    policy = None
    if spec.policy_kind == "gaussian":
        pol = raw[spec.policy_slice]
        p = spec.output_dim
        low, high, centre, halfspan = _gaussian_constants(spec)
        mean = centre + halfspan * np.tanh(pol[:p])
        std = spec.std_floor + _softplus(pol[p:])
        policy = GaussianOutput(mean, std, low, high)
    elif spec.policy_kind == "categorical":
        logits = raw[spec.policy_slice]
        policy = CategoricalOutput(logits, _softmax(logits))
    if spec.head == "value":
        return value
    if spec.head in ("gaussian", "categorical"):
        return policy
    return value, policy


def forward(spec: NetworkSpec, params: np.ndarray, x: np.ndarray):
    """Single-sample forward pass returning the head output.

    Composite heads return a (ValueOutput, policy output) pair.
    """
    x = _check_input(spec, x)
    *_, raw = _forward_cached(spec, params, x[None, :])
    return output_from_raw(spec, raw[0])


def values_batch(spec: NetworkSpec, params: np.ndarray, x_batch: np.ndarray) -> np.ndarray:
    if not spec.has_value:
        raise ValueError(f"head {spec.head!r} has no value slot")
    x_batch = _check_input(spec, np.atleast_2d(x_batch))
    *_, raw = _forward_cached(spec, params, x_batch)
    return raw[:, 0]


# -- sampling and entropy -----------------------------------------------------------


def sample_action(output, rng: np.random.Generator):
    """Draw one action; returns (action, log_prob).

    Gaussian actions are clipped to the bounds after sampling while the log
    probability is that of the unclipped draw; categorical actions use
    inverse-CDF sampling.
    """
    if isinstance(output, GaussianOutput):
        eps = rng.standard_normal(output.mean.shape[0])
        raw = output.mean + output.std * eps
        log_prob = float(
            -0.5 * np.sum(((raw - output.mean) / output.std) ** 2)
            - np.sum(np.log(output.std))
            - 0.5 * LOG_2PI * raw.size
        )
        return np.clip(raw, output.low, output.high), log_prob
    if isinstance(output, CategoricalOutput):
        u = rng.random()
        action = int(np.searchsorted(np.cumsum(output.probs), u, side="right"))
        action = min(action, output.probs.size - 1)
        return action, float(np.log(output.probs[action]))
    raise TypeError(f"cannot sample from {type(output).__name__}")


def mean_action(output):
    """Deterministic action: Gaussian mean, or the modal categorical action."""
    if isinstance(output, GaussianOutput):
        return output.mean
    if isinstance(output, CategoricalOutput):
        return int(output.probs.argmax())
    raise TypeError(f"no deterministic action for {type(output).__name__}")


def entropy(output) -> float:
    if isinstance(output, GaussianOutput):
        return float(np.sum(0.5 * (1.0 + LOG_2PI) + np.log(output.std)))
    if isinstance(output, CategoricalOutput):
        p = output.probs
        return float(-np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)))
    raise TypeError(f"no entropy for {type(output).__name__}")


# -- per-sample head derivatives -----------------------------------------------------


def _gaussian_stats(spec, raw_policy, actions):
    mean, std, tanh_u, halfspan, sig = _decode_gaussian(spec, raw_policy)
    z = (actions - mean) / std
    logp = -0.5 * (z**2).sum(axis=-1) - np.log(std).sum(axis=-1) - 0.5 * LOG_2PI * spec.output_dim
    ent = (0.5 * (1.0 + LOG_2PI) + np.log(std)).sum(axis=-1)
    dlogp_du = (z / std) * halfspan * (1.0 - tanh_u**2)
    dlogp_ds = ((z**2 - 1.0) / std) * sig
    dent_ds = sig / std
    return logp, ent, dlogp_du, dlogp_ds, dent_ds


def _categorical_stats(raw_policy, actions):
    p = _softmax(raw_policy)
    shifted = raw_policy - raw_policy.max(axis=-1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    rows = np.arange(raw_policy.shape[0])
    logp = log_p[rows, actions]
    ent = -(p * log_p).sum(axis=-1)
    onehot = np.zeros_like(p)
    onehot[rows, actions] = 1.0
    dlogp = onehot - p
    dent = -p * (log_p + ent[:, None])
    return logp, ent, dlogp, dent


# -- gradient entry points --------------------------------------------------------------


def value_and_grad(spec: NetworkSpec, params: np.ndarray, x: np.ndarray):
    """Value output and its exact gradient with respect to every parameter."""
    x = _check_input(spec, x)
    tensors, inputs, pre, post, raw = _forward_cached(spec, params, x[None, :])
    d_raw = np.zeros_like(raw)
    d_raw[0, 0] = 1.0
    return float(raw[0, 0]), _backward(spec, tensors, inputs, pre, post, d_raw)


def _policy_d_raw(spec, raw, actions, coef_logp, coef_ent):
    """Head derivative of sum_t coef_logp[t] logp_t + coef_ent[t] H_t; returns scalars too."""
    d_raw = np.zeros_like(raw)
    pol = raw[:, spec.policy_slice]
    if spec.policy_kind == "gaussian":
        logp, ent, dlp_du, dlp_ds, dent_ds = _gaussian_stats(spec, pol, actions)
        p = spec.output_dim
        d_raw[:, spec.policy_slice][:, :p] = coef_logp[:, None] * dlp_du
        d_raw[:, spec.policy_slice][:, p:] = coef_logp[:, None] * dlp_ds + coef_ent[:, None] * dent_ds
    else:
        logp, ent, dlogp, dent = _categorical_stats(pol, actions)
        d_raw[:, spec.policy_slice] = coef_logp[:, None] * dlogp + coef_ent[:, None] * dent
    return d_raw, logp, ent


def logprob_and_grad(spec: NetworkSpec, params: np.ndarray, x: np.ndarray, action):
    """log pi(action | x) and its parameter gradient."""
    x = _check_input(spec, x)
    tensors, inputs, pre, post, raw = _forward_cached(spec, params, x[None, :])
    actions = np.asarray([action]) if spec.policy_kind == "categorical" else np.asarray(action)[None, :]
    d_raw, logp, _ = _policy_d_raw(spec, raw, actions, np.ones(1), np.zeros(1))
    return float(logp[0]), _backward(spec, tensors, inputs, pre, post, d_raw)


def entropy_and_grad(spec: NetworkSpec, params: np.ndarray, x: np.ndarray):
    """Policy entropy at x and its parameter gradient."""
    x = _check_input(spec, x)
    tensors, inputs, pre, post, raw = _forward_cached(spec, params, x[None, :])
    if spec.policy_kind == "categorical":
        dummy = np.zeros(1, dtype=int)
    else:
        dummy = np.zeros((1, spec.output_dim))
    d_raw, _, ent = _policy_d_raw(spec, raw, dummy, np.zeros(1), np.ones(1))
    return float(ent[0]), _backward(spec, tensors, inputs, pre, post, d_raw)


def actor_loss_and_grad(
    spec: NetworkSpec,
    params: np.ndarray,
    x: np.ndarray,
    action,
    advantage: float,
    entropy_coef: float,
):
    """Composite actor loss -logpi(a|x) * advantage - c * H and its gradient."""
    x = _check_input(spec, x)
    tensors, inputs, pre, post, raw = _forward_cached(spec, params, x[None, :])
    actions = np.asarray([action]) if spec.policy_kind == "categorical" else np.asarray(action)[None, :]
    d_raw, logp, ent = _policy_d_raw(
        spec, raw, actions, np.array([-advantage]), np.array([-entropy_coef])
    )
    loss = float(-logp[0] * advantage - entropy_coef * ent[0])
    return loss, _backward(spec, tensors, inputs, pre, post, d_raw)


def critic_gradient_batch(
    spec: NetworkSpec, params: np.ndarray, x_batch: np.ndarray, advantages: np.ndarray
) -> np.ndarray:
    """Descent gradient of the frozen-target critic loss over a batch.

    Equals the gradient of 0.5 * mean((v(s_t) - y_t)^2) with y_t frozen at
    v(s_t) + advantage_t, i.e. -mean(advantage_t * grad v(s_t)).
    """
    if not spec.has_value:
        raise ValueError(f"head {spec.head!r} has no value slot")
    x_batch = _check_input(spec, np.atleast_2d(x_batch))
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.shape != (x_batch.shape[0],):
        raise ValueError("advantages must align with the batch")
    tensors, inputs, pre, post, raw = _forward_cached(spec, params, x_batch)
    d_raw = np.zeros_like(raw)
    d_raw[:, 0] = -advantages / advantages.size
    return _backward(spec, tensors, inputs, pre, post, d_raw)


def actor_gradient_batch(
    spec: NetworkSpec,
    params: np.ndarray,
    x_batch: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    entropy_coef: float,
) -> np.ndarray:
    """Descent gradient of mean(-logpi(a_t|s_t) * advantage_t - c * H_t)."""
    x_batch = _check_input(spec, np.atleast_2d(x_batch))
    advantages = np.asarray(advantages, dtype=np.float64)
    n = x_batch.shape[0]
    if advantages.shape != (n,):
        raise ValueError("advantages must align with the batch")
    if spec.policy_kind == "categorical":
        actions = np.asarray(actions, dtype=int)
        if actions.shape != (n,):
            raise ValueError("actions must align with the batch")
    else:
        actions = np.asarray(actions, dtype=np.float64)
        if actions.ndim == 1:
            actions = actions[:, None]
        if actions.shape != (n, spec.output_dim):
            raise ValueError("actions must align with the batch")
    tensors, inputs, pre, post, raw = _forward_cached(spec, params, x_batch)
    d_raw, _, _ = _policy_d_raw(
        spec, raw, actions, -advantages / n, np.full(n, -entropy_coef / n)
    )
    return _backward(spec, tensors, inputs, pre, post, d_raw)


# -- binary serialisation ---------------------------------------------------------------
#
# File layout: 8-byte magic, 32-byte SHA-256 of the layout descriptor, uint64
# count, then count little-endian float64 values.


def layout_hash(spec: NetworkSpec) -> bytes:
    descriptor = repr(
        (
            spec.input_dim, spec.hidden, spec.activation, spec.head, spec.output_dim,
            spec.action_low, spec.action_high, spec.std_floor,
            tuple((n, s) for n, s, _, _ in layout(spec)),
        )
    )
    return hashlib.sha256(descriptor.encode()).digest()


def save_params(path: str | Path, spec: NetworkSpec, params: np.ndarray) -> None:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (param_count(spec),):
        raise ValueError("parameter vector does not match spec layout")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(layout_hash(spec))
        f.write(struct.pack("<Q", params.size))
        f.write(params.astype("<f8").tobytes())


def load_params(path: str | Path, spec: NetworkSpec) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:8] != _MAGIC:
        raise ValueError("bad magic; not a parameter file")
    if blob[8:40] != layout_hash(spec):
        raise ValueError("layout hash mismatch: file was written with a different spec")
    (count,) = struct.unpack("<Q", blob[40:48])
    if count != param_count(spec):
        raise ValueError("parameter count mismatch")
    return np.frombuffer(blob[48:], dtype="<f8", count=count).astype(np.float64)
