"""Shared-trunk policy/value MLP written against numpy.

Three tanh hidden layers feed an action head, a direction head and a
scalar value head. Forward and backward are explicit so that gradients of
the PPO objective can be checked against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

HIDDEN = (512, 512, 512)
HEADS = (9, 11, 1)
MASK_PENALTY = 1e9
CHECKPOINT_MAGIC = b"ARENAPOL"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def param_names(n_hidden: int) -> list[str]:
    names = []
    for i in range(n_hidden):
        names += [f"w{i}", f"b{i}"]
    return names + ["wa", "ba", "wd", "bd", "wv", "bv"]


@dataclass
class PolicyParams:
    input_dim: int
    hidden: tuple[int, ...]
    heads: tuple[int, int, int]
    arrays: dict[str, np.ndarray]

    @property
    def names(self) -> list[str]:
        return param_names(len(self.hidden))

    @property
    def dtype(self):
        return self.arrays["w0"].dtype

    def shapes(self) -> dict[str, tuple[int, ...]]:
        dims = (self.input_dim,) + tuple(self.hidden)
        out: dict[str, tuple[int, ...]] = {}
        for i in range(len(self.hidden)):
            out[f"w{i}"] = (dims[i], dims[i + 1])
            out[f"b{i}"] = (dims[i + 1],)
        last = dims[-1]
        for tag, n in zip("adv", self.heads):
            out[f"w{tag}"] = (last, n)
            out[f"b{tag}"] = (n,)
        return out

    def count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.input_dim, self.hidden, self.heads, {k: v.copy() for k, v in self.arrays.items()})

    def astype(self, dtype) -> "PolicyParams":
        return PolicyParams(self.input_dim, self.hidden, self.heads, {k: v.astype(dtype) for k, v in self.arrays.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([self.arrays[n].ravel() for n in self.names])

    def equal(self, other: "PolicyParams") -> bool:
        return (
            self.input_dim == other.input_dim
            and self.hidden == other.hidden
            and self.heads == other.heads
            and all(np.array_equal(self.arrays[n], other.arrays[n]) for n in self.names)
        )


def closed_form_param_count(input_dim: int, hidden=HIDDEN, heads=HEADS) -> int:
    dims = [input_dim, *hidden]
    n = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(hidden)))
    return n + dims[-1] * sum(heads) + sum(heads)


def init_params(
    input_dim: int,
    seed: int = 0,
    hidden: tuple[int, ...] = HIDDEN,
    heads: tuple[int, int, int] = HEADS,
    dtype=np.float32,
    policy_head_scale: float = 0.01,
) -> PolicyParams:
    """Fan-in scaled uniform init; policy heads start near-uniform."""
    rng = np.random.default_rng(seed)
    p = PolicyParams(input_dim, tuple(hidden), tuple(heads), {})
    for name, shape in p.shapes().items():
        if name.startswith("b"):
            p.arrays[name] = np.zeros(shape, dtype=dtype)
            continue
        bound = 1.0 / np.sqrt(shape[0])
        w = rng.uniform(-bound, bound, size=shape)
        if name in ("wa", "wd"):
            w *= policy_head_scale
        p.arrays[name] = w.astype(dtype)
    return p


def zero_params(input_dim: int, hidden=HIDDEN, heads=HEADS, dtype=np.float32) -> PolicyParams:
    p = PolicyParams(input_dim, tuple(hidden), tuple(heads), {})
    for name, shape in p.shapes().items():
        p.arrays[name] = np.zeros(shape, dtype=dtype)
    return p


# -- forward / backward -----------------------------------------------------


@dataclass
class ForwardCache:
    activations: list[np.ndarray]  # input followed by each hidden output


def forward(params: PolicyParams, obs: np.ndarray, cache: bool = False):
    """Returns (action_logits, direction_logits, value[, cache]).

    ``obs`` may be one vector or a (batch, input_dim) matrix.
    """
    x = np.asarray(obs)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"observation has {x.shape[-1]} values, network expects {params.input_dim}")
    a = params.arrays
    h = x.astype(params.dtype, copy=False)
    acts = [h]
    for i in range(len(params.hidden)):
        h = np.tanh(h @ a[f"w{i}"] + a[f"b{i}"])
        acts.append(h)
    la = h @ a["wa"] + a["ba"]
    ld = h @ a["wd"] + a["bd"]
    v = (h @ a["wv"] + a["bv"])[:, 0]
    if single:
        la, ld, v = la[0], ld[0], v[0]
    if cache:
        return la, ld, v, ForwardCache(acts)
    return la, ld, v


def backward(params: PolicyParams, cache: ForwardCache, d_action: np.ndarray, d_direction: np.ndarray, d_value: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given loss gradients w.r.t. the three head outputs."""
    a = params.arrays
    acts = cache.activations
    n = acts[0].shape[0]
    d_action = np.asarray(d_action, dtype=params.dtype).reshape(n, -1)
    d_direction = np.asarray(d_direction, dtype=params.dtype).reshape(n, -1)
    d_value = np.asarray(d_value, dtype=params.dtype).reshape(n, 1)
    if d_action.shape[1] != params.heads[0] or d_direction.shape[1] != params.heads[1]:
        raise ValueError("head gradient shape does not match the network")
    h = acts[-1]
    grads: dict[str, np.ndarray] = {
        "wa": h.T @ d_action, "ba": d_action.sum(0),
        "wd": h.T @ d_direction, "bd": d_direction.sum(0),
        "wv": h.T @ d_value, "bv": d_value.sum(0),
    }
    dh = d_action @ a["wa"].T + d_direction @ a["wd"].T + d_value @ a["wv"].T
    for i in reversed(range(len(params.hidden))):
        out = acts[i + 1]
        dz = dh * (1.0 - out * out)
        grads[f"w{i}"] = acts[i].T @ dz
        grads[f"b{i}"] = dz.sum(0)
        if i:
            dh = dz @ a[f"w{i}"].T
    return grads


# -- masked categorical distributions ---------------------------------------------


@dataclass
class MaskedDistribution:
    probs: np.ndarray
    logprobs: np.ndarray
    entropy: np.ndarray


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    z = np.where(mask, logits, logits - MASK_PENALTY)
    m = z.max(axis=-1, keepdims=True)
    z = z - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def masked_categorical(logits: np.ndarray, mask: np.ndarray) -> MaskedDistribution:
    """Softmax restricted to ``mask``; works row-wise on batches."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise ValueError("mask must leave at least one entry selectable")
    logp = masked_log_softmax(np.asarray(logits, dtype=np.float64), mask)
    probs = np.where(mask, np.exp(logp), 0.0)
    entropy = -(probs * np.where(mask, logp, 0.0)).sum(axis=-1)
    return MaskedDistribution(probs, logp, entropy)


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling; zero-probability entries can never be drawn."""
    probs = np.atleast_2d(probs)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return (cdf <= u[:, None]).sum(axis=-1)


def sample_and_logprob(action_dist: MaskedDistribution, direction_dist: MaskedDistribution, rng: np.random.Generator):
    """Sample both branches; returns (action idx, direction idx, joint log-prob) arrays."""
    ai = sample_index(action_dist.probs, rng)
    di = sample_index(direction_dist.probs, rng)
    la = np.atleast_2d(action_dist.logprobs)
    ld = np.atleast_2d(direction_dist.logprobs)
    rows = np.arange(ai.shape[0])
    return ai, di, la[rows, ai] + ld[rows, di]


# -- optimiser --------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: PolicyParams, learning_rate: float = 3e-4, **kw) -> "AdamState":
        m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        v = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        return cls(m, v, learning_rate=learning_rate, **kw)


def adam_step(params: PolicyParams, grads: dict[str, np.ndarray], opt: AdamState) -> None:
    """In-place bias-corrected Adam update of ``params`` and ``opt``."""
    opt.step += 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1 ** opt.step
    c2 = 1.0 - b2 ** opt.step
    lr = opt.learning_rate
    for name, g in grads.items():
        m = opt.m[name]
        v = opt.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        params.arrays[name] -= (lr * (m / c1) / (np.sqrt(v / c2) + opt.epsilon)).astype(params.dtype)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: Optional[float]) -> float:
    total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())))
    if max_norm is not None and total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


# -- checkpoint file ----------------------------------------------------------------
#
# little endian: magic[8] | u32 version | u32 input_dim | u32 n_hidden |
# u32 hidden[n_hidden] | u32 heads[3] | float32 arrays in param_names order


def save_checkpoint(params: PolicyParams, path) -> None:
    path = Path(path)
    header = CHECKPOINT_MAGIC + struct.pack(
        f"<III{len(params.hidden)}I3I",
        CHECKPOINT_VERSION,
        params.input_dim,
        len(params.hidden),
        *params.hidden,
        *params.heads,
    )
    body = b"".join(np.ascontiguousarray(params.arrays[n], dtype="<f4").tobytes() for n in params.names)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(header + body)
    tmp.replace(path)


def load_checkpoint(path, expected_input_dim: Optional[int] = None) -> PolicyParams:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError("magic: not a policy checkpoint")
    off = 8
    try:
        version, input_dim, n_hidden = struct.unpack_from("<III", data, off)
        off += 12
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"version: unsupported {version}")
        hidden = struct.unpack_from(f"<{n_hidden}I", data, off)
        off += 4 * n_hidden
        heads = struct.unpack_from("<3I", data, off)
        off += 12
    except struct.error as exc:
        raise CheckpointError(f"header: truncated ({exc})") from None
    if expected_input_dim is not None and input_dim != expected_input_dim:
        raise CheckpointError(f"input_dim: checkpoint has {input_dim}, expected {expected_input_dim}")
    p = PolicyParams(input_dim, tuple(hidden), tuple(heads), {})
    for name, shape in p.shapes().items():
        n = int(np.prod(shape))
        chunk = data[off : off + 4 * n]
        if len(chunk) != 4 * n:
            raise CheckpointError(f"{name}: truncated parameter data")
        p.arrays[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float32)
        off += 4 * n
    if off != len(data):
        raise CheckpointError("body: trailing bytes after parameters")
    return p
