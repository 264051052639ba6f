"""
Return-distribution approximator with an exact backward pass.

    states (B, T, D) --LSTM--> h (B, D_h)
    distorted taus (B, Q) --cos(pi * tau * i)--> phi (B, Q, D_h)   [optional learned layer]
    z = phi * h                                   (B, Q, D_h)
    V = f_v(z) (B, Q, 1),  A = f_a(z) (B, Q, |A|)
    Z = V + A - mean_a A                          (B, Q, |A|)

f_v and f_a are one rectified hidden layer of width D_h followed by a linear
output; both heads run as one fused layer pair. Parameters are a flat dict of
named float64 arrays so the optimizer, target sync and checkpoints stay
generic. Gradients are computed layer by layer in reverse (LSTM through time
included); `gradient_check` compares them against central finite
differences.
"""

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from lib.errors import ArtifactIOError, ContractViolationError, NumericalFailureError

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]

CHECKPOINT_FORMAT_VERSION = 1
_HEADER_KEY = "__header__"


def init_params(
    input_dim: int,
    num_actions: int,
    hidden_dim: int,
    rng: np.random.Generator,
    embedding_projection: bool = False,
) -> Params:
    """Uniform +-sqrt(1/fan_in) weights, zero biases, forget-gate bias 1."""

    def uniform(fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
        bound = np.sqrt(1.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape)

    h = hidden_dim
    params: Params = {
        "lstm_W": uniform(input_dim, (input_dim, 4 * h)),
        "lstm_U": uniform(h, (h, 4 * h)),
        "lstm_b": np.zeros(4 * h),
    }
    params["lstm_b"][h : 2 * h] = 1.0
    if embedding_projection:
        params["embed_W"] = uniform(h, (h, h))
        params["embed_b"] = np.zeros(h)
    params.update(
        {
            "value_W1": uniform(h, (h, h)),
            "value_b1": np.zeros(h),
            "value_W2": uniform(h, (h, 1)),
            "value_b2": np.zeros(1),
            "adv_W1": uniform(h, (h, h)),
            "adv_b1": np.zeros(h),
            "adv_W2": uniform(h, (h, num_actions)),
            "adv_b2": np.zeros(num_actions),
        }
    )
    return params


def copy_params(params: Params) -> Params:
    return {name: value.copy() for name, value in params.items()}


def zeros_like(params: Params) -> Params:
    return {name: np.zeros_like(value) for name, value in params.items()}


def hidden_dim_of(params: Params) -> int:
    return params["lstm_U"].shape[0]


def _check_finite(layer: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NumericalFailureError(layer)


# ---------- recurrent encoder ----------


@dataclass
class _LstmStep:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray


def _lstm_forward(states: np.ndarray, params: Params) -> Tuple[np.ndarray, List[_LstmStep]]:
    W, U, b = params["lstm_W"], params["lstm_U"], params["lstm_b"]
    if states.ndim != 3 or states.shape[2] != W.shape[0]:
        raise ContractViolationError(
            f"States of shape {states.shape} do not match encoder input width {W.shape[0]}"
        )
    batch, steps, _ = states.shape
    hd = U.shape[0]
    h = np.zeros((batch, hd))
    c = np.zeros((batch, hd))
    trace: List[_LstmStep] = []
    for t in range(steps):
        x = states[:, t, :]
        pre = x @ W + h @ U + b
        i = expit(pre[:, :hd])
        f = expit(pre[:, hd : 2 * hd])
        g = np.tanh(pre[:, 2 * hd : 3 * hd])
        o = expit(pre[:, 3 * hd :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        trace.append(_LstmStep(x, h, c, i, f, g, o, tanh_c))
        h = o * tanh_c
        c = c_new
    _check_finite("lstm", h)
    return h, trace


def _lstm_backward(dh: np.ndarray, trace: List[_LstmStep], params: Params, grads: Params) -> None:
    U = params["lstm_U"]
    dc = np.zeros_like(dh)
    for step in reversed(trace):
        do = dh * step.tanh_c
        dc = dc + dh * step.o * (1.0 - step.tanh_c**2)
        di = dc * step.g
        dg = dc * step.i
        df = dc * step.c_prev
        dpre = np.concatenate(
            [
                di * step.i * (1.0 - step.i),
                df * step.f * (1.0 - step.f),
                dg * (1.0 - step.g**2),
                do * step.o * (1.0 - step.o),
            ],
            axis=1,
        )
        grads["lstm_W"] += step.x.T @ dpre
        grads["lstm_U"] += step.h_prev.T @ dpre
        grads["lstm_b"] += dpre.sum(axis=0)
        dh = dpre @ U.T
        dc = dc * step.f


def lstm_encode(states: np.ndarray, params: Params) -> np.ndarray:
    """Final hidden vector (B, D_h) after reading the T rows oldest first."""
    h, _ = _lstm_forward(np.asarray(states, dtype=float), params)
    return h


# ---------- quantile embedding and heads ----------


@lru_cache(maxsize=8)
def _frequencies(hidden_dim: int) -> np.ndarray:
    omega = np.pi * np.arange(hidden_dim, dtype=float)
    omega.setflags(write=False)
    return omega


def cosine_embed(distorted_taus: np.ndarray, hidden_dim: int) -> np.ndarray:
    """cos(pi * tau * i) for i = 0..D_h-1, shape (B, Q, D_h)."""
    taus = np.asarray(distorted_taus, dtype=float)
    phi = np.multiply(taus[..., None], _frequencies(hidden_dim))
    return np.cos(phi, out=phi)


def _fused_heads(params: Params) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Value and advantage heads as one layer pair.

    The first layers sit side by side, (D_h, 2 D_h); the output layer is block
    diagonal, (2 D_h, 1 + |A|), column 0 being V.
    """
    h = params["value_W1"].shape[0]
    num_actions = params["adv_W2"].shape[1]
    w1 = np.concatenate([params["value_W1"], params["adv_W1"]], axis=1)
    b1 = np.concatenate([params["value_b1"], params["adv_b1"]])
    w2 = np.zeros((2 * h, 1 + num_actions))
    w2[:h, :1] = params["value_W2"]
    w2[h:, 1:] = params["adv_W2"]
    b2 = np.concatenate([params["value_b2"], params["adv_b2"]])
    return w1, b1, w2, b2


@dataclass
class ForwardCache:
    """Intermediates kept for the backward pass."""

    trace: List[_LstmStep]
    hidden: np.ndarray
    raw_phi: np.ndarray
    phi: np.ndarray
    embed_mask: Optional[np.ndarray]
    z: np.ndarray
    head_hidden: np.ndarray
    head_out: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.head_out[..., :1]

    @property
    def advantage(self) -> np.ndarray:
        return self.head_out[..., 1:]


def forward_with_cache(
    states: np.ndarray,
    distorted_taus: np.ndarray,
    params: Params,
    embedding: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """
    Return distribution Z (B, Q, |A|) and the cache for `backward`.

    `embedding` is `cosine_embed(distorted_taus, D_h)` when the caller already
    holds it for this quantile set.
    """
    states = np.asarray(states, dtype=float)
    taus = np.asarray(distorted_taus, dtype=float)
    if taus.ndim != 2 or taus.shape[0] != states.shape[0]:
        raise ContractViolationError(
            f"Quantile batch {taus.shape} does not match state batch {states.shape[0]}"
        )
    hidden, trace = _lstm_forward(states, params)
    hd = hidden.shape[1]

    raw_phi = cosine_embed(taus, hd) if embedding is None else embedding
    if raw_phi.shape != (*taus.shape, hd):
        raise ContractViolationError(f"Embedding {raw_phi.shape} does not match quantiles {taus.shape}")
    phi = raw_phi
    embed_mask = None
    if "embed_W" in params:
        phi = raw_phi @ params["embed_W"] + params["embed_b"]
        embed_mask = phi > 0
        phi *= embed_mask
        _check_finite("embedding", phi)

    z = phi * hidden[:, None, :]

    w1, b1, w2, b2 = _fused_heads(params)
    head_hidden = z @ w1
    head_hidden += b1
    np.maximum(head_hidden, 0.0, out=head_hidden)
    head_out = head_hidden @ w2 + b2
    _check_finite("value_head", head_out[..., :1])
    _check_finite("advantage_head", head_out[..., 1:])

    advantage = head_out[..., 1:]
    dist = head_out[..., :1] + (advantage - advantage.mean(axis=-1, keepdims=True))
    cache = ForwardCache(
        trace=trace,
        hidden=hidden,
        raw_phi=raw_phi,
        phi=phi,
        embed_mask=embed_mask,
        z=z,
        head_hidden=head_hidden,
        head_out=head_out,
        w1=w1,
        w2=w2,
    )
    return dist, cache


def forward(
    states: np.ndarray,
    distorted_taus: np.ndarray,
    params: Params,
    embedding: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Return distribution Z(s, a; tau), shape (B, Q, |A|)."""
    dist, _ = forward_with_cache(states, distorted_taus, params, embedding)
    return dist


def q_values(states: np.ndarray, distorted_taus: np.ndarray, params: Params) -> np.ndarray:
    """Expected returns (B, |A|): Z averaged over the quantile dimension."""
    return forward(states, distorted_taus, params).mean(axis=1)


def _flat(array: np.ndarray) -> np.ndarray:
    return array.reshape(-1, array.shape[-1])


def backward(dist_grad: np.ndarray, cache: ForwardCache, params: Params) -> Params:
    """Gradients of a scalar loss w.r.t. every parameter, given dLoss/dZ."""
    grads = zeros_like(params)
    h = params["value_W1"].shape[0]

    d_out = np.concatenate(
        [dist_grad.sum(axis=-1, keepdims=True), dist_grad - dist_grad.mean(axis=-1, keepdims=True)],
        axis=-1,
    )
    flat_out = _flat(d_out)
    grad_w2 = _flat(cache.head_hidden).T @ flat_out
    grad_b2 = flat_out.sum(axis=0)
    grads["value_W2"] += grad_w2[:h, :1]
    grads["adv_W2"] += grad_w2[h:, 1:]
    grads["value_b2"] += grad_b2[:1]
    grads["adv_b2"] += grad_b2[1:]

    d_pre = d_out @ cache.w2.T
    d_pre *= cache.head_hidden > 0
    flat_pre = _flat(d_pre)
    grad_w1 = _flat(cache.z).T @ flat_pre
    grad_b1 = flat_pre.sum(axis=0)
    grads["value_W1"] += grad_w1[:, :h]
    grads["adv_W1"] += grad_w1[:, h:]
    grads["value_b1"] += grad_b1[:h]
    grads["adv_b1"] += grad_b1[h:]
    dz = d_pre @ cache.w1.T

    d_hidden = np.einsum("bqh,bqh->bh", dz, cache.phi)
    if cache.embed_mask is not None:
        d_embed_pre = dz * cache.hidden[:, None, :]
        d_embed_pre *= cache.embed_mask
        flat_embed = _flat(d_embed_pre)
        grads["embed_W"] += _flat(cache.raw_phi).T @ flat_embed
        grads["embed_b"] += flat_embed.sum(axis=0)

    _lstm_backward(d_hidden, cache.trace, params, grads)
    return grads


# ---------- optimization ----------


def global_norm(grads: Params) -> float:
    return float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))


def apply_gradients(
    params: Params,
    grads: Params,
    learning_rate: float,
    clip_norm: Optional[float] = None,
) -> Params:
    """
    One plain gradient-descent step, in place. With `clip_norm`, gradients
    whose global norm exceeds it are rescaled to that norm first.
    """
    if learning_rate <= 0:
        raise ValueError(f"Learning rate must be positive, got {learning_rate}")
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise NumericalFailureError("gradients")
    scale = 1.0
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm
    for name, grad in grads.items():
        params[name] -= learning_rate * scale * grad
    return params


def sync_target(params: Params, target: Params) -> Params:
    """Overwrite the target parameters with a copy of the online ones."""
    target.clear()
    target.update(copy_params(params))
    return target


def gradient_check(
    params: Params,
    loss_fn: Callable[[Params], Tuple[float, Params]],
    epsilon: float = 1e-5,
    samples: int = 200,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Maximum relative error between analytic and central-difference gradients
    over a random subsample of parameter entries.
    """
    rng = rng or np.random.default_rng(0)
    _, analytic = loss_fn(params)
    entries = [(name, idx) for name, value in params.items() for idx in np.ndindex(value.shape)]
    chosen = rng.choice(len(entries), size=min(samples, len(entries)), replace=False)
    worst = 0.0
    for pick in chosen:
        name, idx = entries[pick]
        original = params[name][idx]
        params[name][idx] = original + epsilon
        plus, _ = loss_fn(params)
        params[name][idx] = original - epsilon
        minus, _ = loss_fn(params)
        params[name][idx] = original
        numeric = (plus - minus) / (2.0 * epsilon)
        exact = analytic[name][idx]
        denom = max(abs(numeric) + abs(exact), 1e-6)
        worst = max(worst, abs(numeric - exact) / denom)
    return worst


# ---------- checkpoints ----------


def save_checkpoint(params: Params, path: Path, header: Optional[dict] = None) -> Path:
    """
    Write named tensors to an .npz file with a JSON header holding the format
    version, every tensor shape and caller metadata.
    """
    path = Path(path)
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "shapes": {name: list(value.shape) for name, value in params.items()},
        **(header or {}),
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as handle:
            np.savez(handle, **params, **{_HEADER_KEY: np.array(json.dumps(meta))})
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write checkpoint: {e}") from e
    logger.debug("Checkpoint written to %s", path)
    return path


def load_checkpoint(path: Path) -> Tuple[Params, dict]:
    """Read a checkpoint written by `save_checkpoint`."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data[_HEADER_KEY]))
            params = {name: data[name].copy() for name in data.files if name != _HEADER_KEY}
    except (OSError, KeyError, ValueError) as e:
        raise ArtifactIOError(path, f"cannot read checkpoint: {e}") from e
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ArtifactIOError(path, f"unsupported format version {header.get('format_version')}")
    for name, shape in header["shapes"].items():
        if list(params[name].shape) != shape:
            raise ArtifactIOError(path, f"tensor {name} has shape {params[name].shape}, expected {shape}")
    return params, header


__all__ = [
    "Params",
    "ForwardCache",
    "init_params",
    "copy_params",
    "hidden_dim_of",
    "lstm_encode",
    "cosine_embed",
    "forward",
    "forward_with_cache",
    "q_values",
    "backward",
    "apply_gradients",
    "global_norm",
    "sync_target",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
]
