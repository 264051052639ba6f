"""
Distributional RL machinery: quantile sampling, Wang risk distortion,
distributional TD errors, the quantile-Huber loss and the time-difference
likelihood (TDL) learning-rate control.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import ndtr, ndtri

from lib import neural
from lib.neural import Params

TAU_EPS = 1e-6


@dataclass(frozen=True)
class QuantileBatch:
    """Raw quantile fractions and their risk-distorted images, both (B, Q)."""

    raw: np.ndarray
    distorted: np.ndarray


@dataclass(frozen=True)
class RiskSchedule:
    alpha0: float = 0.5
    decay: float = 5e-4
    floor: float = 0.0


@dataclass(frozen=True)
class TdlParams:
    beta: float = 0.1
    base_learning_rate: float = 5e-4
    sigma_min: float = 1e-3


def sample_taus(rng: np.random.Generator, batch: int, quantiles: int) -> np.ndarray:
    """i.i.d. uniform fractions in (eps, 1 - eps), shape (B, Q)."""
    if batch < 1 or quantiles < 1:
        raise ValueError("Batch and quantile sizes must be positive")
    return rng.uniform(TAU_EPS, 1.0 - TAU_EPS, size=(batch, quantiles))


def wang_transform(taus: np.ndarray, alpha: float) -> np.ndarray:
    """Phi(Phi^-1(tau) + alpha); alpha > 0 moves mass toward high returns."""
    return ndtr(ndtri(np.asarray(taus, dtype=float)) + alpha)


def distorted_batch(rng: np.random.Generator, batch: int, quantiles: int, alpha: float) -> QuantileBatch:
    raw = sample_taus(rng, batch, quantiles)
    return QuantileBatch(raw=raw, distorted=wang_transform(raw, alpha))


def risk_alpha(step: int, schedule: RiskSchedule) -> float:
    """Linearly decayed risk value, floored."""
    if step < 0:
        raise ValueError("Training step must be non-negative")
    return max(schedule.floor, schedule.alpha0 - schedule.decay * step)


def td_error_matrix(
    z_pred: np.ndarray,
    reward: float | np.ndarray,
    gamma: float,
    z_next: np.ndarray,
    done: bool | np.ndarray,
) -> np.ndarray:
    """
    delta[i, j] = z_pred[j] - (r + gamma * z_next[i]), bootstrap dropped when done.

    Accepts single samples (Q',) / (Q,) or batches (B, Q') / (B, Q), returning
    (Q, Q') or (B, Q, Q').
    """
    z_pred = np.asarray(z_pred, dtype=float)
    z_next = np.asarray(z_next, dtype=float)
    not_done = 1.0 - np.asarray(done, dtype=float)
    reward = np.asarray(reward, dtype=float)
    if z_pred.ndim == 1:
        target = reward + gamma * not_done * z_next
        return z_pred[None, :] - target[:, None]
    target = reward[:, None] + gamma * not_done[:, None] * z_next
    return z_pred[:, None, :] - target[:, :, None]


def _quantile_huber_terms(
    delta: np.ndarray, taus_prime: np.ndarray, huber_k: float
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Loss, dLoss/ddelta and |delta|, for batched delta (B, Q, Q')."""
    batch, target_quantiles = delta.shape[0], delta.shape[1]
    scale = huber_k * target_quantiles * batch

    abs_delta = np.abs(delta)
    asymmetry = np.where(delta <= 0, 1.0 - taus_prime, taus_prime)
    quadratic = abs_delta <= huber_k

    clipped = np.clip(delta, -huber_k, huber_k)
    huber = np.where(quadratic, 0.5 * delta * delta, huber_k * (abs_delta - 0.5 * huber_k))
    loss = float(np.vdot(asymmetry, huber) / scale)

    clipped *= asymmetry
    clipped /= scale
    return loss, clipped, abs_delta


def quantile_huber_loss(delta: np.ndarray, taus_prime: np.ndarray, huber_k: float = 1.0) -> float:
    """
    (1/Q) sum_i sum_j |tau'_j - 1{delta_ij <= 0}| * H_k(delta_ij) / k,
    averaged over the batch. `taus_prime` aligns with the last axis of delta.
    """
    loss, _ = quantile_huber_loss_and_grad(delta, taus_prime, huber_k)
    return loss


def quantile_huber_loss_and_grad(
    delta: np.ndarray, taus_prime: np.ndarray, huber_k: float = 1.0
) -> Tuple[float, np.ndarray]:
    """Loss value and its derivative w.r.t. every delta entry."""
    delta = np.asarray(delta, dtype=float)
    squeeze = delta.ndim == 2
    if squeeze:
        delta = delta[None]
    taus_prime = np.asarray(taus_prime, dtype=float).reshape(delta.shape[0], 1, delta.shape[2])
    loss, grad, _ = _quantile_huber_terms(delta, taus_prime, huber_k)
    if squeeze:
        grad = grad[0]
    return loss, grad


def tdl_likelihood(pred_samples: np.ndarray, target_samples: np.ndarray, sigma_min: float = 1e-3) -> float:
    """
    Likelihood that both sample sets come from one distribution:
    exp(-mean_j min_i |target_j - pred_i| / sigma), sigma = max(std(pred), sigma_min).
    """
    pred = np.asarray(pred_samples, dtype=float).ravel()
    target = np.asarray(target_samples, dtype=float).ravel()
    if pred.size == 0 or target.size == 0:
        raise ValueError("TDL needs non-empty sample sets")
    sigma = max(float(np.std(pred)), sigma_min)
    nearest = np.abs(target[:, None] - pred[None, :]).min(axis=1)
    return float(np.exp(-nearest.mean() / sigma))


def modulate_lr(likelihood: float, delta_nonpositive: bool, params: TdlParams) -> float:
    """Damp the step by max(beta, L_S) when the TD error is non-positive."""
    if delta_nonpositive:
        return max(params.beta, likelihood) * params.base_learning_rate
    return params.base_learning_rate


@dataclass(frozen=True)
class LossReport:
    loss: float
    likelihood: float
    mean_td_error: float


def iqn_loss_and_gradients(
    params: Params,
    target: Params,
    states: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    next_states: np.ndarray,
    dones: np.ndarray,
    taus_target: np.ndarray,
    taus_pred: np.ndarray,
    gamma: float,
    huber_k: float,
    sigma_min: float = 1e-3,
) -> Tuple[LossReport, Params]:
    """
    IQN loss of a batch and its gradient w.r.t. the online parameters.

    The greedy next action is the argmax of the target network's mean over
    quantiles; target samples are treated as constants. `taus_target` and
    `taus_pred` are the already distorted fractions (B, Q) and (B, Q'). Passing
    the same array for both embeds it once.
    """
    batch = np.arange(states.shape[0])
    hidden_dim = neural.hidden_dim_of(params)

    target_embedding = neural.cosine_embed(taus_target, hidden_dim)
    pred_embedding = target_embedding if taus_pred is taus_target else None

    next_dist = neural.forward(next_states, taus_target, target, target_embedding)
    greedy = next_dist.mean(axis=1).argmax(axis=1)
    z_next = next_dist[batch, :, greedy]

    dist, cache = neural.forward_with_cache(states, taus_pred, params, pred_embedding)
    z_pred = dist[batch, :, actions]

    delta = td_error_matrix(z_pred, rewards, gamma, z_next, dones)
    taus_prime = np.asarray(taus_pred, dtype=float)[:, None, :]
    loss, d_delta, abs_delta = _quantile_huber_terms(delta, taus_prime, huber_k)

    d_dist = np.zeros_like(dist)
    d_dist[batch, :, actions] = d_delta.sum(axis=1)
    grads = neural.backward(d_dist, cache, params)

    # Same value as tdl_likelihood(z_pred[b], targets[b]) per batch row.
    sigma = np.maximum(z_pred.std(axis=1), sigma_min)
    nearest = abs_delta.min(axis=2).mean(axis=1)
    likelihood = float(np.mean(np.exp(-nearest / sigma)))
    return LossReport(loss=loss, likelihood=likelihood, mean_td_error=float(delta.mean())), grads


__all__ = [
    "TAU_EPS",
    "QuantileBatch",
    "RiskSchedule",
    "TdlParams",
    "LossReport",
    "sample_taus",
    "wang_transform",
    "distorted_batch",
    "risk_alpha",
    "td_error_matrix",
    "quantile_huber_loss",
    "quantile_huber_loss_and_grad",
    "tdl_likelihood",
    "modulate_lr",
    "iqn_loss_and_gradients",
]
