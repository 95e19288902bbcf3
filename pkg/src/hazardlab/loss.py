"""Censoring-aware negative log-likelihood for discrete hazards.

For an uncensored subject with event in interval ``e`` the likelihood is
``h[e] * prod_{i<e} (1 - h[i])``; a censored subject contributes
``prod_{i<=e} (1 - h[i])``.  Uncensored terms are weighted by ``alpha``
and censored terms by ``1 - alpha``.  Log arguments are clamped to
``[epsilon, 1]``; the gradient is zero wherever the clamp is active.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedLabelError
from .survival_core import DiscreteLabel


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.5
    epsilon: float = 1e-7

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError("alpha must lie in [0, 1]")
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be > 0")


def _masks(event_interval, censored, k):
    """Per-subject weight masks for log(h) and log(1 - h) terms."""
    e = np.asarray(event_interval, dtype=np.int64).reshape(-1)
    c = np.asarray(censored, dtype=bool).reshape(-1)
    if np.any(~c & (e >= k)):
        raise UnsupportedLabelError("uncensored event beyond the last grid interval")
    if np.any(e < 0) or np.any(e > k):
        raise InvalidInputError("event_interval out of range")
    j = np.arange(k)[None, :]
    on_event = (~c[:, None]) & (j == e[:, None])
    survived = np.where(c[:, None], j <= e[:, None], j < e[:, None])
    return on_event.astype(np.float64), survived.astype(np.float64), c


def _batch_terms(h, event_interval, censored, cfg):
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    k = h.shape[1]
    on_event, survived, c = _masks(event_interval, censored, k)
    if on_event.shape[0] != h.shape[0]:
        raise InvalidInputError("hazard and label counts differ")
    weight = np.where(c, 1.0 - cfg.alpha, cfg.alpha)
    return h, on_event, survived, weight


def nll_batch(h, event_interval, censored, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Per-subject losses for a ``(n, k)`` hazard matrix."""
    h, on_event, survived, weight = _batch_terms(h, event_interval, censored, cfg)
    eps = cfg.epsilon
    log_h = np.log(np.clip(h, eps, 1.0))
    log_1mh = np.log(np.clip(1.0 - h, eps, 1.0))
    ll = (on_event * log_h).sum(axis=1) + (survived * log_1mh).sum(axis=1)
    return -weight * ll


def nll_grad_batch(h, event_interval, censored, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """d(loss_i)/dh for a ``(n, k)`` hazard matrix."""
    h, on_event, survived, weight = _batch_terms(h, event_interval, censored, cfg)
    eps = cfg.epsilon
    inv_h = np.where(h > eps, 1.0 / np.maximum(h, eps), 0.0)
    inv_1mh = np.where(1.0 - h > eps, 1.0 / np.maximum(1.0 - h, eps), 0.0)
    return weight[:, None] * (-on_event * inv_h + survived * inv_1mh)


def _check_single(h, label) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.shape[0] != label.survival_indicator.shape[0]:
        raise InvalidInputError("hazard length does not match the label grid")
    return h


def nll(h, label: DiscreteLabel, cfg: LossConfig = LossConfig()) -> float:
    h = _check_single(h, label)
    return float(nll_batch(h[None], [label.event_interval], [label.censored], cfg)[0])


def nll_gradient(h, label: DiscreteLabel, cfg: LossConfig = LossConfig()) -> np.ndarray:
    h = _check_single(h, label)
    return nll_grad_batch(h[None], [label.event_interval], [label.censored], cfg)[0]


def batch_nll(hazards: Sequence, labels: Sequence[DiscreteLabel], cfg: LossConfig = LossConfig()) -> float:
    """Sum of per-subject losses."""
    if len(hazards) != len(labels):
        raise InvalidInputError("hazards and labels differ in length")
    return float(sum(nll(h, lab, cfg) for h, lab in zip(hazards, labels)))
