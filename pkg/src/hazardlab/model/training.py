"""Training and prediction drivers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import InsufficientDataError, InvalidInputError, NumericError
from ..loss import LossConfig, nll_batch, nll_grad_batch
from ..survival_core import SubjectRecord, TimeGrid, discretize_label, risk_score, survival_from_hazard
from .network import (
    ModelConfig,
    _sigmoid,
    backward_batch,
    encode_instances,
    encoder_backward,
    forward_batch,
    init_params,
    pad_bags,
)
from .optim import OptimizerState, nadam_step

log = logging.getLogger(__name__)

BINARY_HORIZON_MONTHS = 24.0


# ---------------------------------------------------------------------------
# 2-year relapse classifier
# ---------------------------------------------------------------------------


@dataclass
class BinaryRelapseModel:
    """Logistic regression on mean-pooled bag features; ``weights[-1]`` is the bias."""

    weights: np.ndarray
    horizon: float = BINARY_HORIZON_MONTHS
    iterations: int = 0

    def predict_proba(self, bags) -> np.ndarray:
        F = np.stack([np.asarray(b, dtype=np.float64).mean(axis=0) for b in bags])
        if F.shape[1] + 1 != self.weights.shape[0]:
            raise InvalidInputError("feature dimension does not match the binary model")
        return _sigmoid(F @ self.weights[:-1] + self.weights[-1])


def binary_targets(cohort: Sequence[SubjectRecord], horizon: float = BINARY_HORIZON_MONTHS):
    """Labels for "event before ``horizon``" and a mask of subjects whose label is knowable."""
    t = np.array([s.observed_time for s in cohort])
    c = np.array([s.censored for s in cohort])
    y = (~c) & (t < horizon)
    known = y | (t >= horizon)
    return y.astype(np.float64), known


def train_binary_model(cohort: Sequence[SubjectRecord], grid: Optional[TimeGrid] = None,
                       horizon: float = BINARY_HORIZON_MONTHS, tol: float = 1e-6,
                       max_iter: int = 10_000) -> BinaryRelapseModel:
    """Full-batch gradient descent on the logistic log-loss.

    Subjects censored before ``horizon`` are dropped since their label is
    unknown.  The step size is the inverse Lipschitz constant of the
    mean log-loss gradient.
    """
    if not cohort:
        raise InsufficientDataError("empty cohort")
    y, known = binary_targets(cohort, horizon)
    if not known.any():
        raise InsufficientDataError("every subject is censored before the binary horizon")
    F = np.stack([s.bag.mean(axis=0) for s, ok in zip(cohort, known) if ok])
    y = y[known]
    A = np.hstack([F, np.ones((F.shape[0], 1))])
    n = A.shape[0]
    lipschitz = 0.25 * np.linalg.eigvalsh(A.T @ A / n).max()
    step = 1.0 / lipschitz
    w = np.zeros(A.shape[1])
    it = 0
    for it in range(1, max_iter + 1):
        grad = A.T @ (_sigmoid(A @ w) - y) / n
        if np.max(np.abs(grad)) < tol:
            break
        w = w - step * grad
    return BinaryRelapseModel(w, horizon, it)


# ---------------------------------------------------------------------------
# Survival network training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-2
    reduction: str = "mean"
    pretrain_epochs: int = 5
    pretrain_learning_rate: float = 1e-2
    pretrain_batch_size: int = 256

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidInputError("epochs >= 0 and batch_size >= 1 required")
        if self.reduction not in ("mean", "sum"):
            raise InvalidInputError("reduction must be 'mean' or 'sum'")


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    initial_val_loss: float = float("nan")
    binary_model: Optional[BinaryRelapseModel] = None
    pretrain_loss: list = field(default_factory=list)


@dataclass
class PreparedCohort:
    X: np.ndarray
    mask: np.ndarray
    event_interval: np.ndarray
    censored: np.ndarray
    binary: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    def take(self, idx):
        return PreparedCohort(self.X[idx], self.mask[idx], self.event_interval[idx], self.censored[idx], self.binary[idx])


def prepare(cohort: Sequence[SubjectRecord], grid: TimeGrid, cfg: ModelConfig,
            binary_model: Optional[BinaryRelapseModel] = None) -> PreparedCohort:
    if not cohort:
        raise InsufficientDataError("empty cohort")
    if grid.interval_count != cfg.interval_count:
        raise InvalidInputError("grid length differs from the model's interval_count")
    X, mask = pad_bags([s.bag for s in cohort], cfg.feature_dim)
    labels = [discretize_label(s.observed_time, s.censored, grid) for s in cohort]
    ev = np.array([lab.event_interval for lab in labels], dtype=np.int64)
    c = np.array([lab.censored for lab in labels], dtype=bool)
    if cfg.use_binary_feature:
        if binary_model is None:
            raise InvalidInputError("use_binary_feature requires a binary relapse model")
        b = binary_model.predict_proba([s.bag for s in cohort])
    else:
        b = np.zeros(len(cohort))
    return PreparedCohort(X, mask, ev, c, b)


def evaluate_loss(data: PreparedCohort, params, cfg: ModelConfig, loss_cfg: LossConfig, chunk: int = 256) -> float:
    """Mean per-subject loss over a prepared cohort."""
    total = 0.0
    for start in range(0, len(data), chunk):
        part = data.take(slice(start, start + chunk))
        h, _, _ = forward_batch(part.X, part.mask, part.binary, params, cfg, keep_cache=False)
        total += nll_batch(h, part.event_interval, part.censored, loss_cfg).sum()
    return float(total / len(data))


def pretrain_encoder(params: dict, cohort: Sequence[SubjectRecord], cfg: ModelConfig, tcfg: TrainConfig):
    """Warm-start the instance encoder on instance-level malignancy labels.

    A throwaway logistic head on the encoder output is fitted jointly with
    the encoder; only the encoder weights are kept.
    """
    inst = [(s.bag, s.instance_labels) for s in cohort if s.instance_labels is not None]
    if not inst:
        raise InsufficientDataError("encoder pretraining needs instance labels")
    X = np.concatenate([b for b, _ in inst])
    y = np.concatenate([lab for _, lab in inst]).astype(np.float64)
    rng = np.random.default_rng([cfg.seed, 1])
    e = cfg.embed_dim
    work = {n: params[n] for n in ("enc_W1", "enc_b1", "enc_W2", "enc_b2")}
    work["head_w"] = rng.uniform(-np.sqrt(6 / (e + 1)), np.sqrt(6 / (e + 1)), e)
    work["head_b"] = np.zeros(())
    state = OptimizerState(learning_rate=tcfg.pretrain_learning_rate)
    losses = []
    for _ in range(tcfg.pretrain_epochs):
        order = rng.permutation(X.shape[0])
        epoch_loss = 0.0
        for start in range(0, len(order), tcfg.pretrain_batch_size):
            idx = order[start:start + tcfg.pretrain_batch_size]
            xb, yb = X[idx], y[idx]
            H1, Z0 = encode_instances(xb, work)
            p = _sigmoid(Z0 @ work["head_w"] + work["head_b"])
            pc = np.clip(p, 1e-12, 1 - 1e-12)
            epoch_loss += float(-(yb * np.log(pc) + (1 - yb) * np.log(1 - pc)).sum())
            dlogit = (p - yb) / len(idx)
            grads = encoder_backward(xb, H1, Z0, np.outer(dlogit, work["head_w"]), work)
            grads["head_w"] = Z0.T @ dlogit
            grads["head_b"] = np.asarray(dlogit.sum())
            work, state = nadam_step(work, grads, state)
        losses.append(epoch_loss / X.shape[0])
    out = dict(params)
    for n in ("enc_W1", "enc_b1", "enc_W2", "enc_b2"):
        out[n] = work[n]
    return out, losses


def train(cohort_train: Sequence[SubjectRecord], cohort_val: Sequence[SubjectRecord], grid: TimeGrid,
          cfg: ModelConfig, loss_cfg: LossConfig = LossConfig(), tcfg: TrainConfig = TrainConfig(),
          binary_model: Optional[BinaryRelapseModel] = None,
          pretrain_cohort: Optional[Sequence[SubjectRecord]] = None):
    """Mini-batch Nadam training with best-validation-loss snapshot selection.

    Returns ``(params, TrainingLog)``.  Data order is shuffled by a
    generator seeded from ``cfg.seed``, so two calls with equal inputs give
    identical logs.
    """
    if not cohort_train or not cohort_val:
        raise InsufficientDataError("training and validation cohorts must be non-empty")
    if any(s.exclude_from_training for s in cohort_train):
        raise InvalidInputError("cohort contains subjects flagged as excluded from training")
    tlog = TrainingLog()
    if cfg.use_binary_feature and binary_model is None:
        binary_model = train_binary_model(cohort_train, grid)
    tlog.binary_model = binary_model if cfg.use_binary_feature else None

    params = init_params(cfg)
    if cfg.pretrain_encoder and tcfg.epochs > 0:
        source = pretrain_cohort if pretrain_cohort is not None else cohort_train
        params, tlog.pretrain_loss = pretrain_encoder(params, source, cfg, tcfg)

    train_data = prepare(cohort_train, grid, cfg, tlog.binary_model)
    val_data = prepare(cohort_val, grid, cfg, tlog.binary_model)

    best = params
    tlog.initial_val_loss = tlog.best_val_loss = evaluate_loss(val_data, params, cfg, loss_cfg)
    state = OptimizerState(learning_rate=tcfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 2])
    n = len(train_data)
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, tcfg.batch_size):
            batch = train_data.take(order[start:start + tcfg.batch_size])
            h, _, cache = forward_batch(batch.X, batch.mask, batch.binary, params, cfg)
            losses = nll_batch(h, batch.event_interval, batch.censored, loss_cfg)
            if not np.all(np.isfinite(losses)):
                raise NumericError(f"non-finite training loss in epoch {epoch}", snapshot=params)
            running += losses.sum()
            dh = nll_grad_batch(h, batch.event_interval, batch.censored, loss_cfg)
            if tcfg.reduction == "mean":
                dh = dh / len(losses)
            grads = backward_batch(cache, dh, params, cfg)
            try:
                params, state = nadam_step(params, grads, state)
            except NumericError as exc:
                raise NumericError(str(exc), snapshot=best) from None
        try:
            val_loss = evaluate_loss(val_data, params, cfg, loss_cfg)
        except NumericError as exc:
            raise NumericError(str(exc), snapshot=best) from None
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss in epoch {epoch}", snapshot=best)
        tlog.rows.append({"epoch": epoch, "train_loss": running / n, "val_loss": val_loss})
        if val_loss < tlog.best_val_loss:
            tlog.best_val_loss, tlog.best_epoch, best = val_loss, epoch, params
        log.debug("epoch %d train %.5f val %.5f", epoch, running / n, val_loss)
    return best, tlog


@dataclass
class Prediction:
    survival: np.ndarray
    risk: float
    attention: np.ndarray
    hazard: np.ndarray


def predict_arrays(cohort: Sequence[SubjectRecord], params, cfg: ModelConfig,
                   binary_model: Optional[BinaryRelapseModel], grid: TimeGrid, chunk: int = 256):
    """Batched prediction: ``(hazards (n,k), survival (n,k), risks (n,), attention list)``."""
    data = prepare(cohort, grid, cfg, binary_model)
    hazards, attention = [], []
    for start in range(0, len(data), chunk):
        part = data.take(slice(start, start + chunk))
        h, a, _ = forward_batch(part.X, part.mask, part.binary, params, cfg, keep_cache=False)
        hazards.append(h)
        attention.extend(row[m] for row, m in zip(a, part.mask))
    H = np.concatenate(hazards)
    S = survival_from_hazard(H)
    return H, S, np.atleast_1d(risk_score(S, grid)), attention


def predict(cohort: Sequence[SubjectRecord], params, cfg: ModelConfig,
            binary_model: Optional[BinaryRelapseModel], grid: TimeGrid) -> list:
    H, S, r, att = predict_arrays(cohort, params, cfg, binary_model, grid)
    return [Prediction(S[i], float(r[i]), att[i], H[i]) for i in range(len(cohort))]
