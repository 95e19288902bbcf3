"""Finite-difference checks of the analytic gradients.

Relative error per coordinate is ``|a - n| / max(|a|, |n|, floor)``
with ``a`` analytic and ``n`` the central difference; the floor keeps
coordinates whose true gradient is zero from dividing by round-off.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .loss import LossConfig, nll_batch, nll_grad_batch
from .model.network import ModelConfig, backward_batch, forward_batch, init_params

REL_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    name: str
    cases: int
    max_rel_error: float
    seconds: float

    def line(self) -> str:
        return f"{self.name}: cases={self.cases} max_rel_error={self.max_rel_error:.3e} seconds={self.seconds:.2f}"


def rel_error(analytic, numeric, floor: float = REL_FLOOR) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def check_loss(cases: int = 1000, step: float = 1e-5, seed: int = 0, max_intervals: int = 28,
               cfg: LossConfig = LossConfig()) -> GradCheckResult:
    """Random hazards (kept away from the clamp) and labels, one subject per case."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        k = int(rng.integers(1, max_intervals + 1))
        censored = bool(rng.uniform() < 0.5)
        e = int(rng.integers(0, k + 1 if censored else k))
        h = rng.uniform(0.01, 0.99, size=(1, k))
        lc = replace(cfg, alpha=float(rng.uniform()))
        g = nll_grad_batch(h, [e], [censored], lc)[0]
        # all k coordinates perturbed at once, one per row
        eye = np.eye(k) * step
        fp = nll_batch(h + eye, [e] * k, [censored] * k, lc)
        fm = nll_batch(h - eye, [e] * k, [censored] * k, lc)
        num = (fp - fm) / (2.0 * step)
        worst = max(worst, float(rel_error(g, num).max()))
    return GradCheckResult("loss", cases, worst, time.perf_counter() - t0)


TINY = dict(feature_dim=3, embed_dim=4, interval_count=4, encoder_hidden=4, gru_hidden=4, attention_hidden=3)
ABLATIONS = [
    dict(use_self_attention=sa, use_mil=mil)
    for sa in (True, False)
    for mil in (True, False)
]


def _model_case(cfg: ModelConfig, rng, step: float, lc: LossConfig, bag: int) -> float:
    params = {k: np.asarray(v + rng.normal(0.0, 0.5, np.shape(v))) for k, v in init_params(cfg).items()}
    X = rng.normal(size=(2, bag, cfg.feature_dim))
    mask = np.ones((2, bag), dtype=bool)
    mask[1, -1] = False
    bf = rng.uniform(size=2)
    k = cfg.interval_count
    ev = np.array([int(rng.integers(0, k)), int(rng.integers(0, k + 1))])
    ce = np.array([False, True])

    def f(p):
        h, _, _ = forward_batch(X, mask, bf, p, cfg, keep_cache=False)
        return float(nll_batch(h, ev, ce, lc).sum())

    h, _, cache = forward_batch(X, mask, bf, params, cfg)
    grads = backward_batch(cache, nll_grad_batch(h, ev, ce, lc), params, cfg)
    worst = 0.0
    for name, value in params.items():
        num = np.zeros(np.shape(value))
        for idx in np.ndindex(num.shape):
            trial = dict(params)
            up = np.array(value, dtype=np.float64)
            up[idx] += step
            trial[name] = up
            fp = f(trial)
            down = np.array(value, dtype=np.float64)
            down[idx] -= step
            trial[name] = down
            num[idx] = (fp - f(trial)) / (2.0 * step)
        worst = max(worst, float(rel_error(grads[name], num).max()))
    return worst


def check_model(draws: int = 20, step: float = 1e-5, seed: int = 0, bag: int = 3,
                pool: str = "logit") -> GradCheckResult:
    """Every ablation configuration at tiny sizes, ``draws`` parameter draws each."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    cases = 0
    for toggles in ABLATIONS:
        cfg = ModelConfig(**TINY, **toggles, use_binary_feature=True, pool=pool)
        for _ in range(draws):
            worst = max(worst, _model_case(cfg, rng, step, LossConfig(), bag))
            cases += 1
    return GradCheckResult(f"model[{pool}]", cases, worst, time.perf_counter() - t0)
