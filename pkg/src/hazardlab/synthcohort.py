"""Synthetic bag cohorts with a known discrete hazard.

Each subject gets a malignant fraction ``f``; its bag holds ``round(f * P)``
malignant instances drawn around ``signal_magnitude * u`` (``u`` a fixed
unit vector) and benign instances drawn around the origin.  The true
per-interval hazard is ``min(base_hazard * exp(beta * f), 0.99)``, the
same in every interval.  Event times are uniform inside the sampled
interval; independent exponential censoring is tuned so the realised
censored fraction hits ``censor_fraction_target``, and everything past
``admin_censor_time`` is administratively censored.

Every subject draws from its own generator seeded by ``(seed, index)``,
so generation order does not matter.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError
from .survival_core import SubjectRecord, TimeGrid, survival_from_hazard

MAX_HAZARD = 0.99
_STITCHED_OFFSET = 1_000_003


@dataclass(frozen=True)
class CohortConfig:
    subject_count: int = 500
    bag_size: int = 16
    feature_dim: int = 8
    malignant_fraction_range: tuple = (0.0, 1.0)
    base_hazard: float = 0.003
    beta: float = 3.5
    signal_magnitude: float = 2.0
    censor_fraction_target: float = 0.8
    admin_censor_time: float = 84.0
    interval_count: int = 28
    interval_length: float = 3.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.malignant_fraction_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError("malignant_fraction_range must satisfy 0 <= lo <= hi <= 1")
        if self.subject_count < 1 or self.bag_size < 1 or self.feature_dim < 1:
            raise ConfigError("subject_count, bag_size and feature_dim must be positive")
        if not 0.0 < self.base_hazard < 1.0:
            raise ConfigError("base_hazard must lie in (0, 1)")
        if not 0.0 <= self.censor_fraction_target <= 1.0:
            raise ConfigError("censor_fraction_target must lie in [0, 1]")
        if self.admin_censor_time <= 0:
            raise ConfigError("admin_censor_time must be > 0")
        object.__setattr__(self, "malignant_fraction_range", (float(lo), float(hi)))

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.interval_count, self.interval_length)


@dataclass
class OracleModel:
    base_hazard: float
    beta: float
    interval_count: int
    true_risk: dict = field(default_factory=dict)

    def hazard_for(self, f) -> np.ndarray:
        return true_hazard(f, self.base_hazard, self.beta)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "OracleModel":
        return cls(float(d["base_hazard"]), float(d["beta"]), int(d["interval_count"]),
                   {str(k): float(v) for k, v in d.get("true_risk", {}).items()})


def true_hazard(f, base_hazard: float, beta: float):
    return np.clip(base_hazard * np.exp(beta * np.asarray(f, dtype=np.float64)), 0.0, MAX_HAZARD)


def signal_direction(d: int) -> np.ndarray:
    return np.ones(d) / np.sqrt(d)


def _bag(rng, n_mal: int, n_ben: int, d: int, magnitude: float) -> tuple:
    shift = magnitude * signal_direction(d)
    labels = np.zeros(n_mal + n_ben, dtype=bool)
    labels[:n_mal] = True
    rng.shuffle(labels)
    bag = rng.standard_normal((labels.size, d)) + np.where(labels[:, None], shift, 0.0)
    # float32-representable values survive the JSON-lines round trip exactly
    return bag.astype(np.float32).astype(np.float64), labels


def _censored_fraction(rate, event_time, exp_draws, admin):
    cens_time = exp_draws / rate if rate > 0 else np.full_like(exp_draws, np.inf)
    return np.mean((cens_time < event_time) | (event_time > admin))


def _tune_censor_rate(event_time, exp_draws, cfg: CohortConfig) -> float:
    target = cfg.censor_fraction_target
    admin = cfg.admin_censor_time
    floor = _censored_fraction(0.0, event_time, exp_draws, admin)
    if floor > target + 0.05:
        raise ConfigError(
            f"administrative censoring alone censors {floor:.3f} > target {target:.3f}; "
            "raise base_hazard/beta or the target"
        )
    if floor >= target:
        return 0.0
    lo, hi = 0.0, 1.0
    while _censored_fraction(hi, event_time, exp_draws, admin) < target:
        hi *= 2.0
        if hi > 1e9:
            raise ConfigError("censoring target not reachable")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _censored_fraction(mid, event_time, exp_draws, admin) < target:
            lo = mid
        else:
            hi = mid
    rate = hi
    got = _censored_fraction(rate, event_time, exp_draws, admin)
    if abs(got - target) > 0.05:
        raise ConfigError(f"could only reach censored fraction {got:.3f} for target {target:.3f}")
    return rate


def generate_cohort(cfg: CohortConfig):
    """Return ``(subjects, OracleModel)``; a pure function of ``cfg``."""
    grid = cfg.grid
    bounds = grid.boundaries
    k = grid.interval_count
    lo, hi = cfg.malignant_fraction_range
    P = cfg.bag_size

    fractions, bags, labels, event_time, exp_draws = [], [], [], [], []
    for i in range(cfg.subject_count):
        rng = np.random.default_rng([cfg.seed, i])
        n_mal = int(np.rint(rng.uniform(lo, hi) * P))
        f = n_mal / P
        bag, lab = _bag(rng, n_mal, P - n_mal, cfg.feature_dim, cfg.signal_magnitude)
        h = float(true_hazard(f, cfg.base_hazard, cfg.beta))
        S = (1.0 - h) ** np.arange(1, k + 1)
        u = rng.uniform()
        j = int(np.searchsorted(-S, -u, side="right"))  # first j with S_j < u
        if j < k:
            left = bounds[j - 1] if j > 0 else 0.0
            t_event = left + (1.0 - rng.uniform()) * (bounds[j] - left)
        else:
            t_event = np.inf
            rng.uniform()
        fractions.append(f)
        bags.append(bag)
        labels.append(lab)
        event_time.append(t_event)
        exp_draws.append(rng.exponential())

    event_time = np.array(event_time)
    exp_draws = np.array(exp_draws)
    rate = _tune_censor_rate(event_time, exp_draws, cfg)
    cens_time = exp_draws / rate if rate > 0 else np.full_like(exp_draws, np.inf)
    observed = np.minimum(np.minimum(event_time, cens_time), cfg.admin_censor_time)
    censored = ~((event_time <= cens_time) & (event_time <= cfg.admin_censor_time))

    subjects = [
        SubjectRecord(f"s{cfg.seed}-{i:05d}", float(observed[i]), bool(censored[i]), bags[i], labels[i], fractions[i])
        for i in range(cfg.subject_count)
    ]
    oracle = OracleModel(cfg.base_hazard, cfg.beta, k, {s.id: s.true_risk for s in subjects})
    return subjects, oracle


def oracle_predictions(cohort: Sequence[SubjectRecord], oracle: OracleModel, grid: TimeGrid) -> np.ndarray:
    """True survival curves ``(n, k)`` of the generating model."""
    if grid.interval_count != oracle.interval_count:
        raise InvalidInputError("oracle and grid interval counts differ")
    f = []
    for s in cohort:
        if s.id in oracle.true_risk:
            f.append(oracle.true_risk[s.id])
        elif s.true_risk is not None:
            f.append(s.true_risk)
        else:
            raise InvalidInputError(f"no true risk known for subject {s.id}")
    h = np.repeat(oracle.hazard_for(np.array(f))[:, None], grid.interval_count, axis=1)
    return survival_from_hazard(h)


def generate_stitched_bags(cfg: CohortConfig, count: int) -> list:
    """Half-benign / half-malignant probe bags for attention analysis only."""
    if cfg.bag_size % 2:
        raise ConfigError("stitched bags need an even bag_size")
    half = cfg.bag_size // 2
    out = []
    for i in range(count):
        rng = np.random.default_rng([cfg.seed, _STITCHED_OFFSET + i])
        benign, _ = _bag(rng, 0, half, cfg.feature_dim, cfg.signal_magnitude)
        malignant, _ = _bag(rng, half, 0, cfg.feature_dim, cfg.signal_magnitude)
        bag = np.vstack([benign, malignant])
        labels = np.r_[np.zeros(half, bool), np.ones(half, bool)]
        out.append(SubjectRecord(f"stitched-{cfg.seed}-{i:03d}", 0.0, True, bag, labels, 0.5,
                                 exclude_from_training=True))
    return out


def planted_risk_clusters(centers=(0.12, 0.47, 0.82), per_cluster=150, spread=0.015,
                          rates=(0.005, 0.03, 0.12), censor_rate=0.01, horizon=84.0,
                          seed: int = 0):
    """Risk scores in tight clusters with cluster-specific exponential event times.

    Returns ``(risks, times, censored, cluster_index)``.
    """
    if len(centers) != len(rates):
        raise InvalidInputError("one event rate per cluster required")
    rng = np.random.default_rng(seed)
    risks, times, cens, idx = [], [], [], []
    for c, (mu, lam) in enumerate(zip(centers, rates)):
        r = np.clip(mu + rng.uniform(-spread, spread, per_cluster), 1e-6, 1 - 1e-6)
        t_ev = rng.exponential(1.0 / lam, per_cluster)
        t_c = np.minimum(rng.exponential(1.0 / censor_rate, per_cluster), horizon)
        risks.append(r)
        times.append(np.minimum(t_ev, t_c))
        cens.append(t_c < t_ev)
        idx.append(np.full(per_cluster, c))
    return np.concatenate(risks), np.concatenate(times), np.concatenate(cens), np.concatenate(idx)
