"""Discrete-time survival formalism.

Follow-up time is cut into ``k`` intervals ending at ``t_1 < ... < t_k``.
A hazard vector ``h`` gives the conditional event probability per
interval, the survival curve is the running product of ``1 - h`` and the
risk score is one minus the normalised area under that curve.

Hazard and survival curves are plain float arrays whose last axis has
length ``k``; every function here broadcasts over leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError

DEFAULT_RISK_LIMITS = (0.06, 0.12, 0.15, 0.18, 0.3, 0.42, 0.51)


@dataclass(frozen=True)
class TimeGrid:
    """Right ends of the discretisation intervals, in months."""

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.float64).reshape(-1)
        if b.size == 0:
            raise InvalidInputError("time grid needs at least one interval")
        if not np.all(np.isfinite(b)) or np.any(b <= 0):
            raise InvalidInputError("grid boundaries must be finite and > 0")
        if np.any(np.diff(b) <= 0):
            raise InvalidInputError("grid boundaries must be strictly increasing")
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def uniform(cls, interval_count: int = 28, interval_length: float = 3.0) -> "TimeGrid":
        if interval_count < 1 or interval_length <= 0:
            raise InvalidInputError("interval_count >= 1 and interval_length > 0 required")
        return cls(interval_length * np.arange(1, interval_count + 1, dtype=np.float64))

    @property
    def interval_count(self) -> int:
        return int(self.boundaries.size)

    @property
    def horizon(self) -> float:
        return float(self.boundaries[-1])

    @property
    def widths(self) -> np.ndarray:
        """``|t_i - t_{i-1}|`` with ``t_0 = 0``."""
        return np.diff(self.boundaries, prepend=0.0)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.boundaries, other.boundaries)

    def __hash__(self):
        return hash(self.boundaries.tobytes())


@dataclass
class SubjectRecord:
    id: str
    observed_time: float
    censored: bool
    bag: np.ndarray
    instance_labels: Optional[np.ndarray] = None
    true_risk: Optional[float] = None
    # stitched attention-probe bags must never reach a training split
    exclude_from_training: bool = False

    def __post_init__(self):
        bag = np.asarray(self.bag, dtype=np.float64)
        if bag.ndim == 1:
            bag = bag[None, :]
        if bag.ndim != 2 or bag.shape[0] == 0 or bag.shape[1] == 0:
            raise InvalidInputError(f"subject {self.id}: bag must be a non-empty (instances, dim) array")
        self.bag = bag
        t = float(self.observed_time)
        if not math.isfinite(t) or t < 0:
            raise InvalidInputError(f"subject {self.id}: observed_time must be finite and >= 0")
        self.observed_time = t
        self.censored = bool(self.censored)
        if self.instance_labels is not None:
            labels = np.asarray(self.instance_labels, dtype=bool).reshape(-1)
            if labels.size != bag.shape[0]:
                raise InvalidInputError(f"subject {self.id}: one instance label per instance required")
            self.instance_labels = labels

    @property
    def feature_dim(self) -> int:
        return int(self.bag.shape[1])


@dataclass(frozen=True)
class DiscreteLabel:
    survival_indicator: np.ndarray
    event_interval: int
    censored: bool


@dataclass(frozen=True)
class RiskGroupBoundaries:
    limits: tuple = field(default=DEFAULT_RISK_LIMITS)

    def __post_init__(self):
        lim = tuple(float(x) for x in self.limits)
        check_limits(lim)
        object.__setattr__(self, "limits", lim)

    @property
    def group_count(self) -> int:
        return len(self.limits) + 1


def check_limits(limits: Sequence[float]) -> None:
    lim = np.asarray(limits, dtype=np.float64)
    if lim.ndim != 1:
        raise InvalidInputError("limits must be a flat sequence")
    if np.any(~np.isfinite(lim)) or np.any(lim <= 0) or np.any(lim >= 1):
        raise InvalidInputError("risk-group limits must lie in the open interval (0, 1)")
    if np.any(np.diff(lim) <= 0):
        raise InvalidInputError("risk-group limits must be strictly ascending")


def discretize_label(t_star: float, censored: bool, grid: TimeGrid) -> DiscreteLabel:
    t_star = float(t_star)
    if not math.isfinite(t_star) or t_star < 0:
        raise InvalidInputError(f"observed time must be finite and >= 0, got {t_star!r}")
    indicator = (grid.boundaries < t_star).astype(np.float64)
    # t_j >= t* first happens right after the prefix of ones
    event_interval = int(indicator.sum())
    indicator.setflags(write=False)
    return DiscreteLabel(indicator, event_interval, bool(censored))


def labels_for(cohort: Sequence[SubjectRecord], grid: TimeGrid) -> list[DiscreteLabel]:
    return [discretize_label(s.observed_time, s.censored, grid) for s in cohort]


def _check_probabilities(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise InvalidInputError(f"{what} entries must lie in [0, 1]")


def survival_from_hazard(h) -> np.ndarray:
    """``S[j] = prod_{i <= j} (1 - h[i])`` along the last axis."""
    h = np.asarray(h, dtype=np.float64)
    _check_probabilities(h, "hazard")
    return np.cumprod(1.0 - h, axis=-1)


def risk_score(S, grid: TimeGrid):
    """One minus the area under ``S`` normalised by the horizon ``t_k``.

    Returns a float for a single curve, an array for a stack of curves.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.shape[-1:] != (grid.interval_count,):
        raise InvalidInputError(
            f"survival curve length {S.shape[-1] if S.ndim else 0} != grid length {grid.interval_count}"
        )
    _check_probabilities(S, "survival")
    r = 1.0 - (S @ grid.widths) / grid.horizon
    r = np.clip(r, 0.0, 1.0)
    return float(r) if r.ndim == 0 else r


def assign_risk_group(r, boundaries) -> int:
    """Group ``i`` such that ``limits[i-1] <= r < limits[i]``."""
    limits = boundaries.limits if isinstance(boundaries, RiskGroupBoundaries) else tuple(boundaries)
    return int(np.searchsorted(np.asarray(limits, dtype=np.float64), float(r), side="right"))


def assign_risk_groups(risks, boundaries) -> np.ndarray:
    limits = boundaries.limits if isinstance(boundaries, RiskGroupBoundaries) else tuple(boundaries)
    return np.searchsorted(np.asarray(limits, dtype=np.float64), np.asarray(risks, dtype=np.float64), side="right")
