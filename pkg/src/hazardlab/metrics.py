"""Survival evaluation metrics.

Outcomes are passed as ``times`` (observed months) and ``censored``
(True = right-censored).  Predicted survival curves are ``(n, k)`` arrays
evaluated at the grid boundaries.  ``outcomes_from_labels`` turns
:class:`DiscreteLabel` objects into interval-end times when only
discretised labels are available.

Censoring weights come from the Kaplan-Meier estimate ``G`` of the
censoring distribution (censor flags flipped); subjects whose own event
is the weight's subject use the left limit ``G(t-)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from . import _kernels
from .errors import InvalidInputError, UndefinedMetricError
from .survival_core import DiscreteLabel, TimeGrid


# ---------------------------------------------------------------------------
# Kaplan-Meier
# ---------------------------------------------------------------------------


@dataclass
class KMCurve:
    event_times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __call__(self, t, left: bool = False):
        """``S(t)``, or the left limit ``S(t-)`` with ``left=True``."""
        t = np.asarray(t, dtype=np.float64)
        side = "left" if left else "right"
        idx = np.searchsorted(self.event_times, t, side=side)
        vals = np.concatenate([[1.0], self.survival])
        return vals[idx]


def _validate_outcomes(times, censored):
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    censored = np.asarray(censored, dtype=bool).reshape(-1)
    if times.size == 0:
        raise InvalidInputError("empty input")
    if times.shape != censored.shape:
        raise InvalidInputError("times and censored differ in length")
    if np.any(np.isnan(times)) or np.any(times < 0):
        raise InvalidInputError("times must be >= 0")
    return times, censored


def kaplan_meier(times, censored) -> KMCurve:
    """Product-limit estimate; censored subjects stay at risk at their own time."""
    times, censored = _validate_outcomes(times, censored)
    event = ~censored
    ev_times = np.unique(times[event])
    if ev_times.size == 0:
        return KMCurve(np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64))
    sorted_t = np.sort(times)
    at_risk = times.size - np.searchsorted(sorted_t, ev_times, side="left")
    d = np.searchsorted(np.sort(times[event]), ev_times, side="right") - np.searchsorted(
        np.sort(times[event]), ev_times, side="left"
    )
    surv = np.cumprod(1.0 - d / at_risk)
    return KMCurve(ev_times, surv, at_risk.astype(np.int64), d.astype(np.int64))


def censoring_km(times, censored) -> KMCurve:
    times, censored = _validate_outcomes(times, censored)
    return kaplan_meier(times, ~censored)


def outcomes_from_labels(labels: Sequence[DiscreteLabel], grid: TimeGrid):
    """Interval-end times for discretised labels; beyond-grid subjects map to ``inf``."""
    b = np.r_[grid.boundaries, np.inf]
    times = np.array([b[lab.event_interval] for lab in labels])
    cens = np.array([lab.censored for lab in labels], dtype=bool)
    return times, cens


def _check_curves(curves, n, grid):
    S = np.asarray(curves, dtype=np.float64)
    if S.ndim != 2 or S.shape != (n, grid.interval_count):
        raise InvalidInputError(f"curves must have shape ({n}, {grid.interval_count}), got {S.shape}")
    return S


# ---------------------------------------------------------------------------
# Discrimination
# ---------------------------------------------------------------------------


def auc_at(S_t, times, censored, t, G: Optional[KMCurve] = None):
    """Cumulative/dynamic AUC at one time, or ``None`` with no comparable pair."""
    cases = (~censored) & (times <= t)
    controls = times > t
    if not cases.any() or not controls.any():
        return None
    if G is None:
        G = censoring_km(times, censored)
    g_case = G(times[cases], left=True)
    g_ctrl = G(np.full(controls.sum(), t))
    if np.any(g_case <= 0) or np.any(g_ctrl <= 0):
        raise UndefinedMetricError(f"censoring survival reaches 0 before t={t:g}")
    num, den = _kernels.auc_pair_sums(S_t[cases], 1.0 / g_case, S_t[controls], 1.0 / g_ctrl)
    return num / den


def cd_auc(curves, times, censored, grid: TimeGrid):
    """Integrated cumulative/dynamic AUC and the per-time values.

    ``AUC(t) = P(S_i(t) < S_j(t)) + 0.5 P(S_i(t) = S_j(t))`` over cases
    (event by ``t``) and controls (still event-free after ``t``), cases
    weighted by ``1/G(T_i-)`` and controls by ``1/G(t)``.  The integrated
    value weights each evaluable grid time by the drop of the
    Kaplan-Meier event-time estimate over its interval and renormalises
    over the evaluable times.
    """
    times, censored = _validate_outcomes(times, censored)
    S = _check_curves(curves, times.size, grid)
    G = censoring_km(times, censored)
    km = kaplan_meier(times, censored)
    surv_at = km(grid.boundaries)
    drop = np.r_[1.0, surv_at[:-1]] - surv_at

    over_time = []
    num = den = 0.0
    for j, t in enumerate(grid.boundaries):
        a = auc_at(S[:, j], times, censored, t, G)
        if a is None:
            continue
        over_time.append((float(t), a))
        num += a * drop[j]
        den += drop[j]
    if not over_time:
        raise UndefinedMetricError("no comparable case/control pair at any grid time")
    if den <= 0:
        raise UndefinedMetricError("event-time distribution has no mass at the evaluable grid times")
    return num / den, over_time


def harrell_cindex(risks, times, censored) -> float:
    """Concordant fraction over pairs with ``t_i < t_j`` and ``i`` uncensored."""
    times, censored = _validate_outcomes(times, censored)
    risks = np.asarray(risks, dtype=np.float64).reshape(-1)
    if risks.shape != times.shape:
        raise InvalidInputError("risks and times differ in length")
    credit, admissible = _kernels.concordance_sums(risks, times, ~censored)
    if admissible == 0:
        raise UndefinedMetricError("no admissible pairs for the c-index")
    return credit / admissible


# ---------------------------------------------------------------------------
# Brier score
# ---------------------------------------------------------------------------


def brier_over_time(curves, times, censored, grid: TimeGrid) -> np.ndarray:
    times, censored = _validate_outcomes(times, censored)
    S = _check_curves(curves, times.size, grid)
    G = censoring_km(times, censored)
    g_own = G(times, left=True)
    out = np.empty(grid.interval_count)
    for j, t in enumerate(grid.boundaries):
        case = (~censored) & (times <= t)
        alive = times > t
        g_t = float(G(t))
        if (case.any() and np.any(g_own[case] <= 0)) or (alive.any() and g_t <= 0):
            raise UndefinedMetricError(f"censoring survival is 0 at t={t:g}; truncate the grid before {t:g}")
        term = np.zeros(times.size)
        term[case] = S[case, j] ** 2 / g_own[case]
        if alive.any():
            term[alive] = (1.0 - S[alive, j]) ** 2 / g_t
        out[j] = term.mean()
    return out


def brier(curves, times, censored, grid: TimeGrid) -> float:
    """IPCW Brier score integrated over the grid (trapezoid rule, span-normalised)."""
    bs = brier_over_time(curves, times, censored, grid)
    if bs.size == 1:
        return float(bs[0])
    t = grid.boundaries
    return float(np.sum(0.5 * (bs[1:] + bs[:-1]) * np.diff(t)) / (t[-1] - t[0]))


# ---------------------------------------------------------------------------
# D-calibration
# ---------------------------------------------------------------------------


def chi2_sf(x: float, dof: int) -> float:
    """Upper tail of the chi-square distribution."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(dof / 2.0, x / 2.0))


def survival_at_observed(curves, times, grid: TimeGrid, interpolate: bool = True) -> np.ndarray:
    """Each subject's predicted survival at its own observed time.

    With ``interpolate`` the curve is linear between grid points (with
    ``S(0) = 1``) and flat after the horizon; otherwise the value at the
    end of the interval containing the time is used.
    """
    S = np.asarray(curves, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    k = grid.interval_count
    if interpolate:
        knots = np.r_[0.0, grid.boundaries]
        out = np.empty(times.size)
        for i in range(times.size):
            out[i] = np.interp(min(times[i], knots[-1]), knots, np.r_[1.0, S[i]])
        return out
    idx = np.minimum(np.searchsorted(grid.boundaries, times, side="left"), k - 1)
    return S[np.arange(times.size), idx]


def dcal_chisquare(hist) -> tuple:
    hist = np.asarray(hist, dtype=np.float64)
    n = hist.sum()
    expected = n / hist.size
    stat = float(np.sum((hist - expected) ** 2) / expected)
    return stat, chi2_sf(stat, hist.size - 1)


def d_calibration(curves, times, censored, grid: TimeGrid, bins: int = 10, interpolate: bool = True):
    """Return ``(statistic, pvalue, histogram)``.

    Uncensored subjects put unit mass in the bin holding ``S_i(t_i)``;
    censored subjects spread unit mass uniformly over ``[0, S_i(c_i))``.
    """
    times, censored = _validate_outcomes(times, censored)
    S = _check_curves(curves, times.size, grid)
    if bins < 2:
        raise InvalidInputError("at least two bins required")
    s = survival_at_observed(S, times, grid, interpolate)
    hist = _kernels.dcal_histogram(s, censored, bins)
    stat, p = dcal_chisquare(hist)
    return stat, p, hist


# ---------------------------------------------------------------------------
# Weighted log-rank
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogRankConfig:
    fh_p: float = 1.0
    fh_q: float = 1.0
    significance: float = 0.05

    def __post_init__(self):
        if self.fh_p < 0 or self.fh_q < 0:
            raise InvalidInputError("Fleming-Harrington exponents must be >= 0")
        if not 0 < self.significance < 1:
            raise InvalidInputError("significance must lie in (0, 1)")


def logrank_fh(group_a, group_b, cfg: LogRankConfig = LogRankConfig()):
    """Fleming-Harrington ``G(p, q)`` weighted log-rank test, 1 dof.

    ``group_a`` and ``group_b`` are ``(times, censored)`` pairs.  Weights
    are ``S(t-)^p (1 - S(t-))^q`` with ``S`` the pooled Kaplan-Meier
    estimate.  Returns ``(statistic, pvalue)``.
    """
    ta, ca = _validate_outcomes(*group_a)
    tb, cb = _validate_outcomes(*group_b)
    t = np.r_[ta, tb]
    c = np.r_[ca, cb]
    km = kaplan_meier(t, c)
    if km.event_times.size == 0:
        raise InvalidInputError("no events in the pooled sample")
    ev = km.event_times
    n = km.at_risk.astype(np.float64)
    d = km.events.astype(np.float64)
    n_a = (ta[None, :] >= ev[:, None]).sum(axis=1).astype(np.float64)
    d_a = ((ta[None, :] == ev[:, None]) & ~ca[None, :]).sum(axis=1).astype(np.float64)
    s_left = km(ev, left=True)
    w = s_left**cfg.fh_p * (1.0 - s_left) ** cfg.fh_q
    expected = d * n_a / n
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(n > 1, d * (n_a / n) * (1.0 - n_a / n) * (n - d) / (n - 1.0), 0.0)
    num = float(np.sum(w * (d_a - expected)))
    den = float(np.sum(w * w * var))
    if den <= 0:
        return 0.0, 1.0
    stat = num * num / den
    return stat, chi2_sf(stat, 1)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class MetricsReport:
    integrated_cd_auc: float
    auc_over_time: list
    brier: float
    c_index: float
    dcal_statistic: float
    dcal_pvalue: float
    dcal_pass: bool
    dcal_histogram: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_record(self) -> str:
        """Flat ``key=value`` text, one per line.

        An undefined value prints as ``NA`` followed by a ``<key>_reason`` line.
        """
        lines = []
        for key in ("integrated_cd_auc", "brier", "c_index", "dcal_statistic", "dcal_pvalue", "dcal_pass"):
            val = getattr(self, key)
            if isinstance(val, (np.floating, np.bool_)):
                val = val.item()
            if val is None or (isinstance(val, float) and np.isnan(val)):
                reason = " ".join(str(self.notes.get(key, "undefined")).split())
                lines.append(f"{key}=NA")
                lines.append(f"{key}_reason={reason}")
            else:
                lines.append(f"{key}={val!r}" if isinstance(val, float) else f"{key}={val}")
        return "\n".join(lines) + "\n"

    def auc_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["time", "auc"])
        for t, a in self.auc_over_time:
            w.writerow([t, a])
        return buf.getvalue()


def evaluate(curves, times, censored, grid: TimeGrid, risks=None, bins: int = 10,
             significance: float = 0.05, interpolate: bool = True) -> MetricsReport:
    """Every metric on one cohort; undefined metrics become NaN with a note."""
    from .survival_core import risk_score

    curves = np.asarray(curves, dtype=np.float64)
    if risks is None:
        risks = np.atleast_1d(risk_score(curves, grid))
    notes = {}
    nan = float("nan")
    try:
        iauc, over = cd_auc(curves, times, censored, grid)
    except UndefinedMetricError as exc:
        iauc, over = nan, []
        notes["integrated_cd_auc"] = str(exc)
    try:
        bs = brier(curves, times, censored, grid)
    except UndefinedMetricError as exc:
        bs = nan
        notes["brier"] = str(exc)
    try:
        ci = harrell_cindex(risks, times, censored)
    except UndefinedMetricError as exc:
        ci = nan
        notes["c_index"] = str(exc)
    try:
        stat, p, hist = d_calibration(curves, times, censored, grid, bins, interpolate)
        hist = hist.tolist()
    except UndefinedMetricError as exc:
        stat, p, hist = nan, nan, []
        notes["dcal_statistic"] = notes["dcal_pvalue"] = str(exc)
    return MetricsReport(iauc, over, bs, ci, stat, p, bool(p > significance), hist, notes)


def km_csv(curve: KMCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["time", "survival"])
    w.writerow([0.0, 1.0])
    for t, s in zip(curve.event_times, curve.survival):
        w.writerow([float(t), float(s)])
    return buf.getvalue()


def report_dict(report: MetricsReport) -> dict:
    return asdict(report)
