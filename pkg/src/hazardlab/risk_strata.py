"""Risk-group stratification and exploratory boundary search.

Risk scores are cut into groups by ascending limits; each group gets a
Kaplan-Meier curve and neighbouring groups are compared with a weighted
log-rank test.  ``search_boundaries`` enumerates subsets of a candidate
limit pool, largest group count first, and keeps the combination that
separates best on the training cohort and then on the validation one.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .metrics import KMCurve, LogRankConfig, kaplan_meier, logrank_fh
from .survival_core import RiskGroupBoundaries, assign_risk_groups, check_limits


@dataclass(frozen=True)
class StratSearchConfig:
    candidate_limits: tuple = tuple(round(0.05 * i, 2) for i in range(1, 20))
    group_count_range: tuple = (2, 8)
    logrank: LogRankConfig = LogRankConfig()
    max_combinations: int = 200_000

    def __post_init__(self):
        cands = tuple(sorted(float(x) for x in self.candidate_limits))
        check_limits(cands)
        lo, hi = (int(x) for x in self.group_count_range)
        if lo < 2 or hi < lo:
            raise InvalidInputError("group_count_range must satisfy 2 <= min <= max")
        object.__setattr__(self, "candidate_limits", cands)
        object.__setattr__(self, "group_count_range", (lo, hi))


@dataclass
class StratificationReport:
    boundaries: RiskGroupBoundaries
    group_sizes: list
    km_curves: list
    adjacent_pvalues: list
    passes: int
    empty_groups: list = field(default_factory=list)


def stratify_and_test(risks, times, censored, boundaries, cfg: LogRankConfig = LogRankConfig()) -> StratificationReport:
    """Group subjects, fit one KM curve per group, test neighbouring groups.

    An empty group on either side of a test gives ``p = 1`` and is listed
    in ``empty_groups``.
    """
    if not isinstance(boundaries, RiskGroupBoundaries):
        boundaries = RiskGroupBoundaries(tuple(boundaries))
    risks = np.asarray(risks, dtype=np.float64).reshape(-1)
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    censored = np.asarray(censored, dtype=bool).reshape(-1)
    if risks.size == 0:
        raise InvalidInputError("empty cohort")
    if not (risks.shape == times.shape == censored.shape):
        raise InvalidInputError("risks, times and censored differ in length")

    groups = assign_risk_groups(risks, boundaries)
    n_groups = boundaries.group_count
    sizes = np.bincount(groups, minlength=n_groups)
    curves = []
    for g in range(n_groups):
        sel = groups == g
        if sel.any():
            curves.append(kaplan_meier(times[sel], censored[sel]))
        else:
            curves.append(KMCurve(np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)))

    pvals = []
    for g in range(n_groups - 1):
        a, b = groups == g, groups == g + 1
        if not a.any() or not b.any():
            pvals.append(1.0)
            continue
        if np.all(censored[a | b]):
            pvals.append(1.0)
            continue
        _, p = logrank_fh((times[a], censored[a]), (times[b], censored[b]), cfg)
        pvals.append(float(p))
    passes = int(sum(p < cfg.significance for p in pvals))
    empty = [int(g) for g in np.flatnonzero(sizes == 0)]
    return StratificationReport(boundaries, sizes.tolist(), curves, pvals, passes, empty)


def _imbalance(sizes) -> float:
    occupied = [s for s in sizes if s > 0]
    if not occupied:
        return math.inf
    return max(occupied) / min(occupied)


@dataclass
class SearchEntry:
    limits: tuple
    train_passes: int
    val_passes: int
    imbalance: float

    @property
    def tests(self) -> int:
        return len(self.limits)

    def key(self):
        # larger is better; the limits tuple makes the order total
        return (self.train_passes, self.val_passes, -self.imbalance, tuple(-x for x in self.limits))


def combination_count(cfg: StratSearchConfig) -> int:
    n = len(cfg.candidate_limits)
    lo, hi = cfg.group_count_range
    return sum(math.comb(n, g - 1) for g in range(lo, hi + 1))


class _PairCache:
    """Memoised adjacent-group p-values keyed by the three limits involved."""

    def __init__(self, risks, times, censored, cfg: LogRankConfig):
        self.risks = np.asarray(risks, dtype=np.float64).reshape(-1)
        self.times = np.asarray(times, dtype=np.float64).reshape(-1)
        self.censored = np.asarray(censored, dtype=bool).reshape(-1)
        if not (self.risks.shape == self.times.shape == self.censored.shape):
            raise InvalidInputError("risks, times and censored differ in length")
        self.cfg = cfg
        self._sel = {}
        self._p = {}

    def members(self, lo, hi):
        key = (lo, hi)
        if key not in self._sel:
            self._sel[key] = (self.risks >= lo) & (self.risks < hi)
        return self._sel[key]

    def pvalue(self, lo, mid, hi):
        key = (lo, mid, hi)
        if key not in self._p:
            a, b = self.members(lo, mid), self.members(mid, hi)
            if not a.any() or not b.any() or np.all(self.censored[a | b]):
                p = 1.0
            else:
                _, p = logrank_fh((self.times[a], self.censored[a]), (self.times[b], self.censored[b]), self.cfg)
            self._p[key] = float(p)
        return self._p[key]

    def score(self, limits):
        edges = (-math.inf,) + tuple(limits) + (math.inf,)
        passes = sum(
            self.pvalue(edges[i], edges[i + 1], edges[i + 2]) < self.cfg.significance
            for i in range(len(edges) - 2)
        )
        sizes = [int(self.members(edges[i], edges[i + 1]).sum()) for i in range(len(edges) - 1)]
        return passes, sizes


def search_boundaries(risks_train, labels_train, risks_val, labels_val, cfg: StratSearchConfig = StratSearchConfig()):
    """Pick risk-group limits from ``cfg.candidate_limits``.

    ``labels_*`` are ``(times, censored)`` pairs.  Group counts are tried
    from largest to smallest; within a count, combinations are ranked by
    passing adjacent tests on train, then on validation, then by a smaller
    max/min group-size ratio.  The largest group count whose best
    combination passes every test on both cohorts wins; if none does,
    the overall best by (train pass rate, validation pass rate, group
    count, balance) is returned.  Returns ``(RiskGroupBoundaries, log)``
    with ``log`` a list of :class:`SearchEntry`.
    """
    total = combination_count(cfg)
    if total > cfg.max_combinations:
        raise InvalidInputError(
            f"{total} combinations exceed max_combinations={cfg.max_combinations}; "
            "coarsen the candidate grid or narrow group_count_range"
        )
    lo, hi = cfg.group_count_range
    if len(cfg.candidate_limits) < lo - 1:
        raise InvalidInputError("candidate pool too small for the requested group counts")
    train = _PairCache(risks_train, *labels_train, cfg.logrank)
    val = _PairCache(risks_val, *labels_val, cfg.logrank)

    entries = []
    best_per_count = {}
    for groups in range(hi, lo - 1, -1):
        if groups - 1 > len(cfg.candidate_limits):
            continue
        for limits in itertools.combinations(cfg.candidate_limits, groups - 1):
            t_pass, sizes = train.score(limits)
            v_pass, _ = val.score(limits)
            entry = SearchEntry(limits, t_pass, v_pass, _imbalance(sizes))
            entries.append(entry)
            cur = best_per_count.get(groups)
            if cur is None or entry.key() > cur.key():
                best_per_count[groups] = entry

    for groups in sorted(best_per_count, reverse=True):
        e = best_per_count[groups]
        if e.train_passes == e.tests and e.val_passes == e.tests:
            return RiskGroupBoundaries(e.limits), entries

    def fallback_key(e):
        return (e.train_passes / e.tests, e.val_passes / e.tests, e.tests, -e.imbalance, tuple(-x for x in e.limits))

    winner = max(best_per_count.values(), key=fallback_key)
    return RiskGroupBoundaries(winner.limits), entries


def search_log_csv(entries: Sequence[SearchEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["combination", "train_passes", "val_passes", "tiebreak"])
    for e in entries:
        w.writerow([" ".join(f"{x:g}" for x in e.limits), e.train_passes, e.val_passes, e.imbalance])
    return buf.getvalue()
