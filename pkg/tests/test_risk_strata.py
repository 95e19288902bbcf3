import numpy as np
import pytest

from hazardlab.errors import InvalidInputError
from hazardlab.metrics import LogRankConfig
from hazardlab.risk_strata import (
    StratSearchConfig,
    combination_count,
    search_boundaries,
    search_log_csv,
    stratify_and_test,
)
from hazardlab.survival_core import DEFAULT_RISK_LIMITS, RiskGroupBoundaries
from hazardlab.synthcohort import planted_risk_clusters


def clusters(seed):
    r, t, c, _ = planted_risk_clusters(seed=seed)
    return r, (t, c)


class TestStratify:
    def test_separated_groups(self):
        rng = np.random.default_rng(0)
        risks = np.r_[np.full(80, 0.1), np.full(80, 0.8)]
        times = np.r_[rng.uniform(40, 80, 80), rng.uniform(1, 10, 80)]
        rep = stratify_and_test(risks, times, np.zeros(160, bool), RiskGroupBoundaries((0.5,)))
        assert rep.group_sizes == [80, 80]
        assert rep.adjacent_pvalues[0] < 0.01
        assert rep.passes == 1

    def test_empty_group(self):
        rng = np.random.default_rng(1)
        risks = rng.uniform(0, 0.4, 30)
        rep = stratify_and_test(risks, rng.uniform(1, 50, 30), np.zeros(30, bool), (0.5,))
        assert rep.group_sizes == [30, 0]
        assert rep.empty_groups == [1]
        assert rep.adjacent_pvalues == [1.0]

    def test_km_per_group(self):
        risks = np.array([0.01, 0.02, 0.9, 0.95])
        rep = stratify_and_test(risks, [5.0, 6.0, 1.0, 2.0], [False] * 4, (0.5,))
        assert len(rep.km_curves) == 2
        np.testing.assert_allclose(rep.km_curves[1].survival, [0.5, 0.0])

    def test_default_limits_give_eight_groups(self):
        rng = np.random.default_rng(2)
        rep = stratify_and_test(rng.uniform(size=100), rng.uniform(1, 80, 100), rng.uniform(size=100) < 0.5,
                                RiskGroupBoundaries())
        assert len(rep.group_sizes) == 8 and sum(rep.group_sizes) == 100
        assert len(rep.adjacent_pvalues) == 7

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            stratify_and_test([0.1, 0.2], [1.0], [False], (0.5,))


class TestSearch:
    def test_planted_clusters(self):
        r, lab = clusters(0)
        rv, labv = clusters(1)
        b, log = search_boundaries(r, lab, rv, labv, StratSearchConfig(group_count_range=(2, 4)))
        assert len(b.limits) == 2
        assert 0.135 <= b.limits[0] <= 0.455 and 0.485 <= b.limits[1] <= 0.805
        rep = stratify_and_test(rv, *labv, b)
        assert rep.passes == 2
        assert len(log) == combination_count(StratSearchConfig(group_count_range=(2, 4)))

    def test_default_limits_passthrough(self):
        r, lab = clusters(2)
        cfg = StratSearchConfig(candidate_limits=DEFAULT_RISK_LIMITS, group_count_range=(8, 8))
        b, log = search_boundaries(r, lab, r, lab, cfg)
        assert b.limits == DEFAULT_RISK_LIMITS
        assert len(log) == 1

    def test_single_candidate(self):
        r, lab = clusters(3)
        cfg = StratSearchConfig(candidate_limits=(0.3,), group_count_range=(2, 2))
        b, _ = search_boundaries(r, lab, r, lab, cfg)
        assert b.limits == (0.3,)

    def test_too_many_combinations(self):
        r, lab = clusters(0)
        cfg = StratSearchConfig(max_combinations=10)
        with pytest.raises(InvalidInputError, match="coarsen"):
            search_boundaries(r, lab, r, lab, cfg)

    def test_deterministic(self):
        r, lab = clusters(4)
        cfg = StratSearchConfig(candidate_limits=(0.1, 0.3, 0.5, 0.7), group_count_range=(2, 3),
                                logrank=LogRankConfig(fh_p=0.0, fh_q=0.0))
        a, la = search_boundaries(r, lab, r, lab, cfg)
        b, lb = search_boundaries(r, lab, r, lab, cfg)
        assert a.limits == b.limits
        assert search_log_csv(la) == search_log_csv(lb)

    @pytest.mark.parametrize("rng_", [(1, 3), (3, 2)])
    def test_bad_group_range(self, rng_):
        with pytest.raises(InvalidInputError):
            StratSearchConfig(group_count_range=rng_)
