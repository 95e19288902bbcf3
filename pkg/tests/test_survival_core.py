import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hazardlab.errors import InvalidInputError
from hazardlab.survival_core import (
    DEFAULT_RISK_LIMITS,
    RiskGroupBoundaries,
    SubjectRecord,
    TimeGrid,
    assign_risk_group,
    assign_risk_groups,
    discretize_label,
    risk_score,
    survival_from_hazard,
)

GRID = TimeGrid.uniform(28, 3.0)
unit = st.floats(0.0, 1.0, allow_nan=False)


class TestTimeGrid:
    def test_uniform_default(self):
        assert GRID.interval_count == 28
        assert GRID.horizon == 84.0
        np.testing.assert_array_equal(GRID.widths, np.full(28, 3.0))

    def test_rejects_unsorted(self):
        with pytest.raises(InvalidInputError):
            TimeGrid(np.array([3.0, 2.0, 6.0]))

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidInputError):
            TimeGrid(np.array([0.0, 3.0]))

    def test_boundaries_are_read_only(self):
        with pytest.raises(ValueError):
            GRID.boundaries[0] = 1.0

    def test_equality_by_value(self):
        assert TimeGrid.uniform(4, 2.0) == TimeGrid(np.array([2.0, 4.0, 6.0, 8.0]))
        assert hash(TimeGrid.uniform(4, 2.0)) == hash(TimeGrid(np.array([2.0, 4.0, 6.0, 8.0])))


class TestDiscretizeLabel:
    def test_event_at_ten_months(self):
        lab = discretize_label(10.0, False, GRID)
        expected = np.zeros(28)
        expected[:3] = 1
        np.testing.assert_array_equal(lab.survival_indicator, expected)
        assert lab.event_interval == 3
        assert not lab.censored

    @pytest.mark.parametrize("censored", [True, False])
    def test_time_zero(self, censored):
        lab = discretize_label(0.0, censored, GRID)
        assert lab.survival_indicator.sum() == 0
        assert lab.event_interval == 0

    def test_beyond_grid(self):
        lab = discretize_label(200.0, True, GRID)
        np.testing.assert_array_equal(lab.survival_indicator, np.ones(28))
        assert lab.event_interval == 28

    def test_boundary_counts_in_that_interval(self):
        # t* == t_j is not strictly beyond t_j
        assert discretize_label(6.0, False, GRID).event_interval == 1

    @pytest.mark.parametrize("bad", [-1.0, math.inf, math.nan])
    def test_invalid_time(self, bad):
        with pytest.raises(InvalidInputError):
            discretize_label(bad, False, GRID)

    @given(st.floats(0.0, 300.0, allow_nan=False), st.booleans())
    def test_prefix_of_ones(self, t, c):
        lab = discretize_label(t, c, GRID)
        v = lab.survival_indicator
        e = lab.event_interval
        assert v.sum() == e
        assert np.all(v[:e] == 1) and np.all(v[e:] == 0)


class TestSurvivalFromHazard:
    def test_zero_hazard(self):
        np.testing.assert_array_equal(survival_from_hazard(np.zeros(28)), np.ones(28))

    def test_certain_first_event(self):
        h = np.zeros(28)
        h[0] = 1.0
        np.testing.assert_array_equal(survival_from_hazard(h), np.zeros(28))

    def test_hand_product(self):
        h = np.zeros(28)
        h[:2] = 0.5
        S = survival_from_hazard(h)
        np.testing.assert_allclose(S[:3], [0.5, 0.25, 0.25])
        np.testing.assert_allclose(S[3:], 0.25)

    @pytest.mark.parametrize("bad", [-0.1, 1.1, np.nan])
    def test_out_of_range(self, bad):
        h = np.full(5, 0.2)
        h[2] = bad
        with pytest.raises(InvalidInputError):
            survival_from_hazard(h)

    def test_broadcasts_over_rows(self):
        h = np.array([[0.1, 0.2], [0.3, 0.4]])
        np.testing.assert_allclose(survival_from_hazard(h), [[0.9, 0.72], [0.7, 0.42]])

    @settings(max_examples=200)
    @given(arrays(np.float64, 28, elements=unit))
    def test_monotone_and_risk_in_unit_interval(self, h):
        S = survival_from_hazard(h)
        assert np.all(np.diff(S) <= 0)
        r = risk_score(S, GRID)
        assert 0.0 <= r <= 1.0


class TestRiskScore:
    def test_constant_curves(self):
        assert risk_score(np.ones(28), GRID) == 0.0
        assert risk_score(np.zeros(28), GRID) == 1.0
        assert risk_score(np.full(28, 0.5), GRID) == pytest.approx(0.5, abs=1e-15)

    def test_non_uniform_grid_weights_by_width(self):
        grid = TimeGrid(np.array([1.0, 4.0]))
        # area = 1 * 1.0 + 3 * 0.5 = 2.5 over horizon 4
        assert risk_score(np.array([1.0, 0.5]), grid) == pytest.approx(1 - 2.5 / 4)

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            risk_score(np.ones(27), GRID)

    def test_stack_of_curves(self):
        S = np.array([np.ones(28), np.zeros(28)])
        np.testing.assert_array_equal(risk_score(S, GRID), [0.0, 1.0])

    @given(arrays(np.float64, 28, elements=unit), arrays(np.float64, 28, elements=unit))
    def test_antitone(self, ha, hb):
        Sa = survival_from_hazard(np.minimum(ha, hb))
        Sb = survival_from_hazard(np.maximum(ha, hb))
        assert np.all(Sa >= Sb)
        assert risk_score(Sa, GRID) <= risk_score(Sb, GRID) + 1e-15


class TestRiskGroups:
    def test_default_limits(self):
        b = RiskGroupBoundaries()
        assert b.limits == DEFAULT_RISK_LIMITS
        assert b.group_count == 8

    @pytest.mark.parametrize("r, group", [(0.0, 0), (0.12, 2), (0.99, 7), (0.06, 1), (0.0599, 0)])
    def test_lower_inclusive(self, r, group):
        assert assign_risk_group(r, RiskGroupBoundaries()) == group

    @pytest.mark.parametrize("limits", [(0.2, 0.1), (0.0, 0.5), (0.5, 1.0), (0.3, 0.3)])
    def test_invalid_limits(self, limits):
        with pytest.raises(InvalidInputError):
            RiskGroupBoundaries(limits)

    @given(st.lists(unit, min_size=1, max_size=50))
    def test_monotone_and_covering(self, risks):
        b = RiskGroupBoundaries()
        r = np.sort(np.array(risks))
        g = assign_risk_groups(r, b)
        assert np.all(np.diff(g) >= 0)
        assert g.min() >= 0 and g.max() <= len(b.limits)
        assert [assign_risk_group(x, b) for x in r] == g.tolist()


class TestSubjectRecord:
    def test_vector_bag_becomes_single_instance(self):
        s = SubjectRecord("a", 3.0, False, np.arange(4.0))
        assert s.bag.shape == (1, 4)

    def test_label_count_must_match(self):
        with pytest.raises(InvalidInputError):
            SubjectRecord("a", 3.0, False, np.zeros((3, 2)), instance_labels=[True, False])

    def test_negative_time(self):
        with pytest.raises(InvalidInputError):
            SubjectRecord("a", -1.0, False, np.zeros((1, 2)))
