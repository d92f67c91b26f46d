"""Natural-breaks classification tests.

jenks_breaks (dynamic programming) and jenks_oracle (exhaustive
enumeration) are independent routes to the same optimum; their agreement
on randomized instances is the core check here. Hand-worked examples are
frozen as tables.
"""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circity.classify import (
    BreaksClassification,
    JenksClassifier,
    assign_likert,
    jenks_breaks,
    jenks_oracle,
)


class TestHandWorkedExamples:
    def test_two_clusters(self):
        # classes {1,2,3} and {10,11,12}: within-class deviations 2 + 2
        result = jenks_breaks([1.0, 2.0, 3.0, 10.0, 11.0, 12.0], 2)
        assert result.breaks == (3.0, 12.0)
        assert result.sdcm == 4.0
        assert result.assignments == (1, 1, 1, 2, 2, 2)

    def test_tie_breaks_prefer_smallest_first_break(self):
        # [1,2,3] with k=2 costs 0.5 either way; smallest first break wins
        result = jenks_breaks([1.0, 2.0, 3.0], 2)
        assert result.breaks == (1.0, 3.0)
        assert result.sdcm == 0.5
        assert result.assignments == (1, 2, 2)

    def test_duplicates_never_straddle_a_break(self):
        result = jenks_breaks([5.0, 5.0, 5.0, 7.0, 7.0], 2)
        assert result.breaks == (5.0, 7.0)
        assert result.sdcm == 0.0
        assert result.gvf == 1.0

    def test_input_order_is_preserved_in_assignments(self):
        result = jenks_breaks([10.0, 1.0, 11.0, 2.0], 2)
        assert result.breaks == (2.0, 11.0)
        assert result.assignments == (2, 1, 2, 1)

    def test_k_equal_to_distinct_count_gives_zero_sdcm(self):
        result = jenks_breaks([4.0, 8.0, 15.0, 16.0], 4)
        assert result.breaks == (4.0, 8.0, 15.0, 16.0)
        assert result.sdcm == 0.0

    def test_single_class(self):
        result = jenks_breaks([1.0, 2.0, 3.0, 4.0], 1)
        assert result.breaks == (4.0,)
        # SDAM of 1..4 is 5.0; a single class explains none of it
        assert result.sdcm == 5.0
        assert result.gvf == 0.0

    def test_constant_data_single_class_has_perfect_gvf(self):
        result = jenks_breaks([5.0, 5.0, 5.0], 1)
        assert result.sdcm == 0.0
        assert result.gvf == 1.0


class TestPreconditions:
    def test_empty_values_rejected(self):
        with pytest.raises(ValueError):
            jenks_breaks([], 2)

    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError):
            jenks_breaks([1.0, 2.0], 0)

    def test_k_above_distinct_count_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            jenks_breaks([1.0, 1.0, 2.0], 3)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            jenks_breaks([1.0, math.nan], 1)

    def test_oracle_rejects_large_instances(self):
        with pytest.raises(ValueError):
            jenks_oracle(list(range(15)), 2)


class TestInvariants:
    def test_breaks_strictly_ascending_and_end_at_max(self):
        values = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]
        for k in range(1, 6):
            result = jenks_breaks(values, k)
            assert list(result.breaks) == sorted(set(result.breaks))
            assert result.breaks[-1] == max(values)
            assert len(result.breaks) == k

    def test_every_class_occupied(self):
        values = [1.0, 1.0, 2.0, 5.0, 5.0, 9.0, 12.0]
        for k in range(1, 6):
            result = jenks_breaks(values, k)
            assert set(result.assignments) == set(range(1, k + 1))

    def test_sorted_values_get_monotone_assignments(self):
        values = sorted([0.4, 1.2, 1.2, 3.4, 7.7, 8.0, 8.0, 15.0])
        result = jenks_breaks(values, 3)
        assert list(result.assignments) == sorted(result.assignments)

    def test_gvf_between_zero_and_one_and_nondecreasing_in_k(self):
        values = [2.0, 3.0, 3.0, 5.0, 11.0, 13.0, 20.0, 21.0]
        gvfs = []
        for k in range(1, 6):
            result = jenks_breaks(values, k)
            assert 0.0 <= result.gvf <= 1.0
            gvfs.append(result.gvf)
        assert gvfs == sorted(gvfs)


@st.composite
def jenks_instances(draw):
    # duplicate-heavy: values drawn from a small alphabet
    alphabet = draw(
        st.lists(
            st.integers(min_value=-50, max_value=50), min_size=1, max_size=8, unique=True
        )
    )
    values = draw(
        st.lists(st.sampled_from(alphabet), min_size=1, max_size=14)
    )
    distinct = len(set(values))
    k = draw(st.integers(min_value=1, max_value=min(5, distinct)))
    return [float(v) for v in values], k


class TestOracleEquivalence:
    @settings(max_examples=300, deadline=None)
    @given(jenks_instances())
    def test_dp_matches_enumeration(self, instance):
        values, k = instance
        fast = jenks_breaks(values, k)
        slow = jenks_oracle(values, k)
        assert fast.breaks == slow.breaks
        assert fast.sdcm == slow.sdcm
        assert fast.assignments == slow.assignments

    def test_dp_matches_enumeration_on_fractional_values(self):
        rng = random.Random(7)
        for _ in range(100):
            n = rng.randint(1, 14)
            values = [rng.choice([0.1, 0.25, 0.3, 1.7, 2.4, 5.5]) for _ in range(n)]
            k = rng.randint(1, min(5, len(set(values))))
            fast = jenks_breaks(values, k)
            slow = jenks_oracle(values, k)
            assert fast.breaks == slow.breaks
            assert fast.sdcm == slow.sdcm


class TestAffineEquivariance:
    @settings(max_examples=150, deadline=None)
    @given(
        st.lists(st.integers(min_value=-2000, max_value=2000), min_size=1, max_size=12),
        st.integers(min_value=-2, max_value=5),
        st.integers(min_value=-1024, max_value=1024),
    )
    def test_exact_affine_transform_preserves_memberships(self, ints, log2_a, b_1024):
        # a is a power of two and all inputs are multiples of 1/1024, so the
        # transformed floats are exact and memberships must match exactly
        values = [v / 1024.0 for v in ints]
        k = min(3, len(set(values)))
        a = 2.0**log2_a
        b = b_1024 / 1024.0
        base = jenks_breaks(values, k)
        moved = jenks_breaks([a * v + b for v in values], k)
        assert moved.assignments == base.assignments


class TestAssignLikert:
    def test_levels_follow_breaks(self):
        breaks = (10.0, 20.0, 30.0, 40.0, 50.0)
        values = [5.0, 10.0, 10.1, 25.0, 30.0, 49.0, 50.0]
        assert assign_likert(values, breaks) == [1, 1, 2, 3, 3, 5, 5]

    def test_value_above_last_break_warns_and_gets_top_level(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="circity.classify"):
            levels = assign_likert([60.0], (10.0, 20.0, 30.0, 40.0, 50.0))
        assert levels == [5]
        assert any("above" in rec.message for rec in caplog.records)

    def test_accepts_classification_object(self):
        result = jenks_breaks([1.0, 2.0, 3.0, 10.0, 11.0, 12.0], 2)
        assert assign_likert([2.5, 11.0], result) == [1, 2]

    def test_five_level_cohort_top_class_is_level_five(self):
        values = [1.0, 2.0, 10.0, 11.0, 20.0, 21.0, 30.0, 31.0, 40.0, 41.0]
        result = jenks_breaks(values, 5)
        levels = assign_likert(values, result)
        assert max(levels) == 5
        assert levels[-1] == 5
        assert min(levels) == 1


class TestLargeCohortPath:
    def test_float_dp_agrees_with_exact_mode_on_clustered_data(self):
        # 200 distinct values forces the float path; the same data rounded
        # into the exact path via fewer distinct values is not comparable,
        # so instead check the float path against the oracle-checked exact
        # path on a subsample boundary: invariants only.
        rng = random.Random(21)
        values = [rng.gauss(mu, 1.0) for mu in (0.0, 50.0, 120.0) for _ in range(70)]
        result = jenks_breaks(values, 5)
        assert len(result.breaks) == 5
        assert result.breaks[-1] == max(values)
        assert list(result.breaks) == sorted(result.breaks)
        assert set(result.assignments) == {1, 2, 3, 4, 5}
        assert 0.0 <= result.gvf <= 1.0
        # well-separated clusters: a 3-class solution must cut between them
        three = jenks_breaks(values, 3)
        by_class = {}
        for v, c in zip(values, three.assignments):
            by_class.setdefault(c, []).append(v)
        assert max(by_class[1]) < 25.0
        assert min(by_class[3]) > 85.0


class TestEstimator:
    def test_fit_predict_roundtrip(self):
        values = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0]
        est = JenksClassifier(n_classes=2).fit(values)
        assert est.breaks_ == (3.0, 12.0)
        assert list(est.predict([2.0, 11.5])) == [1, 2]

    def test_predict_requires_fit(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            JenksClassifier().predict([1.0])

    def test_accepts_column_vector(self):
        est = JenksClassifier(n_classes=2).fit(np.array([[1.0], [2.0], [10.0]]))
        assert len(est.breaks_) == 2

    def test_get_params(self):
        assert JenksClassifier(n_classes=4).get_params()["n_classes"] == 4
