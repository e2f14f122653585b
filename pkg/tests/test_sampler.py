"""Snippet planning over the video timeline."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxflow.sampler import center_frame, plan_snippets


class TestPlanExamples:
    def test_hundred_frames_ten_snippets(self):
        plan = plan_snippets(100, 10, 5)
        assert list(plan.starts) == [0, 11, 21, 32, 42, 53, 63, 74, 84, 95]

    def test_two_snippets_hit_both_ends(self):
        for t in (5, 17, 80, 333):
            plan = plan_snippets(t, 2, 5)
            assert list(plan.starts) == [0, t - 5]

    def test_single_snippet_is_centered(self):
        plan = plan_snippets(100, 1, 5)
        assert plan.starts == ((100 - 5) // 2,)

    def test_short_video_pads_with_last_frame(self):
        plan = plan_snippets(3, 1, 5)
        assert plan.padded
        assert plan.frames(0) == [0, 1, 2, 2, 2]
        assert plan.frame_pairs(0) == [(0, 1), (1, 2), (2, 2), (2, 2)]

    def test_frames_of_regular_snippet(self):
        plan = plan_snippets(100, 10, 5)
        assert plan.frames(1) == [11, 12, 13, 14, 15]

    def test_input_validation(self):
        with pytest.raises(ValueError):
            plan_snippets(0, 10, 5)
        with pytest.raises(ValueError):
            plan_snippets(10, 0, 5)
        with pytest.raises(ValueError):
            plan_snippets(10, 1, 1)


class TestCenterFrame:
    def test_first_snippet(self):
        plan = plan_snippets(100, 10, 5)
        assert center_frame(plan, 0) == 2

    def test_last_snippet(self):
        plan = plan_snippets(100, 10, 5)
        assert center_frame(plan, 9) == 97

    def test_padded_plan_clamps(self):
        plan = plan_snippets(3, 1, 5)
        assert center_frame(plan, 0) == 2  # min(0 + 2, T-1)

    def test_index_out_of_range(self):
        plan = plan_snippets(100, 10, 5)
        with pytest.raises(IndexError):
            center_frame(plan, 10)
        with pytest.raises(IndexError):
            center_frame(plan, -1)


class TestPlanProperties:
    @given(
        t=st.integers(2, 500),
        k=st.integers(2, 30),
        l=st.integers(2, 20),
    )
    @settings(max_examples=300, deadline=None)
    def test_coverage_and_monotonicity(self, t, k, l):
        if t < l:
            return
        plan = plan_snippets(t, k, l)
        starts = list(plan.starts)
        assert starts[0] == 0
        assert starts[-1] == t - l
        assert all(0 <= s <= t - l for s in starts)
        assert all(b >= a for a, b in zip(starts, starts[1:]))
        ideal = (t - l) / (k - 1)
        for i, s in enumerate(starts):
            assert abs(s - i * ideal) <= 0.5 + 1e-9
        for i, c in enumerate(plan.centers):
            assert c == starts[i] + l // 2

    def test_defaults_cover_half_of_100_frames(self):
        plan = plan_snippets(100, 10, 5)
        covered = set()
        for k in range(10):
            covered.update(plan.frames(k))
        assert len(covered) == 50
