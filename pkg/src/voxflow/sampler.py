"""Uniform snippet sampling over a video timeline.

A video of T frames is split into K snippets of L consecutive frames with
start indices spaced evenly across [0, T-L]. Videos shorter than L are
padded by repeating the final frame, which yields zero motion in the
padded pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def _round_half_up_ratio(num: int, den: int) -> int:
    """round(num/den) with exact integer arithmetic, halves away from zero."""
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True)
class SnippetPlan:
    total_frames: int
    snippet_count: int
    snippet_len: int
    starts: tuple[int, ...]
    centers: tuple[int, ...]
    padded: bool = False

    def frames(self, k: int) -> list[int]:
        """Frame indices of snippet k; padded plans repeat the last frame."""
        start = self.starts[self._check(k)]
        last = self.total_frames - 1
        return [min(start + offset, last) for offset in range(self.snippet_len)]

    def frame_pairs(self, k: int) -> list[tuple[int, int]]:
        """The L-1 consecutive (t, t+1) frame index pairs of snippet k."""
        frames = self.frames(k)
        return list(zip(frames[:-1], frames[1:]))

    def _check(self, k: int) -> int:
        if not 0 <= k < self.snippet_count:
            raise IndexError(f"snippet index {k} outside [0, {self.snippet_count})")
        return k


def plan_snippets(total_frames: int, snippet_count: int, snippet_len: int) -> SnippetPlan:
    """Plan K snippet start indices over a T-frame video.

    For K >= 2 starts are round(k * (T-L) / (K-1)); K == 1 centers the single
    snippet. T < L produces a padded plan with all starts at frame 0.
    """
    t, k, l = total_frames, snippet_count, snippet_len
    if t < 1:
        raise ValueError(f"total_frames must be >= 1, got {t}")
    if k < 1:
        raise ValueError(f"snippet_count must be >= 1, got {k}")
    if l < 2:
        raise ValueError(f"snippet_len must be >= 2, got {l}")

    padded = t < l
    if padded:
        starts = tuple(0 for _ in range(k))
    elif k == 1:
        starts = ((t - l) // 2,)
    else:
        starts = tuple(_round_half_up_ratio(i * (t - l), k - 1) for i in range(k))
    centers = tuple(min(s + l // 2, t - 1) for s in starts)
    return SnippetPlan(t, k, l, starts, centers, padded)


def center_frame(plan: SnippetPlan, k: int) -> int:
    """Center-frame index of snippet k (input to a spatial appearance stream)."""
    return plan.centers[plan._check(k)]
