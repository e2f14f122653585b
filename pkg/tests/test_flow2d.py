"""Dense flow contract: both backends, against known shifts."""

import numpy as np
import pytest

from conftest import textured_frame
from voxflow.errors import DimensionMismatchError
from voxflow.flow2d import FlowParams, dense_flow, to_gray

BLOCKMATCH = FlowParams(backend="blockmatch")


def shifted_pair(dx, dy, size=128, seed=0):
    """Integer-shift pair via np.roll; truth is exact away from the wrap seam."""
    prev = textured_frame(size, size, seed=seed)
    next = np.roll(np.roll(prev, dy, axis=0), dx, axis=1)
    return prev, next


def interior(flow, margin=16):
    return flow[margin:-margin, margin:-margin]


class TestToGray:
    def test_white_and_black(self):
        white = np.full((4, 4, 3), 255, dtype=np.uint8)
        black = np.zeros((4, 4, 3), dtype=np.uint8)
        assert to_gray(white) == pytest.approx(np.ones((4, 4)))
        assert to_gray(black) == pytest.approx(np.zeros((4, 4)))

    def test_pure_red_weight(self):
        red = np.zeros((2, 2, 3), dtype=np.uint8)
        red[..., 0] = 255
        assert to_gray(red) == pytest.approx(np.full((2, 2), 0.299), abs=1e-6)

    def test_rejects_wrong_shape(self):
        with pytest.raises(DimensionMismatchError):
            to_gray(np.zeros((4, 4)))


class TestDenseFlowContract:
    def test_identical_frames_zero_flow(self):
        frame = textured_frame(96, 96)
        flow = dense_flow(frame, frame)
        assert np.abs(flow).max() < 1e-3

    def test_constant_frames_zero_flow(self):
        a = np.full((64, 64), 0.5, dtype=np.float32)
        flow = dense_flow(a, a.copy())
        assert np.all(flow == 0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            dense_flow(np.zeros((32, 32)), np.zeros((32, 48)))

    def test_determinism_bit_identical(self):
        prev, next = shifted_pair(3, -2)
        f1 = dense_flow(prev, next)
        f2 = dense_flow(prev, next)
        assert np.array_equal(f1, f2)

    def test_magnitude_cap(self):
        prev, next = shifted_pair(3, 0)
        flow = dense_flow(prev, next, FlowParams(max_flow=1.0))
        assert np.linalg.norm(flow, axis=-1).max() <= 1.0 + 1e-5


class TestFarnebackShifts:
    @pytest.mark.parametrize("dx,dy", [(3, 0), (0, 3), (-4, 2), (8, 0), (1, 1)])
    def test_shift_recovery(self, dx, dy):
        prev, next = shifted_pair(dx, dy)
        flow = interior(dense_flow(prev, next))
        assert np.median(flow[..., 0]) == pytest.approx(dx, abs=0.5)
        assert np.median(flow[..., 1]) == pytest.approx(dy, abs=0.5)

    def test_antisymmetry_on_translation(self):
        prev, next = shifted_pair(4, 1)
        fwd = interior(dense_flow(prev, next))
        bwd = interior(dense_flow(next, prev))
        disagreement = np.linalg.norm(fwd + bwd, axis=-1)
        assert np.median(disagreement) <= 1.0


class TestBlockMatchOracle:
    @pytest.mark.parametrize("dx,dy", [(2, 0), (0, -3), (5, 4)])
    def test_exact_on_integer_shifts(self, dx, dy):
        prev, next = shifted_pair(dx, dy, size=96)
        flow = interior(dense_flow(prev, next, BLOCKMATCH))
        assert np.median(flow[..., 0]) == dx
        assert np.median(flow[..., 1]) == dy
        # exact agreement on a large majority of interior pixels
        exact = (flow[..., 0] == dx) & (flow[..., 1] == dy)
        assert exact.mean() > 0.9

    def test_agrees_with_farneback(self):
        prev, next = shifted_pair(4, 0, size=96)
        fb = interior(dense_flow(prev, next))
        bm = interior(dense_flow(prev, next, BLOCKMATCH))
        epe = np.linalg.norm(fb - bm, axis=-1)
        assert np.median(epe) <= 0.5


class TestFlowParamsValidation:
    def test_rejects_bad_backend(self):
        with pytest.raises(ValueError):
            FlowParams(backend="magic")

    def test_rejects_even_window(self):
        with pytest.raises(ValueError):
            FlowParams(winsize=14)

    def test_rejects_zero_levels(self):
        with pytest.raises(ValueError):
            FlowParams(levels=0)
