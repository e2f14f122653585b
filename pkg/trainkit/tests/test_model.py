"""Network components: shapes, fusion, sequence head, 2D augmentation."""

import logging

import numpy as np
import pytest
import torch

from trainkit.augment2d import augment_video_frames
from trainkit.model import (
    EmptySequenceError,
    MINIATURE_SPEC,
    SequenceClassifier,
    ShapeMismatchError,
    SpatialStub,
    TemporalNet,
    TemporalNetSpec,
    TwoStreamModel,
    global_forward,
    poe_fuse,
    temporal_forward,
)


class TestTemporalSpec:
    def test_default_reduction_chain(self):
        assert TemporalNetSpec().layer_sizes() == [54, 18, 6, 2, 1]

    def test_miniature_chain(self):
        assert MINIATURE_SPEC.layer_sizes()[-1] == 1

    def test_bad_chain_rejected(self):
        with pytest.raises(ShapeMismatchError):
            TemporalNetSpec(grid=7).layer_sizes()


class TestTemporalNet:
    def test_small_forward_shape(self):
        spec = TemporalNetSpec(grid=12, in_channels=6, widths=(4, 8, 8, 16), pools=(2, 2, 3, 2))
        net = TemporalNet(spec)
        out = net(torch.randn(3, 6, 12, 12, 12))
        assert out.shape == (3, 16)

    def test_rejects_wrong_input(self):
        net = TemporalNet(MINIATURE_SPEC)
        with pytest.raises(ShapeMismatchError):
            net(torch.randn(1, 2, 5, 5, 5))
        with pytest.raises(ShapeMismatchError):
            net(torch.randn(1, 3, 6, 6, 6))

    def test_temporal_forward_sequence_shape(self):
        net = TemporalNet(MINIATURE_SPEC)
        out = temporal_forward(net, torch.randn(2, 5, 2, 6, 6, 6))
        assert out.shape == (2, 5, 4)

    def test_all_zero_input_finite(self):
        net = TemporalNet(MINIATURE_SPEC)
        net.eval()
        out = temporal_forward(net, torch.zeros(1, 2, 2, 6, 6, 6))
        assert torch.isfinite(out).all()

    def test_eval_mode_batch_independence(self):
        net = TemporalNet(MINIATURE_SPEC)
        net.eval()
        x = torch.randn(2, 1, 2, 6, 6, 6)
        single = temporal_forward(net, x)
        doubled = temporal_forward(net, torch.cat([x, x], dim=0))
        assert torch.allclose(single, doubled[:2], atol=1e-6)


class TestSequenceHead:
    def test_distribution_sums_to_one(self):
        head = SequenceClassifier(4, 8, 5)
        probs = global_forward(head, torch.randn(3, 7, 4))
        assert probs.shape == (3, 5)
        assert torch.allclose(probs.sum(dim=1), torch.ones(3), atol=1e-6)

    def test_single_step_sequence_is_valid(self):
        head = SequenceClassifier(4, 8, 5)
        probs = global_forward(head, torch.randn(1, 1, 4))
        assert torch.allclose(probs.sum(), torch.tensor(1.0), atol=1e-6)

    def test_empty_sequence_rejected(self):
        head = SequenceClassifier(4, 8, 5)
        with pytest.raises(EmptySequenceError):
            head(torch.randn(1, 0, 4))

    def test_order_sensitivity_after_training(self):
        """A head trained to separate a sequence from its reversal must
        change output when the sequence is permuted."""
        torch.manual_seed(0)
        a = torch.tensor([1.0, 0.0, 0.0, 0.0])
        b = torch.tensor([0.0, 1.0, 0.0, 0.0])
        fwd = torch.stack([a, b]).unsqueeze(0)  # class 0
        rev = torch.stack([b, a]).unsqueeze(0)  # class 1
        x = torch.cat([fwd, rev])
        y = torch.tensor([0, 1])
        head = SequenceClassifier(4, 8, 2)
        opt = torch.optim.Adam(head.parameters(), lr=0.05)
        for _ in range(200):
            opt.zero_grad()
            loss = torch.nn.functional.cross_entropy(head(x), y)
            loss.backward()
            opt.step()
            if loss < 1e-3:
                break
        head.eval()
        assert global_forward(head, fwd)[0].argmax() == 0
        assert global_forward(head, rev)[0].argmax() == 1


class TestPoeFuse:
    def test_hand_computed_example(self):
        fused = poe_fuse(torch.tensor([[0.9, 0.1]]), torch.tensor([[0.6, 0.4]]))
        np.testing.assert_allclose(fused.numpy(), [[0.931034, 0.068966]], atol=1e-5)

    def test_uniform_expert_is_neutral(self):
        other = torch.tensor([[0.7, 0.2, 0.1]])
        uniform = torch.full((1, 3), 1 / 3)
        fused = poe_fuse(uniform, other)
        assert torch.allclose(fused, other, atol=1e-7)

    def test_symmetry(self):
        a = torch.tensor([[0.5, 0.3, 0.2]])
        b = torch.tensor([[0.1, 0.1, 0.8]])
        assert torch.allclose(poe_fuse(a, b), poe_fuse(b, a))

    def test_equal_streams_fixed_point(self):
        p = torch.tensor([[0.5, 0.5]])
        assert torch.allclose(poe_fuse(p, p), p)

    def test_disjoint_support_falls_back_to_mean(self, caplog):
        a = torch.tensor([[1.0, 0.0]])
        b = torch.tensor([[0.0, 1.0]])
        with caplog.at_level(logging.WARNING, logger="trainkit"):
            fused = poe_fuse(a, b)
        assert torch.allclose(fused, torch.tensor([[0.5, 0.5]]))
        assert "product of experts" in caplog.text

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            poe_fuse(torch.ones(1, 2), torch.ones(1, 3))


class TestSpatialStream:
    def test_stub_feature_shape(self):
        stub = SpatialStub(feature_size=32)
        out = stub(torch.rand(4, 3, 64, 80))
        assert out.shape == (4, 32)

    def test_two_stream_predict_distribution(self):
        model = TwoStreamModel(MINIATURE_SPEC, n_classes=5, hidden_size=8)
        model.eval()
        snippets = torch.randn(2, 3, 2, 6, 6, 6)
        frames = torch.rand(2, 3, 3, 32, 32)
        probs = model.predict(snippets, frames)
        assert probs.shape == (2, 5)
        assert torch.allclose(probs.sum(dim=1), torch.ones(2), atol=1e-6)

    def test_augment_consistent_within_video(self):
        frames = torch.rand(4, 3, 48, 64)
        out1 = augment_video_frames(frames, seed=7)
        out2 = augment_video_frames(frames, seed=7)
        assert out1.shape == frames.shape
        assert torch.equal(out1, out2)
        # same draw applies to every frame: per-frame constant images stay constant
        flat = torch.ones(2, 3, 48, 64) * torch.tensor([0.2, 0.5, 0.8]).view(1, 3, 1, 1)
        out = augment_video_frames(flat, seed=3)
        per_frame = out.flatten(1)
        assert torch.allclose(per_frame[0], per_frame[1], atol=1e-6)

    def test_augment_varies_across_seeds(self):
        frames = torch.rand(2, 3, 48, 64)
        assert not torch.equal(
            augment_video_frames(frames, seed=1), augment_video_frames(frames, seed=2)
        )
