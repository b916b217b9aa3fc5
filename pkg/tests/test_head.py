import numpy as np
import pytest

from planspot.anchors import AnchorSet
from planspot.geometry import BBox
from planspot.head import (
    CLASS_LOGIT_MARGIN,
    Detection,
    HeadConfig,
    LossWeights,
    SlotCollisionError,
    decode,
    encode_detections,
    loss_and_grad,
    slot_index,
)
from planspot.tiling import Annotation


def tiny_cfg():
    return HeadConfig(anchors=AnchorSet(((10.0, 10.0),)), num_classes=1, grid_h=1, grid_w=1, net_size=100)


def multi_cfg():
    return HeadConfig(
        anchors=AnchorSet(((20.0, 30.0), (60.0, 40.0), (40.0, 90.0))),
        num_classes=5,
        grid_h=4,
        grid_w=4,
        net_size=128,
    )


def random_detections(cfg, rng, n=6):
    dets, seen = [], set()
    for _ in range(n):
        cx, cy = rng.uniform(2, cfg.net_size - 2, 2)
        pw, ph = cfg.anchors.priors[rng.integers(len(cfg.anchors))]
        w = pw * np.exp(rng.uniform(-1, 1))
        h = ph * np.exp(rng.uniform(-1, 1))
        det = Detection(int(rng.integers(cfg.num_classes)), BBox(cx - w / 2, cy - h / 2, w, h), float(rng.uniform(0.05, 0.95)))
        key = slot_index(det, cfg)
        if key in seen:
            continue
        seen.add(key)
        dets.append(det)
    return dets


def test_decode_all_zero_tensor():
    dets = decode(np.zeros((1, 1, 6)), tiny_cfg(), score_threshold=0.1)
    assert len(dets) == 1
    det = dets[0]
    assert det.score == pytest.approx(0.5, abs=1e-12)
    assert (det.box.cx, det.box.cy) == (50.0, 50.0)
    assert (det.box.w, det.box.h) == (10.0, 10.0)
    assert det.class_id == 0


def test_decode_suppressed_objectness():
    raw = np.zeros((1, 1, 6))
    raw[..., 4] = -20.0
    assert decode(raw, tiny_cfg(), score_threshold=0.01) == []


def test_decode_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        decode(np.zeros((2, 2, 6)), tiny_cfg())


def test_decode_rejects_non_finite():
    raw = np.zeros((1, 1, 6))
    raw[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        decode(raw, tiny_cfg())


def test_decode_score_monotone_in_objectness():
    cfg = tiny_cfg()
    scores = []
    for to in (-2.0, -0.5, 0.0, 0.7, 3.0):
        raw = np.zeros((1, 1, 6))
        raw[0, 0, 4] = to
        scores.append(decode(raw, cfg, score_threshold=0.0)[0].score)
    assert scores == sorted(scores)


def test_encode_trivial_example():
    cfg = tiny_cfg()
    enc = encode_detections([Detection(0, BBox(45, 45, 10, 10), 0.5)], cfg)
    assert np.allclose(enc[0, 0, :5], 0.0, atol=1e-12)
    assert enc[0, 0, 5] == CLASS_LOGIT_MARGIN


def test_encode_empty():
    enc = encode_detections([], tiny_cfg())
    assert np.all(enc[..., 4] == -20.0)
    assert np.all(enc[..., :4] == 0.0)


def test_encode_collision():
    cfg = tiny_cfg()
    det = Detection(0, BBox(45, 45, 10, 10), 0.5)
    with pytest.raises(SlotCollisionError, match="anchor 0"):
        encode_detections([det, det], cfg)


def test_encode_validates_score_and_center():
    cfg = tiny_cfg()
    with pytest.raises(ValueError):
        encode_detections([Detection(0, BBox(45, 45, 10, 10), 1.0)], cfg)
    with pytest.raises(ValueError, match="center"):
        encode_detections([Detection(0, BBox(120, 45, 10, 10), 0.5)], cfg)


def test_encode_decode_round_trip():
    cfg = multi_cfg()
    rng = np.random.default_rng(101)
    for _ in range(200):
        dets = random_detections(cfg, rng)
        back = decode(encode_detections(dets, cfg), cfg, score_threshold=0.01)
        assert len(back) == len(dets)
        by_slot = {slot_index(d, cfg): d for d in back}
        for det in dets:
            got = by_slot[slot_index(det, cfg)]
            assert got.class_id == det.class_id
            for attr in ("x", "y", "w", "h"):
                assert abs(getattr(got.box, attr) - getattr(det.box, attr)) < 1e-6
            assert abs(got.score - det.score) < 1e-6


def test_loss_empty_truth_suppressed_tensor():
    cfg = multi_cfg()
    t = np.zeros((4, 4, 3, 10))
    t[..., 4] = -20.0
    loss, grad = loss_and_grad(t.reshape(4, 4, 30), [], cfg)
    slots = 4 * 4 * 3
    assert loss < slots * 1e-8
    assert grad.shape == (4, 4, 30)


def test_loss_perfect_prediction_limit():
    cfg = multi_cfg()
    truths = [Annotation(1, BBox(20, 20, 30, 40)), Annotation(4, BBox(80, 70, 50, 35))]
    dets = [Detection(a.class_id, a.box, 1 - 1e-12) for a in truths]
    loss, _ = loss_and_grad(encode_detections(dets, cfg), truths, cfg)
    assert loss < 1e-9


def test_loss_non_negative_and_shape_checked():
    cfg = multi_cfg()
    rng = np.random.default_rng(0)
    for _ in range(20):
        raw = rng.normal(0, 1, (4, 4, 30))
        truths = [Annotation(0, BBox(30, 30, 25, 35))]
        loss, grad = loss_and_grad(raw, truths, cfg)
        assert loss >= 0.0
        assert grad.shape == raw.shape
    with pytest.raises(ValueError, match="shape"):
        loss_and_grad(np.zeros((2, 2, 30)), [], cfg)


def test_gradient_matches_finite_differences():
    cfg = HeadConfig(
        anchors=AnchorSet(((20.0, 30.0), (50.0, 40.0))), num_classes=3, grid_h=2, grid_w=2, net_size=100
    )
    rng = np.random.default_rng(42)
    eps = 1e-4
    for _ in range(10):
        raw = rng.normal(0, 1.0, (2, 2, cfg.channels))
        truths = [
            Annotation(int(rng.integers(3)), BBox(*_centered(rng.uniform(8, 92, 2), rng.uniform(10, 60, 2))))
        ]
        _, grad = loss_and_grad(raw, truths, cfg)
        fd = np.zeros_like(raw)
        for idx in np.ndindex(raw.shape):
            up, down = raw.copy(), raw.copy()
            up[idx] += eps
            down[idx] -= eps
            fd[idx] = (loss_and_grad(up, truths, cfg)[0] - loss_and_grad(down, truths, cfg)[0]) / (2 * eps)
        rel = np.abs(grad - fd) / np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-8)
        assert rel.max() < 1e-4


def _centered(center, size):
    (cx, cy), (w, h) = center, size
    return cx - w / 2, cy - h / 2, w, h


def test_ignore_region_masks_noobj_term():
    cfg = tiny_cfg()
    raw = np.zeros((1, 1, 6))  # objectness sigmoid = 0.5 at the only slot
    base_loss, _ = loss_and_grad(raw, [], cfg)
    assert base_loss == pytest.approx(0.5 * 0.25)
    # covering the predicted center with an ignore region removes the term
    masked_loss, masked_grad = loss_and_grad(raw, [Annotation(0, BBox(40, 40, 20, 20), ignore=True)], cfg)
    assert masked_loss == 0.0
    assert np.all(masked_grad == 0.0)


def test_high_overlap_prediction_skips_noobj_term():
    cfg = HeadConfig(anchors=AnchorSet(((10.0, 10.0), (40.0, 40.0))), num_classes=1, grid_h=1, grid_w=1, net_size=100)
    truth = Annotation(0, BBox(30, 30, 40, 40))  # responsible slot: anchor 1
    raw = np.zeros((1, 1, cfg.channels))
    loss_with, _ = loss_and_grad(raw, [truth], cfg)
    # anchor 0 decodes to a 10x10 box at the center, IoU with truth 100/1600 < 0.6,
    # so it still pays the no-object penalty
    t = raw.reshape(1, 1, 2, 6).copy()
    t[0, 0, 0, 2:4] = np.log(4.0)  # blow anchor 0 up to 40x40 -> IoU 1 with truth
    loss_without, _ = loss_and_grad(t.reshape(1, 1, cfg.channels), [truth], cfg)
    # anchor 0 is never responsible, so the only change is the dropped term
    noobj_term = 0.5 * 0.25
    assert loss_with == pytest.approx(loss_without + noobj_term)


def test_weights_are_configurable():
    cfg = tiny_cfg()
    raw = np.zeros((1, 1, 6))
    loss_default, _ = loss_and_grad(raw, [], cfg)
    loss_heavy, _ = loss_and_grad(raw, [], cfg, LossWeights(lambda_noobj=2.0))
    assert loss_heavy == pytest.approx(4 * loss_default)
