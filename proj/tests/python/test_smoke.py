import json
import math

import numpy as np
import pytest

import vdn


def test_constants():
    assert vdn.CHECKPOINT_VERSION == "vdn-ckpt-1"
    assert vdn.TEMPLATE_VERSION == "meter-template-1"


def test_encode_decode_round_trip():
    vectors = [(40.0, 24.0, 0.6, 0.8), (12.0, 52.0, -1.0, 0.0)]
    h = vdn.encode_heatmap(vectors, 16, 16)
    v = vdn.encode_scalarmap(vectors, 16, 16)
    assert h.shape == (16, 16) or h.shape == (1, 16, 16)
    assert h.max() == pytest.approx(1.0)
    dets = vdn.decode(h, v)
    assert len(dets) == 2
    for d in dets:
        want = min(vectors, key=lambda p: math.hypot(p[0] - d["x"], p[1] - d["y"]))
        assert math.hypot(want[0] - d["x"], want[1] - d["y"]) <= 4.0
        assert d["alpha"] == pytest.approx(want[2], abs=1e-6)
        assert d["beta"] == pytest.approx(want[3], abs=1e-6)


def test_similarities():
    assert vdn.oks_pair(0.0, 100.0) == 1.0
    assert vdn.vds_pair(0.0, 0.5) == 1.0
    assert vdn.oks_pair(1.0, 100.0) == pytest.approx(math.exp(-1.0 / (2 * 100 * 0.01)))


def test_hungarian():
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    assert vdn.hungarian(cost) == [1, 0, 2]


def test_homography_recovers_known_map():
    src = [(0, 0), (10, 0), (10, 10), (0, 10), (3, 7)]
    true = np.array([[1.2, 0.1, 5.0], [-0.2, 0.9, 3.0], [1e-3, 2e-3, 1.0]])

    def apply(p):
        q = true @ np.array([p[0], p[1], 1.0])
        return (q[0] / q[2], q[1] / q[2])

    h = vdn.estimate_homography(src, [apply(p) for p in src])
    np.testing.assert_allclose(h, true, atol=1e-9)


def test_rendered_dial_reads_back():
    image, coco, template = vdn.render_dial(3)
    assert image.dtype == np.uint8 and image.shape[2] == 3
    assert template["version"] == vdn.TEMPLATE_VERSION
    assert coco["annotations"]
    kp = coco["annotations"][0]["keypoints"]
    tip, tail = np.array(kp[0:2]), np.array(kp[6:8])
    d = (tip - tail) / np.linalg.norm(tip - tail)
    det = {"x": tip[0], "y": tip[1], "alpha": d[0], "beta": d[1]}
    # Template frame -> image: canonical box onto the annotated box.
    x, y, w, hgt = coco["annotations"][0]["bbox"]
    tx, ty, tw, th = template["bbox"]
    corners = lambda bx, by, bw, bh: [(bx, by), (bx + bw, by), (bx + bw, by + bh), (bx, by + bh)]
    h = vdn.estimate_homography(corners(tx, ty, tw, th), corners(x, y, w, hgt))
    out = vdn.read_meter([det], template, h)
    assert len(out) == 1
    ann = coco["annotations"][0]
    if ann.get("value") is not None:
        step = (template["scale_values"][-1] - template["scale_values"][0]) / (len(template["scale_values"]) - 1)
        assert out[0]["value"] == pytest.approx(ann["value"], abs=0.03 * abs(step))


def test_config_hash():
    a = vdn.config_hash()
    assert len(a) == 16
    assert vdn.config_hash({"train": {"seed": 2}}) != a
    with pytest.raises(ValueError):
        vdn.config_hash({"bogus": 1})


def test_gradcheck_passes():
    rows = vdn.gradcheck(1)
    assert rows
    assert all(err < tol for _, _, err, tol in rows)


def test_model_forward_save_load(tmp_path):
    cfg = {"input_size": [32, 32], "encoder_channels": [4, 8, 8, 8, 8], "deconv_channels": [8, 8, 8]}
    m = vdn.Model(cfg, seed=1)
    patch = np.full((32, 32, 3), 200, dtype=np.uint8)
    h, v = m.forward(patch)
    assert h.shape == (1, 1, 8, 8)
    assert v.shape == (1, 2, 8, 8)
    path = tmp_path / "ckpt.json"
    m.save(str(path))
    assert json.loads(path.read_text())["version"] == vdn.CHECKPOINT_VERSION
    back = vdn.Model.load(str(path))
    h2, _ = back.forward(patch)
    np.testing.assert_array_equal(h, h2)
    assert isinstance(back.detect(patch, threshold=0.99), list)
    with pytest.raises(ValueError):
        m.forward(np.zeros((16, 16, 3), dtype=np.uint8))
