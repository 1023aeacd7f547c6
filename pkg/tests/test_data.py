import struct

import numpy as np
import pytest

from sitforge.datasets import (IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC, _parse_idx_images,
                               gen_synthetic, load_csv, load_idx)
from sitforge.errors import ConfigError, FormatError
from sitforge.network import InitPolicy, TrainPlan, init_network, train_batch
from sitforge.scenario import evaluate


def test_synthetic_deterministic():
    a = gen_synthetic(5, 8, 10, 4, 0.3, seed=42)
    b = gen_synthetic(5, 8, 10, 4, 0.3, seed=42)
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.train_idx, b.train_idx)


def test_synthetic_partition_disjoint_and_complete():
    ds = gen_synthetic(5, 8, 10, 4, 0.3, seed=1)
    assert not set(ds.train_idx) & set(ds.test_idx)
    for c in range(5):
        xt, _ = ds.train_patterns([c])
        xv, _ = ds.test_patterns([c])
        assert len(xt) == 10 and len(xv) == 4


def test_synthetic_rejects_degenerate_parameters():
    with pytest.raises(ConfigError):
        gen_synthetic(1, 8, 10, 4, 0.3)
    with pytest.raises(ConfigError):
        gen_synthetic(5, 8, 10, 4, 0.0)
    with pytest.raises(ConfigError):
        gen_synthetic(5, 1, 10, 4, 0.3)


def test_synthetic_separable_limit_trains_to_ceiling():
    # near-zero spread: clusters are linearly separable and full training
    # lands essentially perfect accuracy
    ds = gen_synthetic(4, 8, 25, 10, 0.005, seed=2)
    net = init_network([8, 20, 12, 4], InitPolicy(hidden_std=0.3, output_init="zero"), seed=2)
    x, y = ds.train_patterns()
    train_batch(net, x, y, TrainPlan(epochs_first=30, epochs_later=30, eta_first=0.1,
                                     eta_later=0.1, minibatch_size=32, shuffle_seed=0))
    xt, yt = ds.test_patterns()
    acc, _ = evaluate(net, xt, yt, 4)
    assert acc >= 0.99


def idx_image_bytes(images):
    arr = np.asarray(images, dtype=np.uint8)
    head = struct.pack(">IIII", IDX_IMAGE_MAGIC, arr.shape[0], arr.shape[1], arr.shape[2])
    return head + arr.tobytes()


def idx_label_bytes(labels):
    arr = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", IDX_LABEL_MAGIC, len(arr)) + arr.tobytes()


def test_idx_pixel_scaling(tmp_path):
    img = tmp_path / "img"
    img.write_bytes(idx_image_bytes(np.array([[[0, 128], [255, 64]]])))
    parsed = _parse_idx_images(img)
    assert parsed.shape == (1, 4)
    assert np.array_equal(parsed[0], np.array([0.0, 128 / 255, 1.0, 64 / 255]))


def test_idx_load_with_split(tmp_path):
    rng = np.random.default_rng(3)
    images = rng.integers(0, 256, (20, 2, 2))
    labels = np.repeat([0, 1], 10)
    (tmp_path / "img").write_bytes(idx_image_bytes(images))
    (tmp_path / "lab").write_bytes(idx_label_bytes(labels))
    ds = load_idx(tmp_path / "img", tmp_path / "lab", test_fraction=0.2)
    assert ds.dim == 4
    assert ds.n_classes == 2
    assert len(ds.test_idx) == 4  # 2 per class
    again = load_idx(tmp_path / "img", tmp_path / "lab", test_fraction=0.2)
    assert np.array_equal(ds.inputs, again.inputs)


def test_idx_truncated_file(tmp_path):
    data = idx_image_bytes(np.zeros((2, 2, 2), dtype=np.uint8))
    (tmp_path / "img").write_bytes(data[:-3])
    with pytest.raises(FormatError, match="expected 24 bytes but found 21"):
        _parse_idx_images(tmp_path / "img")


def test_idx_bad_magic(tmp_path):
    (tmp_path / "img").write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + b"\x00" * 4)
    with pytest.raises(FormatError, match="offset 0"):
        _parse_idx_images(tmp_path / "img")


def test_idx_count_mismatch(tmp_path):
    (tmp_path / "img").write_bytes(idx_image_bytes(np.zeros((4, 2, 2), dtype=np.uint8)))
    (tmp_path / "lab").write_bytes(idx_label_bytes([0, 0, 1]))
    with pytest.raises(FormatError, match="image count 4 != label count 3"):
        load_idx(tmp_path / "img", tmp_path / "lab")


def test_csv_two_rows(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,label\n1.0,2.0,x\n3.0,4.0,x\n")
    ds = load_csv(path, "label", test_fraction=0.5)
    assert len(ds.inputs) == 2
    assert ds.dim == 2


def test_csv_minmax_and_constant_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,label\n1.0,7.0,p\n3.0,7.0,p\n5.0,7.0,q\n7.0,7.0,q\n")
    ds = load_csv(path, "label", test_fraction=0.5)
    assert np.array_equal(ds.inputs[:, 0], [0.0, 1 / 3, 2 / 3, 1.0])
    assert np.all(ds.inputs[:, 1] == 0.0)  # constant column normalizes to zero


def test_csv_label_order_of_first_appearance(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,label\n1,z\n2,z\n3,m\n4,m\n5,z\n6,m\n")
    ds = load_csv(path, "label", test_fraction=0.4)
    assert ds.labels.tolist() == [0, 0, 1, 1, 0, 1]


def test_csv_non_numeric_cell(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,label\n1.0,oops,x\n2.0,3.0,x\n")
    with pytest.raises(FormatError, match="row 2, column 'b'"):
        load_csv(path, "label")


def test_csv_missing_label_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1.0,2.0\n")
    with pytest.raises(FormatError, match="no column named"):
        load_csv(path, "label")
