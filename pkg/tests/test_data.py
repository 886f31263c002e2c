import sys
from pathlib import Path

import numpy as np
import pytest


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl
from ssllab.data.binary import read_cifar10_records


def two_cifar_records() -> tuple[np.ndarray, np.ndarray]:
    pixels = np.zeros((2, 3, 32, 32), np.uint8)
    pixels[0, 0] = 255
    pixels[1, 2, 0, :] = np.arange(32)
    return pixels, np.array([0, 9])


def test_synth_shapes():
    source = sl.synth_shapes(200, (3, 16, 16), classes=2, seed=0)
    assert np.bincount(source.labels).tolist() == [100, 100]
    assert source.item_shape == (3, 16, 16)
    assert source.label_kind == "single"

    again = sl.synth_shapes(200, (3, 16, 16), classes=2, seed=0)
    assert np.array_equal(source.raw(), again.raw())
    assert np.array_equal(source.labels, again.labels)

    other = sl.synth_shapes(200, (3, 16, 16), classes=2, seed=1)
    assert not np.array_equal(source.raw(), other.raw())

    uneven = sl.synth_shapes(10, (3, 8, 8), classes=3)
    assert np.bincount(uneven.labels).tolist() == [4, 3, 3]

    pixels = source.raw()
    assert pixels.dtype == np.float32
    assert pixels.min() >= 0 and pixels.max() <= 1


def test_synth_shapes_multilabel():
    source = sl.synth_shapes(400, (3, 16, 16), classes=4, multilabel=True, seed=3)
    assert source.labels.shape == (400, 4)
    assert source.label_kind == "multilabel"
    assert source.num_classes == 4
    frequency = source.labels.mean(axis=0)
    assert ((frequency > 0.4) & (frequency < 0.6)).all()


def test_synth_config_errors():
    with pytest.raises(sl.ConfigError):
        sl.synth_shapes(10, classes=1)
    with pytest.raises(sl.ConfigError):
        sl.synth_shapes(10, classes=7, multilabel=True)
    with pytest.raises(sl.ConfigError):
        sl.synth_shapes(10, (1, 16, 16), classes=8)
    with pytest.raises(sl.ConfigError):
        sl.synth_gaussian(0)


def test_synth_gaussian():
    source = sl.synth_gaussian(100, (3, 16, 16), seed=1)
    assert source.num_items == 100
    assert not source.is_labeled
    assert source.value_range is None
    assert source.normalized_range is None
    with pytest.raises(sl.UnlabeledSplitError):
        source.labels


def test_cifar10_golden_file(tmp_path):
    pixels, labels = two_cifar_records()
    file = tmp_path / "test_batch.bin"
    sl.write_cifar10(file, pixels, labels)
    assert file.stat().st_size == 2 * 3073

    raw = file.read_bytes()
    assert raw[0] == 0
    assert raw[3073] == 9
    # first record: the red plane is all 255, green and blue are 0
    assert set(raw[1 : 1 + 1024]) == {255}
    assert set(raw[1 + 1024 : 3073]) == {0}
    # second record: first row of the blue plane is 0..31
    blue = 3073 + 1 + 2048
    assert list(raw[blue : blue + 32]) == list(range(32))

    source = sl.load_cifar10(tmp_path, "test")
    assert source.name == "cifar10-test"
    assert source.num_items == 2
    assert source.labels.tolist() == [0, 9]
    assert source.num_classes == 10
    assert np.array_equal(source.raw(), pixels.astype(np.float32) / 255)


def test_cifar10_official_subfolder(tmp_path):
    pixels, labels = two_cifar_records()
    sl.write_cifar10(tmp_path / "cifar-10-batches-bin" / "test_batch.bin", pixels, labels)
    assert sl.load_cifar10(tmp_path, "test").num_items == 2


def test_cifar10_errors(tmp_path):
    pixels, labels = two_cifar_records()
    file = tmp_path / "test_batch.bin"
    sl.write_cifar10(file, pixels, labels)

    truncated = tmp_path / "truncated.bin"
    truncated.write_bytes(file.read_bytes()[:-1])
    with pytest.raises(sl.DatasetFormatError):
        read_cifar10_records(truncated)

    raw = bytearray(file.read_bytes())
    raw[3073] = 10
    corrupt = tmp_path / "corrupt.bin"
    corrupt.write_bytes(bytes(raw))
    with pytest.raises(sl.CorruptRecordError, match="record 1"):
        read_cifar10_records(corrupt)

    with pytest.raises(FileNotFoundError):
        sl.load_cifar10(tmp_path, "train")
    with pytest.raises(FileNotFoundError):
        sl.load_cifar10(tmp_path / "missing", "test")
    with pytest.raises(sl.ConfigError):
        sl.load_cifar10(tmp_path, "validation")


def test_stl10(tmp_path):
    rng = sl.make_rng(0)
    pixels = rng.integers(0, 256, size=(3, 3, 96, 96), dtype=np.uint8)
    sl.write_stl10(tmp_path, "train", pixels, np.array([0, 4, 9]))
    sl.write_stl10(tmp_path, "unlabeled", pixels)

    # label bytes are stored as 1-10
    assert list((tmp_path / "train_y.bin").read_bytes()) == [1, 5, 10]
    # planes are column-major on disk
    raw = np.fromfile(tmp_path / "train_X.bin", dtype=np.uint8)
    assert raw[1] == pixels[0, 0, 1, 0]

    train = sl.load_stl10(tmp_path, "train")
    assert train.labels.tolist() == [0, 4, 9]
    assert np.array_equal(train.raw(), pixels.astype(np.float32) / 255)

    unlabeled = sl.load_stl10(tmp_path, "unlabeled")
    assert unlabeled.num_items == 3
    with pytest.raises(sl.UnlabeledSplitError):
        unlabeled.labels
    with pytest.raises(sl.UnlabeledSplitError):
        sl.labeled_batch(unlabeled, np.arange(2))

    (tmp_path / "train_y.bin").write_bytes(bytes([1, 0, 3]))
    with pytest.raises(sl.CorruptRecordError):
        sl.load_stl10(tmp_path, "train")
    (tmp_path / "train_y.bin").write_bytes(bytes([1, 2]))
    with pytest.raises(sl.DatasetFormatError):
        sl.load_stl10(tmp_path, "train")


def test_normalization():
    source = sl.synth_shapes(64, (3, 8, 8), classes=2, seed=4)
    normalized = source.get(np.arange(64))
    assert np.allclose(normalized.mean(axis=(0, 2, 3)), 0, atol=1e-4)
    assert np.allclose(normalized.std(axis=(0, 2, 3)), 1, atol=1e-3)

    norm = sl.Normalization((0.5, 0.5, 0.5), (0.25, 0.25, 0.25))
    assert sl.Normalization.from_dict(norm.to_dict()) == norm
    fixed = source.with_normalization(norm)
    assert np.allclose(fixed.get(0), (source.raw(0) - 0.5) / 0.25)

    with pytest.raises(sl.ConfigError):
        sl.Normalization((0.0,), (0.0,))
    with pytest.raises(sl.ConfigError):
        sl.Normalization((0.0, 0.0), (1.0,))


def test_batches_visit_every_index():
    source = sl.synth_gaussian(23, (1, 4, 4), seed=9)
    batches = list(source.batches(5, epoch=2))
    assert [len(b) for b in batches] == [5, 5, 5, 5, 3]
    assert sorted(np.concatenate(batches).tolist()) == list(range(23))

    assert np.array_equal(source.epoch_order(2), source.epoch_order(2))
    assert not np.array_equal(source.epoch_order(2), source.epoch_order(3))
    assert [len(b) for b in source.batches(5, drop_last=True)] == [5] * 4
    assert source.epoch_order(0, shuffle=False).tolist() == list(range(23))


def test_split():
    source = sl.synth_shapes(100, (3, 8, 8), classes=2, seed=0)
    train, val = source.split(0.1, seed=0)
    assert (train.num_items, val.num_items) == (90, 10)
    assert np.bincount(val.labels).tolist() == [5, 5]
    assert train.normalization == source.normalization
    assert val.name == f"{source.name}-val"

    with pytest.raises(sl.ConfigError):
        source.split(1.0)


def test_labeled_batch():
    source = sl.synth_shapes(10, (3, 8, 8), classes=2, seed=0)
    images, labels = sl.labeled_batch(source, np.array([3, 1]))
    assert images.shape == (2, 3, 8, 8)
    assert labels.tolist() == source.labels[[3, 1]].tolist()
    assert np.array_equal(images, source.get(np.array([3, 1])))


def test_label_count_mismatch():
    with pytest.raises(sl.LabelError):
        sl.DatasetSource("broken", np.zeros((3, 1, 2, 2), np.float32), np.array([0, 1]))
    with pytest.raises(sl.ConfigError):
        sl.DatasetSource("flat", np.zeros((3, 4), np.float32))


def main():
    test_synth_shapes()
    test_synth_shapes_multilabel()
    test_synth_config_errors()
    test_synth_gaussian()
    test_normalization()
    test_batches_visit_every_index()
    test_split()
    test_labeled_batch()
    test_label_count_mismatch()


if __name__ == "__main__":
    main()
