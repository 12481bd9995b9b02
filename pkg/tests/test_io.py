import os

import numpy as np
import pytest

from pcdown.cloud import PointCloud, make_synthetic
from pcdown.errors import DatasetError
from pcdown.io import (
    dataset_class_names,
    load_cache,
    load_dataset,
    load_xyz,
    save_cache,
    save_xyz,
)


def test_xyz_round_trip_exact(tmp_path):
    cloud = make_synthetic("torus", 50, seed=0)
    path = tmp_path / "t.xyz"
    save_xyz(path, cloud)
    back = load_xyz(path)
    # repr() emits enough digits for float64 round trips
    assert np.array_equal(back.points, cloud.points)
    assert back.label == cloud.label
    assert back.name == "t"


def test_xyz_without_label(tmp_path):
    path = tmp_path / "plain.xyz"
    path.write_text("0 0 0\n1.5 2 -3\n")
    cloud = load_xyz(path)
    assert cloud.label is None
    assert cloud.points.shape == (2, 3)
    assert cloud.points[1, 2] == -3.0


def test_xyz_skips_blanks_and_comments(tmp_path):
    path = tmp_path / "messy.xyz"
    path.write_text("# label 3\n\n# free-form comment\n0 0 0\n\n1 1 1\n")
    cloud = load_xyz(path)
    assert cloud.label == 3
    assert cloud.n == 2


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("0 0\n", "expected 3 coordinates"),
        ("0 0 zero\n", "non-numeric"),
        ("# label x\n0 0 0\n", "bad label"),
        ("", "no points"),
    ],
)
def test_xyz_parse_errors(tmp_path, body, fragment):
    path = tmp_path / "bad.xyz"
    path.write_text(body)
    with pytest.raises(DatasetError, match=fragment):
        load_xyz(path)


def test_xyz_error_reports_line_number(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 0\n1 1\n")
    with pytest.raises(DatasetError, match="bad.xyz:2"):
        load_xyz(path)


def test_xyz_missing_file():
    with pytest.raises(DatasetError):
        load_xyz("/nonexistent/missing.xyz")


def test_cache_round_trip(tmp_path):
    cloud = make_synthetic("sphere", 33, seed=1)
    path = tmp_path / "c.pcv"
    save_cache(path, cloud)
    back = load_cache(path)
    # coordinates are quantized to float32 on disk
    assert np.array_equal(back.points, cloud.points.astype("<f4").astype(np.float64))
    assert back.label == cloud.label
    # a second round trip is lossless
    save_cache(path, back)
    again = load_cache(path)
    assert np.array_equal(again.points, back.points)


def test_cache_label_absent_encoded_as_minus_one(tmp_path):
    cloud = PointCloud(np.zeros((1, 3)))
    path = tmp_path / "nolabel.pcv"
    save_cache(path, cloud)
    raw = path.read_bytes()
    assert raw[:4] == b"PCV1"
    assert raw[-4:] == (-1).to_bytes(4, "little", signed=True)
    assert load_cache(path).label is None


def test_cache_rejects_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "bad.pcv"
    path.write_bytes(b"XXXX" + b"\x00" * 8)
    with pytest.raises(DatasetError, match="bad magic"):
        load_cache(path)
    good = tmp_path / "good.pcv"
    save_cache(good, make_synthetic("cube", 5, seed=0))
    data = good.read_bytes()
    path.write_bytes(b"PCV1" + data[4:-2])
    with pytest.raises(DatasetError, match="expected"):
        load_cache(path)


def _write_dataset(root):
    for split, count in (("train", 3), ("test", 2)):
        for cname in ("zebra", "apple"):
            d = root / split / cname
            d.mkdir(parents=True)
            for i in range(count):
                save_xyz(d / f"{cname}{i}.xyz", make_synthetic("sphere", 8, seed=i))


def test_dataset_class_names_sorted_union(tmp_path):
    _write_dataset(tmp_path)
    assert dataset_class_names(tmp_path) == ["apple", "zebra"]


def test_load_dataset_labels_and_order(tmp_path):
    _write_dataset(tmp_path)
    train = load_dataset(tmp_path, "train")
    assert len(train) == 6
    # classes are relabeled by sorted name: apple=0, zebra=1
    assert [c.label for c in train] == [0, 0, 0, 1, 1, 1]
    assert train[0].name == "apple0"


def test_load_dataset_writes_and_reuses_cache(tmp_path):
    _write_dataset(tmp_path)
    load_dataset(tmp_path, "train")
    sidecars = sorted((tmp_path / "train").rglob("*.pcv"))
    assert len(sidecars) == 6
    # stale the .xyz and confirm the cache is refreshed
    target = tmp_path / "train" / "apple" / "apple0.xyz"
    save_xyz(target, make_synthetic("cube", 4, seed=99))
    os.utime(target.with_suffix(".pcv"), (0, 0))
    fresh = load_dataset(tmp_path, "train")
    assert fresh[0].n == 4


def test_load_dataset_cache_disabled(tmp_path):
    _write_dataset(tmp_path)
    load_dataset(tmp_path, "train", cache=False)
    assert list((tmp_path / "train").rglob("*.pcv")) == []


def test_load_dataset_errors(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path, "train")
    (tmp_path / "train" / "apple").mkdir(parents=True)
    with pytest.raises(DatasetError):
        load_dataset(tmp_path, "train")
