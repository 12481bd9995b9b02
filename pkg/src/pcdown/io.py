"""Reading and writing point clouds.

Two on-disk forms:
  * text ``.xyz``: one "x y z" line per point, optionally preceded by a
    ``# label <int>`` header line; blank lines are skipped,
  * binary cache: magic ``PCV1``, uint32 point count, n*3 float32
    coordinates, int32 label (-1 when absent), all little-endian.

Datasets live in ``<root>/<split>/<class-name>/<id>.xyz`` and class names
map to label ids in sorted order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import DatasetError

__all__ = [
    "load_xyz",
    "save_xyz",
    "load_cache",
    "save_cache",
    "load_dataset",
    "dataset_class_names",
]

CACHE_MAGIC = b"PCV1"


def load_xyz(path) -> PointCloud:
    path = Path(path)
    label = None
    rows = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise DatasetError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            if len(fields) == 2 and fields[0] == "label":
                try:
                    label = int(fields[1])
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: bad label {fields[1]!r}") from None
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DatasetError(
                f"{path}:{lineno}: expected 3 coordinates, got {len(parts)}"
            )
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-numeric coordinate in {line!r}") from None
    if not rows:
        raise DatasetError(f"{path}: no points found")
    try:
        return PointCloud(np.array(rows, dtype=np.float64), label=label, name=path.stem)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def save_xyz(path, cloud: PointCloud) -> None:
    path = Path(path)
    lines = []
    if cloud.label is not None:
        lines.append(f"# label {cloud.label}")
    for x, y, z in cloud.points:
        # repr of a Python float round-trips all 64 bits
        lines.append(f"{float(x)!r} {float(y)!r} {float(z)!r}")
    path.write_text("\n".join(lines) + "\n")


def save_cache(path, cloud: PointCloud) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", cloud.n))
        fh.write(cloud.points.astype("<f4").tobytes())
        fh.write(struct.pack("<i", -1 if cloud.label is None else cloud.label))


def load_cache(path) -> PointCloud:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise DatasetError(f"{path}: bad magic {data[:4]!r}, expected {CACHE_MAGIC!r}")
    (n,) = struct.unpack_from("<I", data, 4)
    need = 8 + 12 * n + 4
    if len(data) != need:
        raise DatasetError(f"{path}: expected {need} bytes for {n} points, got {len(data)}")
    pts = np.frombuffer(data, dtype="<f4", count=3 * n, offset=8).reshape(n, 3)
    (label,) = struct.unpack_from("<i", data, 8 + 12 * n)
    return PointCloud(
        pts.astype(np.float64), label=None if label < 0 else label, name=path.stem
    )


def dataset_class_names(root) -> list[str]:
    root = Path(root)
    names = set()
    for split_dir in root.iterdir():
        if split_dir.is_dir():
            names.update(d.name for d in split_dir.iterdir() if d.is_dir())
    if not names:
        raise DatasetError(f"{root}: no class directories found")
    return sorted(names)


def load_dataset(root, split: str, cache: bool = True) -> list[PointCloud]:
    """Load every cloud under <root>/<split>, labels from sorted class names.

    When `cache` is set, a .pcv sidecar file is written next to each .xyz on
    first read and used on later reads (refreshed if the .xyz is newer).
    """
    root = Path(root)
    split_dir = root / split
    if not split_dir.is_dir():
        raise DatasetError(f"{split_dir}: split directory does not exist")
    class_ids = {name: i for i, name in enumerate(dataset_class_names(root))}
    clouds = []
    for class_dir in sorted(d for d in split_dir.iterdir() if d.is_dir()):
        label = class_ids[class_dir.name]
        for xyz_path in sorted(class_dir.glob("*.xyz")):
            cache_path = xyz_path.with_suffix(".pcv")
            cloud = None
            if cache and cache_path.exists() and (
                cache_path.stat().st_mtime >= xyz_path.stat().st_mtime
            ):
                cloud = load_cache(cache_path)
            if cloud is None:
                cloud = load_xyz(xyz_path)
                if cache:
                    save_cache(cache_path, cloud)
            clouds.append(PointCloud(cloud.points, label=label, name=xyz_path.stem))
    if not clouds:
        raise DatasetError(f"{split_dir}: no .xyz files found")
    return clouds
