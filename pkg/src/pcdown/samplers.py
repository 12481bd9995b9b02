"""Classical downsampling baselines: random, farthest-point, voxel grid.

All samplers return index arrays into the input cloud, deterministic given
their arguments. Ties are always broken toward the lowest point index, and
distance comparisons use squared Euclidean distances (same ordering, no
sqrt rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .metrics import pairwise_sqdist

__all__ = [
    "random_sample",
    "fps_sample",
    "fps_completion",
    "voxel_sample",
    "match_to_subset",
    "SamplerSpec",
    "run_sampler",
    "SAMPLER_KINDS",
]

SAMPLER_KINDS = ("random", "fps", "voxel")


def _check_m(cloud: PointCloud, m: int) -> None:
    if not 1 <= m <= cloud.n:
        raise ValueError(f"m must be in [1, {cloud.n}], got {m}")


def random_sample(cloud: PointCloud, m: int, seed: int = 0) -> np.ndarray:
    """Uniform sample of m distinct indices."""
    _check_m(cloud, m)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(cloud.n, size=m, replace=False)).astype(np.int64)


def fps_sample(cloud: PointCloud, m: int, start: int = 0) -> np.ndarray:
    """Greedy farthest-point sampling.

    Starts from `start` and repeatedly adds the point maximizing the distance
    to the already-selected set (max-min criterion). Returns indices in
    selection order.
    """
    _check_m(cloud, m)
    if not 0 <= start < cloud.n:
        raise ValueError(f"start index {start} out of range")
    pts = cloud.points
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = start
    # squared distance from every point to the selected set so far
    min_sq = ((pts - pts[start]) ** 2).sum(axis=1)
    for k in range(1, m):
        nxt = int(np.argmax(min_sq))  # argmax takes the first max: lowest index wins ties
        chosen[k] = nxt
        np.minimum(min_sq, ((pts - pts[nxt]) ** 2).sum(axis=1), out=min_sq)
    return chosen


def fps_completion(cloud: PointCloud, selected, m: int) -> np.ndarray:
    """Extend an index set to exactly m indices by the farthest-point rule.

    The existing indices are kept (in order) and new ones are appended, each
    maximizing the distance to everything already in the set. An empty seed
    set starts at index 0, matching fps_sample's default.
    """
    _check_m(cloud, m)
    selected = np.asarray(selected, dtype=np.int64).reshape(-1)
    if len(np.unique(selected)) != selected.size:
        raise ValueError("selected indices must be unique")
    if selected.size > m:
        raise ValueError(f"already have {selected.size} > m={m} indices")
    if selected.size == m:
        return selected.copy()
    pts = cloud.points
    out = np.empty(m, dtype=np.int64)
    if selected.size == 0:
        out[0] = 0
        filled = 1
        min_sq = ((pts - pts[0]) ** 2).sum(axis=1)
    else:
        out[: selected.size] = selected
        filled = selected.size
        min_sq = pairwise_sqdist(pts, pts[selected]).min(axis=1)
    for k in range(filled, m):
        nxt = int(np.argmax(min_sq))
        out[k] = nxt
        np.minimum(min_sq, ((pts - pts[nxt]) ** 2).sum(axis=1), out=min_sq)
    return out


def _voxel_keys(pts: np.ndarray, resolution: int) -> np.ndarray:
    lo = pts.min(axis=0)
    extent = pts.max(axis=0) - lo
    extent = np.where(extent > 0, extent, 1.0)
    cell = np.floor((pts - lo) / extent * resolution).astype(np.int64)
    np.clip(cell, 0, resolution - 1, out=cell)
    return cell[:, 0] * resolution * resolution + cell[:, 1] * resolution + cell[:, 2]


def _occupied_count(pts: np.ndarray, resolution: int) -> int:
    return len(np.unique(_voxel_keys(pts, resolution)))


def voxel_sample(
    cloud: PointCloud, m: int, seed: int = 0, resolution: int | None = None
) -> np.ndarray:
    """Voxel-grid sampling tuned so the occupied-voxel count lands near m.

    Unless a resolution is given, binary-search the smallest grid resolution
    with at least m occupied voxels, then keep whichever neighboring
    resolution is closest to m. One representative per voxel: the point
    nearest the voxel center (lowest index on ties). Overshoot is trimmed
    by a seeded random choice; undershoot is filled by farthest-point
    completion, so exactly m indices come back.
    """
    _check_m(cloud, m)
    pts = cloud.points
    if resolution is None:
        hi = 1
        while _occupied_count(pts, hi) < m and hi < 4 * cloud.n:
            hi *= 2
        lo = max(1, hi // 2)
        # smallest resolution with count >= m (count is monotone enough in practice)
        while lo < hi:
            mid = (lo + hi) // 2
            if _occupied_count(pts, mid) >= m:
                hi = mid
            else:
                lo = mid + 1
        resolution = lo
        if resolution > 1:
            below = _occupied_count(pts, resolution - 1)
            at = _occupied_count(pts, resolution)
            if abs(below - m) < abs(at - m):
                resolution = resolution - 1
    if resolution < 1:
        raise ValueError("resolution must be >= 1")

    keys = _voxel_keys(pts, resolution)
    lo_corner = pts.min(axis=0)
    extent = np.where(pts.max(axis=0) - lo_corner > 0, pts.max(axis=0) - lo_corner, 1.0)
    reps = []
    for key in np.unique(keys):
        members = np.nonzero(keys == key)[0]
        cell = np.array(
            [key // (resolution * resolution), (key // resolution) % resolution, key % resolution]
        )
        center = lo_corner + (cell + 0.5) / resolution * extent
        d = ((pts[members] - center) ** 2).sum(axis=1)
        reps.append(int(members[int(np.argmin(d))]))
    reps = np.array(sorted(set(reps)), dtype=np.int64)

    if reps.size > m:
        rng = np.random.default_rng(seed)
        reps = np.sort(rng.choice(reps, size=m, replace=False))
    elif reps.size < m:
        reps = fps_completion(cloud, reps, m)
    return reps


def match_to_subset(cloud: PointCloud, generated: np.ndarray) -> np.ndarray:
    """Snap generated points to nearest real indices, dropping duplicates.

    Order follows the first occurrence in the generated sequence; nearest
    ties go to the lowest index. The result can be shorter than generated.
    """
    gen = np.asarray(generated, dtype=np.float64)
    if gen.ndim != 2 or gen.shape[1] != 3:
        raise ValueError(f"generated must be (m, 3), got {gen.shape}")
    nearest = pairwise_sqdist(gen, cloud.points).argmin(axis=1)
    return np.array(list(dict.fromkeys(nearest.tolist())), dtype=np.int64)


@dataclass(frozen=True)
class SamplerSpec:
    """Which classical sampler to run and with what knobs."""

    kind: str
    m: int
    seed: int = 0
    fps_start: int = 0
    voxel_resolution: int | None = None

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"kind must be one of {SAMPLER_KINDS}, got {self.kind!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")


def run_sampler(cloud: PointCloud, spec: SamplerSpec) -> np.ndarray:
    if spec.kind == "random":
        return random_sample(cloud, spec.m, seed=spec.seed)
    if spec.kind == "fps":
        return fps_sample(cloud, spec.m, start=spec.fps_start)
    return voxel_sample(cloud, spec.m, seed=spec.seed, resolution=spec.voxel_resolution)
