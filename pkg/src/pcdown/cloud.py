"""Core point cloud containers and synthetic shape generation.

Conventions used throughout the package:
  * a point cloud is an (n, 3) float array, one xyz row per point,
  * clouds are immutable once constructed (the array is marked read-only),
  * quaternions are unit length in (w, x, y, z) order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PointCloud",
    "RigidTransform",
    "DownsampleResult",
    "make_synthetic",
    "SYNTHETIC_SHAPES",
    "add_gaussian_noise",
    "random_rigid_transform",
]

SYNTHETIC_SHAPES = ("sphere", "cube", "torus", "plane")

# radii chosen so every canonical shape is centered at the origin and its
# farthest point sits exactly on the unit sphere
_CUBE_HALF = 1.0 / math.sqrt(3.0)
_PLANE_HALF = 1.0 / math.sqrt(2.0)
_TORUS_MAJOR = 0.7
_TORUS_MINOR = 0.3


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) array of points, got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise ValueError("a point cloud needs at least one point")
    if not np.isfinite(pts).all():
        raise ValueError("point coordinates must be finite")
    return pts


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Immutable (n, 3) point set with an optional integer class label."""

    points: np.ndarray
    label: int | None = None
    name: str | None = None

    def __post_init__(self):
        pts = _as_points(self.points).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def subset(self, indices) -> "PointCloud":
        idx = np.asarray(indices, dtype=np.int64)
        return PointCloud(self.points[idx], label=self.label, name=self.name)

    def permuted(self, perm) -> "PointCloud":
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise ValueError("perm must be a permutation of range(n)")
        return PointCloud(self.points[perm], label=self.label, name=self.name)

    def normalized(self) -> "PointCloud":
        """Center at the centroid and scale into the unit ball."""
        pts = self.points - self.points.mean(axis=0)
        radius = float(np.linalg.norm(pts, axis=1).max())
        if radius > 0:
            pts = pts / radius
        return PointCloud(pts, label=self.label, name=self.name)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (unit quaternion, wxyz) plus translation."""

    quaternion: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(4).copy()
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if not (np.isfinite(q).all() and np.isfinite(t).all()):
            raise ValueError("transform components must be finite")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"quaternion must be unit length, got |q|={norm:.8f}")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "quaternion", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.quaternion
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation_matrix().T + self.translation

    def apply_cloud(self, cloud: PointCloud) -> PointCloud:
        return PointCloud(self.apply(cloud.points), label=cloud.label, name=cloud.name)

    def inverse(self) -> "RigidTransform":
        w, x, y, z = self.quaternion
        conj = np.array([w, -x, -y, -z])
        rinv = self.rotation_matrix().T
        return RigidTransform(conj, -(rinv @ self.translation))

    def angle_degrees(self) -> float:
        """Rotation angle of the quaternion in degrees."""
        return math.degrees(2.0 * math.acos(min(1.0, abs(float(self.quaternion[0])))))


@dataclass(frozen=True)
class DownsampleResult:
    """Output of the full downsampling pipeline for one cloud.

    generated: (m, 3) virtual points produced by the sampling matrix.
    matched:   indices of the nearest real points, duplicates dropped.
    completed: matched indices padded back to exactly m via farthest-point
               completion; always a superset of matched.
    """

    generated: np.ndarray
    matched: np.ndarray
    completed: np.ndarray

    def __post_init__(self):
        gen = _as_points(self.generated).copy()
        gen.setflags(write=False)
        matched = np.asarray(self.matched, dtype=np.int64).copy()
        completed = np.asarray(self.completed, dtype=np.int64).copy()
        if len(np.unique(matched)) != matched.size:
            raise ValueError("matched indices must be unique")
        if len(np.unique(completed)) != completed.size:
            raise ValueError("completed indices must be unique")
        if completed.size != gen.shape[0]:
            raise ValueError("completed must contain exactly m indices")
        if not set(matched.tolist()) <= set(completed.tolist()):
            raise ValueError("completed must contain every matched index")
        matched.setflags(write=False)
        completed.setflags(write=False)
        object.__setattr__(self, "generated", gen)
        object.__setattr__(self, "matched", matched)
        object.__setattr__(self, "completed", completed)

    @property
    def m(self) -> int:
        return self.generated.shape[0]


def _sphere_points(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cube_points(rng: np.random.Generator, n: int) -> np.ndarray:
    face = rng.integers(0, 6, size=n)
    uv = rng.uniform(-_CUBE_HALF, _CUBE_HALF, size=(n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, _CUBE_HALF, -_CUBE_HALF)
    for i in range(n):
        others = [d for d in range(3) if d != axis[i]]
        pts[i, axis[i]] = sign[i]
        pts[i, others[0]] = uv[i, 0]
        pts[i, others[1]] = uv[i, 1]
    return pts


def _torus_points(rng: np.random.Generator, n: int) -> np.ndarray:
    # rejection sampling in the tube angle so density is uniform over area
    pts = np.empty((n, 3))
    filled = 0
    while filled < n:
        want = n - filled
        theta = rng.uniform(0.0, 2.0 * math.pi, size=2 * want)
        keep = rng.uniform(0.0, 1.0, size=2 * want) < (
            (_TORUS_MAJOR + _TORUS_MINOR * np.cos(theta)) / (_TORUS_MAJOR + _TORUS_MINOR)
        )
        theta = theta[keep][:want]
        phi = rng.uniform(0.0, 2.0 * math.pi, size=theta.size)
        ring = _TORUS_MAJOR + _TORUS_MINOR * np.cos(theta)
        block = np.stack(
            [ring * np.cos(phi), ring * np.sin(phi), _TORUS_MINOR * np.sin(theta)], axis=1
        )
        pts[filled : filled + block.shape[0]] = block
        filled += block.shape[0]
    return pts


def _plane_points(rng: np.random.Generator, n: int) -> np.ndarray:
    xy = rng.uniform(-_PLANE_HALF, _PLANE_HALF, size=(n, 2))
    return np.concatenate([xy, np.zeros((n, 1))], axis=1)


_SHAPE_FNS = {
    "sphere": _sphere_points,
    "cube": _cube_points,
    "torus": _torus_points,
    "plane": _plane_points,
}


def make_synthetic(shape: str, n: int, seed: int, label: int | None = None) -> PointCloud:
    """Sample n points from a canonical origin-centered surface.

    Shapes: unit sphere, cube surface (circumradius 1), torus with R=0.7 /
    r=0.3, and a z=0 square (circumradius 1). All fit inside the unit ball
    and every point lies on the ideal surface, which the tests rely on.
    Same arguments always produce bitwise-identical output.
    """
    if shape not in _SHAPE_FNS:
        raise ValueError(f"unknown shape {shape!r}, expected one of {SYNTHETIC_SHAPES}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    pts = _SHAPE_FNS[shape](rng, n)
    if label is None:
        label = SYNTHETIC_SHAPES.index(shape)
    return PointCloud(pts, label=label, name=f"{shape}-{seed}")


def add_gaussian_noise(cloud: PointCloud, level: float, seed: int) -> PointCloud:
    """Perturb each coordinate with N(0, (level * per-dim std)^2) noise.

    level is relative to the per-dimension standard deviation of the clean
    cloud, so level=0.02 means 2% jitter regardless of the cloud's scale.
    level=0 returns an identical copy.
    """
    if level < 0:
        raise ValueError("noise level must be non-negative")
    if level == 0:
        return PointCloud(cloud.points, label=cloud.label, name=cloud.name)
    rng = np.random.default_rng(seed)
    scale = cloud.points.std(axis=0) * level
    noisy = cloud.points + rng.normal(size=cloud.points.shape) * scale
    return PointCloud(noisy, label=cloud.label, name=cloud.name)


def random_rigid_transform(
    rng: np.random.Generator,
    max_angle_deg: float = 45.0,
    max_translation: float = 0.3,
) -> RigidTransform:
    """Uniform random axis, angle in [0, max_angle_deg], translation in a ball."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = math.radians(rng.uniform(0.0, max_angle_deg))
    q = np.concatenate([[math.cos(angle / 2.0)], math.sin(angle / 2.0) * axis])
    # uniform in the ball of radius max_translation
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    radius = max_translation * rng.uniform(0.0, 1.0) ** (1.0 / 3.0)
    return RigidTransform(q, radius * direction)
