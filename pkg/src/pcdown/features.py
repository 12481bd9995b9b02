"""Per-point feature extraction for the learned sampler.

A shared MLP lifts each point independently, a max-pool over points builds a
global descriptor, and the two are concatenated, so every point sees both
its own geometry and the whole shape. LayerNorm (not BatchNorm) keeps the
map per-cloud deterministic and exactly permutation-equivariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .cloud import PointCloud

__all__ = ["PointFeatureEncoder", "FeatureMap", "extract_features"]


class PointFeatureEncoder(nn.Module):
    """Shared per-point MLP + max-pooled global context.

    forward maps (..., n, 3) to (..., n, 2 * widths[-1]): the first half of
    each feature row is local, the second half is the pooled global feature
    broadcast back to every point.
    """

    def __init__(self, widths: tuple[int, ...] = (64, 64, 64, 128, 128), in_dim: int = 3):
        super().__init__()
        if not widths:
            raise ValueError("need at least one layer width")
        layers = []
        prev = in_dim
        for w in widths:
            layers += [nn.Linear(prev, w), nn.LayerNorm(w), nn.ReLU()]
            prev = w
        self.local_mlp = nn.Sequential(*layers)
        self.local_dim = widths[-1]
        self.global_dim = widths[-1]

    @property
    def feature_dim(self) -> int:
        return self.local_dim + self.global_dim

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        if points.shape[-1] != 3:
            raise ValueError(f"points must end in xyz, got shape {tuple(points.shape)}")
        local = self.local_mlp(points)
        pooled = local.max(dim=-2, keepdim=True).values
        return torch.cat([local, pooled.expand_as(local)], dim=-1)


@dataclass(frozen=True)
class FeatureMap:
    """Features for one cloud plus the local/global split point."""

    features: torch.Tensor
    local_dim: int
    global_dim: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be (n, d)")
        if self.features.shape[1] != self.local_dim + self.global_dim:
            raise ValueError("feature width must equal local_dim + global_dim")

    @property
    def local(self) -> torch.Tensor:
        return self.features[:, : self.local_dim]

    @property
    def global_part(self) -> torch.Tensor:
        return self.features[:, self.local_dim :]


def extract_features(cloud: PointCloud, encoder: PointFeatureEncoder) -> FeatureMap:
    dtype = next(encoder.parameters()).dtype
    pts = torch.from_numpy(cloud.points.copy()).to(dtype)
    feats = encoder(pts)
    return FeatureMap(feats, encoder.local_dim, encoder.global_dim)
