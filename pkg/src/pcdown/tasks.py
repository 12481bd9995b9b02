"""Task networks the sampler is trained against.

These deliberately follow the common fixed-input-density recipes (shared
conv1x1 stacks with BatchNorm, max-pool bottlenecks): they are pretrained on
full clouds, then frozen, and the sampler has to learn points that keep them
happy. BatchNorm statistics baked in at full density are exactly what makes
naive subsets degrade, which is the effect the sampler exploits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .cloud import PointCloud, RigidTransform

__all__ = [
    "TASK_KINDS",
    "TaskHead",
    "PointNetClassifier",
    "MlpAutoencoder",
    "MFoldConfig",
    "MFoldingNet",
    "RegistrationNet",
    "classify",
    "reconstruct",
    "register",
]

TASK_KINDS = ("classification", "reconstruction", "reconstruction_fold", "registration")


def _conv_stack(widths: tuple[int, ...], in_ch: int = 3) -> nn.Sequential:
    layers = []
    prev = in_ch
    for w in widths:
        layers += [nn.Conv1d(prev, w, 1), nn.BatchNorm1d(w), nn.ReLU()]
        prev = w
    return nn.Sequential(*layers)


def _ensure_batched(points: torch.Tensor) -> tuple[torch.Tensor, bool]:
    if points.ndim == 2:
        return points.unsqueeze(0), True
    if points.ndim == 3:
        return points, False
    raise ValueError(f"points must be (k, 3) or (B, k, 3), got {tuple(points.shape)}")


class PointNetClassifier(nn.Module):
    """Vanilla shared-MLP classifier: conv1x1 stack, max-pool, FC head."""

    def __init__(
        self,
        num_classes: int,
        point_widths: tuple[int, ...] = (64, 64, 64, 128, 1024),
        fc_widths: tuple[int, ...] = (512, 256),
    ):
        super().__init__()
        self.point_mlp = _conv_stack(point_widths)
        fc = []
        prev = point_widths[-1]
        for w in fc_widths:
            fc += [nn.Linear(prev, w), nn.BatchNorm1d(w), nn.ReLU()]
            prev = w
        fc.append(nn.Linear(prev, num_classes))
        self.head = nn.Sequential(*fc)
        self.num_classes = num_classes

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        x, squeeze = _ensure_batched(points)
        feats = self.point_mlp(x.transpose(1, 2)).max(dim=2).values
        logits = self.head(feats)
        return logits.squeeze(0) if squeeze else logits


class MlpAutoencoder(nn.Module):
    """Point-cloud autoencoder with a fully-connected coordinate decoder."""

    def __init__(
        self,
        n_out: int,
        encoder_widths: tuple[int, ...] = (64, 128, 128, 256),
        code_dim: int = 128,
        decoder_widths: tuple[int, ...] = (256, 256),
    ):
        super().__init__()
        self.encoder = _conv_stack(encoder_widths + (code_dim,))
        dec = []
        prev = code_dim
        for w in decoder_widths:
            dec += [nn.Linear(prev, w), nn.ReLU()]
            prev = w
        dec.append(nn.Linear(prev, n_out * 3))
        self.decoder = nn.Sequential(*dec)
        self.n_out = n_out
        self.code_dim = code_dim

    def encode(self, points: torch.Tensor) -> torch.Tensor:
        x, squeeze = _ensure_batched(points)
        code = self.encoder(x.transpose(1, 2)).max(dim=2).values
        return code.squeeze(0) if squeeze else code

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        x, squeeze = _ensure_batched(points)
        code = self.encoder(x.transpose(1, 2)).max(dim=2).values
        out = self.decoder(code).reshape(-1, self.n_out, 3)
        return out.squeeze(0) if squeeze else out


@dataclass(frozen=True)
class MFoldConfig:
    """Patchwise folding decoder layout.

    The codeword (dim d) splits into M chunks of d/M; each chunk folds its
    own copy of a 2D grid, so the output has M * grid_h * grid_w points and
    decoder parameter count shrinks as M grows.
    """

    m_patches: int = 4
    code_dim: int = 256
    grid: tuple[int, int] = (16, 16)
    fold_widths: tuple[int, ...] = (64, 32)

    def __post_init__(self):
        if self.m_patches < 1:
            raise ValueError("m_patches must be >= 1")
        if self.code_dim % self.m_patches != 0:
            raise ValueError(
                f"code_dim {self.code_dim} must be divisible by m_patches {self.m_patches}"
            )

    @property
    def chunk_dim(self) -> int:
        return self.code_dim // self.m_patches

    @property
    def points_out(self) -> int:
        return self.m_patches * self.grid[0] * self.grid[1]


def _fold_mlp(in_dim: int, widths: tuple[int, ...]) -> nn.Sequential:
    layers = []
    prev = in_dim
    for w in widths:
        layers += [nn.Linear(prev, w), nn.ReLU()]
        prev = w
    layers.append(nn.Linear(prev, 3))
    return nn.Sequential(*layers)


class MFoldingNet(nn.Module):
    """Encoder + M-patch folding decoder.

    All patches share the two folding MLPs; only the code chunk differs per
    patch. fold1 maps (chunk, uv) -> xyz; fold2 refines with
    (chunk, xyz, uv) -> xyz. Grid coordinates are inputs, not parameters.
    """

    def __init__(self, config: MFoldConfig, encoder_widths: tuple[int, ...] = (64, 128, 128, 256)):
        super().__init__()
        self.config = config
        self.encoder = _conv_stack(encoder_widths + (config.code_dim,))
        self.fold1 = _fold_mlp(config.chunk_dim + 2, config.fold_widths)
        self.fold2 = _fold_mlp(config.chunk_dim + 3 + 2, config.fold_widths)
        gh, gw = config.grid
        u, v = torch.meshgrid(
            torch.linspace(0.0, 1.0, gh), torch.linspace(0.0, 1.0, gw), indexing="ij"
        )
        self.register_buffer("grid_uv", torch.stack([u.reshape(-1), v.reshape(-1)], dim=1))

    def decoder_parameter_count(self) -> int:
        return sum(p.numel() for p in self.fold1.parameters()) + sum(
            p.numel() for p in self.fold2.parameters()
        )

    def decode(self, code: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        batch = code.shape[0]
        g = cfg.grid[0] * cfg.grid[1]
        chunks = code.reshape(batch, cfg.m_patches, cfg.chunk_dim)
        chunks = chunks.unsqueeze(2).expand(batch, cfg.m_patches, g, cfg.chunk_dim)
        uv = self.grid_uv.to(code.dtype).expand(batch, cfg.m_patches, g, 2)
        first = self.fold1(torch.cat([chunks, uv], dim=-1))
        second = self.fold2(torch.cat([chunks, first, uv], dim=-1))
        return second.reshape(batch, cfg.points_out, 3)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        x, squeeze = _ensure_batched(points)
        code = self.encoder(x.transpose(1, 2)).max(dim=2).values
        out = self.decode(code)
        return out.squeeze(0) if squeeze else out


class RegistrationNet(nn.Module):
    """Single-pass rigid registration: shared encoder, concat codes, regress
    a quaternion + translation aligning source onto target."""

    def __init__(
        self,
        encoder_widths: tuple[int, ...] = (64, 64, 64, 128, 256),
        fc_widths: tuple[int, ...] = (256, 128),
    ):
        super().__init__()
        self.encoder = _conv_stack(encoder_widths)
        fc = []
        prev = 2 * encoder_widths[-1]
        for w in fc_widths:
            fc += [nn.Linear(prev, w), nn.ReLU()]
            prev = w
        final = nn.Linear(prev, 7)
        # bias toward the identity transform so early training is stable
        with torch.no_grad():
            final.bias.zero_()
            final.bias[0] = 1.0
        fc.append(final)
        self.head = nn.Sequential(*fc)

    def _encode(self, points: torch.Tensor) -> torch.Tensor:
        return self.encoder(points.transpose(1, 2)).max(dim=2).values

    def forward(
        self, source: torch.Tensor, target: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        src, squeeze = _ensure_batched(source)
        tgt, _ = _ensure_batched(target)
        raw = self.head(torch.cat([self._encode(src), self._encode(tgt)], dim=1))
        quat = raw[:, :4]
        quat = quat / quat.norm(dim=1, keepdim=True).clamp_min(1e-12)
        trans = raw[:, 4:]
        if squeeze:
            return quat.squeeze(0), trans.squeeze(0)
        return quat, trans


@dataclass
class TaskHead:
    """A task network plus its kind; freeze() locks it for sampler training."""

    kind: str
    module: nn.Module
    frozen: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"kind must be one of {TASK_KINDS}, got {self.kind!r}")

    def freeze(self) -> "TaskHead":
        for p in self.module.parameters():
            p.requires_grad_(False)
        self.module.eval()
        self.frozen = True
        return self

    def checksum(self) -> str:
        """Order-stable digest over every parameter and buffer."""
        digest = hashlib.sha256()
        state = self.module.state_dict()
        for name in sorted(state):
            digest.update(name.encode())
            digest.update(state[name].detach().cpu().numpy().tobytes())
        return digest.hexdigest()


def _cloud_tensor(cloud, module: nn.Module) -> torch.Tensor:
    dtype = next(module.parameters()).dtype
    if isinstance(cloud, PointCloud):
        arr = cloud.points
    else:
        arr = np.asarray(cloud, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] != 3:
        raise ValueError(f"expected a nonempty (k, 3) array, got shape {arr.shape}")
    return torch.from_numpy(np.array(arr, dtype=np.float64)).to(dtype)


def classify(cloud, head: TaskHead) -> np.ndarray:
    """Logits for one cloud (any (k, 3) array or PointCloud)."""
    if head.kind != "classification":
        raise ValueError(f"head kind is {head.kind!r}, not classification")
    head.module.eval()
    with torch.no_grad():
        logits = head.module(_cloud_tensor(cloud, head.module))
    return logits.cpu().numpy()


def reconstruct(cloud, head: TaskHead) -> np.ndarray:
    """Reconstructed (n_out, 3) points for one cloud."""
    if head.kind not in ("reconstruction", "reconstruction_fold"):
        raise ValueError(f"head kind is {head.kind!r}, not a reconstruction task")
    head.module.eval()
    with torch.no_grad():
        out = head.module(_cloud_tensor(cloud, head.module))
    return out.cpu().numpy().astype(np.float64)


def register(source, target, head: TaskHead) -> RigidTransform:
    """Predicted rigid transform taking source onto target."""
    if head.kind != "registration":
        raise ValueError(f"head kind is {head.kind!r}, not registration")
    head.module.eval()
    with torch.no_grad():
        quat, trans = head.module(
            _cloud_tensor(source, head.module), _cloud_tensor(target, head.module)
        )
    q = quat.cpu().numpy().astype(np.float64)
    q = q / np.linalg.norm(q)
    return RigidTransform(q, trans.cpu().numpy().astype(np.float64))
