"""Differentiable training losses: per-task terms plus the subset penalty.

The subset penalty pulls every generated point toward its nearest input
point, which is what makes the relaxed matrix converge to (near-)selections
instead of arbitrary convex combinations. Total objective:

    L = L_task + alpha * L_subset
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.optimize import linear_sum_assignment

from .tasks import TaskHead

__all__ = [
    "LossWeights",
    "subset_loss",
    "chamfer_loss",
    "emd_loss",
    "quaternion_loss",
    "task_loss",
    "total_loss",
]


@dataclass(frozen=True)
class LossWeights:
    """Loss mixing knobs. alpha scales the subset term; lambda_emd scales the
    EMD part of the reconstruction loss; translation_weight scales the
    translation error against the quaternion error for registration."""

    alpha: float = 30.0
    lambda_emd: float = 0.1
    translation_weight: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "lambda_emd", "translation_weight"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


def _sqdists(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """(..., k, 3) x (..., n, 3) -> (..., k, n) squared distances."""
    diff = a.unsqueeze(-2) - b.unsqueeze(-3)
    return (diff * diff).sum(dim=-1)


def subset_loss(source: torch.Tensor, generated: torch.Tensor) -> torch.Tensor:
    """Mean over generated points of the squared distance to the nearest
    source point. Zero exactly when every generated point is an input point."""
    return _sqdists(generated, source).min(dim=-1).values.mean()


def chamfer_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Same convention as metrics.chamfer_distance (symmetric average)."""
    d = _sqdists(a, b)
    return 0.5 * (d.min(dim=-1).values.mean() + d.min(dim=-2).values.mean())


def emd_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean matched Euclidean distance; the assignment is recomputed each
    call (exact Hungarian) and gradients flow through the matched pair
    distances only."""
    if a.shape[-2] != b.shape[-2]:
        raise ValueError(f"EMD needs equal sizes, got {a.shape[-2]} and {b.shape[-2]}")
    a3 = a if a.ndim == 3 else a.unsqueeze(0)
    b3 = b if b.ndim == 3 else b.unsqueeze(0)
    total = 0.0
    for i in range(a3.shape[0]):
        cost = torch.cdist(a3[i], b3[i]).detach().cpu().numpy()
        rows, cols = linear_sum_assignment(cost)
        diff = a3[i][rows] - b3[i][cols]
        total = total + torch.sqrt((diff * diff).sum(dim=-1) + 1e-12).mean()
    return total / a3.shape[0]


def quaternion_loss(
    pred_quat: torch.Tensor,
    pred_trans: torch.Tensor,
    true_quat: torch.Tensor,
    true_trans: torch.Tensor,
    translation_weight: float = 1.0,
) -> torch.Tensor:
    """Squared quaternion error (sign-aligned) plus weighted squared
    translation error, averaged over the batch."""
    pq = pred_quat if pred_quat.ndim == 2 else pred_quat.unsqueeze(0)
    pt = pred_trans if pred_trans.ndim == 2 else pred_trans.unsqueeze(0)
    tq = true_quat if true_quat.ndim == 2 else true_quat.unsqueeze(0)
    tt = true_trans if true_trans.ndim == 2 else true_trans.unsqueeze(0)
    # q and -q are the same rotation: align signs before the residual
    sign = torch.where((pq * tq).sum(dim=1, keepdim=True) < 0, -1.0, 1.0)
    q_err = ((pq - sign * tq) ** 2).sum(dim=1)
    t_err = ((pt - tt) ** 2).sum(dim=1)
    return (q_err + translation_weight * t_err).mean()


def task_loss(head: TaskHead, sampled, target, weights: LossWeights) -> torch.Tensor:
    """Dispatch on the head kind.

    classification:     sampled (B, k, 3), target (B,) int labels
    reconstruction(*):  sampled (B, k, 3), target (B, n, 3) reference points
    registration:       sampled (src, tgt) pair of (B, k, 3), target
                        (quat (B, 4), trans (B, 3))
    """
    if head.kind == "classification":
        logits = head.module(sampled)
        if logits.ndim == 1:
            logits = logits.unsqueeze(0)
        labels = target.reshape(-1).long()
        return F.cross_entropy(logits, labels)
    if head.kind in ("reconstruction", "reconstruction_fold"):
        recon = head.module(sampled)
        loss = chamfer_loss(target, recon)
        if weights.lambda_emd > 0:
            loss = loss + weights.lambda_emd * emd_loss(target, recon)
        return loss
    if head.kind == "registration":
        src, tgt = sampled
        quat, trans = head.module(src, tgt)
        true_quat, true_trans = target
        return quaternion_loss(quat, trans, true_quat, true_trans, weights.translation_weight)
    raise ValueError(f"unknown task kind {head.kind!r}")


def total_loss(
    head: TaskHead, sampled, target, source, weights: LossWeights
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """task + alpha * subset; returns (total, task_term, subset_term).

    For registration, sampled/source are (src, tgt) tuples and the subset
    term averages over both clouds.
    """
    t_loss = task_loss(head, sampled, target, weights)
    if head.kind == "registration":
        s_loss = 0.5 * (subset_loss(source[0], sampled[0]) + subset_loss(source[1], sampled[1]))
    else:
        s_loss = subset_loss(source, sampled)
    return t_loss + weights.alpha * s_loss, t_loss, s_loss
