"""The learned relaxed sampling matrix.

A row MLP turns each point's feature into m unnormalized scores; a
temperature-controlled softmax *down each column* turns the (n, m) score
matrix into a column-stochastic matrix S, and Q = S^T P regresses m virtual
points as convex combinations of the originals. As the temperature drops
the columns approach one-hot indicator vectors, i.e. true subset selection.

At inference the matrix is thresholded into COO triplets and applied
sparsely, then the virtual points are snapped back onto real input points
(nearest match + farthest-point completion).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .cloud import DownsampleResult, PointCloud
from .features import PointFeatureEncoder
from .samplers import fps_completion, match_to_subset

__all__ = [
    "anneal_softmax",
    "SamplingMatrix",
    "SparseSamplingMatrix",
    "sparsify",
    "sparse_apply",
    "truncate_columns",
    "regress_sampled",
    "orthogonality_gap",
    "ScoreMLP",
    "DownsampleNet",
    "downsample",
    "save_sparse_matrix",
    "load_sparse_matrix",
]

DEFAULT_THRESHOLD = 0.01


@dataclass(frozen=True)
class SamplingMatrix:
    """Dense relaxed sampling matrix, shape (..., n, m), columns sum to 1."""

    dense: torch.Tensor
    temperature: float

    @property
    def n(self) -> int:
        return self.dense.shape[-2]

    @property
    def m(self) -> int:
        return self.dense.shape[-1]

    def column_sums(self) -> torch.Tensor:
        return self.dense.sum(dim=-2)


def anneal_softmax(scores: torch.Tensor, temperature: float) -> SamplingMatrix:
    """Column-wise softmax of scores / temperature.

    Shift-by-max keeps the exponentials in range at small temperatures. Every
    entry lands in (0, 1] and each column sums to 1 regardless of the scale
    of the raw scores.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = scores / temperature
    z = z - z.max(dim=-2, keepdim=True).values
    e = torch.exp(z)
    dense = e / e.sum(dim=-2, keepdim=True)
    return SamplingMatrix(dense, float(temperature))


def regress_sampled(points: torch.Tensor, matrix: SamplingMatrix) -> torch.Tensor:
    """Q = S^T P: (..., n, 3) x (..., n, m) -> (..., m, 3)."""
    if points.shape[-2] != matrix.n:
        raise ValueError(
            f"matrix has {matrix.n} rows but cloud has {points.shape[-2]} points"
        )
    return matrix.dense.transpose(-2, -1) @ points


def truncate_columns(matrix: SamplingMatrix, m: int) -> SamplingMatrix:
    """Keep the m left-most columns (flexible-size evaluation)."""
    if not 1 <= m <= matrix.m:
        raise ValueError(f"m must be in [1, {matrix.m}], got {m}")
    return SamplingMatrix(matrix.dense[..., :m], matrix.temperature)


def orthogonality_gap(matrix: SamplingMatrix) -> float:
    """||S^T S - I||_F, a diagnostic for how close columns are to distinct
    one-hot vectors (0 for a perfect permutation-style selection)."""
    s = matrix.dense
    gram = s.transpose(-2, -1) @ s
    eye = torch.eye(matrix.m, dtype=s.dtype, device=s.device)
    return float(torch.linalg.matrix_norm(gram - eye, ord="fro").mean())


@dataclass(frozen=True)
class SparseSamplingMatrix:
    """COO triplets of a thresholded sampling matrix.

    Triplets are sorted by (col, row). Columns whose entries all fell below
    the threshold keep their single largest entry, so no column is ever
    empty and sparse application always produces m points.
    """

    row: np.ndarray
    col: np.ndarray
    value: np.ndarray
    shape: tuple[int, int]
    threshold: float

    @property
    def nnz(self) -> int:
        return self.value.size

    @property
    def nonzero_fraction(self) -> float:
        return self.nnz / (self.shape[0] * self.shape[1])


def sparsify(matrix: SamplingMatrix, threshold: float = DEFAULT_THRESHOLD) -> SparseSamplingMatrix:
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"threshold must be in [0, 1), got {threshold}")
    dense = matrix.dense.detach().cpu().numpy().astype(np.float64)
    if dense.ndim != 2:
        raise ValueError("sparsify expects a single (n, m) matrix, not a batch")
    n, m = dense.shape
    mask = dense > threshold
    empty = ~mask.any(axis=0)
    if empty.any():
        # a fully-thresholded column keeps its single largest entry
        mask[dense.argmax(axis=0)[empty], np.nonzero(empty)[0]] = True
    rows, cols = np.nonzero(mask)
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    return SparseSamplingMatrix(
        row=rows.astype(np.int64),
        col=cols.astype(np.int64),
        value=dense[rows, cols],
        shape=(n, m),
        threshold=float(threshold),
    )


def sparse_apply(points: np.ndarray, sparse: SparseSamplingMatrix) -> np.ndarray:
    """Q = S^T P using only stored triplets; never materializes (n, m)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] != sparse.shape[0]:
        raise ValueError(
            f"matrix has {sparse.shape[0]} rows but cloud has {pts.shape[0]} points"
        )
    out = np.zeros((sparse.shape[1], pts.shape[1]))
    np.add.at(out, sparse.col, sparse.value[:, None] * pts[sparse.row])
    return out


def save_sparse_matrix(path, sparse: SparseSamplingMatrix) -> None:
    """Text export: header "n m nnz", then one "row col value" line each."""
    lines = [f"{sparse.shape[0]} {sparse.shape[1]} {sparse.nnz}"]
    for r, c, v in zip(sparse.row, sparse.col, sparse.value):
        lines.append(f"{int(r)} {int(c)} {float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_sparse_matrix(path, threshold: float = DEFAULT_THRESHOLD) -> SparseSamplingMatrix:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    n, m, nnz = (int(v) for v in lines[0].split())
    if len(lines) - 1 != nnz:
        raise ValueError(f"{path}: header claims {nnz} entries, found {len(lines) - 1}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for i, line in enumerate(lines[1:]):
        r, c, v = line.split()
        rows[i], cols[i], vals[i] = int(r), int(c), float(v)
    return SparseSamplingMatrix(rows, cols, vals, shape=(n, m), threshold=threshold)


class ScoreMLP(nn.Module):
    """Row-wise map from a point feature to m raw matrix scores."""

    def __init__(self, in_dim: int, m: int, widths: tuple[int, ...] = (512, 256, 128)):
        super().__init__()
        layers = []
        prev = in_dim
        for w in widths:
            layers += [nn.Linear(prev, w), nn.LayerNorm(w), nn.ReLU()]
            prev = w
        layers.append(nn.Linear(prev, m))  # raw scores stay unbounded
        self.net = nn.Sequential(*layers)
        self.m = m

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features)


class DownsampleNet(nn.Module):
    """Feature encoder + score MLP; forward gives the raw (n, m_max) scores.

    sampling_matrix() runs the softmax relaxation at a given temperature and
    optionally truncates to the m left-most columns, which is how a single
    network serves multiple output sizes.
    """

    def __init__(
        self,
        m_max: int,
        encoder_widths: tuple[int, ...] = (64, 64, 64, 128, 128),
        score_widths: tuple[int, ...] = (512, 256, 128),
    ):
        super().__init__()
        self.encoder = PointFeatureEncoder(encoder_widths)
        self.score = ScoreMLP(self.encoder.feature_dim, m_max, score_widths)
        self.m_max = m_max

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        return self.score(self.encoder(points))

    def sampling_matrix(
        self, points: torch.Tensor, temperature: float, m: int | None = None
    ) -> SamplingMatrix:
        matrix = anneal_softmax(self(points), temperature)
        if m is not None and m != matrix.m:
            matrix = truncate_columns(matrix, m)
        return matrix


def downsample(
    cloud: PointCloud,
    net: DownsampleNet,
    m: int,
    temperature: float,
    threshold: float = DEFAULT_THRESHOLD,
) -> DownsampleResult:
    """Full inference path: scores -> softmax -> sparsify -> match -> complete."""
    was_training = net.training
    net.eval()
    try:
        dtype = next(net.parameters()).dtype
        pts = torch.from_numpy(cloud.points.copy()).to(dtype)
        with torch.no_grad():
            matrix = net.sampling_matrix(pts, temperature, m=m)
        sparse = sparsify(matrix, threshold)
        generated = sparse_apply(cloud.points, sparse)
    finally:
        if was_training:
            net.train()
    matched = match_to_subset(cloud, generated)
    completed = fps_completion(cloud, matched, m)
    return DownsampleResult(generated=generated, matched=matched, completed=completed)
