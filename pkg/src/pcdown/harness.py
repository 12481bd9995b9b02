"""Training loops, schedules, evaluation, robustness, benchmarking, sweeps.

Everything here is deterministic under a fixed config seed: dataset
generation, init, batch order, and flexible-size draws all derive from it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
import torch

from .checkpoint import load_checkpoint, load_into_modules, save_checkpoint
from .cloud import (
    PointCloud,
    RigidTransform,
    SYNTHETIC_SHAPES,
    add_gaussian_noise,
    make_synthetic,
    random_rigid_transform,
)
from .config import RunConfig
from .errors import ConfigurationError, DivergenceError
from .io import load_dataset
from .losses import LossWeights, total_loss
from .metrics import (
    chamfer_distance,
    classification_accuracy,
    mean_rotation_error_deg,
    normalized_reconstruction_error,
)
from .report import EpochRow, RunReport
from .samplers import fps_sample, random_sample, voxel_sample
from .sampling import (
    DownsampleNet,
    anneal_softmax,
    downsample,
    orthogonality_gap,
    regress_sampled,
    sparsify,
    truncate_columns,
)
from .tasks import (
    MFoldConfig,
    MFoldingNet,
    MlpAutoencoder,
    PointNetClassifier,
    RegistrationNet,
    TaskHead,
    classify,
    reconstruct,
    register,
)

__all__ = [
    "RegistrationPair",
    "make_splits",
    "build_sampler",
    "build_head",
    "pretrain_head",
    "train_sampler",
    "evaluate",
    "robustness",
    "bench",
    "sweep",
    "tau_at",
    "lr_at",
    "save_head",
    "load_head",
    "save_run",
    "load_run",
]


@dataclass(frozen=True)
class RegistrationPair:
    source: PointCloud
    target: PointCloud
    transform: RigidTransform


def seed_everything(seed: int) -> np.random.Generator:
    torch.manual_seed(seed)
    return np.random.default_rng(seed)


def tau_at(step: int, total_steps: int, config: RunConfig) -> float:
    """Per-iteration linear decay from tau_start to tau_min over the first
    anneal_fraction of training, constant afterwards."""
    anneal_steps = max(1, int(round(config.anneal_fraction * total_steps)))
    frac = min(1.0, step / anneal_steps)
    return config.tau_start + frac * (config.tau_min - config.tau_start)


def lr_at(epoch: int, config: RunConfig) -> float:
    """lr(e) = lr_start * (lr_end / lr_start)^(e / epochs)."""
    return config.lr_start * (config.lr_end / config.lr_start) ** (epoch / config.epochs)


# ---------------------------------------------------------------------------
# datasets


def _classification_clouds(config: RunConfig, per_class: int, seed_base: int) -> list[PointCloud]:
    clouds = []
    for ci, shape in enumerate(SYNTHETIC_SHAPES[: config.num_classes]):
        for k in range(per_class):
            clouds.append(make_synthetic(shape, config.n, seed=seed_base + 7919 * ci + k))
    return clouds


def _reconstruction_clouds(config: RunConfig, count: int, seed_base: int) -> list[PointCloud]:
    """Single-class set (spheres squashed into random ellipsoids) so the
    autoencoder has genuine per-cloud variation to encode."""
    clouds = []
    rng = np.random.default_rng(seed_base)
    for k in range(count):
        base = make_synthetic("sphere", config.n, seed=seed_base + k)
        axes = rng.uniform(0.4, 1.0, size=3)
        clouds.append(PointCloud(base.points * axes, label=0, name=f"ellipsoid-{k}"))
    return clouds


def _registration_pairs(config: RunConfig, count: int, seed_base: int) -> list[RegistrationPair]:
    rng = np.random.default_rng(seed_base)
    pairs = []
    for k in range(count):
        shape = SYNTHETIC_SHAPES[k % len(SYNTHETIC_SHAPES)]
        source = make_synthetic(shape, config.n, seed=seed_base + k)
        transform = random_rigid_transform(rng, max_angle_deg=45.0, max_translation=0.3)
        pairs.append(
            RegistrationPair(source, transform.apply_cloud(source), transform)
        )
    return pairs


def make_splits(config: RunConfig):
    """(train, test) items for the configured task and dataset."""
    if config.dataset == "dir":
        train = load_dataset(config.data_root, "train")
        test = load_dataset(config.data_root, "test")
        if config.task == "classification":
            return train, test
        if config.task in ("reconstruction", "reconstruction_fold"):
            return train, test
        rng = np.random.default_rng(config.seed)
        return (
            [_pair_from_cloud(c, rng) for c in train],
            [_pair_from_cloud(c, rng) for c in test],
        )
    base = config.seed
    if config.task == "classification":
        return (
            _classification_clouds(config, config.train_per_class, base + 10_000),
            _classification_clouds(config, config.test_per_class, base + 20_000),
        )
    if config.task in ("reconstruction", "reconstruction_fold"):
        total_train = config.train_per_class * config.num_classes
        total_test = config.test_per_class * config.num_classes
        return (
            _reconstruction_clouds(config, total_train, base + 30_000),
            _reconstruction_clouds(config, total_test, base + 40_000),
        )
    total_train = config.train_per_class * config.num_classes
    total_test = config.test_per_class * config.num_classes
    return (
        _registration_pairs(config, total_train, base + 50_000),
        _registration_pairs(config, total_test, base + 60_000),
    )


def _pair_from_cloud(cloud: PointCloud, rng: np.random.Generator) -> RegistrationPair:
    transform = random_rigid_transform(rng, max_angle_deg=45.0, max_translation=0.3)
    return RegistrationPair(cloud, transform.apply_cloud(cloud), transform)


# ---------------------------------------------------------------------------
# model construction / checkpoints


def build_sampler(config: RunConfig) -> DownsampleNet:
    return DownsampleNet(
        m_max=config.m_max,
        encoder_widths=config.encoder_widths,
        score_widths=config.score_widths,
    )


def build_head(config: RunConfig) -> TaskHead:
    if config.task == "classification":
        module = PointNetClassifier(
            config.num_classes,
            point_widths=config.head_point_widths,
            fc_widths=config.head_fc_widths,
        )
    elif config.task == "reconstruction":
        module = MlpAutoencoder(
            n_out=config.n,
            encoder_widths=config.head_point_widths,
            code_dim=config.code_dim,
            decoder_widths=config.head_fc_widths,
        )
    elif config.task == "reconstruction_fold":
        module = MFoldingNet(
            MFoldConfig(
                m_patches=config.fold_patches,
                code_dim=config.code_dim,
                grid=config.fold_grid,
            ),
            encoder_widths=config.head_point_widths,
        )
    elif config.task == "registration":
        module = RegistrationNet(
            encoder_widths=config.head_point_widths,
            fc_widths=config.head_fc_widths,
        )
    else:
        raise ConfigurationError(f"unknown task {config.task!r}")
    return TaskHead(kind=config.task, module=module)


def save_head(path, config: RunConfig, head: TaskHead) -> None:
    params = {
        f"head.{k}": v.detach().cpu().numpy().astype(np.float32)
        for k, v in head.module.state_dict().items()
    }
    save_checkpoint(path, params, config)


def load_head(path) -> tuple[TaskHead, RunConfig]:
    params, config = load_checkpoint(path)
    head = build_head(config)
    state = {}
    for name, tensor in head.module.state_dict().items():
        key = f"head.{name}"
        if key not in params:
            raise ConfigurationError(f"{path}: checkpoint is missing {key}")
        state[name] = torch.from_numpy(params[key].copy()).to(tensor.dtype)
    head.module.load_state_dict(state)
    return head, config


def save_run(path, config: RunConfig, net: DownsampleNet, head: TaskHead) -> None:
    params: dict[str, np.ndarray] = {}
    for prefix, module in (("sampler", net), ("head", head.module)):
        for k, v in module.state_dict().items():
            params[f"{prefix}.{k}"] = v.detach().cpu().numpy().astype(np.float32)
    save_checkpoint(path, params, config)


def load_run(path) -> tuple[DownsampleNet, TaskHead, RunConfig]:
    params, config = load_checkpoint(path)
    net = build_sampler(config)
    head = build_head(config)
    load_into_modules(params, net, head.module)
    return net, head, config


# ---------------------------------------------------------------------------
# head pretraining


def _stack(clouds: list[PointCloud]) -> torch.Tensor:
    return torch.from_numpy(np.stack([c.points for c in clouds])).float()


def _labels(clouds: list[PointCloud]) -> torch.Tensor:
    return torch.tensor([c.label for c in clouds], dtype=torch.long)


def _check_finite(loss: torch.Tensor, context: str) -> None:
    if not torch.isfinite(loss):
        raise DivergenceError(f"non-finite loss during {context}")


def pretrain_head(config: RunConfig) -> tuple[TaskHead, RunReport]:
    """Train the task network on full-resolution clouds; the sampler never
    sees this phase except through the frozen weights."""
    config.validate()
    seed_everything(config.seed)
    head = build_head(config)
    train_items, test_items = make_splits(config)
    opt = torch.optim.Adam(head.module.parameters(), lr=config.head_lr)
    weights = LossWeights(
        alpha=0.0, lambda_emd=config.lambda_emd, translation_weight=config.translation_weight
    )
    rng = np.random.default_rng(config.seed + 1)
    report = RunReport(config=config)
    head.module.train()
    for epoch in range(config.head_epochs):
        order = rng.permutation(len(train_items))
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            if idx.size < 2:
                continue  # BatchNorm needs more than one example
            loss = _head_batch_loss(head, config, [train_items[i] for i in idx], weights)
            _check_finite(loss, "head pretraining")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach())
            batches += 1
        report.epochs.append(
            EpochRow(
                epoch=epoch,
                loss=epoch_loss / max(1, batches),
                task_loss=epoch_loss / max(1, batches),
                subset_loss=0.0,
                tau=0.0,
                lr=config.head_lr,
                sparsity=0.0,
            )
        )
    head.freeze()
    _record_head_reference(head, config, train_items, test_items, report)
    return head, report


def _head_batch_loss(head, config, items, weights) -> torch.Tensor:
    if config.task == "classification":
        pts, labels = _stack(items), _labels(items)
        logits = head.module(pts)
        return torch.nn.functional.cross_entropy(logits, labels)
    if config.task in ("reconstruction", "reconstruction_fold"):
        pts = _stack(items)
        from .losses import chamfer_loss, emd_loss

        recon = head.module(pts)
        loss = chamfer_loss(pts, recon)
        if weights.lambda_emd > 0 and recon.shape[-2] == pts.shape[-2]:
            loss = loss + weights.lambda_emd * emd_loss(pts, recon)
        return loss
    src = _stack([p.source for p in items])
    tgt = _stack([p.target for p in items])
    quat = torch.from_numpy(np.stack([p.transform.quaternion for p in items])).float()
    trans = torch.from_numpy(np.stack([p.transform.translation for p in items])).float()
    pred_q, pred_t = head.module(src, tgt)
    from .losses import quaternion_loss

    return quaternion_loss(pred_q, pred_t, quat, trans, weights.translation_weight)


def _record_head_reference(head, config, train_items, test_items, report) -> None:
    """Full-cloud reference numbers: accuracy / reconstruction error / MRE."""
    if config.task == "classification":
        for split, items in (("train", train_items), ("test", test_items)):
            preds = [int(np.argmax(classify(c, head))) for c in items]
            acc = classification_accuracy(preds, [c.label for c in items])
            report.metrics[f"full/{split}/accuracy"] = acc
    elif config.task in ("reconstruction", "reconstruction_fold"):
        for split, items in (("train", train_items), ("test", test_items)):
            cds = [chamfer_distance(c, reconstruct(c, head)) for c in items]
            report.metrics[f"full/{split}/chamfer"] = float(np.mean(cds))
        # sanity reference: reconstruct everything as the centroid
        cds = []
        for c in test_items:
            centroid = np.repeat(c.points.mean(axis=0, keepdims=True), c.n, axis=0)
            cds.append(chamfer_distance(c, centroid))
        report.metrics["full/test/centroid_chamfer"] = float(np.mean(cds))
    else:
        for split, items in (("train", train_items), ("test", test_items)):
            preds = [register(p.source, p.target, head) for p in items]
            mre = mean_rotation_error_deg(preds, [p.transform for p in items])
            report.metrics[f"full/{split}/mre_deg"] = mre
        identity = [RigidTransform.identity() for _ in test_items]
        report.metrics["full/test/identity_mre_deg"] = mean_rotation_error_deg(
            identity, [p.transform for p in test_items]
        )


# ---------------------------------------------------------------------------
# sampler training


def _train_tensors(config: RunConfig, items):
    if config.task == "classification":
        return _stack(items), _labels(items)
    if config.task in ("reconstruction", "reconstruction_fold"):
        pts = _stack(items)
        return pts, pts
    src = _stack([p.source for p in items])
    tgt = _stack([p.target for p in items])
    quat = torch.from_numpy(np.stack([p.transform.quaternion for p in items])).float()
    trans = torch.from_numpy(np.stack([p.transform.translation for p in items])).float()
    return (src, tgt), (quat, trans)


def train_sampler(
    config: RunConfig, head: TaskHead, train_items
) -> tuple[DownsampleNet, RunReport]:
    """Optimize the sampling network against a (normally frozen) task head."""
    config.validate()
    if not config.joint and not head.frozen:
        head.freeze()
    frozen_checksum = head.checksum() if not config.joint else None
    seed_everything(config.seed)
    net = build_sampler(config)
    params = list(net.parameters())
    if config.joint:
        for p in head.module.parameters():
            p.requires_grad_(True)
        head.module.train()
        head.frozen = False
        params += list(head.module.parameters())
    opt = torch.optim.Adam(params, lr=config.lr_start)
    weights = LossWeights(
        alpha=config.alpha,
        lambda_emd=config.lambda_emd,
        translation_weight=config.translation_weight,
    )
    inputs, targets = _train_tensors(config, train_items)
    count = len(train_items)
    rng = np.random.default_rng(config.seed + 2)
    batches_per_epoch = max(1, count // config.batch_size)
    total_steps = config.epochs * batches_per_epoch
    report = RunReport(config=config)
    step = 0
    for epoch in range(config.epochs):
        lr = lr_at(epoch, config)
        for group in opt.param_groups:
            group["lr"] = lr
        order = rng.permutation(count)
        sums = np.zeros(3)
        tau = config.tau_start
        for lo in range(0, batches_per_epoch * config.batch_size, config.batch_size):
            idx = torch.from_numpy(order[lo : lo + config.batch_size])
            tau = tau_at(step, total_steps, config)
            m = int(rng.choice(config.m_choices)) if config.flexible else config.m
            loss, t_term, s_term = _sampler_batch_loss(
                net, head, config, inputs, targets, idx, tau, m, weights
            )
            _check_finite(loss, "sampler training")
            opt.zero_grad()
            loss.backward()
            opt.step()
            sums += (float(loss.detach()), float(t_term.detach()), float(s_term.detach()))
            step += 1
        report.epochs.append(
            EpochRow(
                epoch=epoch,
                loss=sums[0] / batches_per_epoch,
                task_loss=sums[1] / batches_per_epoch,
                subset_loss=sums[2] / batches_per_epoch,
                tau=tau,
                lr=lr,
                sparsity=_sparsity_probe(net, config, train_items, tau),
            )
        )
    if frozen_checksum is not None and head.checksum() != frozen_checksum:
        raise RuntimeError("frozen task head changed during sampler training")
    report.diagnostics["final_tau"] = tau_at(total_steps, total_steps, config)
    return net, report


def _sampler_batch_loss(net, head, config, inputs, targets, idx, tau, m, weights):
    if config.task == "registration":
        src, tgt = inputs[0][idx], inputs[1][idx]
        target = (targets[0][idx], targets[1][idx])
        s_src = net.sampling_matrix(src, tau, m=m)
        s_tgt = net.sampling_matrix(tgt, tau, m=m)
        sampled = (regress_sampled(src, s_src), regress_sampled(tgt, s_tgt))
        return total_loss(head, sampled, target, (src, tgt), weights)
    pts = inputs[idx]
    target = targets[idx]
    matrix = net.sampling_matrix(pts, tau, m=m)
    sampled = regress_sampled(pts, matrix)
    return total_loss(head, sampled, target, pts, weights)


def _first_cloud(config: RunConfig, items) -> PointCloud:
    return items[0].source if config.task == "registration" else items[0]


def _sparsity_probe(net, config: RunConfig, items, tau: float) -> float:
    cloud = _first_cloud(config, items)
    pts = torch.from_numpy(cloud.points.copy()).float()
    with torch.no_grad():
        matrix = net.sampling_matrix(pts, tau, m=config.m if not config.flexible else None)
    return sparsify(matrix, config.sparsify_threshold).nonzero_fraction


# ---------------------------------------------------------------------------
# evaluation


def _classify_points(points: np.ndarray, head: TaskHead) -> int:
    return int(np.argmax(classify(points, head)))


def _eval_classification(net, head, config, items, m, report) -> None:
    labels = [c.label for c in items]
    preds = {"generated": [], "matched": [], "completed": []}
    sparsity, gap = [], []
    for cloud in items:
        res = downsample(cloud, net, m, config.tau_min, config.sparsify_threshold)
        preds["generated"].append(_classify_points(res.generated, head))
        preds["matched"].append(_classify_points(cloud.points[res.matched], head))
        preds["completed"].append(_classify_points(cloud.points[res.completed], head))
        pts = torch.from_numpy(cloud.points.copy()).float()
        with torch.no_grad():
            matrix = net.sampling_matrix(pts, config.tau_min, m=m)
        sparsity.append(sparsify(matrix, config.sparsify_threshold).nonzero_fraction)
        gap.append(orthogonality_gap(matrix))
    for key, p in preds.items():
        report.metrics[f"m={m}/{key}/accuracy"] = classification_accuracy(p, labels)
    for kind in ("random", "fps", "voxel"):
        acc = _baseline_accuracy(head, items, m, kind, config.seed)
        report.metrics[f"m={m}/{kind}/accuracy"] = acc
    report.diagnostics[f"m={m}/sparsity"] = float(np.mean(sparsity))
    report.diagnostics[f"m={m}/sts_gap"] = float(np.mean(gap))


def _baseline_indices(cloud: PointCloud, m: int, kind: str, seed: int) -> np.ndarray:
    if kind == "random":
        return random_sample(cloud, m, seed=seed)
    if kind == "fps":
        return fps_sample(cloud, m)
    return voxel_sample(cloud, m, seed=seed)


def _baseline_accuracy(head, items, m, kind, seed) -> float:
    preds = []
    for i, cloud in enumerate(items):
        idx = _baseline_indices(cloud, m, kind, seed + i)
        preds.append(_classify_points(cloud.points[idx], head))
    return classification_accuracy(preds, [c.label for c in items])


def _eval_reconstruction(net, head, config, items, m, report) -> None:
    sums = {k: [] for k in ("generated", "matched", "completed", "random", "fps", "voxel")}
    sums_emd = {k: [] for k in sums}
    sparsity, gap = [], []
    for i, cloud in enumerate(items):
        recon_full = reconstruct(cloud, head)
        emd_ok = recon_full.shape[0] == cloud.n
        res = downsample(cloud, net, m, config.tau_min, config.sparsify_threshold)
        variants = {
            "generated": res.generated,
            "matched": cloud.points[res.matched],
            "completed": cloud.points[res.completed],
        }
        for kind in ("random", "fps", "voxel"):
            variants[kind] = cloud.points[_baseline_indices(cloud, m, kind, config.seed + i)]
        for key, pts in variants.items():
            recon = reconstruct(pts, head)
            sums[key].append(
                normalized_reconstruction_error(cloud, recon, recon_full, "chamfer")
            )
            if emd_ok:
                sums_emd[key].append(
                    normalized_reconstruction_error(cloud, recon, recon_full, "emd")
                )
        t = torch.from_numpy(cloud.points.copy()).float()
        with torch.no_grad():
            matrix = net.sampling_matrix(t, config.tau_min, m=m)
        sparsity.append(sparsify(matrix, config.sparsify_threshold).nonzero_fraction)
        gap.append(orthogonality_gap(matrix))
    for key in sums:
        report.metrics[f"m={m}/{key}/nre_cd"] = float(np.mean(sums[key]))
        if sums_emd[key]:
            report.metrics[f"m={m}/{key}/nre_emd"] = float(np.mean(sums_emd[key]))
    report.diagnostics[f"m={m}/sparsity"] = float(np.mean(sparsity))
    report.diagnostics[f"m={m}/sts_gap"] = float(np.mean(gap))


def _eval_registration(net, head, config, items, m, report) -> None:
    truths = [p.transform for p in items]
    preds = {k: [] for k in ("generated", "matched", "completed", "random", "fps", "voxel")}
    sparsity, gap = [], []
    for i, pair in enumerate(items):
        res_s = downsample(pair.source, net, m, config.tau_min, config.sparsify_threshold)
        res_t = downsample(pair.target, net, m, config.tau_min, config.sparsify_threshold)
        preds["generated"].append(register(res_s.generated, res_t.generated, head))
        preds["matched"].append(
            register(
                pair.source.points[res_s.matched], pair.target.points[res_t.matched], head
            )
        )
        preds["completed"].append(
            register(
                pair.source.points[res_s.completed],
                pair.target.points[res_t.completed],
                head,
            )
        )
        for kind in ("random", "fps", "voxel"):
            si = _baseline_indices(pair.source, m, kind, config.seed + i)
            ti = _baseline_indices(pair.target, m, kind, config.seed + 7 + i)
            preds[kind].append(
                register(pair.source.points[si], pair.target.points[ti], head)
            )
        pts = torch.from_numpy(pair.source.points.copy()).float()
        with torch.no_grad():
            matrix = net.sampling_matrix(pts, config.tau_min, m=m)
        sparsity.append(sparsify(matrix, config.sparsify_threshold).nonzero_fraction)
        gap.append(orthogonality_gap(matrix))
    for key, plist in preds.items():
        report.metrics[f"m={m}/{key}/mre_deg"] = mean_rotation_error_deg(plist, truths)
    report.diagnostics[f"m={m}/sparsity"] = float(np.mean(sparsity))
    report.diagnostics[f"m={m}/sts_gap"] = float(np.mean(gap))


def evaluate(net, head: TaskHead, config: RunConfig, items, m_list) -> RunReport:
    """Task metrics on generated / matched / completed sets for each m, plus
    classical baselines and sparsity/orthogonality diagnostics."""
    report = RunReport(config=config)
    n = _first_cloud(config, items).n
    for m in m_list:
        if not 1 <= m <= n:
            raise ConfigurationError(f"m={m} out of range for clouds with n={n}")
        if m > net.m_max:
            raise ConfigurationError(f"m={m} exceeds the checkpoint's m_max={net.m_max}")
        start = time.perf_counter()
        if config.task == "classification":
            _eval_classification(net, head, config, items, m, report)
        elif config.task in ("reconstruction", "reconstruction_fold"):
            _eval_reconstruction(net, head, config, items, m, report)
        else:
            _eval_registration(net, head, config, items, m, report)
        report.timings[f"m={m}/eval_seconds"] = time.perf_counter() - start
    return report


def robustness(
    net, head: TaskHead, config: RunConfig, items, levels, seed: int = 0
) -> RunReport:
    """Clean-vs-noisy evaluation at config.m; level 0 reproduces the clean
    run exactly because noise injection at 0 is the identity."""
    report = RunReport(config=config)
    for level in levels:
        noisy = [
            add_gaussian_noise(c, level, seed + 31 * i) for i, c in enumerate(items)
        ]
        sub = evaluate(net, head, config, noisy, [config.m])
        for key, value in sub.metrics.items():
            report.metrics[f"level={level}/{key}"] = value
    return report


# ---------------------------------------------------------------------------
# benchmarking


def _time_fn(fn, repeats: int) -> float:
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return float(np.mean(best))


def bench(
    n: int = 1024,
    m_grid: tuple[int, ...] = (8, 32, 128, 512),
    repeats: int = 5,
    seed: int = 0,
    config: RunConfig | None = None,
) -> RunReport:
    """Per-shape wall-clock of the classical samplers and the learned
    pipeline stages (feature extraction, score+softmax, sparsify+apply, head)
    across an m grid. The learned sampler runs one shared network sized at
    max(m_grid) and truncates, so its cost is nearly m-independent.
    """
    config = config or RunConfig(n=n, m=max(m_grid))
    rng = np.random.default_rng(seed)
    cloud = PointCloud(rng.uniform(-1, 1, size=(n, 3)))
    torch.manual_seed(seed)
    net = DownsampleNet(
        m_max=max(m_grid),
        encoder_widths=config.encoder_widths,
        score_widths=config.score_widths,
    ).eval()
    head = PointNetClassifier(4, point_widths=(32, 64), fc_widths=(32,)).eval()
    report = RunReport(config=config)
    pts = torch.from_numpy(cloud.points.copy()).float()
    for m in m_grid:
        report.timings[f"m={m}/random"] = _time_fn(
            lambda: random_sample(cloud, m, seed=seed), repeats
        )
        report.timings[f"m={m}/fps"] = _time_fn(lambda: fps_sample(cloud, m), repeats)

        def feature_stage():
            with torch.no_grad():
                return net.encoder(pts)

        feats = feature_stage()

        def matrix_stage():
            with torch.no_grad():
                return truncate_columns(anneal_softmax(net.score(feats), 0.1), m)

        matrix = matrix_stage()

        def regress_stage():
            return sparse_apply_points(cloud, matrix, config.sparsify_threshold)

        generated = regress_stage()

        def head_stage():
            with torch.no_grad():
                return head(torch.from_numpy(generated).float())

        report.timings[f"m={m}/feature"] = _time_fn(feature_stage, repeats)
        report.timings[f"m={m}/matrix"] = _time_fn(matrix_stage, repeats)
        report.timings[f"m={m}/regress"] = _time_fn(regress_stage, repeats)
        report.timings[f"m={m}/head"] = _time_fn(head_stage, repeats)
        report.timings[f"m={m}/learned"] = (
            report.timings[f"m={m}/feature"]
            + report.timings[f"m={m}/matrix"]
            + report.timings[f"m={m}/regress"]
        )
    return report


def sparse_apply_points(cloud: PointCloud, matrix, threshold: float) -> np.ndarray:
    from .sampling import sparse_apply

    return sparse_apply(cloud.points, sparsify(matrix, threshold))


# ---------------------------------------------------------------------------
# sweeps


def sweep(
    config: RunConfig, field_name: str, values, head: TaskHead, train_items, test_items
) -> RunReport:
    """Retrain the sampler once per value of one config field and record the
    primary generated-set metric for each."""
    if not hasattr(config, field_name):
        raise ConfigurationError(f"RunConfig has no field {field_name!r}")
    metric_name = {
        "classification": "accuracy",
        "reconstruction": "nre_cd",
        "reconstruction_fold": "nre_cd",
        "registration": "mre_deg",
    }[config.task]
    report = RunReport(config=config)
    for value in values:
        cfg = replace(config, **{field_name: value}).validate()
        net, _ = train_sampler(cfg, head, train_items)
        sub = evaluate(net, head, cfg, test_items, [cfg.m])
        key = f"m={cfg.m}/generated/{metric_name}"
        report.metrics[f"{field_name}={value}/{metric_name}"] = sub.metrics[key]
    return report
