import numpy as np
import pytest
import torch
from torch import nn

from pcdown.losses import (
    LossWeights,
    chamfer_loss,
    emd_loss,
    quaternion_loss,
    subset_loss,
    task_loss,
    total_loss,
)
from pcdown.metrics import chamfer_distance, earth_mover_distance
from pcdown.sampling import DownsampleNet, anneal_softmax, regress_sampled
from pcdown.tasks import (
    MlpAutoencoder,
    PointNetClassifier,
    RegistrationNet,
    TaskHead,
)


def rand(shape, seed):
    return torch.from_numpy(np.random.default_rng(seed).normal(size=shape))


def central_diff(fn, x, eps=1e-6):
    """Finite-difference gradient of a scalar fn at tensor x (float64)."""
    g = torch.empty_like(x)
    flat = x.view(-1)
    out = g.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            hi = fn().item()
            flat[i] = orig - eps
            lo = fn().item()
            flat[i] = orig
            out[i] = (hi - lo) / (2 * eps)
    return g


def rel_error(a, b):
    return (torch.linalg.norm(a - b) / torch.linalg.norm(a + b).clamp_min(1e-12)).item()


# --- LossWeights ------------------------------------------------------------


def test_loss_weights_validation():
    LossWeights(alpha=0.0, lambda_emd=0.0, translation_weight=0.0)
    for bad in (dict(alpha=-1.0), dict(lambda_emd=float("nan")), dict(translation_weight=-0.5)):
        with pytest.raises(ValueError):
            LossWeights(**bad)


# --- subset loss -------------------------------------------------------------


def test_subset_zero_for_exact_subsets():
    src = rand((10, 3), 0)
    gen = src[[2, 5, 7]].clone()
    assert subset_loss(src, gen).item() == 0.0


def test_subset_single_point_example():
    src = torch.zeros((1, 3), dtype=torch.float64)
    gen = torch.tensor([[1.0, 0.0, 0.0]], dtype=torch.float64)
    assert subset_loss(src, gen).item() == 1.0


def test_subset_matches_brute_force_oracle():
    rng = np.random.default_rng(1)
    for trial in range(30):
        n = int(rng.integers(1, 65))
        m = int(rng.integers(1, 20))
        src = rng.normal(size=(n, 3))
        gen = rng.normal(size=(m, 3))
        want = np.mean(
            [min(((g - p) ** 2).sum() for p in src) for g in gen]
        )
        got = subset_loss(torch.from_numpy(src), torch.from_numpy(gen)).item()
        assert got == pytest.approx(want, rel=0, abs=1e-12)


def test_subset_permutation_invariant_both_sides():
    src = rand((12, 3), 2)
    gen = rand((5, 3), 3)
    base = subset_loss(src, gen).item()
    rng = np.random.default_rng(4)
    shuffled = subset_loss(
        src[rng.permutation(12)], gen[rng.permutation(5)]
    ).item()
    assert shuffled == pytest.approx(base, abs=1e-12)


def test_subset_positive_off_subset():
    src = rand((8, 3), 5)
    gen = rand((4, 3), 6) + 10.0
    assert subset_loss(src, gen).item() > 0


# --- chamfer / emd agree with the metric implementations ---------------------


def test_chamfer_loss_matches_metric():
    rng = np.random.default_rng(7)
    for trial in range(20):
        a = rng.normal(size=(int(rng.integers(1, 30)), 3))
        b = rng.normal(size=(int(rng.integers(1, 30)), 3))
        got = chamfer_loss(torch.from_numpy(a), torch.from_numpy(b)).item()
        assert got == pytest.approx(chamfer_distance(a, b), abs=1e-12)


def test_emd_loss_matches_metric():
    rng = np.random.default_rng(8)
    for trial in range(10):
        k = int(rng.integers(2, 20))
        a = rng.normal(size=(k, 3))
        b = rng.normal(size=(k, 3))
        got = emd_loss(torch.from_numpy(a), torch.from_numpy(b)).item()
        assert got == pytest.approx(earth_mover_distance(a, b), abs=1e-8)


def test_emd_loss_size_mismatch():
    with pytest.raises(ValueError):
        emd_loss(rand((4, 3), 0), rand((5, 3), 1))


# --- quaternion loss -----------------------------------------------------------


def test_quaternion_loss_zero_at_truth_and_sign_flip():
    q = torch.tensor([0.5, 0.5, 0.5, 0.5], dtype=torch.float64)
    t = torch.tensor([0.1, -0.2, 0.3], dtype=torch.float64)
    assert quaternion_loss(q, t, q, t).item() == 0.0
    assert quaternion_loss(-q, t, q, t).item() == 0.0


def test_quaternion_loss_hand_example():
    pred_q = torch.tensor([1.0, 0.0, 0.0, 0.0], dtype=torch.float64)
    true_q = torch.tensor([0.0, 1.0, 0.0, 0.0], dtype=torch.float64)
    pred_t = torch.zeros(3, dtype=torch.float64)
    true_t = torch.tensor([1.0, 0.0, 0.0], dtype=torch.float64)
    # orthogonal quaternions: squared residual 2; translation adds w * 1
    assert quaternion_loss(pred_q, pred_t, true_q, true_t).item() == pytest.approx(3.0)
    assert quaternion_loss(
        pred_q, pred_t, true_q, true_t, translation_weight=0.0
    ).item() == pytest.approx(2.0)


# --- task loss dispatch -----------------------------------------------------------


class FixedLogits(nn.Module):
    def __init__(self, logits):
        super().__init__()
        self.logits = logits
        self.dummy = nn.Parameter(torch.zeros(1))

    def forward(self, points):
        return self.logits.expand(points.shape[0], -1)


class EchoDecoder(nn.Module):
    def __init__(self, out):
        super().__init__()
        self.out = out
        self.dummy = nn.Parameter(torch.zeros(1))

    def forward(self, points):
        return self.out.expand(points.shape[0], -1, -1)


def test_classification_loss_vanishes_with_margin():
    logits = torch.tensor([[40.0, 0.0, 0.0]], dtype=torch.float64)
    head = TaskHead("classification", FixedLogits(logits))
    loss = task_loss(head, rand((1, 6, 3), 9), torch.tensor([0]), LossWeights())
    assert loss.item() < 1e-9


def test_reconstruction_loss_zero_at_target():
    target = rand((1, 12, 3), 10)
    head = TaskHead("reconstruction", EchoDecoder(target))
    loss = task_loss(head, rand((1, 4, 3), 11), target, LossWeights())
    # chamfer is exactly zero; the EMD term only carries its sqrt epsilon
    assert loss.item() < 1e-5


def test_registration_loss_zero_at_truth():
    class FixedPose(nn.Module):
        def __init__(self, quat, trans):
            super().__init__()
            self.quat, self.trans = quat, trans
            self.dummy = nn.Parameter(torch.zeros(1))

        def forward(self, src, tgt):
            return self.quat, self.trans

    quat = torch.tensor([[1.0, 0.0, 0.0, 0.0]], dtype=torch.float64)
    trans = torch.zeros((1, 3), dtype=torch.float64)
    head = TaskHead("registration", FixedPose(quat, trans))
    loss = task_loss(
        head, (rand((1, 5, 3), 12), rand((1, 5, 3), 13)), (quat, trans), LossWeights()
    )
    assert loss.item() == 0.0


# --- total loss ------------------------------------------------------------------


def classification_setup(seed=14):
    torch.manual_seed(seed)
    head = TaskHead(
        "classification", PointNetClassifier(3, point_widths=(8, 16), fc_widths=(8,)).double()
    )
    head.freeze()
    source = rand((1, 8, 3), seed)
    sampled = rand((1, 4, 3), seed + 1).requires_grad_(True)
    target = torch.tensor([1])
    return head, sampled, target, source


def test_total_loss_alpha_zero_equals_task():
    head, sampled, target, source = classification_setup()
    w = LossWeights(alpha=0.0)
    total, t_term, s_term = total_loss(head, sampled, target, source, w)
    assert total.item() == t_term.item()
    assert s_term.item() > 0


def test_total_loss_hand_summed():
    head, sampled, target, source = classification_setup()
    w = LossWeights(alpha=30.0)
    total, t_term, s_term = total_loss(head, sampled, target, source, w)
    assert total.item() == pytest.approx(t_term.item() + 30.0 * s_term.item(), abs=1e-12)


def test_total_loss_monotone_in_alpha():
    head, sampled, target, source = classification_setup()
    values = [
        total_loss(head, sampled, target, source, LossWeights(alpha=a))[0].item()
        for a in (0.0, 0.5, 2.0, 30.0)
    ]
    assert all(x < y for x, y in zip(values, values[1:]))


# --- finite-difference gradient checks ----------------------------------------------


def test_subset_gradient_matches_fd():
    source = rand((8, 3), 15)
    gen = rand((4, 3), 16).requires_grad_(True)
    subset_loss(source, gen).backward()
    fd = central_diff(lambda: subset_loss(source, gen), gen.data)
    assert rel_error(gen.grad, fd) < 1e-3


def test_chamfer_gradient_matches_fd():
    a = rand((6, 3), 17).requires_grad_(True)
    b = rand((9, 3), 18)
    chamfer_loss(a, b).backward()
    fd = central_diff(lambda: chamfer_loss(a, b), a.data)
    assert rel_error(a.grad, fd) < 1e-3


def test_emd_gradient_matches_fd():
    a = rand((5, 3), 19).requires_grad_(True)
    b = rand((5, 3), 20)
    emd_loss(a, b).backward()
    fd = central_diff(lambda: emd_loss(a, b), a.data)
    assert rel_error(a.grad, fd) < 1e-3


def test_quaternion_gradient_matches_fd():
    q = rand((2, 4), 21).requires_grad_(True)
    t = rand((2, 3), 22).requires_grad_(True)
    tq = torch.nn.functional.normalize(rand((2, 4), 23), dim=1)
    tt = rand((2, 3), 24)
    quaternion_loss(q, t, tq, tt, translation_weight=0.7).backward()
    fd_q = central_diff(lambda: quaternion_loss(q, t, tq, tt, 0.7), q.data)
    fd_t = central_diff(lambda: quaternion_loss(q, t, tq, tt, 0.7), t.data)
    assert rel_error(q.grad, fd_q) < 1e-3
    assert rel_error(t.grad, fd_t) < 1e-3


def test_total_loss_gradient_wrt_generated_matches_fd():
    # the documented m=4, n=8 check straight through task + subset terms
    head, sampled, target, source = classification_setup(seed=25)
    w = LossWeights(alpha=30.0)
    total_loss(head, sampled, target, source, w)[0].backward()
    fd = central_diff(lambda: total_loss(head, sampled, target, source, w)[0], sampled.data)
    assert rel_error(sampled.grad, fd) < 1e-3


# --- gradients reach the sampler through every head ------------------------------------


def sampler_chain(seed, n=10, m=4):
    torch.manual_seed(seed)
    net = DownsampleNet(m_max=m, encoder_widths=(8,), score_widths=(8,)).double()
    pts = rand((2, n, 3), seed)
    matrix = anneal_softmax(net(pts), 0.5)
    return net, pts, regress_sampled(pts, matrix)


@pytest.mark.parametrize("kind", ["classification", "reconstruction", "registration"])
def test_gradient_flows_into_sampler(kind):
    net, pts, sampled = sampler_chain(26)
    torch.manual_seed(27)
    if kind == "classification":
        head = TaskHead(kind, PointNetClassifier(3, (8, 16), (8,)).double())
        head.freeze()
        loss = total_loss(head, sampled, torch.tensor([0, 2]), pts, LossWeights())[0]
    elif kind == "reconstruction":
        head = TaskHead(kind, MlpAutoencoder(10, (8,), code_dim=8, decoder_widths=(8,)).double())
        head.freeze()
        loss = total_loss(head, sampled, pts, pts, LossWeights(alpha=0.2))[0]
    else:
        net2, pts2, sampled2 = sampler_chain(28)
        head = TaskHead(kind, RegistrationNet((8, 16), (8,)).double())
        head.freeze()
        quat = torch.tensor([[1.0, 0, 0, 0], [1.0, 0, 0, 0]], dtype=torch.float64)
        trans = torch.zeros((2, 3), dtype=torch.float64)
        loss = total_loss(
            head, (sampled, sampled2), (quat, trans), (pts, pts2), LossWeights(alpha=1.0)
        )[0]
    loss.backward()
    grads = [p.grad for p in net.parameters()]
    assert all(g is not None for g in grads)
    norm = torch.sqrt(sum((g**2).sum() for g in grads))
    assert norm.item() > 0
    assert all(not p.requires_grad for p in head.module.parameters())
