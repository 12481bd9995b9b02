"""Shared fixtures: the trained toy runs are expensive (minutes each), so
they are built once per session and reused by the harness and acceptance
tests."""

import time
from dataclasses import replace

import pytest

from pcdown.config import preset
from pcdown.harness import evaluate, make_splits, pretrain_head, train_sampler


@pytest.fixture(scope="session")
def classification_run():
    """Toy 4-class run: pretrained head, trained sampler, and an m=16 eval."""
    t0 = time.perf_counter()
    config = preset("classification", toy=True)
    head, head_report = pretrain_head(config)
    train_items, test_items = make_splits(config)
    net, train_report = train_sampler(config, head, train_items)
    eval_report = evaluate(net, head, config, test_items, [config.m])
    return dict(
        config=config,
        head=head,
        head_report=head_report,
        net=net,
        train_report=train_report,
        train_items=train_items,
        test_items=test_items,
        eval_report=eval_report,
        seconds=time.perf_counter() - t0,
    )


@pytest.fixture(scope="session")
def fmops_run(classification_run):
    """Flexible-size sampler sharing the frozen classification head; the
    network is sized for m_max=64 and trained on randomly drawn sizes."""
    t0 = time.perf_counter()
    config = replace(classification_run["config"], flexible=True, m=64).validate()
    head = classification_run["head"]
    train_items, test_items = make_splits(config)
    net, train_report = train_sampler(config, head, train_items)
    return dict(
        config=config,
        head=head,
        net=net,
        train_report=train_report,
        train_items=train_items,
        test_items=test_items,
        seconds=time.perf_counter() - t0,
    )


@pytest.fixture(scope="session")
def reconstruction_run():
    """Toy autoencoder run at m=32 with a slightly longer, colder anneal than
    the preset: the softer default (tau_min=0.5) leaves the trained matrix
    too diffuse for the sampled sets to beat random selection reliably."""
    t0 = time.perf_counter()
    config = preset("reconstruction", toy=True, tau_min=0.1, epochs=80, m=32)
    head, head_report = pretrain_head(config)
    train_items, test_items = make_splits(config)
    net, train_report = train_sampler(config, head, train_items)
    eval_report = evaluate(net, head, config, test_items, [config.m])
    return dict(
        config=config,
        head=head,
        head_report=head_report,
        net=net,
        train_report=train_report,
        train_items=train_items,
        test_items=test_items,
        eval_report=eval_report,
        seconds=time.perf_counter() - t0,
    )


@pytest.fixture(scope="session")
def registration_head():
    """Pose-regression head pretrained on many synthetic pairs; no sampler.
    More pairs and epochs than the preset defaults because the quaternion
    head needs them before it beats the identity baseline on held-out pairs."""
    t0 = time.perf_counter()
    config = preset("registration", toy=True, train_per_class=64, head_epochs=300)
    head, head_report = pretrain_head(config)
    train_items, test_items = make_splits(config)
    return dict(
        config=config,
        head=head,
        head_report=head_report,
        train_items=train_items,
        test_items=test_items,
        seconds=time.perf_counter() - t0,
    )
