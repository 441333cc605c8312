import math

import numpy as np
import pytest
import torch

from application.services.sampler_service import derive_pairs
from domain.entities.training import LossConfig
from domain.exceptions import InvalidArgumentError
from tests.helpers import unit_rows


def _with_dot(anchor, value, rng):
    """Unit vector whose dot product with `anchor` is `value`"""
    other = rng.standard_normal(anchor.shape[0])
    other -= other.dot(anchor) * anchor
    other /= np.linalg.norm(other)
    return value * anchor + math.sqrt(max(0.0, 1 - value**2)) * other


@pytest.mark.parametrize("negatives", [1, 3, 7])
def test_uniform_logits_give_log_of_candidates(objective_service, negatives):
    rng = np.random.default_rng(negatives)
    anchor = unit_rows(rng, 1, 6)[0]
    positive = _with_dot(anchor, 0.3, rng)
    others = [_with_dot(anchor, 0.3, rng) for _ in range(negatives)]
    loss = objective_service.info_nce(anchor, positive, others, 0.07)
    assert float(loss) == pytest.approx(math.log(negatives + 1), abs=1e-9)


def test_separated_logits_give_near_zero_loss(objective_service):
    anchor = np.array([1.0, 0.0])
    loss = float(objective_service.info_nce(anchor, anchor, [-anchor] * 3, 0.07))
    assert loss == pytest.approx(3 * math.exp(-2 / 0.07), rel=1e-2)
    assert 0 <= loss < 1e-11


def test_info_nce_argument_checks(objective_service):
    anchor = np.array([1.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        objective_service.info_nce(anchor, anchor, [anchor], 0.0)
    with pytest.raises(InvalidArgumentError):
        objective_service.info_nce(anchor, anchor, [], 0.07)


def test_info_nce_is_stable_for_large_logits(objective_service):
    anchor = np.array([1.0, 0.0])
    loss = objective_service.info_nce(anchor, -anchor, [anchor], 1 / 500)
    assert math.isfinite(float(loss))
    assert float(loss) == pytest.approx(1000.0, rel=1e-9)


def test_info_nce_ignores_negative_order_and_rewards_closer_positives(objective_service):
    rng = np.random.default_rng(1)
    anchor, *negatives = unit_rows(rng, 5, 8)
    near = _with_dot(anchor, 0.8, rng)
    far = _with_dot(anchor, 0.2, rng)
    base = float(objective_service.info_nce(anchor, far, negatives, 0.1))
    shuffled = float(objective_service.info_nce(anchor, far, negatives[::-1], 0.1))
    closer = float(objective_service.info_nce(anchor, near, negatives, 0.1))
    assert base == pytest.approx(shuffled, abs=1e-12)
    assert closer < base


def _batch(rng, labels, dim=8):
    stylized = unit_rows(rng, len(labels), dim)
    sources = {label: unit_rows(rng, 1, dim)[0] for label in sorted(set(labels))}
    return stylized, sources


def test_zero_anchor_weight_is_the_mean_pair_loss(objective_service):
    rng = np.random.default_rng(3)
    labels = [4, 9, 9, 4, 2, 2]
    stylized, sources = _batch(rng, labels)
    pairs = derive_pairs(labels)
    config = LossConfig(temperature=0.2, anchor_weight=0.0)
    loss, _, _ = objective_service.batch_loss(stylized, sources, labels, pairs, config)
    expected = np.mean(
        [
            float(
                objective_service.info_nce(
                    stylized[p.anchor], stylized[p.positive], [stylized[n] for n in p.negatives], 0.2
                )
            )
            for p in pairs
        ]
    )
    assert loss == pytest.approx(expected, abs=1e-12)


def test_anchor_terms_use_the_source_styles(objective_service):
    rng = np.random.default_rng(4)
    labels = [1, 2, 1, 2]
    stylized, sources = _batch(rng, labels)
    pairs = derive_pairs(labels)
    with_anchor, _, _ = objective_service.batch_loss(
        stylized, sources, labels, pairs, LossConfig(temperature=0.5, anchor_weight=0.5)
    )
    without, _, _ = objective_service.batch_loss(
        stylized, sources, labels, pairs, LossConfig(temperature=0.5, anchor_weight=0.0)
    )
    anchor_terms = [
        float(
            objective_service.info_nce(
                stylized[i], sources[label], [sources[s] for s in sources if s != label], 0.5
            )
        )
        for i, label in enumerate(labels)
    ]
    assert with_anchor == pytest.approx(without + 0.5 * np.mean(anchor_terms), abs=1e-12)


def test_identical_embeddings_closed_form(objective_service):
    labels = [0, 1, 0, 1]
    vector = np.array([0.0, 1.0, 0.0])
    stylized = np.tile(vector, (4, 1))
    sources = {0: vector, 1: vector}
    loss, _, _ = objective_service.batch_loss(
        stylized, sources, labels, derive_pairs(labels), LossConfig(anchor_weight=1.0)
    )
    assert loss == pytest.approx(math.log(3) + math.log(2), abs=1e-6)


def test_missing_source_embedding_is_rejected(objective_service):
    labels = [0, 1, 0, 1]
    stylized, sources = _batch(np.random.default_rng(0), labels)
    del sources[1]
    with pytest.raises(InvalidArgumentError):
        objective_service.batch_loss(stylized, sources, labels, derive_pairs(labels), LossConfig())


def test_batch_loss_gradients_match_finite_differences(objective_service):
    rng = np.random.default_rng(8)
    labels = [5, 6, 6, 5]
    stylized, sources = _batch(rng, labels)
    pairs = derive_pairs(labels)
    config = LossConfig(temperature=0.3, anchor_weight=1.0)
    _, stylized_grad, source_grads = objective_service.batch_loss(
        stylized, sources, labels, pairs, config
    )

    def loss_at(s, src):
        return objective_service.batch_loss(s, src, labels, pairs, config)[0]

    h = 1e-5
    worst = 0.0
    for i in range(stylized.shape[0]):
        for d in range(stylized.shape[1]):
            plus, minus = stylized.copy(), stylized.copy()
            plus[i, d] += h
            minus[i, d] -= h
            numeric = (loss_at(plus, sources) - loss_at(minus, sources)) / (2 * h)
            analytic = float(stylized_grad[i, d])
            worst = max(worst, abs(numeric - analytic) / max(abs(analytic), 1e-3))
    for label, grad in source_grads.items():
        for d in range(grad.shape[0]):
            plus = {k: v.copy() for k, v in sources.items()}
            minus = {k: v.copy() for k, v in sources.items()}
            plus[label][d] += h
            minus[label][d] -= h
            numeric = (loss_at(stylized, plus) - loss_at(stylized, minus)) / (2 * h)
            worst = max(worst, abs(numeric - float(grad[d])) / max(abs(float(grad[d])), 1e-3))
    assert worst < 1e-4


def test_contrastive_loss_backpropagates_into_sources(objective_service):
    stylized = torch.nn.functional.normalize(torch.randn(4, 5, dtype=torch.float64), dim=1)
    sources = torch.nn.functional.normalize(torch.randn(2, 5, dtype=torch.float64), dim=1)
    sources.requires_grad_(True)
    labels = [0, 1, 1, 0]
    loss = objective_service.contrastive_loss(
        stylized, sources, labels, derive_pairs(labels), LossConfig()
    )
    loss.backward()
    assert sources.grad is not None and bool(torch.any(sources.grad != 0))
