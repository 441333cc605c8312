"""Paired-style contrastive objective"""
from typing import Dict, List, Mapping, Sequence, Tuple

import torch

from domain.entities.batch import PairAssignment
from domain.entities.training import LossConfig
from domain.exceptions import InvalidArgumentError


def _as_tensor(values) -> torch.Tensor:
    if isinstance(values, torch.Tensor):
        return values
    return torch.as_tensor(values, dtype=torch.float64)


class ObjectiveService:
    """InfoNCE over stylized pairs plus stylized-to-source-style anchor terms"""

    @staticmethod
    def info_nce(
        anchor: torch.Tensor,
        positive: torch.Tensor,
        negatives: Sequence[torch.Tensor],
        temperature: float,
    ) -> torch.Tensor:
        """-log softmax of the positive logit among positive and negative logits"""
        if temperature <= 0:
            raise InvalidArgumentError("temperature must be positive")
        if len(negatives) == 0:
            raise InvalidArgumentError("info_nce needs at least one negative")
        anchor = _as_tensor(anchor)
        candidates = torch.stack([_as_tensor(positive)] + [_as_tensor(n) for n in negatives])
        logits = candidates @ anchor / temperature
        # logsumexp subtracts the max logit
        return torch.logsumexp(logits, dim=0) - logits[0]

    def contrastive_loss(
        self,
        stylized: torch.Tensor,
        sources: torch.Tensor,
        source_index: Sequence[int],
        pairs: Sequence[PairAssignment],
        config: LossConfig,
    ) -> torch.Tensor:
        """
        Differentiable batch loss.

        stylized: (B, D) embeddings; sources: (K, D) source-style embeddings;
        source_index[i] is the row of `sources` holding item i's style.
        """
        batch = stylized.shape[0]
        if len(pairs) != batch or len(source_index) != batch:
            raise InvalidArgumentError("pairs and source_index must cover every item")
        tau = config.temperature
        if tau <= 0:
            raise InvalidArgumentError("temperature must be positive")

        logits = stylized @ stylized.T / tau
        allowed = torch.zeros(batch, batch, dtype=torch.bool)
        positives = torch.empty(batch, dtype=torch.long)
        for pair in pairs:
            allowed[pair.anchor, pair.positive] = True
            allowed[pair.anchor, list(pair.negatives)] = True
            positives[pair.anchor] = pair.positive
        masked = logits.masked_fill(~allowed, float("-inf"))
        rows = torch.arange(batch)
        pair_terms = torch.logsumexp(masked, dim=1) - logits[rows, positives]
        loss = pair_terms.mean()

        if config.anchor_weight > 0:
            if sources.shape[0] < 2:
                raise InvalidArgumentError("anchor terms need at least two source styles")
            target = torch.as_tensor(list(source_index), dtype=torch.long)
            anchor_logits = stylized @ sources.T / tau
            anchor_terms = torch.logsumexp(anchor_logits, dim=1) - anchor_logits[rows, target]
            loss = loss + config.anchor_weight * anchor_terms.mean()
        return loss

    def batch_loss(
        self,
        stylized_embs: torch.Tensor,
        source_style_embs: Mapping[int, torch.Tensor],
        labels: Sequence[int],
        pairs: Sequence[PairAssignment],
        config: LossConfig,
    ) -> Tuple[float, torch.Tensor, Dict[int, torch.Tensor]]:
        """Loss value with its gradient w.r.t. every stylized and source embedding"""
        missing = sorted({label for label in labels if label not in source_style_embs})
        if missing:
            raise InvalidArgumentError(f"no source embedding for styles {missing}")
        style_ids: List[int] = sorted({int(label) for label in labels})
        stylized = _as_tensor(stylized_embs).detach().clone().requires_grad_(True)
        sources = torch.stack(
            [_as_tensor(source_style_embs[s]) for s in style_ids]
        ).detach().clone().requires_grad_(True)
        source_index = [style_ids.index(int(label)) for label in labels]

        loss = self.contrastive_loss(stylized, sources, source_index, pairs, config)
        stylized_grad, sources_grad = torch.autograd.grad(
            loss, [stylized, sources], allow_unused=True
        )
        if sources_grad is None:
            sources_grad = torch.zeros_like(sources)
        return (
            float(loss.detach()),
            stylized_grad,
            {s: sources_grad[row] for row, s in enumerate(style_ids)},
        )
