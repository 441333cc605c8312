"""Optimization loop: batches → stylization → embeddings → loss → Adam"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Mapping, Optional

import numpy as np
import torch

from application.ports.driven.storage.checkpoints.repository_port import \
    CheckpointRepositoryPort
from application.ports.driving.training.service_port import TrainerServicePort
from application.services.embedder_service import (EmbedderService,
                                                   StyleEncoder)
from application.services.objective_service import ObjectiveService
from application.services.sampler_service import SamplerService, derive_pairs
from domain.entities.batch import BatchPlan
from domain.entities.image import Image
from domain.entities.training import (AdamMoments, Checkpoint, ProgressRecord,
                                      TrainConfig)
from domain.exceptions import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)


def lr_at(step: int, base_lr: float, decay: float, every: int = 100) -> float:
    """Step-decayed learning rate: base_lr · decay^⌊step/every⌋"""
    if step < 0:
        raise InvalidArgumentError("step must be non-negative")
    return base_lr * decay ** (step // every)


def batch_seed(run_seed: int, step: int, sub_batch: int) -> int:
    """Seed of one sub-batch; depends only on its position in the run"""
    state = np.random.SeedSequence([run_seed, step, sub_batch]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass
class TrainingState:
    """Mutable encoder and optimizer; `step` counts completed updates"""

    encoder: StyleEncoder
    optimizer: torch.optim.Adam
    step: int = 0


class TrainerService(TrainerServicePort):
    """Application service for contrastive style-embedding training"""

    def __init__(
        self,
        sampler_service: SamplerService,
        objective_service: ObjectiveService,
        embedder_service: EmbedderService,
        checkpoint_repository: CheckpointRepositoryPort,
    ):
        self.sampler_service = sampler_service
        self.objective_service = objective_service
        self.embedder_service = embedder_service
        self.checkpoint_repository = checkpoint_repository

    @staticmethod
    def _optimizer(encoder: StyleEncoder, config: TrainConfig) -> torch.optim.Adam:
        return torch.optim.Adam(
            encoder.parameters(),
            lr=config.base_lr,
            betas=(config.adam_beta1, config.adam_beta2),
            eps=config.adam_eps,
        )

    def init_state(self, config: TrainConfig) -> TrainingState:
        """Encoder initialized from the run seed with fresh Adam state"""
        encoder = self.embedder_service.new_encoder(config.encoder, config.seed)
        return TrainingState(encoder=encoder, optimizer=self._optimizer(encoder, config))

    def state_from_checkpoint(
        self, checkpoint: Checkpoint, config: Optional[TrainConfig] = None
    ) -> TrainingState:
        """Rebuild encoder and Adam buffers from a checkpoint"""
        config = config or checkpoint.config
        if config.encoder != checkpoint.config.encoder:
            raise InvalidArgumentError("checkpoint encoder architecture differs from config")
        encoder = self.embedder_service.new_encoder(config.encoder, config.seed)
        encoder.load_state_dict(checkpoint.parameters, strict=True)
        optimizer = self._optimizer(encoder, config)
        for name, parameter in encoder.named_parameters():
            moments = checkpoint.adam_state.get(name)
            if moments is None:
                continue
            optimizer.state[parameter] = {
                "step": torch.tensor(float(checkpoint.adam_step)),
                "exp_avg": moments.exp_avg.clone(),
                "exp_avg_sq": moments.exp_avg_sq.clone(),
            }
        return TrainingState(encoder=encoder, optimizer=optimizer, step=checkpoint.step)

    @staticmethod
    def checkpoint_of(state: TrainingState, config: TrainConfig) -> Checkpoint:
        """Snapshot of the current training state"""
        parameters = {}
        adam_state = {}
        adam_step = 0
        for name, parameter in state.encoder.named_parameters():
            parameters[name] = parameter.detach().clone()
            buffers = state.optimizer.state.get(parameter)
            if buffers:
                adam_state[name] = AdamMoments(
                    exp_avg=buffers["exp_avg"].detach().clone(),
                    exp_avg_sq=buffers["exp_avg_sq"].detach().clone(),
                )
                adam_step = int(float(buffers["step"]))
        return Checkpoint(
            config=config,
            step=state.step,
            parameters=parameters,
            adam_step=adam_step,
            adam_state=adam_state,
        )

    def build_batches(
        self,
        config: TrainConfig,
        content_pool: Mapping[int, Image],
        style_pool: Mapping[int, Image],
        step: int,
    ) -> List[BatchPlan]:
        """The accumulation_factor sub-batches of one optimizer step"""
        return [
            self.sampler_service.build_batch(
                content_pool,
                style_pool,
                config.batch_size,
                config.stylizers,
                batch_seed(config.seed, step, sub_batch),
            )
            for sub_batch in range(config.accumulation_factor)
        ]

    def sub_batch_loss(
        self, encoder: StyleEncoder, plan: BatchPlan, config: TrainConfig
    ) -> torch.Tensor:
        """Differentiable loss of one sub-batch"""
        style_ids = plan.style_ids
        images = [item.image for item in plan.items] + [
            plan.style_sources[style_id] for style_id in style_ids
        ]
        dtype = next(encoder.parameters()).dtype
        embeddings = encoder(
            self.embedder_service.images_to_tensor(images, config.encoder, dtype)
        )
        stylized, sources = embeddings[: plan.size], embeddings[plan.size :]
        source_index = [style_ids.index(label) for label in plan.labels]
        return self.objective_service.contrastive_loss(
            stylized, sources, source_index, derive_pairs(plan.labels), config.loss
        )

    def train_step(
        self, state: TrainingState, batches: List[BatchPlan], config: TrainConfig
    ) -> float:
        """Average gradients over the sub-batches, then take one Adam step"""
        seeds = [plan.rng_seed for plan in batches]
        state.optimizer.zero_grad(set_to_none=True)
        total = 0.0
        for plan in batches:
            loss = self.sub_batch_loss(state.encoder, plan, config)
            (loss / len(batches)).backward()
            total += float(loss.detach())
        mean_loss = total / len(batches)

        if not math.isfinite(mean_loss):
            raise NumericError("Non-finite training loss", step=state.step, batch_seeds=seeds)
        for name, parameter in state.encoder.named_parameters():
            if parameter.grad is not None and not bool(torch.isfinite(parameter.grad).all()):
                raise NumericError(
                    f"Non-finite gradient for {name}", step=state.step, batch_seeds=seeds
                )

        lr = lr_at(state.step, config.base_lr, config.lr_decay, config.lr_decay_every)
        for group in state.optimizer.param_groups:
            group["lr"] = lr
        state.optimizer.step()
        state.step += 1
        return mean_loss

    def train(
        self,
        config: TrainConfig,
        content_pool: Mapping[int, Image],
        style_pool: Mapping[int, Image],
        progress_sink: Callable[[ProgressRecord], None],
        resume_from: Optional[Checkpoint] = None,
        checkpoint_path: Optional[Path] = None,
    ) -> Checkpoint:
        """Run config.steps optimizer steps, emitting (step, loss, lr) records"""
        if resume_from is not None:
            state = self.state_from_checkpoint(resume_from, config)
            logger.info("Resuming training at step %d", state.step)
        else:
            state = self.init_state(config)

        while state.step < config.steps:
            step = state.step
            lr = lr_at(step, config.base_lr, config.lr_decay, config.lr_decay_every)
            batches = self.build_batches(config, content_pool, style_pool, step)
            loss = self.train_step(state, batches, config)
            progress_sink(ProgressRecord(step=step, loss=loss, lr=lr))

            if state.step % config.log_every == 0:
                logger.info("step %d/%d loss=%.5f lr=%.6g", state.step, config.steps, loss, lr)
            if (
                checkpoint_path is not None
                and config.checkpoint_every
                and state.step % config.checkpoint_every == 0
            ):
                self.save_checkpoint(self.checkpoint_of(state, config), checkpoint_path)
                logger.info("Checkpoint written at step %d to %s", state.step, checkpoint_path)

        checkpoint = self.checkpoint_of(state, config)
        if checkpoint_path is not None:
            self.save_checkpoint(checkpoint, checkpoint_path)
        return checkpoint

    def encoder_from_checkpoint(self, checkpoint: Checkpoint) -> StyleEncoder:
        """Inference encoder with the checkpoint's weights"""
        encoder = self.embedder_service.new_encoder(
            checkpoint.config.encoder, checkpoint.config.seed
        )
        encoder.load_state_dict(checkpoint.parameters, strict=True)
        encoder.eval()
        return encoder

    def save_checkpoint(self, checkpoint: Checkpoint, path: Path) -> None:
        """Persist a checkpoint"""
        self.checkpoint_repository.save(checkpoint, Path(path))

    def load_checkpoint(self, path: Path) -> Checkpoint:
        """Read a checkpoint"""
        return self.checkpoint_repository.load(Path(path))
