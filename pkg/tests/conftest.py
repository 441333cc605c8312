import pytest
import torch

from application.services.datagen_service import DataGenService
from application.services.embedder_service import EmbedderService
from application.services.evaluation_service import EvaluationService
from application.services.objective_service import ObjectiveService
from application.services.report_service import ReportService
from application.services.sampler_service import SamplerService
from application.services.stylizer_service import StylizerService
from application.services.trainer_service import TrainerService
from domain.entities.embedding import EncoderConfig
from domain.entities.training import LossConfig, TrainConfig
from driven.storage.checkpoints.adapter import CheckpointFileRepository
from driven.storage.images.adapter import PngImageRepository
from driven.storage.reports.adapter import FileReportRepository


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="run full training runs"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def deterministic_torch():
    torch.use_deterministic_algorithms(True)
    yield


@pytest.fixture
def datagen_service():
    return DataGenService(PngImageRepository())


@pytest.fixture
def stylizer_service():
    return StylizerService()


@pytest.fixture
def embedder_service():
    return EmbedderService(embed_batch_size=16)


@pytest.fixture
def objective_service():
    return ObjectiveService()


@pytest.fixture
def sampler_service(stylizer_service):
    return SamplerService(stylizer_service)


@pytest.fixture
def trainer_service(sampler_service, objective_service, embedder_service):
    return TrainerService(
        sampler_service, objective_service, embedder_service, CheckpointFileRepository()
    )


@pytest.fixture
def evaluation_service(datagen_service, stylizer_service, embedder_service):
    return EvaluationService(
        datagen_service, stylizer_service, embedder_service, block_size=7, chance_shuffles=50
    )


@pytest.fixture
def report_service():
    return ReportService(FileReportRepository())


@pytest.fixture
def tiny_encoder_config():
    """16×16 input, two levels, D=8"""
    return EncoderConfig(
        input_size=16,
        channels=[4, 6],
        patch_size=8,
        token_dim=4,
        attention_heads=2,
        embedding_dim=8,
    )


@pytest.fixture
def tiny_train_config(tiny_encoder_config):
    return TrainConfig(
        batch_size=4,
        accumulation_factor=2,
        steps=3,
        seed=11,
        content_count=8,
        style_count=4,
        log_every=1,
        encoder=tiny_encoder_config,
        loss=LossConfig(),
    )


@pytest.fixture
def tiny_pools(datagen_service, tiny_train_config):
    contents = datagen_service.content_pool(tiny_train_config.content_seeds, 16)
    styles = datagen_service.style_pool(tiny_train_config.style_seeds, 16)
    return contents, styles
