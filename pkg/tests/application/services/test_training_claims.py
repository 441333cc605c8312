"""Desk-scale training runs; enable with --run-slow"""
import pytest

from application.services.datagen_service import DataGenService
from config import settings
from domain.entities.evaluation import Protocol
from domain.entities.stylizer import StylizerKind
from domain.entities.training import TrainConfig
from driven.storage.images.adapter import PngImageRepository

IMAGE_SIZE = 64
GRID = 20


@pytest.fixture(scope="module")
def default_pools():
    datagen = DataGenService(PngImageRepository())
    config = TrainConfig()
    return (
        datagen.content_pool(config.content_seeds, IMAGE_SIZE),
        datagen.style_pool(config.style_seeds, IMAGE_SIZE),
    )


def _train_and_embed(trainer_service, evaluation_service, pools, config, kinds):
    checkpoint = trainer_service.train(config, *pools, lambda record: None)
    grid = evaluation_service.build_grid(
        GRID,
        GRID,
        kinds,
        settings.DEFAULT_EVAL_SEED_BASE,
        IMAGE_SIZE,
        reserved_content_seeds=config.content_seeds,
        reserved_style_seeds=config.style_seeds,
    )
    return evaluation_service.embed_grid(trainer_service.encoder_from_checkpoint(checkpoint), grid)


@pytest.mark.slow
def test_style_is_captured_and_content_is_not(trainer_service, evaluation_service, default_pools):
    store = _train_and_embed(
        trainer_service, evaluation_service, default_pools, TrainConfig(), list(StylizerKind)
    )
    for report in evaluation_service.evaluate(store, Protocol.STYLE):
        assert report.mean_average_precision >= 3 * report.chance_map, report.test_set
    for report in evaluation_service.evaluate(store, Protocol.CONTENT):
        assert report.mean_average_precision <= 1.5 * report.chance_map, report.test_set
        assert report.ir_hit_rates[1] <= 2 * report.chance_ir1, report.test_set


@pytest.mark.slow
def test_training_on_all_stylizers_generalizes_best(
    trainer_service, evaluation_service, default_pools
):
    averages = {}
    for name, stylizers in [(kind.value, [kind]) for kind in StylizerKind] + [
        ("all", list(StylizerKind))
    ]:
        config = TrainConfig(stylizers=stylizers)
        store = _train_and_embed(
            trainer_service, evaluation_service, default_pools, config, list(StylizerKind)
        )
        reports = evaluation_service.evaluate(store, Protocol.STYLE)
        averages[name] = sum(r.mean_average_precision for r in reports) / len(reports)
    assert all(averages["all"] > averages[kind.value] for kind in StylizerKind), averages
