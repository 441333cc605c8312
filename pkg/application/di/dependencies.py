"""Service getters used by the driving adapters"""

from application.di.service_manager import get_service_manager
from application.ports.driven.storage.embeddings.repository_port import \
    EmbeddingStoreRepositoryPort
from application.services.datagen_service import DataGenService
from application.services.evaluation_service import EvaluationService
from application.services.report_service import ReportService
from application.services.trainer_service import TrainerService


def get_datagen_service() -> DataGenService:
    return get_service_manager().get_datagen_service()


def get_trainer_service() -> TrainerService:
    return get_service_manager().get_trainer_service()


def get_evaluation_service() -> EvaluationService:
    return get_service_manager().get_evaluation_service()


def get_report_service() -> ReportService:
    return get_service_manager().get_report_service()


def get_embedding_store_repository() -> EmbeddingStoreRepositoryPort:
    return get_service_manager().get_repository("embeddings")
