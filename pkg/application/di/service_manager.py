from typing import Any, Callable, Dict, Optional

from application.services.datagen_service import DataGenService
from application.services.embedder_service import EmbedderService
from application.services.evaluation_service import EvaluationService
from application.services.objective_service import ObjectiveService
from application.services.report_service import ReportService
from application.services.sampler_service import SamplerService
from application.services.stylizer_service import StylizerService
from application.services.trainer_service import TrainerService
from config import settings
from driven.storage.checkpoints.adapter import CheckpointFileRepository
from driven.storage.embeddings.adapter import EmbeddingStoreFileRepository
from driven.storage.images.adapter import PngImageRepository
from driven.storage.reports.adapter import FileReportRepository


class ServiceManager:
    """Concrete implementation of service manager for dependency injection"""

    def __init__(self):
        self._service_cache: Dict[str, Any] = {}
        self._repository_cache: Dict[str, Any] = {}
        self.repositories = {
            "images": PngImageRepository,
            "checkpoints": CheckpointFileRepository,
            "embeddings": EmbeddingStoreFileRepository,
            "reports": FileReportRepository,
        }

    def get_repository(self, repository_type: str) -> Any:
        """Get or create a repository instance with caching"""
        if repository_type not in self._repository_cache:
            if repository_type not in self.repositories:
                raise ValueError(f"Unknown repository type: {repository_type}")
            self._repository_cache[repository_type] = self.repositories[repository_type]()
        return self._repository_cache[repository_type]

    def _get_or_create_service(self, service_type: str, factory: Callable[[], Any]) -> Any:
        """Get or create a service instance with caching"""
        if service_type not in self._service_cache:
            self._service_cache[service_type] = factory()
        return self._service_cache[service_type]

    def get_datagen_service(self) -> DataGenService:
        return self._get_or_create_service(
            "datagen", lambda: DataGenService(self.get_repository("images"))
        )

    def get_stylizer_service(self) -> StylizerService:
        return self._get_or_create_service("stylizer", StylizerService)

    def get_embedder_service(self) -> EmbedderService:
        return self._get_or_create_service(
            "embedder", lambda: EmbedderService(embed_batch_size=settings.EMBED_BATCH_SIZE)
        )

    def get_sampler_service(self) -> SamplerService:
        return self._get_or_create_service(
            "sampler",
            lambda: SamplerService(self.get_stylizer_service(), workers=settings.STYLIZE_WORKERS),
        )

    def get_objective_service(self) -> ObjectiveService:
        return self._get_or_create_service("objective", ObjectiveService)

    def get_trainer_service(self) -> TrainerService:
        return self._get_or_create_service(
            "trainer",
            lambda: TrainerService(
                self.get_sampler_service(),
                self.get_objective_service(),
                self.get_embedder_service(),
                self.get_repository("checkpoints"),
            ),
        )

    def get_evaluation_service(self) -> EvaluationService:
        return self._get_or_create_service(
            "evaluation",
            lambda: EvaluationService(
                self.get_datagen_service(),
                self.get_stylizer_service(),
                self.get_embedder_service(),
                block_size=settings.EVAL_BLOCK_SIZE,
                chance_shuffles=settings.CHANCE_SHUFFLES,
            ),
        )

    def get_report_service(self) -> ReportService:
        return self._get_or_create_service(
            "report", lambda: ReportService(self.get_repository("reports"))
        )

    def clear_cache(self) -> None:
        """Clear all cached instances (useful for testing)"""
        self._service_cache.clear()
        self._repository_cache.clear()


# Global service manager instance
_service_manager: Optional[ServiceManager] = None


def get_service_manager() -> ServiceManager:
    """Get global service manager instance (singleton pattern)"""
    global _service_manager
    if _service_manager is None:
        _service_manager = ServiceManager()
    return _service_manager


def reset_service_manager() -> None:
    """Reset global service manager (useful for testing)"""
    global _service_manager
    _service_manager = None
