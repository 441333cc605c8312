from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Sequence, Tuple

from domain.entities.image import Image, StyleRecipe


class DataGenServicePort(ABC):
    """Port interface for synthetic data operations"""

    @abstractmethod
    def gen_content(self, seed: int, size: int) -> Image:
        """Render a content image from a seed"""
        raise NotImplementedError

    @abstractmethod
    def gen_style(self, seed: int, size: int) -> Tuple[Image, StyleRecipe]:
        """Render a style image and its recipe from a seed"""
        raise NotImplementedError

    @abstractmethod
    def write_pools(
        self,
        root: Path,
        content_seeds: Sequence[int],
        style_seeds: Sequence[int],
        size: int,
    ) -> Tuple[int, int]:
        """Write content and style pools as PNG files"""
        raise NotImplementedError

    @abstractmethod
    def load_pool(self, directory: Path) -> Dict[int, Image]:
        """Load a PNG pool keyed by seed"""
        raise NotImplementedError
