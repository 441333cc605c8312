from abc import ABC, abstractmethod
from pathlib import Path
from typing import List

from domain.entities.image import Image


class ImageRepositoryPort(ABC):
    """Port (interface) for image file operations"""

    @abstractmethod
    def save(self, image: Image, path: Path) -> None:
        """Write an image as 8-bit RGB"""
        raise NotImplementedError

    @abstractmethod
    def load(self, path: Path) -> Image:
        """Read an 8-bit RGB image"""
        raise NotImplementedError

    @abstractmethod
    def list_ids(self, directory: Path) -> List[int]:
        """Ids of the `<id>.png` files in a directory, ascending"""
        raise NotImplementedError
