import logging
import re
from pathlib import Path
from typing import List

from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from application.ports.driven.storage.images.repository_port import \
    ImageRepositoryPort
from domain.entities.image import Image
from domain.exceptions import FormatError, StorageError
from driven.storage.images.mapper import PngImageMapper

logger = logging.getLogger(__name__)

ID_PATTERN = re.compile(r"^(\d+)\.png$")


class PngImageRepository(ImageRepositoryPort):
    """Implementation of the image repository using Pillow PNG files"""

    def __init__(self):
        self.mapper = PngImageMapper()

    def save(self, image: Image, path: Path) -> None:
        """Write an image as 8-bit RGB PNG, creating parent directories"""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.mapper.entity_to_pil(image).save(path, format="PNG")
        except OSError as e:
            raise StorageError(f"Cannot write {path}: {e}") from e

    def load(self, path: Path) -> Image:
        """Read an 8-bit RGB PNG"""
        path = Path(path)
        if not path.is_file():
            raise StorageError(f"No such image file: {path}")
        try:
            with PILImage.open(path) as pil:
                pil.load()
                return self.mapper.pil_to_entity(pil, str(path))
        except UnidentifiedImageError as e:
            raise FormatError(f"{path}: not a readable image") from e
        except (OSError, SyntaxError, ValueError) as e:
            if isinstance(e, FormatError):
                raise
            raise FormatError(f"{path}: corrupt image ({e})") from e

    def list_ids(self, directory: Path) -> List[int]:
        """Ids of the `<id>.png` files in a directory, ascending"""
        directory = Path(directory)
        if not directory.is_dir():
            raise StorageError(f"No such image directory: {directory}")
        ids = []
        for entry in directory.iterdir():
            match = ID_PATTERN.match(entry.name)
            if match and entry.is_file():
                ids.append(int(match.group(1)))
        return sorted(ids)
