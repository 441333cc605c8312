import numpy as np
from PIL import Image as PILImage

from domain.entities.image import MIN_IMAGE_SIZE, Image
from domain.exceptions import FormatError, InvalidArgumentError


class PngImageMapper:
    def entity_to_pil(self, entity: Image) -> PILImage.Image:
        # round to the nearest 8-bit level so a round-trip errs by at most 1/510
        quantized = np.rint(entity.pixels.astype(np.float64) * 255.0).astype(np.uint8)
        return PILImage.fromarray(quantized)

    def pil_to_entity(self, pil: PILImage.Image, source: str = "image") -> Image:
        if pil.format not in (None, "PNG"):
            raise FormatError(f"{source}: expected PNG, got {pil.format}")
        if pil.mode != "RGB":
            raise FormatError(f"{source}: expected 8-bit RGB, got mode {pil.mode}")
        if pil.width < MIN_IMAGE_SIZE or pil.height < MIN_IMAGE_SIZE:
            raise FormatError(
                f"{source}: {pil.width}×{pil.height} is smaller than "
                f"{MIN_IMAGE_SIZE}×{MIN_IMAGE_SIZE}"
            )
        pixels = np.asarray(pil, dtype=np.uint8).astype(np.float32) / np.float32(255.0)
        try:
            return Image(pixels)
        except InvalidArgumentError as e:
            raise FormatError(f"{source}: {e}") from e
