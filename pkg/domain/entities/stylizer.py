"""Stylizer kinds"""
from enum import Enum
from typing import List


class StylizerKind(str, Enum):
    """Feed-forward stylization methods, in registry order"""

    MOMENT_MATCH = "moment"
    PALETTE_MAP = "palette"
    PATCH_BLEND = "patch"

    @property
    def tag(self) -> int:
        """Stable small integer used in on-disk records"""
        return list(StylizerKind).index(self)

    @classmethod
    def from_tag(cls, tag: int) -> "StylizerKind":
        return list(cls)[tag]

    @classmethod
    def names(cls) -> List[str]:
        return [kind.value for kind in cls]
