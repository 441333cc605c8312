import csv
import io
from typing import List, Sequence

from domain.entities.training import ProgressRecord
from domain.exceptions import FormatError

PROGRESS_HEADER = ["step", "loss", "lr"]


class ProgressCsvMapper:
    def header(self) -> str:
        return ",".join(PROGRESS_HEADER) + "\n"

    def entity_to_row(self, entity: ProgressRecord) -> str:
        # repr keeps every float bit so replayed runs compare exactly
        return f"{entity.step},{float(entity.loss)!r},{float(entity.lr)!r}\n"

    def entities_to_text(self, entities: Sequence[ProgressRecord]) -> str:
        return self.header() + "".join(self.entity_to_row(e) for e in entities)

    def text_to_entities(self, text: str, source: str = "progress") -> List[ProgressRecord]:
        reader = csv.reader(io.StringIO(text))
        if next(reader, None) != PROGRESS_HEADER:
            raise FormatError(f"{source}: expected header {','.join(PROGRESS_HEADER)}")
        records = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                step, loss, lr = row
                records.append(ProgressRecord(step=int(step), loss=float(loss), lr=float(lr)))
            except ValueError as e:
                raise FormatError(f"{source}:{line}: malformed progress row {row}") from e
        return records
