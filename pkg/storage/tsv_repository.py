"""Tab-separated observation files."""
import asyncio
import logging
from io import StringIO
from pathlib import Path
from typing import List, Tuple

import aiofiles
import pandas as pd
from pydantic import ValidationError

from core.errors import DataError, IngestError, RowError
from storage.models import SiteObservation
from storage.repository import BaseRepository


logger = logging.getLogger(__name__)

COLUMNS = ["sample_id", "site", "depth", "alt_count", "strand_bias"]


class TSVObservationRepository(BaseRepository):
    """
    Observation file with header `sample_id site depth alt_count strand_bias`.

    Lines starting with `#` and blank lines are ignored. Every data row is
    validated; all row errors of a file are reported together, each with
    its 1-based line number in the file.
    """

    def __init__(self, path: Path):
        """
        Initialize TSV repository.

        Args:
            path: Path to the TSV file
        """
        self.path = Path(path)

    def describe(self) -> str:
        return f"TSV observations at {self.path}"

    async def _read_text(self) -> str:
        """Read the whole file asynchronously."""
        if not self.path.exists():
            raise DataError(f"{self.path}: file not found")
        async with aiofiles.open(self.path, "r", encoding="utf-8") as f:
            return await f.read()

    @staticmethod
    def _strip_comments(text: str) -> Tuple[str, List[int]]:
        """Drop comment/blank lines; return kept text and the file line of each kept line."""
        kept, line_numbers = [], []
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            kept.append(line)
            line_numbers.append(number)
        return "\n".join(kept), line_numbers

    async def load(self) -> List[SiteObservation]:
        """
        Load and validate all rows.

        Returns:
            Parsed observations in file order

        Raises:
            DataError: Missing header or columns, unparsable file
            IngestError: One or more rows failed validation
        """
        text = await self._read_text()
        body, line_numbers = self._strip_comments(text)
        if not line_numbers:
            raise DataError(f"{self.path}: missing header row")

        try:
            frame = pd.read_csv(
                StringIO(body), sep="\t", dtype=str, keep_default_na=False
            )
        except pd.errors.ParserError as e:
            raise DataError(f"{self.path}: cannot parse TSV: {e}") from e

        missing = [c for c in COLUMNS if c not in frame.columns]
        if missing:
            raise DataError(f"{self.path}: missing column(s) {', '.join(missing)}")

        if frame.empty:
            logger.warning(f"{self.path}: header only, no observations")
            return []

        observations: List[SiteObservation] = []
        errors: List[RowError] = []
        # Row r of the frame is kept line r+1 (kept line 0 is the header).
        for position, record in enumerate(frame[COLUMNS].to_dict(orient="records")):
            line = line_numbers[position + 1]
            try:
                observations.append(SiteObservation(**record))
            except ValidationError as e:
                reason = "; ".join(
                    f"{'.'.join(str(p) for p in err['loc']) or 'row'}: {err['msg']}"
                    for err in e.errors()
                )
                errors.append(RowError(line=line, reason=reason))

        if errors:
            raise IngestError(str(self.path), errors)

        logger.info(f"Loaded {len(observations)} observations from {self.path}")
        return observations


def ingest_tsv(path: Path) -> List[SiteObservation]:
    """Load a TSV observation file synchronously."""
    return asyncio.run(TSVObservationRepository(path).load())


__all__ = ["TSVObservationRepository", "ingest_tsv", "COLUMNS"]
