"""Storage package.

Exports:
- Pydantic models
- Observation repository interface and TSV implementation
- Result writer
"""

from storage.models import (
    BinSpec,
    FitConfig,
    FitResult,
    SimConfig,
    SiteObservation,
    UrnParams,
)
from storage.repository import BaseRepository
from storage.tsv_repository import TSVObservationRepository, ingest_tsv
from storage.writers import ResultWriter

__all__ = [
    "UrnParams",
    "BinSpec",
    "SimConfig",
    "SiteObservation",
    "FitConfig",
    "FitResult",
    "BaseRepository",
    "TSVObservationRepository",
    "ingest_tsv",
    "ResultWriter",
]
