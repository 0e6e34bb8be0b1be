"""Repository pattern for observation sources."""
from abc import ABC, abstractmethod
from typing import List

from storage.models import SiteObservation


class BaseRepository(ABC):
    """Abstract source of per-site observations."""

    @abstractmethod
    async def load(self) -> List[SiteObservation]:
        """Read and validate every observation."""
        pass

    @abstractmethod
    def describe(self) -> str:
        """Human-readable description of the source."""
        pass


__all__ = ["BaseRepository"]
