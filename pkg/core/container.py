"""
Dependency Injection container for centralized dependency management.

Provides factory methods for the shared approximate-PMF cache, observation
repositories and result writers.
"""
from pathlib import Path
from typing import TYPE_CHECKING, Optional

from cachetools import LRUCache

from cli.config import settings
from core.errors import DataError

if TYPE_CHECKING:
    from storage.repository import BaseRepository
    from storage.writers import ResultWriter


class Container:
    """
    Dependency injection container.

    Shared resources are created lazily and kept as class-level singletons;
    repositories and writers are built per path.
    """

    _approx_cache: Optional[LRUCache] = None

    @classmethod
    def get_approx_cache(cls) -> LRUCache:
        """
        Get the approximate-PMF cache.

        Keyed by (params, n, k, exact_composition); sized by
        `settings.approx_cache_size`.

        Returns:
            LRU cache instance
        """
        if cls._approx_cache is None:
            cls._approx_cache = LRUCache(maxsize=settings.approx_cache_size)
        return cls._approx_cache

    @classmethod
    def get_repository(cls, path: Path) -> "BaseRepository":
        """
        Get an observation repository for a file.

        Chooses the implementation from the file suffix.

        Args:
            path: Observation file

        Returns:
            Repository instance
        """
        path = Path(path)
        if path.suffix.lower() in (".tsv", ".txt"):
            from storage.tsv_repository import TSVObservationRepository
            return TSVObservationRepository(path)
        raise DataError(f"{path}: unsupported observation format '{path.suffix}'")

    @classmethod
    def get_writer(cls, out_dir: Path) -> "ResultWriter":
        """Get a result writer for an output directory."""
        from storage.writers import ResultWriter
        return ResultWriter(Path(out_dir))

    @classmethod
    def reset(cls) -> None:
        """
        Reset all cached instances.

        Useful for testing and re-initialization.
        """
        cls._approx_cache = None


# Convenience functions for easy access
def get_approx_cache() -> LRUCache:
    """Get approximate-PMF cache."""
    return Container.get_approx_cache()


def get_repository(path: Path) -> "BaseRepository":
    """Get observation repository."""
    return Container.get_repository(path)


def get_writer(out_dir: Path) -> "ResultWriter":
    """Get result writer."""
    return Container.get_writer(out_dir)


__all__ = [
    "Container",
    "get_approx_cache",
    "get_repository",
    "get_writer",
]
