"""Configuration management with pydantic-settings."""
from enum import Enum
import logging

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class SimulationMethod(Enum):
    """Simulation strategies for the urn process."""
    NAIVE = "naive"
    EVENT_SKIP = "event_skip"
    AUTO = "auto"


class SearchStrategy(Enum):
    """Mutation-rate search strategies."""
    GRID_GOLDEN = "grid_golden"


class Settings(BaseSettings):
    """Application settings with validation."""

    # Oracles and forensic reference
    dp_max_steps: int = Field(
        default=5000,
        gt=0,
        description="Largest n accepted by the exact DP oracle (cost is O(n^2))"
    )
    mr_max_steps: int = Field(
        default=500,
        ge=2,
        description="Largest n accepted by the Matthews-Rosenberger evaluation"
    )

    # Simulation
    work_budget: int = Field(
        default=20_000_000_000,
        gt=0,
        description="Upper bound on replications * n for one ensemble"
    )
    sim_block_size: int = Field(
        default=4096,
        gt=0,
        description="Replications per unit of threaded work"
    )
    sim_workers: int = Field(
        default=1,
        gt=0,
        description="Blocks simulated concurrently"
    )
    auto_max_rate: float = Field(
        default=0.1,
        gt=0.0,
        le=1.0,
        description="method=auto uses event skipping only below this p_max"
    )
    auto_event_fraction: float = Field(
        default=0.05,
        gt=0.0,
        le=1.0,
        description="method=auto uses event skipping only when p_max*n < fraction*n"
    )

    # Approximation
    exact_composition: bool = Field(
        default=False,
        description="Stage-two urn starts at (u+M_k, v+k-M_k) instead of (M_k, k-M_k)"
    )
    approx_cache_size: int = Field(
        default=128,
        gt=0,
        description="LRU size for cached approximate PMFs"
    )

    # Output
    float_digits: int = Field(
        default=17,
        ge=1,
        le=17,
        description="Significant digits for floating-point output"
    )
    default_bins: int = Field(
        default=100,
        gt=0,
        description="Default histogram bin count"
    )

    # Application
    debug: bool = Field(default=False, description="Debug mode")
    log_level: str = Field(default="INFO", description="Logging level")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="RPW_",
        case_sensitive=False,
        extra="ignore"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Accept only level names known to the logging module."""
        level = (v or "INFO").upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"Unknown log level: {v}")
        return level


# Global settings instance
settings = Settings()


__all__ = [
    "settings",
    "Settings",
    "SimulationMethod",
    "SearchStrategy",
]
