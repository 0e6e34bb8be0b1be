"""Data models with Pydantic validation."""
from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from cli.config import SearchStrategy, SimulationMethod


class UrnParams(BaseModel):
    """Randomized play-the-winner urn: initial composition and switch rates."""

    u: int = Field(..., ge=0, description="Initial white balls")
    v: int = Field(..., ge=0, description="Initial black balls")
    p_w: float = Field(..., gt=0.0, lt=1.0, description="White draw adds a black ball")
    p_b: float = Field(..., gt=0.0, lt=1.0, description="Black draw adds a white ball")

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "example": {"u": 0, "v": 1, "p_w": 3.3333333333333335e-07, "p_b": 1e-06}
        },
    }

    @model_validator(mode="after")
    def validate_composition(self) -> "UrnParams":
        """The urn must start with at least one ball."""
        if self.u + self.v < 1:
            raise ValueError("urn must start with at least one ball (u + v >= 1)")
        return self

    @property
    def total(self) -> int:
        return self.u + self.v

    @property
    def lam(self) -> float:
        """1 - p_W - p_B."""
        return 1.0 - self.p_w - self.p_b

    @property
    def p_min(self) -> float:
        return min(self.p_w, self.p_b)

    @property
    def p_max(self) -> float:
        return max(self.p_w, self.p_b)

    def swapped(self) -> "UrnParams":
        """Same urn with the colour labels exchanged."""
        return UrnParams(u=self.v, v=self.u, p_w=self.p_b, p_b=self.p_w)

    def with_composition(self, white: int, black: int) -> "UrnParams":
        """Same switch rates, different starting composition."""
        return UrnParams(u=white, v=black, p_w=self.p_w, p_b=self.p_b)


class BinSpec(BaseModel):
    """Uniform partition of [lo, hi] into `count` bins."""

    lo: float = Field(default=0.0, description="Lower edge")
    hi: float = Field(default=1.0, description="Upper edge")
    count: int = Field(default=100, ge=1, description="Number of bins")

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def validate_range(self) -> "BinSpec":
        if not self.lo < self.hi:
            raise ValueError(f"bin range must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        return self

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.count

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count + 1)

    @property
    def centers(self) -> np.ndarray:
        edges = self.edges
        return 0.5 * (edges[:-1] + edges[1:])


class SimConfig(BaseModel):
    """One seeded Monte Carlo ensemble."""

    params: UrnParams
    n: int = Field(..., ge=1, description="Steps per replication")
    replications: int = Field(..., ge=1, description="Independent replications")
    master_seed: int = Field(default=0, ge=0, lt=2**64, description="64-bit master seed")
    method: SimulationMethod = Field(default=SimulationMethod.AUTO)
    bins: BinSpec = Field(default_factory=BinSpec)

    model_config = {"frozen": True}


class SiteObservation(BaseModel):
    """One (sample, genome site) row of tabulated read counts."""

    sample_id: str = Field(..., min_length=1, description="Sample identifier")
    site: int = Field(..., gt=0, description="Genome coordinate")
    depth: int = Field(..., ge=0, description="Total reads at the site")
    alt_count: int = Field(..., ge=0, description="Reads exhibiting the variant")
    strand_bias: float = Field(..., ge=0.0, description="Strand bias score")

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "example": {
                "sample_id": "GJ-014",
                "site": 23403,
                "depth": 4210,
                "alt_count": 3,
                "strand_bias": 1.7,
            }
        },
    }

    @model_validator(mode="after")
    def validate_counts(self) -> "SiteObservation":
        if self.alt_count > self.depth:
            raise ValueError(
                f"alt_count ({self.alt_count}) exceeds depth ({self.depth})"
            )
        return self

    @property
    def frequency(self) -> Optional[float]:
        """Variant read fraction, None when the site has no reads."""
        if self.depth == 0:
            return None
        return self.alt_count / self.depth


class FitConfig(BaseModel):
    """Least-squares mutation-rate fit settings."""

    ratio: float = Field(default=3.0, gt=0.0, description="p_B / p_W (Jukes-Cantor: 3)")
    n: int = Field(default=1_000_000, ge=2, description="Viral population size")
    k: Optional[int] = Field(default=None, ge=1, description="Cut step; None uses choose_k")
    u: int = Field(default=0, ge=0, description="Initial mutated particles")
    v: int = Field(default=1, ge=0, description="Initial wild-type particles")
    min_depth: int = Field(default=1000, ge=0, description="Keep rows with depth >= this")
    max_strand_bias: float = Field(default=10.0, ge=0.0, description="Keep rows with bias <= this")
    freq_range: tuple[float, float] = Field(default=(0.0, 0.002))
    bin_count: int = Field(default=100, ge=1)
    min_cell_count: int = Field(
        default=5,
        ge=1,
        description="Observations per pooled atom cell in the objective"
    )
    search_range: tuple[float, float] = Field(
        default=(-8.0, -4.0),
        description="log10 p_B search interval"
    )
    search: SearchStrategy = Field(default=SearchStrategy.GRID_GOLDEN)
    grid_points: int = Field(default=41, ge=3, description="Log-spaced grid size")
    sig_figs: int = Field(default=3, ge=1, description="Golden refinement precision")
    truncate_renormalize: bool = Field(
        default=False,
        description="Renormalize densities to the mass inside freq_range"
    )
    exact_composition: Optional[bool] = Field(
        default=None,
        description="Override settings.exact_composition"
    )

    model_config = {"frozen": True}

    @field_validator("freq_range", "search_range")
    @classmethod
    def validate_interval(cls, v: tuple[float, float]) -> tuple[float, float]:
        lo, hi = v
        if not lo < hi:
            raise ValueError(f"interval must satisfy lower < upper, got {v}")
        return v

    @field_validator("search_range")
    @classmethod
    def validate_search_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        if v[1] >= 0.0:
            raise ValueError(f"log10 p_B must stay below 0, got upper bound {v[1]}")
        return v

    @model_validator(mode="after")
    def validate_composition(self) -> "FitConfig":
        if self.u + self.v < 1:
            raise ValueError("urn must start with at least one ball (u + v >= 1)")
        if self.k is not None and self.k >= self.n:
            raise ValueError(f"k ({self.k}) must be smaller than n ({self.n})")
        return self

    @property
    def bins(self) -> BinSpec:
        lo, hi = self.freq_range
        return BinSpec(lo=lo, hi=hi, count=self.bin_count)


class FitResult(BaseModel):
    """Outcome of a mutation-rate fit."""

    p_b_hat: float = Field(..., description="Least-squares estimate of p_B")
    objective_curve: list[tuple[float, float]] = Field(
        default_factory=list,
        description="(candidate p_B, objective) pairs in increasing p_B"
    )
    filtered_count: int = Field(..., ge=0, description="Observations left after filtering")
    used_bins: int = Field(..., ge=0, description="Pooled atom cells compared at the optimum")
    warnings: list[str] = Field(default_factory=list)

    model_config = {
        "json_schema_extra": {
            "example": {
                "p_b_hat": 5.24e-06,
                "objective_curve": [[1e-06, 3.1], [5.24e-06, 0.42]],
                "filtered_count": 1196090,
                "used_bins": 37,
                "warnings": [],
            }
        }
    }


__all__ = [
    "UrnParams",
    "BinSpec",
    "SimConfig",
    "SiteObservation",
    "FitConfig",
    "FitResult",
]
