"""Randomized play-the-winner urn: transition law and exact DP oracle.

Provides:
- `DiscreteDist`, a validated finite PMF over a contiguous integer support
- `white_add_prob`, the Bernoulli law of the next addition
- `exact_pmf_dp`, the O(n^2) forward recursion giving the exact law of M_n
- `moments_of`, mean and variance with compensated summation

M_i is the number of white balls added during the first i steps (M_0 = 0).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from cli.config import settings
from core.errors import DomainError, ResourceLimitError
from storage.models import UrnParams


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteDist:
    """Finite PMF on {offset, offset+1, ..., offset+len(masses)-1}."""

    offset: int
    masses: np.ndarray
    atol: float = field(default=1e-12, compare=False, repr=False)

    def __post_init__(self) -> None:
        masses = np.array(self.masses, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise DomainError("masses must be a non-empty one-dimensional sequence")
        if not np.all(np.isfinite(masses)) or np.any(masses < 0.0):
            raise DomainError("masses must be finite and non-negative")
        total = math.fsum(masses)
        if abs(total - 1.0) > self.atol:
            raise DomainError(f"masses sum to {total!r}, expected 1 within {self.atol}")
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def point_mass(cls, at: int = 0) -> "DiscreteDist":
        return cls(offset=at, masses=np.ones(1))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.masses.size)

    def pmf(self, x: int) -> float:
        idx = x - self.offset
        if idx < 0 or idx >= self.masses.size:
            return 0.0
        return float(self.masses[idx])


def _white_prob(params: UrnParams, i: int, m):
    # Works for scalar or array m.
    return (
        (1.0 - params.p_w) * (params.u + m) + params.p_b * (params.v + i - m)
    ) / (params.total + i)


def white_add_prob(params: UrnParams, i: int, m: int) -> float:
    """Probability that step i+1 adds a white ball given M_i = m.

    Args:
        params: Urn parameters.
        i: Steps taken so far (>= 0).
        m: Whites added so far, 0 <= m <= i.

    Returns:
        (1-p_W)(u+m)/(u+v+i) + p_B(v+i-m)/(u+v+i).
    """
    if i < 0:
        raise DomainError(f"step index must be non-negative, got {i}")
    if m < 0 or m > i:
        raise DomainError(f"whites added must satisfy 0 <= m <= i, got m={m}, i={i}")
    return float(_white_prob(params, i, m))


def conditional_variance(params: UrnParams, i: int, m: int) -> float:
    """Var[M_{i+1} | M_i = m], the Bernoulli variance p(1-p)."""
    p = white_add_prob(params, i, m)
    return p * (1.0 - p)


def limit_fraction(params: UrnParams) -> float:
    """Almost-sure limit of M_n / n: p_B / (p_W + p_B)."""
    return params.p_b / (params.p_w + params.p_b)


def exact_pmf_dp(params: UrnParams, n: int, cap: Optional[int] = None) -> DiscreteDist:
    """Exact law of M_n by forward dynamic programming over (i, m).

    Row i+1 at m collects the failure branch of (i, m) and the success
    branch of (i, m-1). One dense rolling row of length n+1 is kept.

    Args:
        params: Urn parameters.
        n: Number of steps.
        cap: Largest accepted n; defaults to `settings.dp_max_steps`.

    Returns:
        DiscreteDist over {0..n}.
    """
    cap = settings.dp_max_steps if cap is None else cap
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    if n > cap:
        raise ResourceLimitError(f"exact DP limited to n <= {cap}, got n={n}")

    row = np.zeros(n + 1)
    row[0] = 1.0
    for i in range(n):
        m = np.arange(i + 1)
        p = _white_prob(params, i, m)
        success = row[: i + 1] * p
        row[: i + 1] *= 1.0 - p
        row[1 : i + 2] += success

    logger.debug(f"DP oracle finished: n={n}, params={params}")
    return DiscreteDist(offset=0, masses=row)


def moments_of(dist: DiscreteDist) -> Tuple[float, float]:
    """Mean and variance of a discrete distribution (compensated sums)."""
    x = dist.support.astype(float)
    p = dist.masses
    mean = math.fsum(x * p)
    var = math.fsum((x - mean) ** 2 * p)
    return mean, var


__all__ = [
    "DiscreteDist",
    "white_add_prob",
    "conditional_variance",
    "limit_fraction",
    "exact_pmf_dp",
    "moments_of",
]
