"""Matthews-Rosenberger variance expression for the RPW urn (one ball per step).

The published expression is a sum of seven terms of nested gamma-ratio sums.
It disagrees with the exact variance: at u = v = 1, p_W = p_B = 1/2 the
process is Binomial(n, 1/2), yet the expression is larger than n/4 by its
first term. `mr_check` stages that comparison.

Every nested sum shares the innermost J[k] = sum_{j=k}^{n-1}
Gamma(c+j+lam) / Gamma(c+j+1), so the triple sums are evaluated with suffix
sums instead of literal loops.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from cli.config import settings
from core.errors import DomainError, ResourceLimitError
from core.martingale import var_Mn
from storage.models import UrnParams
from utils.helpers import gamma_ratio


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MRParams:
    """Reparametrization used by the expression: t_W, t_B, c = u+v, lam = 1-p_W-p_B."""

    t_w: float
    t_b: float
    c: int
    lam: float
    u: int
    v: int

    def __post_init__(self) -> None:
        if self.c < 1:
            raise DomainError(f"c = u + v must be at least 1, got {self.c}")
        if not abs(self.lam) < 1.0:
            raise DomainError(f"|lambda| must be below 1, got {self.lam}")
        if abs(self.t_w + self.t_b - 1.0) > 1e-12:
            raise DomainError("t_W + t_B must equal 1")

    @classmethod
    def from_urn(cls, params: UrnParams) -> "MRParams":
        rate = params.p_b + params.p_w
        return cls(
            t_w=params.p_b / rate,
            t_b=params.p_w / rate,
            c=params.total,
            lam=params.lam,
            u=params.u,
            v=params.v,
        )

    @property
    def delta(self) -> float:
        """v t_W - u t_B."""
        return self.v * self.t_w - self.u * self.t_b


def _suffix(values: np.ndarray) -> np.ndarray:
    """out[i] = sum(values[i:]), with one trailing zero."""
    out = np.zeros(values.size + 1)
    out[:-1] = np.cumsum(values[::-1])[::-1]
    return out


def _check_n(n: int, cap: Optional[int]) -> None:
    cap = settings.mr_max_steps if cap is None else cap
    if n < 2:
        raise DomainError(f"the expression needs n >= 2, got {n}")
    if n > cap:
        raise ResourceLimitError(f"Matthews-Rosenberger evaluation limited to n <= {cap}, got n={n}")


def mr_terms(params: UrnParams, n: int, cap: Optional[int] = None) -> Tuple[float, ...]:
    """The seven summands of the expression, in printed order."""
    _check_n(n, cap)
    mr = MRParams.from_urn(params)
    c, lam, t_w, t_b, delta = mr.c, mr.lam, mr.t_w, mr.t_b, mr.delta

    k = np.arange(n, dtype=float)  # 0..n-1
    inner = _suffix(gamma_ratio(c + k + lam, c + k + 1.0))  # J[0..n]
    head = gamma_ratio(c, c + lam)

    # sum_{k=l+1}^{n-1} Gamma(c+2lam+k-1)/Gamma(c+k+lam) J[k], indexed by l+1
    mid = np.zeros(n)
    ks = np.arange(1, n, dtype=float)
    mid[1:] = gamma_ratio(c + 2 * lam + ks - 1, c + ks + lam) * inner[1:n]
    nested = _suffix(mid)

    ls = np.arange(1, n - 1, dtype=float)  # 1..n-2
    outer_plain = gamma_ratio(c + ls, c + 2 * lam + ls)
    outer_shift = gamma_ratio(c + lam + ls - 1, c + 2 * lam + ls)
    tail_of_l = nested[2:n] if n > 2 else np.zeros(0)

    term1 = 2 * t_w * t_b * float(np.dot(outer_plain, tail_of_l))
    term2 = 2 * lam * (t_w - t_b) * delta * head * float(np.dot(outer_shift, tail_of_l))
    term3 = -((delta * head * inner[0]) ** 2)
    term4 = n * t_w * t_b + 2 * lam * t_w * t_b * float(
        np.dot(gamma_ratio(c + ks, c + ks + lam), inner[1:n])
    )
    kk = np.arange(1, n + 1, dtype=float)
    term5 = (t_w - t_b) * delta * head * float(np.sum(gamma_ratio(c + lam + kk - 1, c + kk)))
    term6 = 2 * lam * (t_w - t_b) * delta * head * float(
        np.dot(gamma_ratio(c + lam + ks - 1, c + ks + lam), inner[1:n])
    )
    prefix = np.cumsum(gamma_ratio(c + 2 * lam + ks - 1, c + lam + ks))
    term7 = 2 * delta ** 2 * gamma_ratio(c, c + 2 * lam) * float(
        np.dot(gamma_ratio(c + lam + ks, c + ks + 1), prefix)
    )

    terms = (term1, term2, term3, term4, term5, term6, term7)
    if not all(math.isfinite(t) for t in terms):
        raise DomainError(f"non-finite gamma ratio for {params} at n={n}")
    return tuple(float(t) for t in terms)


def mr_variance(params: UrnParams, n: int, cap: Optional[int] = None) -> float:
    """Var[M_n] as claimed by the Matthews-Rosenberger expression."""
    return math.fsum(mr_terms(params, n, cap))


def mr_special_case(n: int, c: int) -> float:
    """Reduced expression at p_W = p_B = 1/2, u = v:

    (1/2) sum_{l=1}^{n-2} sum_{k=l+1}^{n-1} 1/(c+k-1) sum_{j=k}^{n-1} 1/(c+j) + n/4
    """
    if n < 2:
        raise DomainError(f"the expression needs n >= 2, got {n}")
    j = np.arange(n, dtype=float)
    inner = _suffix(1.0 / (c + j))
    mid = np.zeros(n)
    ks = np.arange(1, n, dtype=float)
    mid[1:] = inner[1:n] / (c + ks - 1)
    nested = _suffix(mid)
    excess = 0.5 * float(np.sum(nested[2:n])) if n > 2 else 0.0
    return excess + n / 4.0


@dataclass(frozen=True)
class MRComparison:
    """Published expression against the exact martingale variance."""

    n: int
    mr_variance: float
    mr_sd: float
    correct_variance: float
    correct_sd: float
    excess: float
    first_term: float


def _sd_of_fraction(variance: float, n: int) -> float:
    return math.sqrt(variance) / n if variance >= 0 else float("nan")


def mr_check(params: UrnParams, n: int, cap: Optional[int] = None) -> MRComparison:
    """SD of R_n under both variances, plus the excess of the published one."""
    terms = mr_terms(params, n, cap)
    claimed = math.fsum(terms)
    correct = var_Mn(params, n)
    logger.info(f"MR check at n={n}: claimed var {claimed:.6g}, exact var {correct:.6g}")
    return MRComparison(
        n=n,
        mr_variance=claimed,
        mr_sd=_sd_of_fraction(claimed, n),
        correct_variance=correct,
        correct_sd=_sd_of_fraction(correct, n),
        excess=claimed - correct,
        first_term=terms[0],
    )


__all__ = [
    "MRParams",
    "mr_terms",
    "mr_variance",
    "mr_special_case",
    "MRComparison",
    "mr_check",
]
