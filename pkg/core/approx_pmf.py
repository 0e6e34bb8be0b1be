"""Two-stage approximation of R_n = M_n / n.

Stage one: the law of M_k*, an approximation of the whites added in the first
k steps that allows at most one colour change. Stage two: conditional on
M_k = x, the remaining n-k additions are replaced by their conditional mean
mu_{n,k,x}. Atoms sit at (x + mu_{n,k,x}) / n with mass P(M_k* = x).

Also here: the sandwich bounds relating M_k* to M_k, the Chebyshev radius
for the stage-two replacement, the 1/(4k) variance bound, the k heuristic
and binned log densities used for comparisons and fitting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import special

from cli.config import settings
from core.errors import DomainError
from core.martingale import moments, tail_products, RPWCoefficients
from core.urn import DiscreteDist
from storage.models import BinSpec, UrnParams


logger = logging.getLogger(__name__)

STAGE_ONE_ATOL = 1e-10
EXACT_RATIO_MAX_V = 64

FloatOrArray = Union[float, np.ndarray]


# ============================================================================
# Stage one: M_k*
# ============================================================================

@dataclass(frozen=True)
class StageOneDist:
    """Law of M_k* over {0..k}."""

    k: int
    dist: DiscreteDist

    @property
    def masses(self) -> np.ndarray:
        return self.dist.masses

    def pmf(self, x: int) -> float:
        return self.dist.pmf(x)


def _beta_binomial_log(x: np.ndarray, k: int, u: float, v: float) -> np.ndarray:
    log_choose = special.gammaln(k + 1) - special.gammaln(x + 1) - special.gammaln(k - x + 1)
    return log_choose + special.betaln(x + u, k - x + v) - special.betaln(u, v)


def beta_binomial_pmf(x: int, k: int, u: float, v: float) -> float:
    """Beta-Binomial(k, u, v) mass at x; zero outside {0..k}."""
    if u <= 0 or v <= 0:
        raise DomainError(f"Beta-Binomial shapes must be positive, got u={u}, v={v}")
    if k < 0:
        raise DomainError(f"number of trials must be non-negative, got {k}")
    if x < 0 or x > k:
        return 0.0
    return float(np.exp(_beta_binomial_log(np.asarray(x, dtype=float), k, u, v)))


def beta_binomial_masses(k: int, u: float, v: float) -> np.ndarray:
    """Beta-Binomial(k, u, v) masses for x = 0..k."""
    if u <= 0 or v <= 0:
        raise DomainError(f"Beta-Binomial shapes must be positive, got u={u}, v={v}")
    x = np.arange(k + 1, dtype=float)
    return np.exp(_beta_binomial_log(x, k, u, v))


def _no_change_log(p: float, k: int) -> float:
    """log (1-p)^k."""
    return k * math.log1p(-p)


def _log_gamma_ratio(k: int, v: int, x: np.ndarray) -> np.ndarray:
    """log [Gamma(k+v-x) Gamma(k)] / [Gamma(k-x+1) Gamma(k+v)].

    For integer v the ratio is prod_{j=1}^{v-1} (1 - x/(k+j)) / k; log1p keeps
    full relative precision where gammaln differences of ~1e5 do not.
    """
    if v - 1 <= EXACT_RATIO_MAX_V:
        log_ratio = np.full(x.shape, -math.log(k))
        for j in range(1, v):
            log_ratio += np.log1p(-x / (k + j))
        return log_ratio
    return (
        special.gammaln(k + v - x)
        - special.gammaln(k - x + 1)
        + special.gammaln(k)
        - special.gammaln(k + v)
    )


def _white_free_tail(k: int, v: int) -> np.ndarray:
    """Tail masses for x = 1..k when the urn starts without whites; sums to 1."""
    x = np.arange(1, k + 1, dtype=float)
    log_tail = (
        np.log(k + (v - 1) * x + v)
        - np.log(x)
        - np.log(x + 1)
        + _log_gamma_ratio(k, v, x)
    )
    tail = np.exp(log_tail)
    return tail / math.fsum(tail)


def _white_free_masses(k: int, v: int, p_b: float) -> np.ndarray:
    log_stay = _no_change_log(p_b, k)
    masses = np.empty(k + 1)
    masses[0] = math.exp(log_stay)
    masses[1:] = _white_free_tail(k, v) * -math.expm1(log_stay)
    return masses


def mkstar_pmf(params: UrnParams, k: int) -> StageOneDist:
    """Law of M_k*.

    Both colours present: Beta-Binomial(k, u, v). No whites: the chance of no
    colour change at 0 plus the single-change tail obtained by averaging over
    the first white step. No blacks: the mirror image of the no-white case.
    """
    if k < 1:
        raise DomainError(f"cut step k must be at least 1, got {k}")
    if params.u > 0 and params.v > 0:
        masses = beta_binomial_masses(k, params.u, params.v)
    elif params.u == 0:
        masses = _white_free_masses(k, params.v, params.p_b)
    else:
        mirror = params.swapped()
        masses = _white_free_masses(k, mirror.v, mirror.p_b)[::-1]
    return StageOneDist(k=k, dist=DiscreteDist(offset=0, masses=masses, atol=STAGE_ONE_ATOL))


def mkstar_tail_by_marginalization(k: int, v: int, x: int) -> float:
    """Single-change tail mass at x > 0 as an explicit average over the first white step.

    A white first appears at step s (uniform on 1..k given one change); the
    remaining k-s steps then follow a Polya urn started from one white and
    v+s-1 blacks.
    """
    if x < 1 or x > k:
        raise DomainError(f"tail defined for 1 <= x <= k, got x={x}, k={k}")
    total = math.fsum(
        beta_binomial_pmf(x - 1, k - s, 1, v + s - 1) for s in range(1, k + 1)
    )
    return total / k


# ============================================================================
# Sandwich bounds
# ============================================================================

@dataclass(frozen=True)
class BoundFactors:
    """lower * P(M_k*=x) <= P(M_k=x) <= upper * P(M_k*=x) + slack."""

    lower: float
    upper: float
    slack: float
    exact_at: Optional[int] = None


def bound_factors(params: UrnParams, k: int) -> BoundFactors:
    """Multiplicative and additive constants of the M_k* sandwich."""
    if k < 1:
        raise DomainError(f"cut step k must be at least 1, got {k}")
    p_min, p_max = params.p_min, params.p_max
    if params.u > 0 and params.v > 0:
        stay_max = math.exp(_no_change_log(p_max, k))
        return BoundFactors(
            lower=stay_max,
            upper=math.exp(_no_change_log(p_min, k)),
            slack=-math.expm1(_no_change_log(p_max, k)),
        )

    # One colour absent: the rate that can introduce the other colour.
    if params.u == 0:
        p_in, exact_at = params.p_b, 0
    else:
        p_in, exact_at = params.p_w, k
    any_change = -math.expm1(_no_change_log(p_in, k))
    one_change_max = k * p_in * math.exp(_no_change_log(p_max, k - 1))
    one_change_min = k * p_in * math.exp(_no_change_log(p_min, k - 1))
    return BoundFactors(
        lower=one_change_max / any_change,
        upper=one_change_min / any_change,
        slack=any_change - one_change_max,
        exact_at=exact_at,
    )


def prop2_bounds(params: UrnParams, k: int, x: int, approx_mass: float) -> Tuple[float, float]:
    """(lower, upper) bounds on P(M_k = x) given approx_mass = P(M_k* = x)."""
    if x < 0 or x > k:
        raise DomainError(f"x must lie in 0..{k}, got {x}")
    factors = bound_factors(params, k)
    if factors.exact_at == x:
        return approx_mass, approx_mass
    return approx_mass * factors.lower, approx_mass * factors.upper + factors.slack


def prop2_bounds_table(
    params: UrnParams, stage: StageOneDist
) -> Tuple[np.ndarray, np.ndarray]:
    """`prop2_bounds` for every x in 0..k at once."""
    factors = bound_factors(params, stage.k)
    masses = stage.masses
    lower = masses * factors.lower
    upper = masses * factors.upper + factors.slack
    if factors.exact_at is not None:
        lower[factors.exact_at] = upper[factors.exact_at] = masses[factors.exact_at]
    return lower, upper


def expected_early_changes(params: UrnParams, k: int) -> float:
    """Expected colour changes in the first k steps of a black-only urn: k * p_B."""
    return k * params.p_b


# ============================================================================
# Stage two: drift
# ============================================================================

@dataclass(frozen=True)
class DriftTable:
    """mu[x] and sigma2[x] of the remaining n-k additions given M_k = x."""

    n: int
    k: int
    mu: np.ndarray
    sigma2: np.ndarray


def _check_cut(n: int, k: int) -> None:
    if k < 1:
        raise DomainError(f"cut step k must be at least 1, got {k}")
    if k >= n:
        raise DomainError(f"cut step k must be smaller than n, got k={k}, n={n}")


def _resolve_exact(exact_composition: Optional[bool]) -> bool:
    return settings.exact_composition if exact_composition is None else exact_composition


def stage_two_params(
    params: UrnParams, k: int, x: int, exact_composition: Optional[bool] = None
) -> UrnParams:
    """Urn composition at the cut: (x, k-x), or (u+x, v+k-x) when exact."""
    if x < 0 or x > k:
        raise DomainError(f"x must lie in 0..{k}, got {x}")
    if _resolve_exact(exact_composition):
        return params.with_composition(params.u + x, params.v + k - x)
    return params.with_composition(x, k - x)


def drift_mu_sigma(
    params: UrnParams,
    n: int,
    k: int,
    x: int,
    exact_composition: Optional[bool] = None,
) -> Tuple[float, float]:
    """Conditional mean and variance of the whites added over steps k..n given M_k = x."""
    _check_cut(n, k)
    stage = stage_two_params(params, k, x, exact_composition)
    return moments(RPWCoefficients(stage), n - k)


def _drift_sweep(
    p_w: float, p_b: float, white0: int, total: int, horizon: int, xs: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """mu and sigma2 for starting compositions (white0 + x, total - white0 - x).

    Only b_i depends on x, affinely: b_i = p_B + lam (white0 + x) / D_i. So
    s_i is affine in x and the mean-path white probability
    b_i + (a_i - 1) q_{i-1} s_{i-1} is affine too, which makes
    gamma_i q_i^2 = pbar (1 - pbar) quadratic in x.
    """
    denom = total + np.arange(horizon, dtype=float)
    lam = 1.0 - p_w - p_b
    a = 1.0 + lam / denom
    q = np.cumprod(a)
    if not np.all(np.isfinite(q)) or np.any(q == 0.0):
        raise DomainError("prefix product q overflowed or underflowed in double precision")

    b0 = p_b + lam * white0 / denom
    b1 = lam / denom
    s0 = np.cumsum(b0 / q)
    s1 = np.cumsum(b1 / q)

    q_prev = np.concatenate(([1.0], q[:-1]))
    s0_prev = np.concatenate(([0.0], s0[:-1]))
    s1_prev = np.concatenate(([0.0], s1[:-1]))
    p0 = b0 + (a - 1.0) * q_prev * s0_prev
    p1 = b1 + (a - 1.0) * q_prev * s1_prev

    alphas = -((lam / denom) ** 2) / a ** 2
    weight = tail_products(alphas) / q ** 2
    g0 = float(np.dot(weight, p0 * (1.0 - p0)))
    g1 = float(np.dot(weight, p1 * (1.0 - 2.0 * p0)))
    g2 = -float(np.dot(weight, p1 * p1))

    mu = q[-1] * (s0[-1] + xs * s1[-1])
    sigma2 = q[-1] ** 2 * (g0 + xs * (g1 + xs * g2))
    return mu, sigma2


def drift_table(
    params: UrnParams, n: int, k: int, exact_composition: Optional[bool] = None
) -> DriftTable:
    """mu and sigma2 for every x in 0..k from two O(n-k) sweeps.

    The lower half of x is swept directly, the upper half with colours
    swapped (y = k - x), so the quadratic in x is only evaluated where x is
    at most k/2.
    """
    _check_cut(n, k)
    horizon = n - k
    exact = _resolve_exact(exact_composition)
    white0, black0 = (params.u, params.v) if exact else (0, 0)
    total = white0 + black0 + k

    half = k // 2
    lower_x = np.arange(half + 1, dtype=float)
    upper_x = np.arange(half + 1, k + 1, dtype=float)

    mu_lo, var_lo = _drift_sweep(params.p_w, params.p_b, white0, total, horizon, lower_x)
    mu_hi, var_hi = _drift_sweep(
        params.p_b, params.p_w, black0, total, horizon, k - upper_x
    )

    mu = np.clip(np.concatenate((mu_lo, horizon - mu_hi)), 0.0, horizon)
    sigma2 = np.clip(np.concatenate((var_lo, var_hi)), 0.0, None)
    logger.debug(f"Drift table built: n={n}, k={k}, exact_composition={exact}")
    return DriftTable(n=n, k=k, mu=mu, sigma2=sigma2)


# ============================================================================
# Approximate PMF of R_n
# ============================================================================

@dataclass(frozen=True)
class ApproxRnPMF:
    """Atoms (x + mu_x) / n with masses P(M_k* = x), x = 0..k."""

    n: int
    k: int
    locations: np.ndarray
    masses: np.ndarray
    drift: DriftTable

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.masses.tolist()))


def approx_rn_pmf(
    params: UrnParams, n: int, k: int, exact_composition: Optional[bool] = None
) -> ApproxRnPMF:
    """Two-stage approximate law of R_n."""
    _check_cut(n, k)
    stage = mkstar_pmf(params, k)
    drift = drift_table(params, n, k, exact_composition)
    x = np.arange(k + 1, dtype=float)
    locations = np.clip((x + drift.mu) / n, 0.0, 1.0)
    return ApproxRnPMF(n=n, k=k, locations=locations, masses=stage.masses.copy(), drift=drift)


def cached_approx_rn_pmf(
    params: UrnParams, n: int, k: int, exact_composition: Optional[bool] = None
) -> ApproxRnPMF:
    """approx_rn_pmf memoized in the container's LRU cache."""
    from core.container import Container

    cache = Container.get_approx_cache()
    key = (params, n, k, _resolve_exact(exact_composition))
    pmf = cache.get(key)
    if pmf is None:
        pmf = approx_rn_pmf(params, n, k, exact_composition)
        cache[key] = pmf
    return pmf


# ============================================================================
# Error statements
# ============================================================================

def chebyshev_bound(sigma2: FloatOrArray, n: int, t: float) -> Tuple[FloatOrArray, float]:
    """P(|R_n - mu/n| >= radius | M_k) <= prob_bound with radius = t sigma / n.

    `sigma2` may be a scalar or an array of per-atom variances; the radius
    has the same shape.
    """
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    variances = np.asarray(sigma2, dtype=float)
    if np.any(variances < 0):
        raise DomainError(f"variance must be non-negative, got {variances.min()}")
    radius = t * np.sqrt(variances) / n
    return (float(radius) if radius.ndim == 0 else radius), 1.0 / t ** 2


def chebyshev_interval(
    location: FloatOrArray, sigma2: FloatOrArray, n: int, t: float
) -> Tuple[FloatOrArray, FloatOrArray, float]:
    """(lo, hi, prob_bound): R_n falls outside [lo, hi] with probability <= prob_bound."""
    radius, prob = chebyshev_bound(sigma2, n, t)
    return location - radius, location + radius, prob


def prop3_bound(k: int) -> float:
    """Upper bound 1/(4k) on sigma2_{n,k,x} / n^2."""
    if k < 1:
        raise DomainError(f"cut step k must be at least 1, got {k}")
    return 1.0 / (4.0 * k)


def prop3_tight_bound(n: int, k: int) -> float:
    """Intermediate bound (1/k - 1/n) / 4 on sigma2_{n,k,x} / n^2."""
    _check_cut(n, k)
    return (1.0 / k - 1.0 / n) / 4.0


def choose_k(params: UrnParams) -> int:
    """Heuristic cut step round(p_B^(-2/3)), at least 1."""
    return max(1, int(round(params.p_b ** (-2.0 / 3.0))))


def clamp_k(k: int, n: int) -> int:
    """Clamp a cut step into [1, n-1]."""
    if n < 2:
        raise DomainError(f"need n >= 2 to place a cut step, got n={n}")
    return min(max(1, k), n - 1)


# ============================================================================
# Binned densities
# ============================================================================

@dataclass(frozen=True)
class BinnedLogDensity:
    """Log densities of the non-empty bins of a BinSpec.

    `weights` holds the raw bin mass (or count) behind each value.
    """

    bins: BinSpec
    bin_index: np.ndarray
    centers: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    inside_mass: float

    def as_dict(self) -> dict:
        return dict(zip(self.bin_index.tolist(), self.values.tolist()))

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.centers.tolist(), self.values.tolist()))


def binned_masses(
    locations: np.ndarray, masses: np.ndarray, bins: BinSpec
) -> np.ndarray:
    """Mass per bin; atoms outside [lo, hi] are dropped, hi belongs to the last bin."""
    counts, _ = np.histogram(locations, bins=bins.edges, weights=masses)
    return counts


def log_density_from_masses(
    bin_masses: np.ndarray, bins: BinSpec, total: float = 1.0
) -> BinnedLogDensity:
    """log(mass / (total * width)) for every bin with positive mass."""
    bin_masses = np.asarray(bin_masses, dtype=float)
    index = np.flatnonzero(bin_masses > 0.0)
    density = bin_masses[index] / (total * bins.width)
    return BinnedLogDensity(
        bins=bins,
        bin_index=index,
        centers=bins.centers[index],
        values=np.log(density),
        weights=bin_masses[index],
        inside_mass=float(bin_masses.sum()),
    )


def log_density_on_bins(
    pmf: ApproxRnPMF, bins: BinSpec, renormalize: bool = False
) -> BinnedLogDensity:
    """Binned log density of the approximate PMF; empty bins are omitted."""
    bin_masses = binned_masses(pmf.locations, pmf.masses, bins)
    inside = float(bin_masses.sum())
    if inside <= 0.0:
        logger.warning(f"No approximate mass inside [{bins.lo}, {bins.hi}]")
    total = inside if renormalize and inside > 0.0 else 1.0
    return log_density_from_masses(bin_masses, bins, total)


def tv_distance(p, q) -> float:
    """Total variation distance between two binned distributions (each normalized)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError(f"bin vectors differ in shape: {p.shape} vs {q.shape}")
    p_total, q_total = p.sum(), q.sum()
    if p_total <= 0.0 or q_total <= 0.0:
        raise DomainError("cannot compare distributions with no mass")
    return 0.5 * float(np.abs(p / p_total - q / q_total).sum())


__all__ = [
    "STAGE_ONE_ATOL",
    "EXACT_RATIO_MAX_V",
    "StageOneDist",
    "beta_binomial_pmf",
    "beta_binomial_masses",
    "mkstar_pmf",
    "mkstar_tail_by_marginalization",
    "BoundFactors",
    "bound_factors",
    "prop2_bounds",
    "prop2_bounds_table",
    "expected_early_changes",
    "DriftTable",
    "stage_two_params",
    "drift_mu_sigma",
    "drift_table",
    "ApproxRnPMF",
    "approx_rn_pmf",
    "cached_approx_rn_pmf",
    "chebyshev_bound",
    "chebyshev_interval",
    "prop3_bound",
    "prop3_tight_bound",
    "choose_k",
    "clamp_k",
    "BinnedLogDensity",
    "binned_masses",
    "log_density_from_masses",
    "log_density_on_bins",
    "tv_distance",
]
