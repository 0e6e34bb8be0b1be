"""Martingale transform and exact finite-step moments.

Any process with E[M_{i+1} | M_i] = a_i M_i + b_i (a_i != 0) and
Var[M_{i+1} | M_i] = c_i M_i^2 + d_i M_i + e_i becomes a martingale under
X_i = M_i / q_{i-1} - s_{i-1}, with q_i = prod_{j<=i} a_j and
s_i = sum_{j<=i} b_j / q_j. From it:

    E[M_n]   = q_{n-1} s_{n-1}
    Var[M_n] = q_{n-1}^2 Var[X_n]

Boundary conventions: q_{-1} = 1, s_{-1} = 0, so X_0 = M_0 = 0.

Coefficient sources expose both `coeffs(i)` (one step) and `arrays(n)`
(the first n steps as numpy arrays); all moment functions work on arrays so
that n = 10^6 stays in the millisecond range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Sequence, Union, runtime_checkable

import numpy as np

from core.errors import DomainError
from storage.models import UrnParams


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepCoeffs:
    """Conditional mean (a, b) and variance (c, d, e) coefficients of one step."""

    a: float
    b: float
    c: float
    d: float
    e: float

    def __post_init__(self) -> None:
        if self.a == 0.0:
            raise DomainError("a_i = 0: the martingale transform is undefined")


@dataclass(frozen=True)
class CoeffArrays:
    """Coefficients of steps 0..n-1."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray

    def __len__(self) -> int:
        return int(self.a.size)


@runtime_checkable
class CoefficientSource(Protocol):
    """Step-indexed coefficient generator."""

    def coeffs(self, i: int) -> StepCoeffs: ...

    def arrays(self, n: int) -> CoeffArrays: ...


class RPWCoefficients:
    """Coefficients of the white-addition count in the RPW urn."""

    def __init__(self, params: UrnParams):
        self.params = params

    def coeffs(self, i: int) -> StepCoeffs:
        return rpw_coeffs(self.params, i)

    def arrays(self, n: int) -> CoeffArrays:
        p = self.params
        i = np.arange(n, dtype=float)
        total = p.total + i
        lam = 1.0 - p.p_b - p.p_w
        a = 1.0 + lam / total
        b = (p.p_b * (p.v + i) + (1.0 - p.p_w) * p.u) / total
        c = -(lam ** 2) / total ** 2
        d = (p.p_b + p.p_w - 1.0) * (
            2.0 * p.p_b * (i + p.v) - i - 2.0 * p.u * p.p_w + p.u - p.v
        ) / total ** 2
        e = (
            ((1.0 - p.p_b) * (i + p.v) + p.u * p.p_w)
            * (p.p_b * (i + p.v) + p.u * (1.0 - p.p_w))
        ) / total ** 2
        return CoeffArrays(a=a, b=b, c=c, d=d, e=e)

    def __repr__(self) -> str:
        return f"RPWCoefficients({self.params!r})"


class SequenceCoefficients:
    """Coefficients given explicitly, step by step."""

    def __init__(self, a, b, c=None, d=None, e=None):
        a = np.asarray(a, dtype=float)
        zeros = np.zeros_like(a)
        self._arrays = CoeffArrays(
            a=a,
            b=np.asarray(b, dtype=float),
            c=zeros if c is None else np.asarray(c, dtype=float),
            d=zeros if d is None else np.asarray(d, dtype=float),
            e=zeros if e is None else np.asarray(e, dtype=float),
        )

    def coeffs(self, i: int) -> StepCoeffs:
        arr = self._arrays
        return StepCoeffs(
            a=float(arr.a[i]), b=float(arr.b[i]), c=float(arr.c[i]),
            d=float(arr.d[i]), e=float(arr.e[i]),
        )

    def arrays(self, n: int) -> CoeffArrays:
        arr = self._arrays
        if n > len(arr):
            raise DomainError(f"only {len(arr)} steps of coefficients available, need {n}")
        return CoeffArrays(a=arr.a[:n], b=arr.b[:n], c=arr.c[:n], d=arr.d[:n], e=arr.e[:n])


def rpw_coeffs(params: UrnParams, i: int) -> StepCoeffs:
    """Conditional mean/variance coefficients of the RPW urn at step i."""
    if i < 0:
        raise DomainError(f"step index must be non-negative, got {i}")
    u, v, p_w, p_b = params.u, params.v, params.p_w, params.p_b
    total = u + v + i
    lam = 1.0 - p_b - p_w
    return StepCoeffs(
        a=1.0 + lam / total,
        b=(p_b * (v + i) + (1.0 - p_w) * u) / total,
        c=-(lam ** 2) / total ** 2,
        d=(p_b + p_w - 1.0) * (2.0 * p_b * (i + v) - i - 2.0 * u * p_w + u - v) / total ** 2,
        e=((1.0 - p_b) * (i + v) + u * p_w) * (p_b * (i + v) + u * (1.0 - p_w)) / total ** 2,
    )


CoeffsLike = Union[CoefficientSource, UrnParams]


def _as_arrays(coeffs: CoeffsLike, n: int) -> CoeffArrays:
    if isinstance(coeffs, UrnParams):
        coeffs = RPWCoefficients(coeffs)
    return coeffs.arrays(n)


@dataclass(frozen=True)
class PrefixTables:
    """q[i] = prod_{j<=i} a_j and s[i] = sum_{j<=i} b_j / q_j."""

    q: np.ndarray
    s: np.ndarray

    def __len__(self) -> int:
        return int(self.q.size)

    def q_prev(self, i: int) -> float:
        """q_{i-1} with q_{-1} = 1."""
        return 1.0 if i == 0 else float(self.q[i - 1])

    def s_prev(self, i: int) -> float:
        """s_{i-1} with s_{-1} = 0."""
        return 0.0 if i == 0 else float(self.s[i - 1])


def _tables_from_arrays(arr: CoeffArrays) -> PrefixTables:
    zero = np.flatnonzero(arr.a == 0.0)
    if zero.size:
        raise DomainError(f"a_{int(zero[0])} = 0: the martingale transform is undefined")
    q = np.cumprod(arr.a)
    if not np.all(np.isfinite(q)) or np.any(q == 0.0):
        raise DomainError("prefix product q overflowed or underflowed in double precision")
    s = np.cumsum(arr.b / q)
    return PrefixTables(q=q, s=s)


def prefix_tables(coeffs: CoeffsLike, n: int) -> PrefixTables:
    """Prefix tables q and s over the first n steps."""
    if n < 1:
        raise DomainError(f"horizon must be at least 1, got {n}")
    return _tables_from_arrays(_as_arrays(coeffs, n))


def mean_Mn(coeffs: CoeffsLike, n: int) -> float:
    """E[M_n] = q_{n-1} s_{n-1}."""
    tables = prefix_tables(coeffs, n)
    return float(tables.q[-1] * tables.s[-1])


def var_Xn(alphas: Sequence[float], gammas: Sequence[float], n: int) -> float:
    """Var[X_n] for a martingale with Var[X_{i+1}|F_i] = alpha_i X_i^2 + beta_i X_i + gamma_i.

    The induction v <- (alpha_k + 1) v + gamma_k from v = 0 unrolls to
    sum_i gamma_i prod_{j=i+1}^{n-1} (alpha_j + 1), with the empty product
    equal to 1; the products are taken as one reverse cumulative product.
    """
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    if n == 0:
        return 0.0
    alphas = np.asarray(alphas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    if alphas.size < n or gammas.size < n:
        raise DomainError(f"need at least {n} alphas and gammas")
    return float(np.dot(gammas[:n], tail_products(alphas[:n])))


def tail_products(alphas: np.ndarray) -> np.ndarray:
    """R_i = prod_{j=i+1}^{n-1} (alpha_j + 1) for i = 0..n-1, so R_{n-1} = 1."""
    n = alphas.size
    tail = np.ones(n)
    if n > 1:
        tail[:-1] = np.cumprod((alphas[1:] + 1.0)[::-1])[::-1]
    return tail


def _alphas_gammas(arr: CoeffArrays, tables: PrefixTables):
    q, s = tables.q, tables.s
    q_prev = np.concatenate(([1.0], q[:-1]))
    s_prev = np.concatenate(([0.0], s[:-1]))
    alphas = arr.c / arr.a ** 2
    gammas = (
        arr.c * q_prev ** 2 * s_prev ** 2 + arr.d * q_prev * s_prev + arr.e
    ) / q ** 2
    return alphas, gammas


def var_Mn(coeffs: CoeffsLike, n: int) -> float:
    """Var[M_n] = q_{n-1}^2 Var[X_n]."""
    if n < 1:
        raise DomainError(f"horizon must be at least 1, got {n}")
    arr = _as_arrays(coeffs, n)
    tables = _tables_from_arrays(arr)
    alphas, gammas = _alphas_gammas(arr, tables)
    return float(tables.q[-1] ** 2 * var_Xn(alphas, gammas, n))


def moments(coeffs: CoeffsLike, n: int) -> tuple[float, float]:
    """(E[M_n], Var[M_n]) from a single coefficient sweep."""
    if n < 1:
        raise DomainError(f"horizon must be at least 1, got {n}")
    arr = _as_arrays(coeffs, n)
    tables = _tables_from_arrays(arr)
    alphas, gammas = _alphas_gammas(arr, tables)
    mean = float(tables.q[-1] * tables.s[-1])
    var = float(tables.q[-1] ** 2 * var_Xn(alphas, gammas, n))
    return mean, var


def transform_at(tables: PrefixTables, i: int, m: float) -> float:
    """X_i for M_i = m: m / q_{i-1} - s_{i-1}."""
    return m / tables.q_prev(i) - tables.s_prev(i)


def martingale_transform(coeffs: CoeffsLike, trajectory: Sequence[float]) -> np.ndarray:
    """Map a trajectory m_0..m_n to x_0..x_n."""
    m = np.asarray(trajectory, dtype=float)
    if m.size == 0:
        raise DomainError("trajectory must contain at least m_0")
    if m[0] != 0.0:
        raise DomainError(f"trajectory must start at m_0 = 0, got {m[0]}")
    n = m.size - 1
    x = np.zeros(n + 1)
    if n == 0:
        return x
    tables = prefix_tables(coeffs, n)
    x[1:] = m[1:] / tables.q - tables.s
    return x


__all__ = [
    "StepCoeffs",
    "CoeffArrays",
    "CoefficientSource",
    "RPWCoefficients",
    "SequenceCoefficients",
    "rpw_coeffs",
    "PrefixTables",
    "prefix_tables",
    "mean_Mn",
    "var_Xn",
    "tail_products",
    "var_Mn",
    "moments",
    "transform_at",
    "martingale_transform",
]
