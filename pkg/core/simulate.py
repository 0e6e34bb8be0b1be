"""Seeded Monte Carlo simulation of the RPW urn.

Two samplers with the same law:
- naive: one uniform per step against the white-addition probability
- event skip: steps that cannot change colour are plain Polya reinforcement,
  so they are skipped in geometric gaps and their whites drawn in one
  Beta-Binomial sample

Replication j draws from its own Philox stream keyed by (master_seed, j).
`run_ensemble` batches replications into blocks of `settings.sim_block_size`
only to spread work over threads, so the result depends on the SimConfig
alone, never on block size, worker count or scheduling.
"""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cli.config import SimulationMethod, settings
from core.approx_pmf import BinnedLogDensity, log_density_from_masses
from core.errors import ResourceLimitError
from storage.models import BinSpec, SimConfig, UrnParams


logger = logging.getLogger(__name__)

# uniforms held at once by one naive batch
NAIVE_BATCH_CELLS = 1 << 22


@dataclass(frozen=True)
class EnsembleResult:
    """Aggregated output of one ensemble run (statistics are of M_n)."""

    histogram: np.ndarray
    bins: BinSpec
    sample_mean: float
    sample_var: float
    replications: int
    seed: int
    method: SimulationMethod
    values: np.ndarray
    out_of_range: int
    n: int

    @property
    def rn_mean(self) -> float:
        return self.sample_mean / self.n

    @property
    def rn_sd(self) -> float:
        return float(np.sqrt(self.sample_var)) / self.n

    def log_density(self) -> BinnedLogDensity:
        """Empirical log density of R_n over all replications; empty bins omitted."""
        return log_density_from_masses(self.histogram, self.bins, total=self.replications)


# ============================================================================
# Single-replication samplers
# ============================================================================

def simulate_naive(params: UrnParams, n: int, stream: np.random.Generator) -> int:
    """Run n steps one at a time; returns M_n."""
    if n <= 0:
        return 0
    uniforms = stream.random(n)
    u, v, p_w, p_b = params.u, params.v, params.p_w, params.p_b
    keep_white = 1.0 - p_w
    whites = 0
    for i in range(n):
        p = (keep_white * (u + whites) + p_b * (v + i - whites)) / (u + v + i)
        if uniforms[i] < p:
            whites += 1
    return whites


def simulate_naive_batch(
    params: UrnParams, n: int, streams: Sequence[np.random.Generator]
) -> np.ndarray:
    """Naive replications stepped together, one stream each.

    Row j consumes `streams[j].random(n)` exactly like `simulate_naive`, so
    both give the same M_n for the same stream.
    """
    if n <= 0:
        return np.zeros(len(streams), dtype=np.int64)
    uniforms = np.stack([stream.random(n) for stream in streams])
    whites = np.zeros(len(streams), dtype=np.int64)
    keep_white = 1.0 - params.p_w
    for i in range(n):
        p = (
            keep_white * (params.u + whites) + params.p_b * (params.v + i - whites)
        ) / (params.total + i)
        whites += uniforms[:, i] < p
    return whites


def _polya_whites(white: int, black: int, steps: int, stream: np.random.Generator) -> int:
    """Whites added by `steps` plain Polya draws: Beta-Binomial(steps, white, black)."""
    if steps == 0 or white == 0:
        return 0
    if black == 0:
        return steps
    theta = stream.beta(white, black)
    return int(stream.binomial(steps, theta))


def simulate_event_skip(params: UrnParams, n: int, stream: np.random.Generator) -> int:
    """Event-skip sampler; same law of M_n as `simulate_naive`.

    Each step is a potential colour change with probability p_max. Between
    potential changes the urn reinforces the drawn colour. At a potential
    change the drawn colour switches with probability p_colour / p_max.
    """
    p_w, p_b = params.p_w, params.p_b
    p_max = params.p_max
    white, black = params.u, params.v
    step = 0
    while step < n:
        gap = int(stream.geometric(p_max)) - 1
        plain = min(gap, n - step)
        if plain:
            added = _polya_whites(white, black, plain, stream)
            white += added
            black += plain - added
            step += plain
        if step >= n:
            break

        drew_white = stream.random() * (white + black) < white
        p_colour = p_w if drew_white else p_b
        changed = stream.random() * p_max < p_colour
        if drew_white != changed:
            white += 1
        else:
            black += 1
        step += 1
    return white - params.u


# ============================================================================
# Ensemble
# ============================================================================

def resolve_method(method: SimulationMethod, params: UrnParams, n: int) -> SimulationMethod:
    """Pick a concrete sampler for `auto`."""
    if method != SimulationMethod.AUTO:
        return method
    p_max = params.p_max
    if p_max < settings.auto_max_rate and p_max * n < settings.auto_event_fraction * n:
        return SimulationMethod.EVENT_SKIP
    return SimulationMethod.NAIVE


def replication_stream(master_seed: int, replication: int) -> np.random.Generator:
    """Counter-based stream of replication j: Philox keyed by (j, master_seed)."""
    return np.random.Generator(np.random.Philox(key=(replication << 64) | master_seed))


def _blocks(replications: int, block_size: int) -> List[Tuple[int, int]]:
    """(first replication, count) per block."""
    return [
        (first, min(block_size, replications - first))
        for first in range(0, replications, block_size)
    ]


def simulate_block(
    params: UrnParams,
    n: int,
    first: int,
    count: int,
    method: SimulationMethod,
    master_seed: int,
) -> np.ndarray:
    """M_n for replications first..first+count-1."""
    indices = range(first, first + count)
    if method == SimulationMethod.EVENT_SKIP:
        return np.fromiter(
            (simulate_event_skip(params, n, replication_stream(master_seed, j)) for j in indices),
            dtype=np.int64,
            count=count,
        )
    rows = max(1, NAIVE_BATCH_CELLS // max(n, 1))
    chunks = [
        simulate_naive_batch(
            params, n, [replication_stream(master_seed, j) for j in indices[start:start + rows]]
        )
        for start in range(0, count, rows)
    ]
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)


def _check_budget(config: SimConfig) -> None:
    work = config.replications * config.n
    if work > settings.work_budget:
        raise ResourceLimitError(
            f"replications * n = {work} exceeds the work budget {settings.work_budget}"
        )


def _aggregate(
    config: SimConfig, method: SimulationMethod, blocks: List[np.ndarray]
) -> EnsembleResult:
    values = np.concatenate(blocks)
    fractions = values / config.n
    bins = config.bins
    histogram, _ = np.histogram(fractions, bins=bins.edges)
    out_of_range = int(np.count_nonzero((fractions < bins.lo) | (fractions > bins.hi)))
    if out_of_range:
        logger.warning(
            f"{out_of_range} of {config.replications} replications fall outside "
            f"[{bins.lo}, {bins.hi}]"
        )
    ddof = 1 if values.size > 1 else 0
    return EnsembleResult(
        histogram=histogram,
        bins=bins,
        sample_mean=float(values.mean()),
        sample_var=float(values.var(ddof=ddof)),
        replications=config.replications,
        seed=config.master_seed,
        method=method,
        values=values,
        out_of_range=out_of_range,
        n=config.n,
    )


def run_ensemble(config: SimConfig, workers: Optional[int] = None) -> EnsembleResult:
    """Run all replications of `config` and aggregate them.

    Args:
        config: Ensemble definition.
        workers: Concurrent blocks; defaults to `settings.sim_workers`.

    Returns:
        EnsembleResult, identical for any `workers` and block size.

    With `workers > 1` the blocks run on a fresh event loop. Inside an
    already running loop the blocks run serially instead; await
    `run_ensemble_async` there to get concurrency.
    """
    workers = settings.sim_workers if workers is None else workers
    if workers > 1:
        try:
            asyncio.get_running_loop()
        except RuntimeError:
            return asyncio.run(run_ensemble_async(config, workers))
        logger.debug("Event loop already running; simulating blocks serially")

    _check_budget(config)
    method = resolve_method(config.method, config.params, config.n)
    blocks = _blocks(config.replications, settings.sim_block_size)
    logger.info(
        f"Ensemble started: n={config.n}, replications={config.replications}, "
        f"method={method.value}, blocks={len(blocks)}"
    )
    start_time = time.time()
    values = []
    for first, count in blocks:
        values.append(
            simulate_block(config.params, config.n, first, count, method, config.master_seed)
        )
        logger.debug(f"Block at {first} done ({count} replications)")
    result = _aggregate(config, method, values)
    logger.info(f"Ensemble finished in {time.time() - start_time:.2f}s")
    return result


async def run_ensemble_async(config: SimConfig, workers: int = 2) -> EnsembleResult:
    """Same as `run_ensemble`, with up to `workers` blocks in worker threads."""
    _check_budget(config)
    method = resolve_method(config.method, config.params, config.n)
    blocks = _blocks(config.replications, settings.sim_block_size)
    logger.info(
        f"Ensemble started: n={config.n}, replications={config.replications}, "
        f"method={method.value}, blocks={len(blocks)}, workers={workers}"
    )
    start_time = time.time()
    limit = asyncio.Semaphore(max(1, workers))

    async def run_block(first: int, count: int) -> np.ndarray:
        async with limit:
            values = await asyncio.to_thread(
                simulate_block,
                config.params, config.n, first, count, method, config.master_seed,
            )
        logger.debug(f"Block at {first} done ({count} replications)")
        return values

    values = await asyncio.gather(*(run_block(first, count) for first, count in blocks))
    result = _aggregate(config, method, list(values))
    logger.info(f"Ensemble finished in {time.time() - start_time:.2f}s")
    return result


__all__ = [
    "NAIVE_BATCH_CELLS",
    "EnsembleResult",
    "simulate_naive",
    "simulate_naive_batch",
    "simulate_event_skip",
    "resolve_method",
    "replication_stream",
    "simulate_block",
    "run_ensemble",
    "run_ensemble_async",
]
