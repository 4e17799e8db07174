"""Shared Monte Carlo plumbing: reproducible path streams and error bars."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    std_error: float
    n_paths: int
    n_censored: int = 0

    @property
    def censored(self) -> bool:
        return self.n_censored > 0

    def z_score(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.estimate == reference else np.inf
        return abs(self.estimate - reference) / self.std_error


def path_blocks(seed: int, n_paths: int, block_size: int = BLOCK_SIZE, streams: int = 1):
    """Yield ``(start, stop, generators)`` for consecutive blocks of paths.

    Block ``j`` draws from ``SeedSequence([seed, j, s])`` for stream ``s``, so
    the value of each path depends only on ``seed`` and its index, never on
    how blocks are scheduled.
    """
    for j, start in enumerate(range(0, n_paths, block_size)):
        stop = min(start + block_size, n_paths)
        gens = [np.random.default_rng(np.random.SeedSequence([int(seed), j, s])) for s in range(streams)]
        yield start, stop, gens


def summarize(samples, n_censored=0) -> MCEstimate:
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 2:
        raise ValueError("need at least two samples for a standard error")
    return MCEstimate(float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n)), n, int(n_censored))


def batch_means(x, n_batches=None) -> MCEstimate:
    """Mean of a correlated series with a batch-means standard error.

    By default the series is cut into ``floor(sqrt(len(x)))`` batches of equal
    size; a trailing remainder is dropped.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n_batches is None:
        n_batches = int(np.floor(np.sqrt(n)))
    if n_batches < 2 or n < 2 * n_batches:
        raise ValueError(f"series of length {n} too short for {n_batches} batches")
    size = n // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return MCEstimate(float(x.mean()), float(means.std(ddof=1) / np.sqrt(n_batches)), n_batches)
