"""Deterministic, refinable randomness.

Counter-based (Philox) streams keyed by (root_seed, stream_id), so ensemble
results do not depend on execution order, plus dyadically refinable Brownian
increments for coupled coarse/fine path simulation.

Per-chain draw protocol (fixed so that coupled experiments stay reproducible):
momentum init (if any), then the noise pool (if any), then Brownian increments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

MAX_LADDER_LEVEL = 20


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream derived from (root_seed, stream_id)."""

    root_seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        key = np.array([self.root_seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ConfigError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class BrownianLadder:
    """2**fine_level Brownian increments over [0, 1] at step 2**(-fine_level).

    Coarser grids are obtained by pairwise aggregation of adjacent increments,
    never by re-drawing, so coarse and fine paths are coupled pathwise.
    """

    fine_level: int
    increments: np.ndarray  # (2**fine_level, d)

    @property
    def dim(self) -> int:
        return self.increments.shape[-1]


def brownian_ladder_make(d, fine_level, rng) -> BrownianLadder:
    """Draw a ladder of 2**fine_level increments, each ~ N(0, 2**(-fine_level) I)."""
    if not (0 <= fine_level <= MAX_LADDER_LEVEL):
        raise ConfigError(f"fine_level must be in [0, {MAX_LADDER_LEVEL}], got {fine_level}")
    gen = _as_generator(rng)
    n = 1 << fine_level
    inc = gen.standard_normal((n, d)) * np.sqrt(2.0 ** (-fine_level))
    inc.setflags(write=False)
    return BrownianLadder(fine_level=fine_level, increments=inc)


def halve_increments(increments):
    """Sum adjacent increments along the step axis (second to last axis)."""
    return increments[..., 0::2, :] + increments[..., 1::2, :]


def aggregate(ladder: BrownianLadder, coarse_level: int):
    """Increments at step 2**(-coarse_level), by repeated pairwise summation.

    Summation is a fixed binary tree, so the terminal value W_1 is bit-identical
    at every level.
    """
    if not (0 <= coarse_level <= ladder.fine_level):
        raise ConfigError(
            f"coarse_level must be in [0, {ladder.fine_level}], got {coarse_level}"
        )
    out = ladder.increments
    for _ in range(ladder.fine_level - coarse_level):
        out = halve_increments(out)
    return out
