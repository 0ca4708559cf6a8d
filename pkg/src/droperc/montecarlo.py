"""Monte Carlo sampling of removal configurations, with shared-noise couplings.

Reproducibility contract: every consumer of randomness receives a
``numpy.random.Generator``, and independent units of work (trials, steps)
each get their own stream derived from ``(seed, index path)`` via
``stream()``.  Streams are Philox counter-based generators keyed through
``SeedSequence`` spawn keys, so the same ``(seed, path)`` always yields the
same draws regardless of scheduling or platform, and distinct paths yield
statistically independent streams.

Per-configuration uniforms are always drawn as one block in row-major flag
order, which lets the coupled samplers reuse a single block of uniforms for
both of their marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import BondConfig, SiteConfig, Topology

_MAX_SEED = 1 << 64


def stream(seed: int, *path: int) -> np.random.Generator:
    """Derive the generator for one unit of work from a 64-bit seed and an index path.

    ``stream(seed)`` is the root stream; ``stream(seed, trial)`` is trial
    ``trial``'s stream; deeper paths like ``(trial, step)`` address
    per-step draws.  Same arguments, same stream, always.
    """
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    for idx in path:
        if idx < 0:
            raise ValueError(f"stream path indices must be >= 0, got {path}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(i) for i in path))
    return np.random.Generator(np.random.Philox(ss))


def _bond_flags(p: float, topo: Topology, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((topo.depth + 1, topo.width, topo.width))
    return u >= p  # kept with probability 1 - p


def _site_flags(p: float, topo: Topology, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((topo.depth, topo.width))
    return u >= p


def sample(model: str, p: float, topo: Topology, rng: np.random.Generator):
    """Draw one random removal configuration of the given model.

    Uniform variates are consumed in row-major flag order; a flag survives
    iff its uniform is >= p.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if model == "bond":
        return BondConfig(topo, _bond_flags(p, topo, rng))
    if model == "site":
        return SiteConfig(topo, _site_flags(p, topo, rng))
    raise ValueError(f"model must be 'bond' or 'site', got {model!r}")


def _stacked_bond_crossing(present: np.ndarray) -> np.ndarray:
    """Crossing indicator for a stack of bond flag arrays (n, layers, W, W)."""
    n, layers, w, _ = present.shape
    reached = np.ones((n, w), dtype=bool)
    for l in range(layers):
        reached = (present[:, l] & reached[:, :, None]).any(axis=1)
    return reached.any(axis=1)


def _stacked_site_crossing(present: np.ndarray) -> np.ndarray:
    """Crossing indicator for a stack of site flag arrays (n, depth, W)."""
    n, depth, w = present.shape
    reached = np.ones((n, w), dtype=bool)
    for l in range(depth):
        reached = present[:, l] & reached.any(axis=1, keepdims=True)
    return reached.any(axis=1)


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate of a crossing probability.

    ``stderr`` is the binomial plug-in ``sqrt(mean * (1 - mean) / trials)``.
    Two runs with equal ``(seed, trials)`` and identical inputs produce
    identical records.
    """

    mean: float
    stderr: float
    trials: int
    successes: int
    seed: int

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")


_ESTIMATE_CHUNK = 8192


def estimate_theta(model: str, p: float, topo: Topology, trials: int, seed: int) -> Estimate:
    """Estimate the crossing probability from ``trials`` independent configurations.

    Trial ``i`` is drawn from ``stream(seed, i)``, so any scheduling or
    chunking of the trial loop yields the same success count.  Successes are
    accumulated as integers; the mean is formed once at the end.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if model not in ("bond", "site"):
        raise ValueError(f"model must be 'bond' or 'site', got {model!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    draw = _bond_flags if model == "bond" else _site_flags
    check = _stacked_bond_crossing if model == "bond" else _stacked_site_crossing
    successes = 0
    for start in range(0, trials, _ESTIMATE_CHUNK):
        stop = min(start + _ESTIMATE_CHUNK, trials)
        flags = np.stack([draw(p, topo, stream(seed, i)) for i in range(start, stop)])
        successes += int(check(flags).sum())
    mean = successes / trials
    return Estimate(
        mean=mean,
        stderr=math.sqrt(mean * (1.0 - mean) / trials),
        trials=trials,
        successes=successes,
        seed=seed,
    )


def coupled_sample_p(
    p1: float, p2: float, topo: Topology, rng: np.random.Generator
) -> tuple[BondConfig, BondConfig]:
    """Sample bond configurations at two removal rates from one block of uniforms.

    Needs ``0 < p1 <= p2 < 1``.  A flag survives rate ``p`` iff its uniform
    is >= p, so the second (heavier-removal) configuration is a subgraph of
    the first by construction while each keeps its exact marginal law.
    """
    if not (0.0 < p1 <= p2 < 1.0):
        raise ValueError(f"need 0 < p1 <= p2 < 1, got p1={p1}, p2={p2}")
    u = rng.random((topo.depth + 1, topo.width, topo.width))
    return BondConfig(topo, u >= p1), BondConfig(topo, u >= p2)


def coupled_sample_w(
    p: float, width1: int, width2: int, depth: int, rng: np.random.Generator
) -> tuple[BondConfig, BondConfig]:
    """Sample bond configurations at two widths, narrow embedded in wide.

    Needs ``1 <= width1 <= width2``.  The wide configuration is drawn once;
    the narrow one is its restriction to the first ``width1`` vertices of
    every layer, which has the exact width-``width1`` marginal because edge
    flags are independent.
    """
    if not 1 <= width1 <= width2:
        raise ValueError(f"need 1 <= width1 <= width2, got {width1}, {width2}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    wide_topo = Topology(width2, depth)
    wide = _bond_flags(p, wide_topo, rng)
    narrow = wide[:, :width1, :width1]
    return BondConfig(Topology(width1, depth), narrow), BondConfig(wide_topo, wide)


def site_from_bond(config: BondConfig) -> SiteConfig:
    """Project a bond configuration to the site model by deleting starved vertices.

    A hidden vertex survives iff at least one of its incoming edges is
    present.  Survival events are independent across hidden vertices (their
    incoming edge sets are disjoint) with removal rate ``p ** W``, and any
    input-output path of the bond configuration survives the projection, so
    crossing is preserved.  Needs ``depth >= 1``.
    """
    topo = config.topology
    if topo.depth < 1:
        raise ValueError("site projection needs depth >= 1")
    flags = config.present[: topo.depth].any(axis=1)
    return SiteConfig(topo, flags)


__all__ = [
    "Estimate",
    "coupled_sample_p",
    "coupled_sample_w",
    "estimate_theta",
    "sample",
    "site_from_bond",
    "stream",
]
