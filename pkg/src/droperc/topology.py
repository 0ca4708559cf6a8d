"""Layered directed graphs and reachability.

The graph model used throughout this package: ``depth + 2`` vertex layers of
``width`` vertices each, indexed ``0 .. depth+1``.  Layer ``0`` holds the
inputs, layer ``depth+1`` the outputs, and the ``depth`` layers in between are
hidden.  Edges only run between consecutive layers, giving ``depth + 1`` edge
layers with ``width**2`` possible edges each.

Two random-removal models share this scaffold:

* bond configurations keep or delete individual edges;
* site configurations keep or delete hidden vertices while all edges between
  surviving vertices stay present (inputs and outputs are never deleted).

``crossing`` asks whether any output vertex is reachable from any input
vertex, and ``crossing_reach`` exposes the full layer-by-layer reach sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Shape of a layered graph: ``width`` vertices per layer, ``depth`` hidden layers.

    ``depth == 0`` is permitted and means a single edge layer wired straight
    from inputs to outputs; only bond configurations make sense there (site
    configurations need at least one hidden layer).
    """

    width: int
    depth: int

    def __post_init__(self) -> None:
        if not isinstance(self.width, (int, np.integer)) or isinstance(self.width, bool):
            raise TypeError(f"width must be an int, got {type(self.width).__name__}")
        if not isinstance(self.depth, (int, np.integer)) or isinstance(self.depth, bool):
            raise TypeError(f"depth must be an int, got {type(self.depth).__name__}")
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")

    @property
    def n_edge_layers(self) -> int:
        return self.depth + 1

    @property
    def n_vertex_layers(self) -> int:
        return self.depth + 2

    @property
    def edge_flag_count(self) -> int:
        """Number of independent edge flags in a bond configuration."""
        return (self.depth + 1) * self.width * self.width

    @property
    def site_flag_count(self) -> int:
        """Number of independent hidden-vertex flags in a site configuration."""
        return self.depth * self.width


def _frozen_bool_array(values: np.ndarray, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {arr.shape}")
    arr = arr.astype(bool, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class BondConfig:
    """Presence flags for every edge, indexed ``present[layer, src, dst]``.

    ``present[l, i, j]`` is the edge from vertex ``i`` of layer ``l`` to
    vertex ``j`` of layer ``l + 1``, for edge layers ``l in 0 .. depth``.
    The flag array is frozen after construction.
    """

    topology: Topology
    present: np.ndarray

    def __post_init__(self) -> None:
        t = self.topology
        shape = (t.depth + 1, t.width, t.width)
        object.__setattr__(self, "present", _frozen_bool_array(self.present, shape, "bond flags"))


@dataclass(frozen=True, eq=False)
class SiteConfig:
    """Presence flags for hidden vertices, indexed ``present[layer - 1, vertex]``.

    Row ``l - 1`` covers hidden layer ``l in 1 .. depth``; inputs and outputs
    carry no flags because they are never deleted.  Needs ``depth >= 1``.
    """

    topology: Topology
    present: np.ndarray

    def __post_init__(self) -> None:
        t = self.topology
        if t.depth < 1:
            raise ValueError("site configurations need depth >= 1")
        shape = (t.depth, t.width)
        object.__setattr__(self, "present", _frozen_bool_array(self.present, shape, "site flags"))


@dataclass(frozen=True, eq=False)
class ReachProfile:
    """Layer-by-layer forward reach sets from the input layer.

    ``reached[l]`` is a boolean mask over the vertices of layer ``l`` marking
    those reachable from some input; ``counts[l]`` is its popcount.  Layer 0
    is always fully reached.  Once some layer's count hits zero every later
    count is zero too.
    """

    reached: tuple[np.ndarray, ...]
    counts: tuple[int, ...]

    @property
    def crossing(self) -> bool:
        return self.counts[-1] > 0


def crossing_reach(config: BondConfig | SiteConfig) -> ReachProfile:
    """Sweep forward through the layers, collecting reach sets.

    The sweep stops doing work as soon as a layer is empty; the remaining
    layers are filled with empty masks.
    """
    if not isinstance(config, (BondConfig, SiteConfig)):
        raise TypeError(f"expected BondConfig or SiteConfig, got {type(config).__name__}")
    topo = config.topology
    w, depth = topo.width, topo.depth
    layers = [np.ones(w, dtype=bool)]

    if isinstance(config, BondConfig):
        for l in range(depth + 1):
            prev = layers[-1]
            if not prev.any():
                layers.append(np.zeros(w, dtype=bool))
                continue
            # dst j reached iff some reached src i has the edge (l, i, j)
            layers.append((config.present[l] & prev[:, None]).any(axis=0))
    else:
        # full bipartite wiring between consecutive layers: a present vertex
        # is reached iff the previous layer is nonempty
        for l in range(1, depth + 1):
            prev = layers[-1]
            if not prev.any():
                layers.append(np.zeros(w, dtype=bool))
                continue
            layers.append(config.present[l - 1].copy())
        layers.append(np.full(w, layers[-1].any()))

    for arr in layers:
        arr.flags.writeable = False
    return ReachProfile(
        reached=tuple(layers),
        counts=tuple(int(a.sum()) for a in layers),
    )


def crossing(config: BondConfig | SiteConfig) -> bool:
    """True iff some output vertex is reachable from some input vertex."""
    return crossing_reach(config).crossing
