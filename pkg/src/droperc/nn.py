"""Bias-free multilayer perceptrons and multiplicative filter masks.

The network mirrors the layered graph of :mod:`droperc.topology`: constant
width ``W``, ``depth`` hidden layers, weight matrix per edge layer indexed
``weights[l][src, dst]`` exactly like bond flags, no bias terms, and an
activation fixing ``act(0) == 0``.  That last property is what makes the
percolation view exact: a vertex that no surviving path reaches carries
activation exactly 0.0 (in IEEE arithmetic, not just in expectation), so a
mask whose surviving edges do not cross the network forces the output, the
loss gradient, and hence the whole SGD update to zero.

Masks come in three flavours: per-weight removal (dropconnect), per-hidden-
vertex removal (classic dropout, expressed as the induced edge mask), and a
"modified" variant of either that replaces non-crossing draws with the
all-zero mask.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .topology import BondConfig, Topology, crossing

_ZERO_WEIGHT_TOL = 1e-12


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative w.r.t. pre-activation; relu takes subgradient 0 at 0."""
    if name == "identity":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    raise ValueError(f"unknown activation {name!r}")


ACTIVATIONS = ("identity", "relu", "tanh")


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights of a bias-free constant-width MLP.

    ``weights[l][i, j]`` multiplies the signal from vertex ``i`` of layer
    ``l`` into vertex ``j`` of layer ``l+1``; there are ``depth + 1``
    matrices of shape ``(W, W)``.  All entries must be finite.
    """

    topology: Topology
    weights: tuple[np.ndarray, ...]
    activation: str

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )
        t = self.topology
        mats = tuple(np.asarray(m, dtype=float) for m in self.weights)
        if len(mats) != t.depth + 1:
            raise ValueError(f"need {t.depth + 1} weight matrices, got {len(mats)}")
        for l, m in enumerate(mats):
            if m.shape != (t.width, t.width):
                raise ValueError(
                    f"weight matrix {l} must have shape {(t.width, t.width)}, got {m.shape}"
                )
            if not np.all(np.isfinite(m)):
                raise ValueError(f"weight matrix {l} contains non-finite entries")
        frozen = []
        for m in mats:
            m = m.copy()
            m.flags.writeable = False
            frozen.append(m)
        object.__setattr__(self, "weights", tuple(frozen))

    def flat(self) -> np.ndarray:
        """All weights as one vector, layer-major."""
        return np.concatenate([m.ravel() for m in self.weights])


def init_params(
    topo: Topology, activation: str, rng: np.random.Generator
) -> MlpParams:
    """Independent uniform weights on [-1/sqrt(W), 1/sqrt(W)], never (near) zero.

    Entries with |w| < 1e-12 are redrawn so that the sparsity pattern of the
    weights is exactly the all-present pattern; connectivity of a masked
    network then depends on the mask alone.
    """
    w = topo.width
    bound = 1.0 / np.sqrt(w)
    mats = []
    for _ in range(topo.depth + 1):
        m = rng.uniform(-bound, bound, size=(w, w))
        while True:
            tiny = np.abs(m) < _ZERO_WEIGHT_TOL
            if not tiny.any():
                break
            m[tiny] = rng.uniform(-bound, bound, size=int(tiny.sum()))
        mats.append(m)
    return MlpParams(topology=topo, weights=tuple(mats), activation=activation)


@dataclass(frozen=True)
class FilterKind:
    """Law of a random filter mask.

    ``name`` is 'dropconnect' (per-weight removal at rate p) or 'original'
    (per-hidden-vertex removal at rate p, inputs and outputs never dropped).
    ``modified`` wraps either law: draws whose surviving edges do not cross
    the network are replaced by the all-zero mask.
    """

    name: str
    p: float
    modified: bool = False

    def __post_init__(self) -> None:
        if self.name not in ("dropconnect", "original"):
            raise ValueError(f"filter name must be 'dropconnect' or 'original', got {self.name!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


def dropconnect(p: float) -> FilterKind:
    return FilterKind(name="dropconnect", p=p)


def original(p: float) -> FilterKind:
    return FilterKind(name="original", p=p)


def modified(kind: FilterKind) -> FilterKind:
    return replace(kind, modified=True)


@dataclass(frozen=True, eq=False)
class FilterMask:
    """A realised multiplicative mask: keep flags per weight, plus its law."""

    topology: Topology
    kind: FilterKind
    keep: np.ndarray

    def __post_init__(self) -> None:
        t = self.topology
        keep = np.asarray(self.keep)
        shape = (t.depth + 1, t.width, t.width)
        if keep.shape != shape:
            raise ValueError(f"keep flags must have shape {shape}, got {keep.shape}")
        keep = keep.astype(bool, copy=True)
        keep.flags.writeable = False
        object.__setattr__(self, "keep", keep)


def sample_filter(kind: FilterKind, topo: Topology, rng: np.random.Generator) -> FilterMask:
    """Draw one mask of the given law.

    Uniforms are consumed in row-major flag order (per weight for
    dropconnect, per hidden vertex for original), so two calls with the same
    generator state agree flag by flag.  'original' needs ``depth >= 1``.
    """
    w, depth = topo.width, topo.depth
    if kind.name == "dropconnect":
        keep = rng.random((depth + 1, w, w)) >= kind.p
    else:
        if depth < 1:
            raise ValueError("'original' filters need depth >= 1 (they drop hidden vertices)")
        vkeep = rng.random((depth, w)) >= kind.p
        layer_keep = np.vstack([np.ones((1, w), dtype=bool), vkeep, np.ones((1, w), dtype=bool)])
        # edge survives iff both endpoints do
        keep = layer_keep[:-1][:, :, None] & layer_keep[1:][:, None, :]
    if kind.modified and not crossing(BondConfig(topo, keep)):
        keep = np.zeros((depth + 1, w, w), dtype=bool)
    return FilterMask(topology=topo, kind=kind, keep=keep)


def full_mask(topo: Topology) -> FilterMask:
    """The keep-everything mask (removal rate 0)."""
    shape = (topo.depth + 1, topo.width, topo.width)
    return FilterMask(topology=topo, kind=dropconnect(0.0), keep=np.ones(shape, dtype=bool))


def connectivity(params: MlpParams, mask: FilterMask) -> BondConfig:
    """Bond configuration of the masked network: kept and nonzero weights."""
    present = np.stack(
        [mask.keep[l] & (params.weights[l] != 0.0) for l in range(params.topology.depth + 1)]
    )
    return BondConfig(params.topology, present)


def forward(params: MlpParams, mask: FilterMask | None, x: np.ndarray) -> np.ndarray:
    """Output of the masked network; ``mask=None`` means keep everything.

    Accepts a single input vector of length ``W`` or a batch ``(B, W)`` and
    returns the matching shape.  The activation is applied at every hidden
    layer and at the output layer.
    """
    h = np.asarray(x, dtype=float)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    if h.shape[1] != params.topology.width:
        raise ValueError(f"input width {h.shape[1]} != topology width {params.topology.width}")
    for l in range(params.topology.depth + 1):
        wm = params.weights[l] * mask.keep[l] if mask is not None else params.weights[l]
        h = _act(params.activation, h @ wm)
    return h[0] if single else h


@dataclass(frozen=True, eq=False)
class Batch:
    """Paired inputs and targets, both of shape (size, W)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("inputs and targets must be 2-d (size, width)")
        if x.shape != y.shape:
            raise ValueError(f"inputs shape {x.shape} != targets shape {y.shape}")
        if x.shape[0] < 1:
            raise ValueError("batch must hold at least one example")
        x = x.copy()
        y = y.copy()
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])


def _stacked_forward_backward(
    weights: np.ndarray, keep: np.ndarray, activation: str, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Loss and masked gradient for a stack of independent same-shape nets.

    ``weights`` and ``keep`` are ``(R, L+1, W, W)``, ``x`` and ``y`` are
    ``(R, B, W)``; net r sees only slice r throughout, so the result equals
    R separate single-net passes.  Loss is the batch mean of
    ``0.5 * ||out - target||**2`` per net.  The gradient is taken w.r.t.
    the raw weights of ``w -> loss(keep * w)``: backprop through the masked
    weights, then a final multiply by the mask, which pins masked-out
    coordinates to exactly 0.0.  Returns (loss ``(R,)``, grads like
    ``weights``).
    """
    n_layers = weights.shape[1]
    masked = weights * keep

    hs = [x]
    zs = []
    for l in range(n_layers):
        z = np.matmul(hs[-1], masked[:, l])
        zs.append(z)
        hs.append(_act(activation, z))

    b = x.shape[1]
    resid = hs[-1] - y
    loss = 0.5 * np.einsum("rbj,rbj->r", resid, resid) / b

    grads = np.empty_like(weights)
    delta = resid * _act_grad(activation, zs[-1], hs[-1])
    for l in range(n_layers - 1, -1, -1):
        g = np.matmul(hs[l].transpose(0, 2, 1), delta) / b
        np.multiply(g, keep[:, l], out=grads[:, l])
        if l > 0:
            delta = np.matmul(delta, masked[:, l].transpose(0, 2, 1))
            delta *= _act_grad(activation, zs[l - 1], hs[l])
    return loss, grads


def _forward_backward(
    params: MlpParams, mask: FilterMask, batch: Batch
) -> tuple[float, tuple[np.ndarray, ...]]:
    """Single-net loss and masked gradient; see ``_stacked_forward_backward``."""
    loss, grads = _stacked_forward_backward(
        np.stack(params.weights)[None],
        mask.keep[None],
        params.activation,
        batch.inputs[None],
        batch.targets[None],
    )
    return float(loss[0]), tuple(grads[0])


def gradient(params: MlpParams, mask: FilterMask, batch: Batch) -> tuple[np.ndarray, ...]:
    """Masked gradient of the batch-mean squared loss at the masked weights.

    Returns one array per edge layer, shaped like the weights, exactly zero
    at every masked-out coordinate.
    """
    return _forward_backward(params, mask, batch)[1]
