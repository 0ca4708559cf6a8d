"""Masked SGD on bias-free MLPs, and what percolation says about it.

The training recursion is exactly

    w[t+1] = w[t] - lr(t) * mask[t] * grad(loss)(mask[t] * w[t])

with a fresh random filter mask every step.  Whenever a step's mask leaves
no input-output path through nonzero weights, the update is identically
zero, so over a horizon of T steps the expected parameter displacement is at
most (crossing probability) * (max update magnitude) * (sum of step sizes).
``run_dropout_sgd`` executes the recursion and measures every term of that
inequality; ``theorem_bound`` assembles the right-hand side;
``objective_decomposition`` splits the dropout objective into its crossing
and non-crossing branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exact import Prob, theta_bond_dp, theta_site
from .montecarlo import stream
from .nn import (
    ACTIVATIONS,
    Batch,
    FilterKind,
    MlpParams,
    _forward_backward,
    _stacked_forward_backward,
    forward,
    init_params,
    sample_filter,
)
from .scaling import LrSchedule, lr_sum
from .topology import BondConfig, Topology, crossing


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a masked-SGD run.

    Three independent seed channels: ``init_seed`` (weight init, per trial),
    ``filter_seed`` (masks, per trial and step), ``data_seed`` (teacher plus
    per-step batches).  Targets come from a fixed random teacher network of
    the same shape, with optional additive Gaussian noise.
    """

    topology: Topology
    kind: FilterKind
    schedule: LrSchedule
    steps: int
    batch_size: int = 8
    trials: int = 1
    activation: str = "tanh"
    noise_std: float = 0.0
    init_seed: int = 0
    filter_seed: int = 1
    data_seed: int = 2

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not self.noise_std >= 0.0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.kind.name == "original" and self.topology.depth < 1:
            raise ValueError("'original' filters need depth >= 1")


def filter_theta(kind: FilterKind, topo: Topology) -> Prob:
    """Exact crossing probability of the filter's mask graph.

    Dropconnect masks are bond configurations, original-dropout masks site
    configurations.  The modified variant only rewrites non-crossing draws
    (to the all-zero mask, also non-crossing), so its crossing probability
    equals the base kind's.
    """
    if kind.name == "dropconnect":
        return theta_bond_dp(kind.p, topo)
    return theta_site(kind.p, topo)


def theorem_bound(theta: Prob | float, lr_total: float, grad_scale: float) -> float:
    """Displacement bound: crossing probability x gradient scale x step-size mass."""
    return float(theta) * grad_scale * lr_total


@dataclass(frozen=True, eq=False)
class TrainReport:
    """Measurements from ``run_dropout_sgd``.

    ``displacements[r]`` is trial r's final ``||w_T - w_0||`` over all
    weights jointly; ``nopath_fractions[r]`` the fraction of its steps whose
    masked network had no input-output path.  ``max_update_norm`` is the
    largest masked-gradient norm seen anywhere, the empirical stand-in for
    the gradient-scale constant, and ``bound`` is
    ``theta * max_update_norm * lr_total``.  ``loss_traces[r, t]`` holds the
    masked-network batch loss at the start of step t.
    """

    config: TrainConfig
    displacements: tuple[float, ...]
    nopath_fractions: tuple[float, ...]
    loss_traces: np.ndarray
    max_update_norm: float
    lr_total: float
    theta: float
    bound: float
    nopath_steps: int = 0
    nopath_zero_update_steps: int = 0

    @property
    def mean_displacement(self) -> float:
        return float(np.mean(self.displacements))

    @property
    def nopath_fraction(self) -> float:
        return float(np.mean(self.nopath_fractions))


def run_dropout_sgd(cfg: TrainConfig) -> TrainReport:
    """Run the masked-SGD recursion for every trial and gather the report.

    Trials are independent given their index (all randomness flows through
    ``stream(seed, trial, ...)``) and never interact, so they are evaluated
    in lockstep on stacked arrays, one slice per trial; results come out in
    trial order regardless.  Every no-path step is asserted to carry an
    exactly-zero update before it is counted.
    """
    topo = cfg.topology
    w, n_layers = topo.width, topo.depth + 1
    trials, steps = cfg.trials, cfg.steps
    teacher = init_params(topo, cfg.activation, stream(cfg.data_seed))
    starts = np.stack(
        [
            np.stack(init_params(topo, cfg.activation, stream(cfg.init_seed, r)).weights)
            for r in range(trials)
        ]
    )
    mats = starts.copy()
    traces = np.empty((trials, steps))
    nopath_counts = np.zeros(trials, dtype=np.int64)
    zero_update_total = 0
    max_norm = 0.0
    keeps = np.empty((trials, n_layers, w, w), dtype=bool)
    xs = np.empty((trials, cfg.batch_size, w))
    noise = np.empty_like(xs) if cfg.noise_std > 0.0 else None
    for t in range(steps):
        for r in range(trials):
            keeps[r] = sample_filter(cfg.kind, topo, stream(cfg.filter_seed, r, t)).keep
            data_rng = stream(cfg.data_seed, r, t)
            xs[r] = data_rng.standard_normal((cfg.batch_size, w))
            if noise is not None:
                noise[r] = data_rng.standard_normal((cfg.batch_size, w))
        ys = forward(teacher, None, xs.reshape(-1, w)).reshape(xs.shape)
        if noise is not None:
            ys = ys + cfg.noise_std * noise
        losses, grads = _stacked_forward_backward(mats, keeps, cfg.activation, xs, ys)
        traces[:, t] = losses
        reached = np.ones((trials, w), dtype=bool)
        for l in range(n_layers):
            reached = ((keeps[:, l] & (mats[:, l] != 0.0)) & reached[:, :, None]).any(axis=1)
        nopath = ~reached.any(axis=1)
        update_sq = np.einsum("rlij,rlij->r", grads, grads)
        if np.any(nopath & (update_sq > 0.0)):
            bad = int(np.flatnonzero(nopath & (update_sq > 0.0))[0])
            raise RuntimeError(f"no-path step {t} of trial {bad} produced a nonzero update")
        nopath_counts += nopath
        zero_update_total += int(nopath.sum())
        max_norm = max(max_norm, math.sqrt(float(update_sq.max())))
        mats -= cfg.schedule.at(t) * grads
    diff = mats - starts
    displacements = np.sqrt(np.einsum("rlij,rlij->r", diff, diff))
    fractions = nopath_counts / steps if steps else np.zeros(trials)
    traces.flags.writeable = False
    theta = filter_theta(cfg.kind, topo)
    lr_total = lr_sum(cfg.schedule, steps) if steps else 0.0
    return TrainReport(
        config=cfg,
        displacements=tuple(float(d) for d in displacements),
        nopath_fractions=tuple(float(f) for f in fractions),
        loss_traces=traces,
        max_update_norm=max_norm,
        lr_total=lr_total,
        theta=theta.value,
        bound=theorem_bound(theta, lr_total, max_norm),
        nopath_steps=int(nopath_counts.sum()),
        nopath_zero_update_steps=zero_update_total,
    )


@dataclass(frozen=True)
class DecompositionReport:
    """Crossing / non-crossing split of the expected masked loss.

    ``mean_total`` is the plain average over all sampled masks and always
    equals ``theta_hat * mean_path + (1 - theta_hat) * mean_nopath`` up to
    rounding whenever both branches are populated; an empty branch is
    reported as None, never invented.
    """

    theta_hat: float
    mean_total: float
    mean_path: float | None
    mean_nopath: float | None
    n_path: int
    n_nopath: int


def objective_decomposition(
    params: MlpParams, kind: FilterKind, batch: Batch, trials: int, seed: int
) -> DecompositionReport:
    """Estimate the masked loss split by whether the mask admits a crossing.

    Mask i comes from ``stream(seed, i)``.  The branch assignment uses the
    connectivity of the masked weights (kept and nonzero), the same event
    that forces the network output to zero.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    topo = params.topology
    sum_path = 0.0
    sum_nopath = 0.0
    n_path = 0
    for i in range(trials):
        mask = sample_filter(kind, topo, stream(seed, i))
        loss, _ = _forward_backward(params, mask, batch)
        wired = np.stack(
            [mask.keep[l] & (params.weights[l] != 0.0) for l in range(topo.depth + 1)]
        )
        if crossing(BondConfig(topo, wired)):
            n_path += 1
            sum_path += loss
        else:
            sum_nopath += loss
    n_nopath = trials - n_path
    return DecompositionReport(
        theta_hat=n_path / trials,
        mean_total=(sum_path + sum_nopath) / trials,
        mean_path=sum_path / n_path if n_path else None,
        mean_nopath=sum_nopath / n_nopath if n_nopath else None,
        n_path=n_path,
        n_nopath=n_nopath,
    )
