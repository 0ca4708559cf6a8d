"""Exact crossing probabilities for layered bond and site removal.

Everything here is deterministic.  Removal is parameterised by ``p``, the
probability that an individual edge (bond model) or hidden vertex (site
model) is deleted; each flag survives independently with probability
``1 - p``.  The quantity of interest is the crossing probability: the chance
that after removal some output vertex is still reachable from some input.

Three independent routes are provided and cross-checked in the tests:

* ``theta_site``      -- closed form ``(1 - p**W) ** L`` in log domain;
* ``theta_bond_dp``   -- exact dynamic programme over the per-layer count of
                         reached vertices, which is a Markov chain on
                         ``{0, .., W}`` started at ``W``;
* ``theta_bruteforce`` -- exhaustive enumeration of all flag configurations,
                         usable while the flag count stays small.

``bond_bounds`` and ``site_coupling_bound`` give closed-form envelopes for
the bond crossing probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .topology import Topology

_LN2 = math.log(2.0)


def log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x <= 0, accurate at both ends.

    Splits at ``-ln 2`` following the usual recipe: ``log(-expm1(x))`` near
    zero, ``log1p(-exp(x))`` for very negative ``x``.
    """
    if math.isnan(x):
        return math.nan
    if x > 0.0:
        raise ValueError(f"log1mexp needs x <= 0, got {x}")
    if x == 0.0:
        return -math.inf
    if x > -_LN2:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


@dataclass(frozen=True)
class Prob:
    """A probability carried together with its log and complement-log.

    ``value`` lives in ``[0, 1]``; ``log_value = ln(value)`` and
    ``log_complement = ln(1 - value)`` (``-inf`` at the respective endpoint).
    The three fields stay consistent to about 1e-14 relative error; products
    and powers are performed on the log fields so that values far below
    float-minimum survive as finite logs.
    """

    value: float
    log_value: float
    log_complement: float

    @classmethod
    def from_value(cls, value: float) -> "Prob":
        value = float(value)
        if math.isnan(value) or not 0.0 <= value <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {value}")
        log_value = math.log(value) if value > 0.0 else -math.inf
        log_complement = math.log1p(-value) if value < 1.0 else -math.inf
        return cls(value=value, log_value=log_value, log_complement=log_complement)

    @classmethod
    def from_log(cls, log_value: float) -> "Prob":
        """Build from ``ln p``; the complement log is derived stably."""
        if math.isnan(log_value) or log_value > 0.0:
            raise ValueError(f"log-probability must be <= 0, got {log_value}")
        value = math.exp(log_value)
        if value == 1.0:
            # complement has underflowed out of the value field; keep the
            # accurate log rather than the useless log(0)
            log_complement = log1mexp(log_value)
        else:
            log_complement = math.log1p(-value)
        return cls(value=value, log_value=log_value, log_complement=log_complement)

    def pow(self, exponent: float) -> "Prob":
        """``p ** exponent`` for ``exponent >= 0``, computed in log domain."""
        if exponent < 0:
            raise ValueError(f"exponent must be >= 0, got {exponent}")
        if exponent == 0:
            return Prob.from_value(1.0)
        if self.log_value == -math.inf:
            return Prob.from_value(0.0)
        return Prob.from_log(exponent * self.log_value)

    def complement(self) -> "Prob":
        c = 1.0 - self.value
        if self.value >= 0.5 or c == 1.0:
            # 1 - value is exact here (Sterbenz, or value rounded away)
            return Prob(value=c, log_value=self.log_complement, log_complement=self.log_value)
        return Prob(value=c, log_value=self.log_complement, log_complement=math.log1p(-c))

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"Prob({self.value!r})"


def as_prob(p: "Prob | float") -> Prob:
    """Coerce a float in [0, 1] (or pass through a Prob) to a Prob."""
    if isinstance(p, Prob):
        return p
    return Prob.from_value(p)


def theta_site(p: "Prob | float", topo: Topology) -> Prob:
    """Site-model crossing probability ``(1 - p**W) ** L``.

    Each of the ``L`` hidden layers independently keeps at least one of its
    ``W`` vertices with probability ``1 - p**W``; crossing happens iff every
    layer does, since surviving vertices stay completely wired.  Computed as
    ``exp(L * log1p(-p**W))`` so that values near 0 and near 1 both keep full
    relative precision.  Needs ``depth >= 1``.
    """
    p = as_prob(p)
    if topo.depth < 1:
        raise ValueError("theta_site needs depth >= 1; depth 0 has no hidden layers")
    log_layer = log1mexp(topo.width * p.log_value)  # ln(1 - p**W)
    return Prob.from_log(topo.depth * log_layer)


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Row-stochastic transition matrix of the reached-count Markov chain.

    State ``n`` is the number of reached vertices in the current layer.  Each
    of the ``W`` vertices of the next layer is reached independently iff at
    least one of its ``n`` incoming edges from reached vertices survives,
    which happens with probability ``1 - p**n``; so row ``n`` is the
    ``Binomial(W, 1 - p**n)`` pmf.  Row 0 is a point mass at 0 (extinction is
    absorbing).  Rows are built from log-gamma binomial coefficients so that
    large widths stay finite.
    """

    width: int
    p: Prob
    rows: np.ndarray  # (W+1, W+1), rows[n, k] = P(next count = k | count = n)

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        expected = (self.width + 1, self.width + 1)
        if rows.shape != expected:
            raise ValueError(f"kernel must have shape {expected}, got {rows.shape}")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @classmethod
    def build(cls, p: "Prob | float", width: int) -> "TransitionKernel":
        p = as_prob(p)
        if width < 1:
            raise ValueError(f"width must be >= 1, got {width}")
        return cls(width=width, p=p, rows=_kernel_rows(width, p.value, p.log_value))


@lru_cache(maxsize=512)
def _kernel_rows(width: int, p_value: float, p_log: float) -> np.ndarray:
    w = width
    ks = np.arange(w + 1, dtype=float)
    # ln C(W, k) via lgamma; exact for these integer arguments to ~1 ulp
    lchoose = np.array(
        [math.lgamma(w + 1) - math.lgamma(k + 1) - math.lgamma(w - k + 1) for k in range(w + 1)]
    )
    rows = np.zeros((w + 1, w + 1))
    for n in range(w + 1):
        log_miss = n * p_log  # ln p**n, probability a next-layer vertex is missed
        if log_miss == 0.0 or n == 0:
            rows[n, 0] = 1.0  # success probability 0: point mass at 0
            continue
        if log_miss == -math.inf:
            rows[n, w] = 1.0  # success probability 1: point mass at W
            continue
        log_hit = log1mexp(log_miss)  # ln(1 - p**n)
        rows[n] = np.exp(lchoose + ks * log_hit + (w - ks) * log_miss)
    rows.flags.writeable = False
    return rows


def theta_bond_dp(p: "Prob | float", topo: Topology) -> Prob:
    """Bond-model crossing probability by exact dynamic programming.

    Pushes the distribution of the reached-count chain from a point mass at
    ``W`` through ``L + 1`` kernel applications; the crossing probability is
    one minus the mass absorbed at state 0.  Runs in ``O(L * W**2)`` time and
    ``O(W**2)`` memory.  ``depth == 0`` is allowed (single edge layer).
    """
    p = as_prob(p)
    kernel = TransitionKernel.build(p, topo.width)
    w = topo.width
    dist = np.zeros(w + 1)
    dist[w] = 1.0
    buf = np.empty_like(dist)
    for _ in range(topo.depth + 1):
        np.matmul(dist, kernel.rows, out=buf)
        dist, buf = buf, dist
    absorbed = float(dist[0])
    # clip tiny negative drift from float dot products; the DP keeps mass in [0, 1]
    absorbed = min(max(absorbed, 0.0), 1.0)
    if absorbed > 0.5:
        # the directly summed surviving mass is the better-conditioned side
        survived = float(np.sum(dist[1:]))
        return Prob.from_value(min(max(survived, 0.0), 1.0))
    return Prob.from_value(1.0 - absorbed)


_BRUTEFORCE_FLAG_BUDGET = 24
_ENUM_CHUNK = 1 << 20


@lru_cache(maxsize=64)
def _crossing_counts_by_popcount(model: str, width: int, depth: int) -> np.ndarray:
    """counts[m] = number of crossing configurations with exactly m present flags.

    Enumerates all ``2**k`` flag words in chunks; flag order within a word is
    the row-major (layer, src, dst) / (layer, vertex) order, though the count
    by popcount is of course order-independent.
    """
    topo = Topology(width, depth)
    k = topo.edge_flag_count if model == "bond" else topo.site_flag_count
    total = 1 << k
    counts = np.zeros(k + 1, dtype=np.int64)
    shifts = np.arange(k, dtype=np.uint32)
    for start in range(0, total, _ENUM_CHUNK):
        stop = min(start + _ENUM_CHUNK, total)
        words = np.arange(start, stop, dtype=np.uint32)
        bits = ((words[:, None] >> shifts[None, :]) & 1).astype(bool)
        if model == "bond":
            present = bits.reshape(-1, depth + 1, width, width)
            reached = np.ones((stop - start, width), dtype=bool)
            for l in range(depth + 1):
                reached = (present[:, l] & reached[:, :, None]).any(axis=1)
        else:
            present = bits.reshape(-1, depth, width)
            reached = np.ones((stop - start, width), dtype=bool)
            for l in range(depth):
                reached = present[:, l] & reached.any(axis=1, keepdims=True)
        crossing = reached.any(axis=1)
        popcounts = bits.sum(axis=1, dtype=np.int64)
        counts += np.bincount(popcounts[crossing], minlength=k + 1).astype(np.int64)
    counts.flags.writeable = False
    return counts


def theta_bruteforce(model: str, p: "Prob | float", topo: Topology) -> Prob:
    """Crossing probability by exhaustive enumeration of flag configurations.

    Sums ``(1-p)**m * p**(k-m)`` over all crossing configurations with ``m``
    present flags out of ``k``.  Only available while ``k <= 24``; raises
    ValueError beyond that budget.  Intended as the independent oracle for
    the closed form and the dynamic programme.
    """
    if model not in ("bond", "site"):
        raise ValueError(f"model must be 'bond' or 'site', got {model!r}")
    p = as_prob(p)
    if model == "site" and topo.depth < 1:
        raise ValueError("site enumeration needs depth >= 1")
    k = topo.edge_flag_count if model == "bond" else topo.site_flag_count
    if k > _BRUTEFORCE_FLAG_BUDGET:
        raise ValueError(
            f"{k} flags exceeds the brute-force budget of {_BRUTEFORCE_FLAG_BUDGET}"
        )
    counts = _crossing_counts_by_popcount(model, topo.width, topo.depth)
    keep, drop = 1.0 - p.value, p.value
    value = math.fsum(
        int(counts[m]) * keep**m * drop**(k - m) for m in range(k + 1) if counts[m]
    )
    return Prob.from_value(min(max(value, 0.0), 1.0))


def bond_bounds(p: "Prob | float", topo: Topology) -> tuple[Prob, Prob]:
    """Closed-form sandwich for the bond crossing probability.

    Lower: ``(1 - p**W) ** (L+1)`` -- survival of a fixed column of layers
    each needing one of ``W`` parallel edges.  Upper: ``(1 - p**(W**2)) **
    (L+1)`` -- each of the ``L+1`` edge layers must keep at least one of its
    ``W**2`` edges.  Both evaluated in log domain.
    """
    p = as_prob(p)
    w, steps = topo.width, topo.depth + 1
    lower = Prob.from_log(steps * log1mexp(w * p.log_value))
    upper = Prob.from_log(steps * log1mexp(w * w * p.log_value))
    return lower, upper


def site_coupling_bound(p: "Prob | float", topo: Topology) -> Prob:
    """Upper bound on the bond crossing probability via a site comparison.

    Deleting every hidden vertex whose incoming edges are all removed maps a
    bond configuration with removal rate ``p`` onto a site configuration
    with removal rate ``p**W``, and can only destroy crossings it did not
    have.  Equals ``theta_site(p**W, topo)``; needs ``depth >= 1``.
    """
    p = as_prob(p)
    if topo.depth < 1:
        raise ValueError("site_coupling_bound needs depth >= 1")
    return theta_site(p.pow(topo.width), topo)
