"""Width-growth laws, percolation regimes, and training budgets.

A scaling law ties network size ``n`` (depth plus two, up to the convention
that hidden depth is ``n``) to a width ``W(n) = floor((c1 * ln n) ** tau) + c2``.
As ``n`` grows, the crossing probability of the random removal model on the
``W(n) x n`` layered graph either tends to 1, tends to 0, oscillates inside a
known interval, or is simply not determined by the results implemented here;
``classify_site`` and ``classify_bond`` report which.  The product
``n * p ** W(n)`` is the quantity whose limit drives every one of those
answers, and ``diagnostic`` exposes it for inspection.

``lr_sum`` and ``training_budget`` cover the optimisation side: polynomially
decaying step sizes ``alpha / (t+1) ** rho`` and the horizon up to which the
expected parameter displacement of masked SGD stays bounded.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# absolute slack, in log space, for deciding p == exp(-1/c1); float inputs
# cannot be expected to hit the critical point bit-exactly
_CRITICAL_LOG_TOL = 1e-12

_DIAGNOSTIC_LADDER = (10**2, 10**3, 10**4, 10**5, 10**6)

_N_SCAN_CAP = 1 << 62


@dataclass(frozen=True)
class ScalingSpec:
    """A width-growth law ``W(n) = floor((c1 * ln n) ** tau) + c2`` plus removal rate.

    ``model`` selects which removal process the law will be judged against
    ('bond' laws carry no offset: ``c2 == 0``).  ``n_min`` is the smallest
    ``n >= 1`` with ``W(n) >= 1``; sizes below it are rejected by
    ``width_at``.  Construction fails if no such ``n`` exists.
    """

    model: str
    tau: float
    c1: float
    c2: int
    p: float
    n_min: int = field(init=False, default=0)  # computed at construction

    def __post_init__(self) -> None:
        if self.model not in ("bond", "site"):
            raise ValueError(f"model must be 'bond' or 'site', got {self.model!r}")
        if not self.tau >= 0.0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if not self.c1 > 0.0:
            raise ValueError(f"c1 must be > 0, got {self.c1}")
        if not isinstance(self.c2, (int, np.integer)) or isinstance(self.c2, bool):
            raise TypeError(f"c2 must be an int, got {type(self.c2).__name__}")
        if self.model == "bond" and self.c2 != 0:
            raise ValueError("bond scaling laws take c2 = 0")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie strictly in (0, 1), got {self.p}")
        object.__setattr__(self, "n_min", _find_n_min(self.tau, self.c1, self.c2))

    def raw_width(self, n: int) -> int:
        """``W(n)`` without the ``n >= n_min`` guard (may be < 1)."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return int(math.floor((self.c1 * math.log(n)) ** self.tau)) + int(self.c2)


def _find_n_min(tau: float, c1: float, c2: int) -> int:
    def w(n: int) -> int:
        return int(math.floor((c1 * math.log(n)) ** tau)) + int(c2)

    if w(1) >= 1:
        return 1
    if tau == 0.0:  # constant width, already seen to be < 1
        raise ValueError(f"width 1 + c2 = {1 + c2} never reaches 1")
    hi = 2
    while w(hi) < 1:
        hi *= 2
        if hi > _N_SCAN_CAP:
            raise ValueError("no representable n reaches width 1 under this law")
    lo = hi // 2  # w(lo) < 1 <= w(hi); width is nondecreasing in n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if w(mid) >= 1:
            hi = mid
        else:
            lo = mid
    return hi


def width_at(spec: ScalingSpec, n: int) -> int:
    """``W(n)`` for ``n >= n_min``; rejects sizes where the law gives width < 1."""
    if n < spec.n_min:
        raise ValueError(f"n = {n} is below n_min = {spec.n_min} for this law")
    return spec.raw_width(n)


def diagnostic(spec: ScalingSpec, n: int) -> float:
    """The driving product ``n * p ** W(n)``, evaluated in log domain."""
    w = width_at(spec, n)
    return math.exp(math.log(n) + w * math.log(spec.p))


class Regime(enum.Enum):
    """Limiting behaviour of the crossing probability along a scaling law."""

    LIMIT_ONE = "LimitOne"
    LIMIT_ZERO = "LimitZero"
    CRITICAL_INTERVAL = "CriticalInterval"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class RegimeReport:
    """Outcome of classifying a scaling law.

    ``p_critical`` is the threshold removal rate when the theory pins it
    down (0 or 1 in the trivial regimes, the critical point itself on the
    boundary) and None when it does not.  ``interval`` is the closed
    oscillation envelope ``(a, b)`` for the critical regime, else None.
    ``diagnostics`` records ``(n, W(n), n * p ** W(n))`` over a reference
    ladder of sizes for inspection; sizes below ``n_min`` are skipped.
    """

    spec: ScalingSpec
    regime: Regime
    p_critical: float | None
    interval: tuple[float, float] | None
    diagnostics: tuple[tuple[int, int, float], ...]


def _ladder_diagnostics(spec: ScalingSpec) -> tuple[tuple[int, int, float], ...]:
    out = []
    for n in _DIAGNOSTIC_LADDER:
        if n < spec.n_min:
            continue
        out.append((n, width_at(spec, n), diagnostic(spec, n)))
    return tuple(out)


def _log_p_offset(spec: ScalingSpec) -> float:
    """ln p + 1/c1: negative below the critical rate, positive above."""
    return math.log(spec.p) + 1.0 / spec.c1


def classify_site(spec: ScalingSpec) -> RegimeReport:
    """Regime of the site model under a width law.

    Width growing faster than ``c1 * ln n`` (tau > 1) saves every layer
    eventually and the crossing probability tends to 1 for every removal
    rate; slower growth (tau < 1) loses some layer eventually and it tends
    to 0.  At tau == 1 the threshold sits at ``exp(-1/c1)``, and exactly at
    the threshold the limit does not exist: the probability oscillates
    forever inside a closed interval determined by ``c1`` and ``c2``.
    """
    if spec.model != "site":
        raise ValueError("classify_site needs a site-model ScalingSpec")
    diags = _ladder_diagnostics(spec)
    if spec.tau > 1.0:
        return RegimeReport(spec, Regime.LIMIT_ONE, 1.0, None, diags)
    if spec.tau < 1.0:
        return RegimeReport(spec, Regime.LIMIT_ZERO, 0.0, None, diags)
    offset = _log_p_offset(spec)
    p_crit = math.exp(-1.0 / spec.c1)
    if abs(offset) <= _CRITICAL_LOG_TOL:
        a = math.exp(-math.exp((1.0 - spec.c2) / spec.c1))
        b = math.exp(-math.exp(-spec.c2 / spec.c1))
        return RegimeReport(spec, Regime.CRITICAL_INTERVAL, p_crit, (a, b), diags)
    if offset < 0.0:
        return RegimeReport(spec, Regime.LIMIT_ONE, p_crit, None, diags)
    return RegimeReport(spec, Regime.LIMIT_ZERO, p_crit, None, diags)


def classify_bond(spec: ScalingSpec) -> RegimeReport:
    """Regime of the bond model under a width law, where known.

    The bond results cover less ground than the site ones: tau > 1 always
    percolates in the limit, tau == 1 percolates below ``exp(-1/c1)``,
    tau == 1/2 dies above ``exp(-1/c1)``, and tau < 1/2 always dies.  Every
    other combination (tau strictly between 1/2 and 1, or sitting on a
    threshold case) is reported as Unknown rather than guessed.
    """
    if spec.model != "bond":
        raise ValueError("classify_bond needs a bond-model ScalingSpec")
    diags = _ladder_diagnostics(spec)
    if spec.tau > 1.0:
        return RegimeReport(spec, Regime.LIMIT_ONE, 1.0, None, diags)
    if spec.tau < 0.5:
        return RegimeReport(spec, Regime.LIMIT_ZERO, 0.0, None, diags)
    offset = _log_p_offset(spec)
    if spec.tau == 1.0 and offset < -_CRITICAL_LOG_TOL:
        return RegimeReport(spec, Regime.LIMIT_ONE, None, None, diags)
    if spec.tau == 0.5 and offset > _CRITICAL_LOG_TOL:
        return RegimeReport(spec, Regime.LIMIT_ZERO, None, None, diags)
    return RegimeReport(spec, Regime.UNKNOWN, None, None, diags)


@dataclass(frozen=True)
class LrSchedule:
    """Polynomially decaying step sizes ``alpha / (t + 1) ** rho``, t from 0."""

    rho: float
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")

    def at(self, t: int) -> float:
        if t < 0:
            raise ValueError(f"step index must be >= 0, got {t}")
        return self.alpha / (t + 1) ** self.rho


_LR_SUM_CHUNK = 1 << 20


def lr_sum(sched: LrSchedule, steps: int) -> float:
    """Sum of the first ``steps`` step sizes.

    Chunked vectorised powers with an exact (fsum) combine across chunks, so
    horizons past 10**6 steps do not accumulate summation error.
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    partials = []
    for start in range(1, steps + 1, _LR_SUM_CHUNK):
        stop = min(start + _LR_SUM_CHUNK, steps + 1)
        ks = np.arange(start, stop, dtype=float)
        partials.append(float(np.sum(ks ** -sched.rho)))
    return sched.alpha * math.fsum(partials)


_EXP_OVERFLOW = 709.0  # exp() overflows double a hair above this


def training_budget(n: int, width: int, p: float, sched: LrSchedule, c: float) -> float:
    """Largest safe training horizon, returned as ``ln T``.

    For ``rho < 1`` the admissible horizon satisfies
    ``ln T = c * n * p ** (W**2)`` with ``c`` strictly inside
    ``(0, 1 / (1 - rho))``; for the harmonic schedule ``rho == 1`` it
    satisfies ``ln ln T = c * n * p ** (W**2)`` with ``0 < c < 1``, so the
    returned ``ln T`` is the exponential of that product (inf if it
    overflows).  ``c`` on or outside the admissible boundary is rejected.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly in (0, 1), got {p}")
    if sched.rho < 1.0:
        limit = 1.0 / (1.0 - sched.rho)
        if not 0.0 < c < limit:
            raise ValueError(f"c must lie in (0, {limit}) for rho = {sched.rho}, got {c}")
    else:
        if not 0.0 < c < 1.0:
            raise ValueError(f"c must lie in (0, 1) for rho = 1, got {c}")
    scale = c * n * math.exp(width * width * math.log(p))
    if sched.rho < 1.0:
        return scale
    return math.exp(scale) if scale <= _EXP_OVERFLOW else math.inf
