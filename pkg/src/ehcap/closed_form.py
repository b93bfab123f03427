"""Capacities and bounds that reduce to a one-parameter maximization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ehcap.prob import binary_entropy, entropy_of

LOG2_3 = math.log2(3)
_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass
class ScalarOptResult:
    argmax: float
    value: float
    iterations: int


@dataclass
class RateResult:
    """A rate in bits per binary channel use plus whatever produced it."""

    rate: float
    p_u: object = None
    N: int | None = None
    lam: float | None = None
    iterations: int = 0
    converged: bool = True
    stderr: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def maximize_scalar(f: Callable[[float], float], lo: float, hi: float,
                    tol: float = 1e-10, grid: int = 1000) -> ScalarOptResult:
    """Maximize ``f`` on [lo, hi].

    A ``grid``-point scan picks the bracket; golden-section search refines it.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if tol <= 0:
        raise ValueError("tol must be positive")

    def ev(x):
        y = f(x)
        if not math.isfinite(y):
            raise FloatingPointError(f"objective is {y!r} at x={x!r}")
        return y

    xs = np.linspace(lo, hi, grid + 1)
    ys = np.array([ev(x) for x in xs])
    i = int(np.argmax(ys))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid)]
    best_x, best_y = xs[i], ys[i]

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = ev(c), ev(d)
    it = 0
    while b - a > tol and it < 200:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = ev(d)
    x = (a + b) / 2
    y = ev(x)
    if y < best_y:
        x, y = best_x, best_y
    return ScalarOptResult(float(x), float(y), it)


def _check_q(q):
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q!r}")


def _scalar_rate(res: ScalarOptResult, **diag) -> RateResult:
    return RateResult(rate=res.value, iterations=res.iterations,
                      diagnostics={"argmax": res.argmax, **diag})


def genie_ub_binary(q: float) -> RateResult:
    """Genie bound: max_p q H2(p) / (q + p(1-q)).

    At q = 0 the bound is 0 and the argmax is reported as 0.
    """
    _check_q(q)
    if q == 0.0:
        return RateResult(0.0, diagnostics={"argmax": 0.0, "degenerate": True})
    if q == 1.0:
        return RateResult(1.0, diagnostics={"argmax": 0.5})
    res = maximize_scalar(lambda p: q * binary_entropy(p) / (q + p * (1 - q)), 0.0, 1.0)
    return _scalar_rate(res, stationarity=genie_stationarity_residual(q, res.argmax))


def genie_stationarity_residual(q: float, p: float) -> float:
    """Residual of q = log(1-p)/log(p) at the genie optimizer."""
    return abs(q - math.log1p(-p) / math.log(p))


def genie_ub_ternary(q: float) -> RateResult:
    """max_p (q H2(p) + p q) / (q + p(1-q))."""
    _check_q(q)
    if q == 0.0:
        return RateResult(0.0, diagnostics={"argmax": 0.0, "degenerate": True})
    if q == 1.0:
        return RateResult(LOG2_3, diagnostics={"argmax": 2 / 3})
    res = maximize_scalar(
        lambda p: (q * binary_entropy(p) + p * q) / (q + p * (1 - q)), 0.0, 1.0)
    return _scalar_rate(res)


def zero_storage_binary(q: float) -> float:
    """Harvest-first, no battery: max_p H2(pq) - p H2(q)."""
    _check_q(q)
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    hq = binary_entropy(q)
    return maximize_scalar(lambda p: binary_entropy(p * q) - p * hq, 0.0, 1.0).value


def infinite_storage_binary(q: float) -> float:
    _check_q(q)
    return binary_entropy(q) if q <= 0.5 else 1.0


def zero_storage_ternary(q: float) -> float:
    """max_p H(pq, 1-2pq, pq) - 2p H2(q) over p in [0, 1/2]."""
    _check_q(q)
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return LOG2_3
    hq = binary_entropy(q)
    return maximize_scalar(
        lambda p: entropy_of([p * q, 1 - 2 * p * q, p * q]) - 2 * p * hq, 0.0, 0.5).value


def infinite_storage_ternary(q: float) -> float:
    _check_q(q)
    if q > 2 / 3:
        return LOG2_3
    return entropy_of([q / 2, 1 - q, q / 2])


def niid_state_prob(p: float, q: float) -> float:
    """Stationary Pr[S=1] when the (0,1) strategy is used with probability p."""
    return q / (p + q - p * q)


def niid_binary_objective(p: float, q: float) -> float:
    s1 = niid_state_prob(p, q)
    return binary_entropy(min(p * s1, 1.0)) - p * binary_entropy(min(s1, 1.0))


def niid_binary(q: float) -> RateResult:
    """Naive i.i.d. Shannon strategies, decoded as if the state were i.i.d."""
    _check_q(q)
    if q == 0.0:
        return RateResult(0.0, diagnostics={"argmax": 0.0, "degenerate": True})
    if q == 1.0:
        return RateResult(1.0, diagnostics={"argmax": 0.5})
    return _scalar_rate(maximize_scalar(lambda p: niid_binary_objective(p, q), 0.0, 1.0))


def niid_ternary_objective(p: float, q: float) -> float:
    # p is the probability of each energized strategy, so 2p <= 1
    s1 = min(niid_state_prob(2 * p, q), 1.0)
    y = p * s1
    return entropy_of([y, 1 - 2 * y, y]) - 2 * p * binary_entropy(s1)


def niid_ternary(q: float) -> RateResult:
    _check_q(q)
    if q == 0.0:
        return RateResult(0.0, diagnostics={"argmax": 0.0, "degenerate": True})
    if q == 1.0:
        return RateResult(LOG2_3, diagnostics={"argmax": 1 / 3})
    return _scalar_rate(maximize_scalar(lambda p: niid_ternary_objective(p, q), 0.0, 0.5))
