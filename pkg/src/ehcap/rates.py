"""Achievable rates of the modulo and extended modulo timing codes.

Each rate is a fractional program numerator(p_u) / E[T](p_u), solved with
Dinkelbach's method. The modulo code decodes U perfectly, so its inner problem
has a Gibbs solution; the extended code needs a cost-tilted Blahut-Arimoto loop.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ehcap.closed_form import LOG2_3, RateResult, genie_ub_binary
from ehcap.prob import Pmf, entropy_of
from ehcap.timing import StrategyMap, build_channel, modulo_costs

log = logging.getLogger(__name__)

MAX_OUTER = 200
N_RANGE = range(1, 257)
PATIENCE = 16


def gibbs(costs: np.ndarray, lam: float) -> np.ndarray:
    """argmax over p of H(p) - lam * <p, costs>: p(u) proportional to 2^(-lam c(u))."""
    e = -lam * (costs - costs.min())
    w = np.exp2(e)
    return w / w.sum()


def gibbs_value(costs: np.ndarray, lam: float) -> float:
    """max over p of H(p) - lam * <p, costs> = log2 sum 2^(-lam c(u))."""
    m = costs.min()
    return float(-lam * m + np.log2(np.exp2(-lam * (costs - m)).sum()))


def _check_rate_q(q):
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q!r}")


def modulo_rate(q: float, N: int, tol: float = 1e-12, sign_bit: bool = False) -> RateResult:
    """max over p_u on {0..N-1} of (H(U) [+1]) / E[T] for the modulo code."""
    _check_rate_q(q)
    if N < 1:
        raise ValueError("N must be >= 1")
    c = modulo_costs(q, N)
    bonus = 1.0 if sign_bit else 0.0
    lam = 0.0
    converged = False
    for it in range(1, MAX_OUTER + 1):
        p = gibbs(c, lam)
        new = (entropy_of(p) + bonus) / float(p @ c)
        if abs(new - lam) < tol:
            lam = new
            converged = True
            break
        lam = new
    p = gibbs(c, lam)
    # certificate: max_p [num - lam E[T]] should vanish at the fixed point
    cert = gibbs_value(c, lam) + bonus
    return RateResult(rate=lam, p_u=Pmf(0, p), N=N, lam=lam, iterations=it,
                      converged=converged,
                      diagnostics={"certificate": cert, "costs": c})


def _best_over_n(run, n_range, patience):
    best = None
    stale = 0
    for N in n_range:
        r = run(N)
        # ties go to the smaller N
        if best is None or r.rate > best.rate + 1e-12:
            best, stale = r, 0
        else:
            stale += 1
            if stale >= patience:
                break
    return best


def modulo_rate_best(q: float, n_range=N_RANGE, patience: int = PATIENCE,
                     sign_bit: bool = False) -> RateResult:
    """Best modulo rate over frame lengths N."""
    if q == 0.0:
        return RateResult(0.0, N=None, diagnostics={"degenerate": True})
    _check_rate_q(q)
    if q == 1.0:
        # rate approaches the noiseless limit as N grows but no finite N attains it
        return RateResult(LOG2_3 if sign_bit else 1.0, N=None,
                          diagnostics={"limit": "N -> infinity"})
    return _best_over_n(lambda N: modulo_rate(q, N, sign_bit=sign_bit), n_range, patience)


def _divergences(cond: np.ndarray, pt: np.ndarray) -> np.ndarray:
    """D(p(.|u) || pt) in bits for every row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cond > 0, cond / pt, 1.0)
        return np.sum(np.where(cond > 0, cond * np.log2(ratio), 0.0), axis=1)


def _row_negentropy(cond: np.ndarray) -> np.ndarray:
    """sum_t p(t|u) log2 p(t|u) for every row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(np.where(cond > 0, cond * np.log2(np.where(cond > 0, cond, 1.0)), 0.0),
                      axis=1)


def ba_inner(cond: np.ndarray, cost: np.ndarray, lam: float, bonus: float = 0.0,
             p0: np.ndarray | None = None, tol: float = 1e-9,
             max_iter: int = 200_000) -> tuple[np.ndarray, float, float, int]:
    """Maximize I(U;T) + bonus - lam * E[c(U)] by cost-tilted Blahut-Arimoto.

    Returns (p, value, gap, iterations); ``gap`` bounds the distance to the optimum.
    """
    n = cond.shape[0]
    p = np.full(n, 1.0 / n) if p0 is None else p0.copy()
    # D(p(.|u) || pt) = negentropy(u) - sum_t p(t|u) log2 pt: two mat-vecs per sweep
    negent = _row_negentropy(cond)
    tiny = np.finfo(float).tiny
    for it in range(1, max_iter + 1):
        pt = p @ cond
        score = negent - cond @ np.log2(np.maximum(pt, tiny)) - lam * cost
        value = float(p @ score) + bonus
        gap = float(score.max()) + bonus - value
        if gap < tol:
            break
        w = p * np.exp2(score - score.max())
        p = w / w.sum()
    return p, value, gap, it


def extended_rate(q: float, N: int, u_max: int | None = None, tol: float = 1e-9,
                  sign_bit: bool = False, p0: np.ndarray | None = None,
                  grow: bool = True) -> RateResult:
    """max over p_u on {0..u_max} of (I(U;T) [+1]) / E[T] for the extended code.

    With ``grow`` the support is doubled until the rate gains less than 1e-5.
    """
    _check_rate_q(q)
    if N < 1:
        raise ValueError("N must be >= 1")
    if u_max is None:
        u_max = max(2 * N, 8)
    if u_max < N - 1:
        raise ValueError("u_max must be >= N - 1")
    result = _extended_fixed(q, N, u_max, tol, sign_bit, p0)
    while grow:
        bigger = _extended_fixed(q, N, 2 * u_max, tol, sign_bit,
                                 np.pad(result.p_u.mass, (0, u_max)))
        gain = bigger.rate - result.rate
        result, u_max = bigger, 2 * u_max
        if gain < 1e-5:
            break
    return result


def _extended_fixed(q, N, u_max, tol, sign_bit, p0):
    ch = build_channel(StrategyMap.extended(N), q, u_max)
    bonus = 1.0 if sign_bit else 0.0
    p = None
    if p0 is not None:
        p = np.asarray(p0, dtype=float)[:u_max + 1]
        p = np.maximum(p, 1e-12)
        p /= p.sum()
    lam = 0.0
    converged = False
    inner_total = 0
    for it in range(1, MAX_OUTER + 1):
        p, _, gap, k = ba_inner(ch.cond, ch.cost, lam, bonus, p0=p, tol=tol)
        inner_total += k
        mi = _mi(p, ch.cond)
        new = (mi + bonus) / float(p @ ch.cost)
        if abs(new - lam) < tol:
            lam = new
            converged = True
            break
        lam = new
    _, cert, gap, _ = ba_inner(ch.cond, ch.cost, lam, bonus, p0=p, tol=tol)
    return RateResult(rate=lam, p_u=Pmf(0, p), N=N, lam=lam, iterations=it,
                      converged=converged,
                      diagnostics={"u_max": u_max, "t_max": ch.t_max, "certificate": cert,
                                   "inner_gap": gap, "inner_iterations": inner_total,
                                   "tail": ch.tail})


def _mi(p, cond):
    pt = p @ cond
    return max(float(p @ _divergences(cond, pt)), 0.0)


def extended_rate_best(q: float, n_range=N_RANGE, patience: int = PATIENCE,
                       sign_bit: bool = False, tol: float = 1e-9) -> RateResult:
    """Best extended-code rate over N, warm-starting each N from the previous optimum."""
    if q == 0.0:
        return RateResult(0.0, N=None, diagnostics={"degenerate": True})
    _check_rate_q(q)
    if q == 1.0:
        return RateResult(LOG2_3 if sign_bit else 1.0, N=None,
                          diagnostics={"limit": "u_max -> infinity"})
    prev = None

    def run(N):
        nonlocal prev
        p0 = None
        if prev is not None:
            p0 = prev.p_u.mass
        r = extended_rate(q, N, tol=tol, sign_bit=sign_bit, p0=p0)
        prev = r
        return r

    return _best_over_n(run, n_range, patience)


def ternary_timing_rate(q: float, scheme: str = "extended", n_range=N_RANGE,
                        patience: int = PATIENCE) -> RateResult:
    """Timing rate with one extra sign bit per transmitted symbol."""
    if scheme == "modulo":
        return modulo_rate_best(q, n_range, patience, sign_bit=True)
    if scheme == "extended":
        return extended_rate_best(q, n_range, patience, sign_bit=True)
    raise ValueError(f"unknown scheme {scheme!r}")


def uniform_witness(q: float) -> tuple[int, float, float]:
    """Uniform U with N = ceil(1/p*) from the genie optimizer.

    Returns (N, achieved rate, closed-form lower bound -q p* log p* / (q + p*(1-q))).
    """
    p_star = genie_ub_binary(q).diagnostics["argmax"]
    N = math.ceil(1 / p_star)
    rate = math.log2(N) / ((N + 1) / 2 + (1 - q) / q)
    bound = -q * p_star * math.log2(p_star) / (q + p_star * (1 - q))
    return N, rate, bound


def asymptotic_ratio(q: float, n_range=None) -> dict:
    """Genie bound over best modulo rate, plus the uniform-U witness."""
    if not 0.0 < q < 1.0:
        raise ValueError("asymptotic ratio needs 0 < q < 1")
    ub = genie_ub_binary(q).rate
    if n_range is None:
        n_range = range(1, max(257, int(8 / q)))
    best = modulo_rate_best(q, n_range)
    N_w, r_w, bound = uniform_witness(q)
    return {"q": q, "genie": ub, "modulo": best.rate, "N": best.N,
            "ratio": ub / best.rate, "witness_N": N_w, "witness_rate": r_w,
            "witness_bound": bound}
