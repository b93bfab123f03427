"""State-leakage upper bound.

    C <= max over p_T in P of [H(T) - sum_t gap_t p(t) (+1)] / E[T]

where gap_t = H(Z) - H(Z_t) and P holds the output laws with
sum_{t<=s} p(t) <= 1 - (1-q)^s for every s. The ratio is handled by Dinkelbach;
each inner problem is an entropy maximization under prefix caps, solved exactly
by an active-set sweep over prefixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ehcap.closed_form import LOG2_3
from ehcap.prob import Pmf, entropy_of, truncated_geom_gaps, truncated_geometric

MAX_OUTER = 200
LN2 = math.log(2)


@dataclass
class LeakageSolution:
    p_t: Pmf
    rate: float
    lam: float
    gamma: np.ndarray  # prefix multipliers in bits, gamma[s-1] for prefix s
    mu: float
    kkt_residual: float
    iterations: int = 0
    converged: bool = True
    sign_bit: bool = False
    degenerate: bool = False


def default_t_max(q: float) -> int:
    """Support where the prefix caps reach 1 - 1e-10, and at least 64."""
    return max(int(math.ceil(math.log(1e-10) / math.log1p(-q))), 64)


def prefix_caps(q: float, t_max: int) -> np.ndarray:
    """Caps 1 - (1-q)^s for s = 1..t_max-1 (the full sum is fixed to 1)."""
    s = np.arange(1, t_max)
    return -np.expm1(s * math.log1p(-q))


def capped_gibbs(weights: np.ndarray, caps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximize H(p) - <p, weights> (bits) s.t. sum(p) = 1 and P(s) <= caps[s-1].

    The optimum is Gibbs-shaped on blocks between active prefixes, with block
    levels increasing left to right. Each block end is the prefix that minimizes
    remaining cap over remaining Gibbs weight. Returns (p, gamma) with gamma[s-1]
    the multiplier of prefix s, in bits.
    """
    n = weights.size
    if caps.size != n - 1:
        raise ValueError("need one cap per proper prefix")
    caps = np.minimum(caps, 1.0)
    g = np.exp2(-(weights - weights.min()))
    p = np.zeros(n)
    gamma = np.zeros(n - 1)
    start, used = 0, 0.0
    levels = []
    ends = []
    while start < n:
        wsum = np.cumsum(g[start:])
        room = np.append(caps[start:] - used, 1.0 - used)
        ratio = room / wsum
        # prefixes with no room force zero mass up to them
        k = int(np.argmin(ratio[:-1])) if start < n - 1 else -1
        if k >= 0 and ratio[k] < ratio[-1] * (1 - 1e-13):
            # take the last index attaining the minimum
            mins = np.flatnonzero(ratio[:-1] <= ratio[k] * (1 + 1e-13) + 1e-300)
            k = int(mins[-1])
            level = max(ratio[k], 0.0)
            end = start + k
            p[start:end + 1] = level * g[start:end + 1]
            used = caps[end]
            levels.append(level)
            ends.append(end)
            start = end + 1
        else:
            p[start:] = ratio[-1] * g[start:]
            levels.append(ratio[-1])
            start = n
    for j, end in enumerate(ends):
        lo, hi = levels[j], levels[j + 1]
        gamma[end] = math.log2(hi / lo) if lo > 0 else math.inf
    return p, gamma


def inner_value(p: np.ndarray, weights: np.ndarray) -> float:
    return entropy_of(p) - float(np.dot(p, weights))


def _solve(q: float, t_max: int | None, tol: float, bonus: float) -> LeakageSolution:
    if t_max is not None:
        return _solve_fixed(q, t_max, tol, bonus)
    # the optimum decays like 2^(-rate t), so grow the support until it stops mattering
    t_max = default_t_max(q)
    sol = _solve_fixed(q, t_max, tol, bonus)
    while True:
        t_max *= 2
        bigger = _solve_fixed(q, t_max, tol, bonus)
        if abs(bigger.rate - sol.rate) < 1e-12 or t_max > 1 << 16:
            return bigger
        sol = bigger


def _solve_fixed(q: float, t_max: int, tol: float, bonus: float) -> LeakageSolution:
    if (1 - q) ** t_max > 1e-9:
        raise ValueError(f"t_max={t_max} too small for q={q}")
    t = np.arange(1, t_max + 1)
    gaps = truncated_geom_gaps(q, t_max)
    caps = prefix_caps(q, t_max)
    lam = 0.0
    converged = False
    for it in range(1, MAX_OUTER + 1):
        p, gamma = capped_gibbs(gaps + lam * t, caps)
        num = entropy_of(p) - float(p @ gaps) + bonus
        new = num / float(p @ t)
        if abs(new - lam) < tol:
            lam = new
            converged = True
            break
        lam = new
    p, gamma = capped_gibbs(gaps + lam * t, caps)
    sol = LeakageSolution(Pmf(1, p), lam, lam, gamma, mu=lam, kkt_residual=0.0,
                          iterations=it, converged=converged, sign_bit=bonus > 0)
    sol.kkt_residual = verify_kkt(sol, q)
    return sol


def leakage_ub(q: float, t_max: int | None = None, tol: float = 1e-12) -> LeakageSolution:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q!r}")
    if q == 0.0 or q == 1.0:
        return _limit(q, float(q), False)
    return _solve(q, t_max, tol, 0.0)


def leakage_ub_ternary(q: float, t_max: int | None = None, tol: float = 1e-12) -> LeakageSolution:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q!r}")
    if q == 0.0:
        return _limit(q, 0.0, True)
    if q == 1.0:
        return _limit(q, LOG2_3, True)
    return _solve(q, t_max, tol, 1.0)


def _limit(q, rate, sign_bit):
    if q == 1.0:
        # unconstrained: p(t) = 2^(bonus - rate t), a geometric law on {1, 2, ...}
        r = 2.0 ** -rate
        t = np.arange(1, 200)
        p = Pmf(1, (1 - r) * r ** (t - 1), tail=r ** 199)
    else:
        p = Pmf.point(1)
    return LeakageSolution(p, rate, rate, np.zeros(0), rate, 0.0, sign_bit=sign_bit,
                           degenerate=True)


def verify_kkt(sol: LeakageSolution, q: float) -> float:
    """Largest violation of the optimality conditions of the inner program.

    Checks primal feasibility of the prefix caps, dual feasibility (gamma >= 0),
    complementary slackness, stationarity of log2 p(t) + gap_t + lam t + sum_{s>=t}
    gamma_s (constant across t), and the Dinkelbach fixed point.
    """
    if sol.degenerate:
        return 0.0
    p = sol.p_t.mass
    t_max = p.size
    t = np.arange(1, t_max + 1)
    gaps = truncated_geom_gaps(q, t_max)
    caps = prefix_caps(q, t_max)
    gamma = np.asarray(sol.gamma, dtype=float)
    if gamma.size != t_max - 1:
        raise ValueError("gamma must have one entry per proper prefix")
    P = np.cumsum(p)[:-1]
    primal = max(float(np.max(P - caps, initial=0.0)), 0.0)
    dual = max(float(-gamma.min(initial=0.0)), 0.0)
    slack = float(np.max(np.abs(gamma * (caps - P)), initial=0.0))

    finite = np.isfinite(gamma)
    g = np.where(finite, gamma, 0.0)
    # p(t) carries the multipliers of every prefix s >= t
    tail_gamma = np.concatenate([np.cumsum(g[::-1])[::-1], [0.0]])
    live = p > 1e-300
    with np.errstate(divide="ignore"):
        stat = np.log2(p[live]) + gaps[live] + sol.lam * t[live] + tail_gamma[live]
    weight = p[live]
    centre = float(np.dot(weight, stat))
    stationarity = float(np.max(np.abs(stat - centre) * np.minimum(1.0, weight / weight.max() * 1e6)))

    bonus = 1.0 if sol.sign_bit else 0.0
    num = entropy_of(p) - float(p @ gaps) + bonus
    fixed_point = abs(num - sol.lam * float(p @ t))
    return max(primal, dual, slack, stationarity, fixed_point)


def perturbed(sol: LeakageSolution, i: int = 0, j: int = 1, delta: float = 1e-3) -> LeakageSolution:
    """Copy of ``sol`` with ``delta`` mass moved from support point i to j."""
    p = sol.p_t.mass.copy()
    delta = min(delta, p[i])
    p[i] -= delta
    p[j] += delta
    return LeakageSolution(Pmf(sol.p_t.offset, p), sol.rate, sol.lam, sol.gamma, sol.mu,
                           sol.kkt_residual, sol.iterations, sol.converged, sol.sign_bit)


def column_entropies(q: float, targets: np.ndarray) -> np.ndarray:
    """H(Z | T=t, U=u) for each column t = 1..t_max of a deterministic map.

    ``targets[..., z]`` is the output t = v(u, z) + z for state z; the leading axes
    index different maps. Returns entropies with shape (..., t_max).
    """
    z = np.arange(targets.shape[-1])
    pz = q * (1 - q) ** z
    t_max = int(targets.max())
    out = np.zeros(targets.shape[:-1] + (t_max,))
    for t in range(1, t_max + 1):
        w = np.where(targets == t, pz, 0.0)
        tot = w.sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(w > 0, w / tot, 0.0)
            h = -np.sum(np.where(p > 0, p * np.log2(p), 0.0), axis=-1)
        out[..., t - 1] = h
    return out


def entropy_map_spot_check(q: float, z_max: int = 6, t_max: int = 8) -> dict:
    """Enumerate every map z -> t in {z+1..t_max} for z = 0..z_max.

    Reports the largest excess of H(Z | T=t, U=u) over H(Z_t), and how far the
    best map is from H(Z_t) on the columns a full map can reach (t <= z_max + 1).
    """
    choices = [np.arange(z + 1, t_max + 1) for z in range(z_max + 1)]
    grids = np.meshgrid(*choices, indexing="ij")
    targets = np.stack([g.ravel() for g in grids], axis=-1)
    h = column_entropies(q, targets)
    bound = np.array([entropy_of(truncated_geometric(q, t).mass) for t in range(1, t_max + 1)])
    excess = float((h - bound).max())
    reach = z_max + 1
    equality_gap = float(np.max(np.abs(h[:, :reach].max(axis=0) - bound[:reach])))
    return {"maps": targets.shape[0], "max_excess": excess, "equality_gap": equality_gap}
