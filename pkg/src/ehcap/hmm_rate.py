"""Information rates of Shannon-strategy codebooks on the original channel.

A codebook draws strategies u_i (maps from battery state to input) i.i.d. or from
a Markov chain of order k. The rate lim (1/n) I(U^n; Y^n) is estimated from one
long simulated realization: log p(y^n | u^n) comes from a forward recursion over
the battery state, log p(y^n) from a forward recursion over (battery state, last
k strategies). Both recursions are normalized every step.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np

from ehcap.closed_form import LOG2_3, RateResult
from ehcap.prob import binary_entropy

ALPHABETS = {
    # strategy u -> (input when S=0, input when S=1)
    "binary": ((0, 0), (0, 1)),
    "ternary": ((0, 0), (0, -1), (0, 1)),
}
OUTPUTS = {"binary": (0, 1), "ternary": (0, -1, 1)}
DEFAULT_N = 2_000_000
DEFAULT_SEEDS = 8
# searches use their own seed so the final estimate is not selected on its own noise
SEARCH_SEED = 10_000


@dataclass(frozen=True)
class ChannelKernel:
    """kernel[u, s, y, s'] = p(y, s' | u, s) for the noiseless unit-battery channel."""

    q: float
    arity: str
    kernel: np.ndarray


@dataclass(frozen=True)
class StrategyCodebook:
    """Order-k Markov law over strategies.

    ``transition[c, u]`` is P(u | context c), where the context index encodes the
    last k strategies base |alphabet| with the most recent one least significant.
    """

    arity: str
    order: int
    transition: np.ndarray

    def __post_init__(self):
        a = len(ALPHABETS[self.arity])
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if self.order > 2:
            raise ValueError("Markov orders above 2 are not supported")
        if self.transition.shape != (a ** self.order, a):
            raise ValueError(f"transition must have shape {(a ** self.order, a)}")
        if np.any(self.transition < -1e-15):
            raise ValueError("negative transition probability")
        if not np.allclose(self.transition.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")

    @property
    def alphabet_size(self) -> int:
        return len(ALPHABETS[self.arity])

    @property
    def n_contexts(self) -> int:
        return self.transition.shape[0]


def build_kernel(q: float, arity: str = "binary") -> ChannelKernel:
    """Transmit first, then harvest: s' = min(s - x + e, 1), e ~ Bernoulli(q)."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q!r}")
    strategies = ALPHABETS[arity]
    outputs = OUTPUTS[arity]
    k = np.zeros((len(strategies), 2, len(outputs), 2))
    for ui, strat in enumerate(strategies):
        for s in (0, 1):
            x = strat[s]
            yi = outputs.index(x)
            used = 1 if x != 0 else 0
            for e, pe in ((0, 1 - q), (1, q)):
                s_next = min(s - used + e, 1)
                k[ui, s, yi, s_next] += pe
    return ChannelKernel(q, arity, k)


def _energized_split(arity: str, p_on: float) -> np.ndarray:
    """Row putting total mass p_on on energy-consuming strategies, split evenly."""
    if arity == "binary":
        return np.array([1 - p_on, p_on])
    return np.array([1 - p_on, p_on / 2, p_on / 2])


def iid_codebook(arity: str, p: float) -> StrategyCodebook:
    """I.i.d. codebook; p is the probability of each energy-consuming strategy."""
    p_on = p if arity == "binary" else 2 * p
    if not 0.0 <= p_on <= 1.0:
        raise ValueError(f"infeasible strategy probability {p!r}")
    return StrategyCodebook(arity, 0, _energized_split(arity, p_on)[None, :])


def markov_codebook(arity: str, order: int, params) -> StrategyCodebook:
    """Markov codebook parameterized by P(energized | on/off pattern of the last k).

    ``params`` has 2**order entries indexed by the pattern bits, most recent last
    (order 1: (P(on|off), P(on|on)); order 2: (off-off, off-on, on-off, on-on)).
    Energized symbols share their mass evenly, so ternary rows stay symmetric.
    """
    if order not in (1, 2):
        raise ValueError("Markov order must be 1 or 2")
    params = np.clip(np.asarray(params, dtype=float), 0.0, 1.0)
    if params.size != 2 ** order:
        raise ValueError(f"order {order} needs {2 ** order} parameters")
    a = len(ALPHABETS[arity])
    rows = []
    for ctx in itertools.product(range(a), repeat=order):
        bits = 0
        for sym in ctx:
            bits = 2 * bits + (1 if sym != 0 else 0)
        rows.append(_energized_split(arity, params[bits]))
    return StrategyCodebook(arity, order, np.array(rows))


def _joint_matrices(codebook: StrategyCodebook, kern: ChannelKernel) -> np.ndarray:
    """M[y][(s, c), (s', c')] = sum_u P(u|c) p(y, s'|u, s) [c' = shift(c, u)]."""
    a = codebook.alphabet_size
    nc = codebook.n_contexts
    ny = kern.kernel.shape[2]
    m = np.zeros((ny, 2 * nc, 2 * nc))
    for c in range(nc):
        c_next_base = (c * a) % nc if codebook.order > 0 else 0
        for u in range(a):
            pu = codebook.transition[c, u]
            if pu == 0:
                continue
            c2 = c_next_base + u if codebook.order > 0 else 0
            for s in (0, 1):
                for y in range(ny):
                    for s2 in (0, 1):
                        m[y, s * nc + c, s2 * nc + c2] += pu * kern.kernel[u, s, y, s2]
    return m


def stationary_joint(codebook: StrategyCodebook, kern: ChannelKernel) -> np.ndarray:
    """Stationary law of the hidden pair (battery state, context)."""
    m = _joint_matrices(codebook, kern).sum(axis=0)
    vals, vecs = np.linalg.eig(m.T)
    i = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, i])
    v = np.abs(v) / np.abs(v).sum()
    return v


def stationary_on_probability(p: float, q: float) -> float:
    """Pr[S=1] under an i.i.d. codebook energizing with probability p."""
    return q / (p + q - p * q)


@numba.njit(cache=True)
def _sample(trans, order, a, kernel, init, draws):
    n = draws.shape[0]
    nc = trans.shape[0]
    u = np.empty(n, np.int64)
    y = np.empty(n, np.int64)
    s = np.empty(n, np.int64)
    # initial (battery, context) from the stationary joint law
    r = draws[0, 2]
    acc = 0.0
    x = init.shape[0] - 1
    for i in range(init.shape[0]):
        acc += init[i]
        if r < acc:
            x = i
            break
    st = x // nc
    ctx = x % nc
    ny = kernel.shape[2]
    for i in range(n):
        r = draws[i, 0]
        acc = 0.0
        ui = a - 1
        for j in range(a):
            acc += trans[ctx, j]
            if r < acc:
                ui = j
                break
        # sample (y, s') jointly from the kernel row
        r = draws[i, 1]
        acc = 0.0
        yi = ny - 1
        s2 = 1
        done = False
        for yy in range(ny):
            for ss in range(2):
                acc += kernel[ui, st, yy, ss]
                if r < acc and not done:
                    yi = yy
                    s2 = ss
                    done = True
        u[i] = ui
        y[i] = yi
        s[i] = st
        st = s2
        if order > 0:
            ctx = (ctx * a) % nc + ui
    return u, y, s


@numba.njit(cache=True)
def _log_ratio_increments(u, y, kernel, mats, init_s, init_joint):
    """Per-step log2 p(y_i | y^{i-1}, u^i) - log2 p(y_i | y^{i-1})."""
    n = u.shape[0]
    out = np.empty(n)
    a_c = init_s.copy()
    a_j = init_joint.copy()
    nx = a_j.shape[0]
    nxt_c = np.empty(2)
    nxt_j = np.empty(nx)
    for i in range(n):
        ui = u[i]
        yi = y[i]
        tot_c = 0.0
        for s2 in range(2):
            v = a_c[0] * kernel[ui, 0, yi, s2] + a_c[1] * kernel[ui, 1, yi, s2]
            nxt_c[s2] = v
            tot_c += v
        a_c[0] = nxt_c[0] / tot_c
        a_c[1] = nxt_c[1] / tot_c
        tot_j = 0.0
        for k in range(nx):
            v = 0.0
            for j in range(nx):
                v += a_j[j] * mats[yi, j, k]
            nxt_j[k] = v
            tot_j += v
        for k in range(nx):
            a_j[k] = nxt_j[k] / tot_j
        out[i] = math.log2(tot_c) - math.log2(tot_j)
    return out


@dataclass
class InfoRateEstimate:
    rate: float
    stderr: float
    n: int
    seed: int
    state_on_freq: float
    state_on_stderr: float


def _batch_means(x: np.ndarray, batches: int) -> tuple[float, float]:
    n = x.size - x.size % batches
    means = x[:n].reshape(batches, -1).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def info_rate(codebook: StrategyCodebook, kern: ChannelKernel, n: int = DEFAULT_N,
              seed: int = 0, batches: int = 32) -> InfoRateEstimate:
    """Estimate lim (1/n) I(U^n; Y^n) in bits per channel use from one realization."""
    if codebook.arity != kern.arity:
        raise ValueError("codebook and kernel arities differ")
    if n < batches * 2:
        raise ValueError("sequence too short for batch means")
    rng = np.random.default_rng(seed)
    draws = rng.random((n, 3))
    init = stationary_joint(codebook, kern)
    nc = codebook.n_contexts
    u, y, s = _sample(codebook.transition, codebook.order, codebook.alphabet_size,
                      kern.kernel, init, draws)
    init_s = np.array([init[:nc].sum(), init[nc:].sum()])
    mats = _joint_matrices(codebook, kern)
    inc = _log_ratio_increments(u, y, kern.kernel, mats, init_s, init)
    rate, err = _batch_means(inc, batches)
    on, on_err = _batch_means(s.astype(float), batches)
    return InfoRateEstimate(rate, err, n, seed, on, on_err)


def info_rate_seeds(codebook: StrategyCodebook, kern: ChannelKernel, n: int = DEFAULT_N,
                    seeds=range(DEFAULT_SEEDS)) -> tuple[float, float]:
    """Mean over seeds and the standard error of that mean."""
    seeds = list(seeds)
    vals = np.array([info_rate(codebook, kern, n, s).rate for s in seeds])
    if len(vals) == 1:
        return float(vals[0]), info_rate(codebook, kern, n, seeds[0]).stderr
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def _markov_entropy_rate(codebook: StrategyCodebook) -> float:
    """Entropy rate of the strategy chain itself (the q = 1 shortcut)."""
    a = codebook.alphabet_size
    nc = codebook.n_contexts
    if codebook.order == 0:
        row = codebook.transition[0]
        row = row[row > 0]
        return float(-(row * np.log2(row)).sum())
    p = np.zeros((nc, nc))
    for c in range(nc):
        for u in range(a):
            p[c, (c * a) % nc + u] += codebook.transition[c, u]
    vals, vecs = np.linalg.eig(p.T)
    pi = np.abs(np.real(vecs[:, int(np.argmin(np.abs(vals - 1)))]))
    pi /= pi.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(codebook.transition > 0,
                      codebook.transition * np.log2(codebook.transition), 0.0).sum(axis=1)
    return float(pi @ h)


def _limit(q, arity):
    if q == 0.0:
        return RateResult(0.0, diagnostics={"degenerate": True})
    return RateResult(1.0 if arity == "binary" else LOG2_3,
                      diagnostics={"degenerate": True, "argmax": 0.5 if arity == "binary" else 1 / 3})


def _p_max(arity):
    return 1.0 if arity == "binary" else 0.5


def oiid_rate(q: float, arity: str = "binary", step: float = 0.02, refine: float = 0.005,
              n: int = DEFAULT_N, seeds=range(DEFAULT_SEEDS), search_n: int | None = None,
              seed: int = SEARCH_SEED) -> RateResult:
    """Best i.i.d. codebook rate; grid over p, refined once around the best point.

    The search runs on one seed with common random numbers; the winner is then
    re-estimated on every seed in ``seeds``.
    """
    if q in (0.0, 1.0):
        return _limit(q, arity)
    kern = build_kernel(q, arity)
    search_n = search_n or n
    pmax = _p_max(arity)

    def score(p):
        return info_rate(iid_codebook(arity, p), kern, search_n, seed).rate

    grid = np.arange(step, pmax + 1e-12, step)
    vals = [score(p) for p in grid]
    best = float(grid[int(np.argmax(vals))])
    fine = np.arange(max(best - step, refine), min(best + step, pmax) + 1e-12, refine)
    fvals = [score(p) for p in fine]
    best = float(fine[int(np.argmax(fvals))])
    rate, err = info_rate_seeds(iid_codebook(arity, best), kern, n, seeds)
    return RateResult(rate=rate, stderr=err, iterations=len(grid) + len(fine),
                      diagnostics={"argmax": best, "n": n, "seeds": len(list(seeds))})


def markov_rate(q: float, arity: str = "binary", order: int = 1, n: int = DEFAULT_N,
                seeds=range(DEFAULT_SEEDS), search_n: int = 400_000, seed: int = SEARCH_SEED,
                start=None) -> RateResult:
    """Best order-1 or order-2 Markov codebook rate.

    Coordinate-wise grid search over P(energized | pattern) with shrinking steps,
    using one seed and common random numbers, then re-estimation on all seeds.
    """
    if order not in (1, 2):
        raise ValueError("only Markov orders 1 and 2 are tractable")
    if q in (0.0, 1.0):
        return _limit(q, arity)
    kern = build_kernel(q, arity)
    cache = {}

    def score(params):
        key = tuple(np.round(params, 6))
        if key not in cache:
            cache[key] = info_rate(markov_codebook(arity, order, params), kern,
                                   search_n, seed).rate
        return cache[key]

    if start is None:
        if order == 2:
            r1 = markov_rate(q, arity, 1, n=search_n, seeds=[seed], search_n=search_n, seed=seed)
            a, b = r1.diagnostics["params"]
            start = [a, b, a, b]
        else:
            grid = np.arange(0.05, 1.0, 0.1)
            scored = [(score([a, b]), a, b) for a in grid for b in grid]
            _, a, b = max(scored)
            start = [a, b]
    x = np.array(start, dtype=float)
    best = score(x)
    for h in (0.05, 0.02, 0.01, 0.005):
        improved = True
        while improved:
            improved = False
            for i in range(x.size):
                for d in (-h, h):
                    y = x.copy()
                    y[i] = min(max(y[i] + d, 0.0), 1.0)
                    v = score(y)
                    if v > best + 1e-12:
                        x, best, improved = y, v, True
    rate, err = info_rate_seeds(markov_codebook(arity, order, x), kern, n, seeds)
    return RateResult(rate=rate, stderr=err, iterations=len(cache),
                      diagnostics={"params": [float(v) for v in x], "order": order,
                                   "n": n, "symmetric_rows_assumed": arity == "ternary"})
