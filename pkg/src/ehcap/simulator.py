"""Monte Carlo simulation of the unit-battery channel driven by timing codes.

Within a channel use the encoder transmits first and then harvests. After each
transmitted 1 the following uses are indexed j = 0, 1, ...; symbol u is sent at
the first use with a charged battery, j >= u and j = u (mod N). For u < N this is
the modulo code, for larger u the extended one. The decoder reads T = j + 1.

The run starts as if a 1 had just been sent, so the initial battery is charged
with probability q and the first symbol is distributed like every other one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ehcap.prob import Pmf, entropy_of
from ehcap.timing import StrategyMap, build_channel

BLOCK = 1 << 18
TRACE_CAP = 10_000_000


@dataclass
class SimTrace:
    q: float
    N: int
    arrivals: np.ndarray
    battery: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    symbols: np.ndarray
    symbol_times: np.ndarray
    decoded: np.ndarray
    signs: np.ndarray | None = None
    decoded_signs: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def mean_time(self) -> float:
        return float(self.symbol_times.mean())

    @property
    def mean_time_stderr(self) -> float:
        return float(self.symbol_times.std(ddof=1) / math.sqrt(self.symbol_times.size))


@numba.njit(cache=True)
def _drive(arrivals, symbols, signs, N, k, battery, j, t_out, x_out, s_out, e_out,
           slot0, cap, counters):
    """Advance the channel over one block of arrivals.

    Returns (next symbol index, battery, j, slots consumed). ``counters`` holds
    [wasted arrivals, energy violations, cumulative arrivals - cumulative sends].
    """
    m = symbols.shape[0]
    n = arrivals.shape[0]
    i = 0
    while i < n and k < m:
        u = symbols[k]
        x = 0
        if battery == 1 and j >= u and (j - u) % N == 0:
            x = signs[k]
        e = arrivals[i]
        g = slot0 + i
        if g < cap:
            e_out[g] = e
            s_out[g] = battery
            x_out[g] = x
        used = 1 if x != 0 else 0
        if used == 1 and battery == 0:
            counters[1] += 1
        level = battery - used + e
        if level > 1:
            counters[0] += 1
            level = 1
        counters[2] += e - used
        battery = level
        if used == 1:
            t_out[k] = j + 1
            k += 1
            j = 0
        else:
            j += 1
        i += 1
    return k, battery, j, i


def drive(arrivals, symbols, N: int, signs=None, initial_battery: int = 0,
          record: bool = True) -> SimTrace:
    """Run the encoder against a fixed arrival sequence (for hand-checked traces).

    Stops when the symbols or the arrivals run out; symbols not sent get T = 0.
    """
    arrivals = np.asarray(arrivals, dtype=np.int64)
    symbols = np.asarray(symbols, dtype=np.int64)
    sg = np.ones(symbols.size, np.int64) if signs is None else np.asarray(signs, np.int64)
    n = arrivals.size
    t = np.zeros(symbols.size, np.int64)
    x = np.zeros(n, np.int64)
    s = np.zeros(n, np.int64)
    e = np.zeros(n, np.int64)
    counters = np.zeros(3, np.int64)
    k, _, _, used = _drive(arrivals, symbols, sg, N, 0, initial_battery, 0, t, x, s, e,
                           0, n if record else 0, counters)
    return _finish(0.0, N, e[:used], s[:used], x[:used], symbols[:k], t[:k],
                   None if signs is None else sg[:k], counters, used)


def _simulate(q, N, symbols, signs, seed_seq, cap=TRACE_CAP):
    arrival_rng = np.random.default_rng(seed_seq)
    m = symbols.size
    sg = np.ones(m, np.int64) if signs is None else signs
    t = np.zeros(m, np.int64)
    cap_guess = min(cap, BLOCK)
    e = np.zeros(cap_guess, np.int64)
    s = np.zeros(cap_guess, np.int64)
    x = np.zeros(cap_guess, np.int64)
    counters = np.zeros(3, np.int64)
    battery = int(arrival_rng.random() < q)  # harvest after the implicit previous send
    k, j, slot = 0, 0, 0
    while k < m:
        block = (arrival_rng.random(BLOCK) < q).astype(np.int64)
        need = min(slot + BLOCK, cap)
        if need > e.size:
            size = min(max(need, 2 * e.size), cap)
            e, s, x = (np.concatenate([a, np.zeros(size - a.size, np.int64)]) for a in (e, s, x))
        k, battery, j, used = _drive(block, symbols, sg, N, k, battery, j, t, x, s, e,
                                     slot, min(cap, e.size), counters)
        slot += used
    kept = min(slot, cap)
    return _finish(q, N, e[:kept], s[:kept], x[:kept], symbols, t, signs, counters, slot)


def _finish(q, N, e, s, x, symbols, t, signs, counters, slots):
    y = x.copy()  # noiseless
    decoded = (t - 1) % N
    tr = SimTrace(q=q, N=N, arrivals=e, battery=s, inputs=x, outputs=y, symbols=symbols,
                  symbol_times=t, decoded=decoded)
    if signs is not None:
        tr.signs = np.asarray(signs)
        nz = y[y != 0]
        tr.decoded_signs = nz[:t.size]
    tr.stats = {
        "slots": int(slots),
        "symbols": int(t.size),
        "mean_T": float(t.mean()) if t.size else float("nan"),
        "wasted_arrivals": int(counters[0]),
        "energy_violations": int(counters[1]),
        "residue_errors": int(np.count_nonzero(decoded != symbols % N)),
        "trace_truncated": bool(slots > e.size),
    }
    return tr


def _sample_symbols(p_u: Pmf, m: int, rng) -> np.ndarray:
    cdf = np.cumsum(p_u.mass)
    idx = np.searchsorted(cdf, rng.random(m), side="right")
    return np.minimum(idx, p_u.mass.size - 1).astype(np.int64) + p_u.offset


def _streams(seed):
    sym, arr, sign = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(sym), arr, np.random.default_rng(sign)


def run_modulo(q: float, N: int, p_u: Pmf, m: int, seed: int = 0) -> SimTrace:
    """Modulo code: decode (T - 1) mod N, which must always return U."""
    if p_u.offset < 0 or p_u.support_max >= N:
        raise ValueError("modulo code needs p_u on {0..N-1}")
    sym_rng, arr, _ = _streams(seed)
    tr = _simulate(q, N, _sample_symbols(p_u, m, sym_rng), None, arr)
    tr.stats["decode_errors"] = int(np.count_nonzero(tr.decoded != tr.symbols))
    _attach_analytic(tr, StrategyMap.modulo(N), p_u)
    return tr


def run_extended(q: float, N: int, p_u: Pmf, m: int, seed: int = 0) -> SimTrace:
    """Extended code. W1 = U mod N is read exactly off (T-1) mod N; floor((T-1)/N)
    estimates W2 = floor(U/N), which is only exact when the wait is short."""
    if p_u.offset < 0:
        raise ValueError("p_u must live on nonnegative integers")
    sym_rng, arr, _ = _streams(seed)
    tr = _simulate(q, N, _sample_symbols(p_u, m, sym_rng), None, arr)
    t = tr.symbol_times
    tr.stats["w2_estimates"] = (t - 1) // N
    # (T - 1) mod N = U mod N on both branches; only the quotient is noisy
    tr.stats["decode_errors"] = tr.stats["residue_errors"]
    tr.stats["w2_errors"] = int(np.count_nonzero((t - 1) // N != tr.symbols // N))
    _attach_analytic(tr, StrategyMap.extended(N), p_u)
    return tr


def run_ternary(q: float, N: int, p_u: Pmf, m: int, seed: int = 0, sign_bits=None,
                scheme: str = "modulo") -> SimTrace:
    """Ternary channel: each sent symbol also carries a sign, read off the output."""
    sym_rng, arr, sign_rng = _streams(seed)
    symbols = _sample_symbols(p_u, m, sym_rng)
    if sign_bits is None:
        signs = sign_rng.integers(0, 2, m) * 2 - 1
    else:
        signs = np.resize(np.asarray(sign_bits, dtype=np.int64), m)
        if np.any(np.abs(signs) != 1):
            raise ValueError("sign bits must be +1 or -1")
    if scheme == "modulo" and p_u.support_max >= N:
        raise ValueError("modulo code needs p_u on {0..N-1}")
    tr = _simulate(q, N, symbols, signs.astype(np.int64), arr)
    tr.stats["sign_errors"] = int(np.count_nonzero(tr.decoded_signs != tr.signs))
    tr.stats["decode_errors"] = int(np.count_nonzero(tr.decoded != tr.symbols)) \
        if scheme == "modulo" else tr.stats["residue_errors"]
    kind = StrategyMap.modulo(N) if scheme == "modulo" else StrategyMap.extended(N)
    _attach_analytic(tr, kind, p_u)
    tr.stats["empirical_rate"] = (entropy_of(p_u.mass) + 1) * m / float(tr.symbol_times.sum())
    return tr


def _attach_analytic(tr: SimTrace, m: StrategyMap, p_u: Pmf):
    u_max = p_u.support_max if m.kind == "extended" else m.N - 1
    ch = build_channel(m, tr.q, max(u_max, 0)) if tr.q > 0 else None
    if ch is None:
        return
    pu = p_u.padded(0, ch.u_max)
    tr.stats["analytic_mean_T"] = float(pu @ ch.cost)
    t = np.minimum(tr.symbol_times, ch.t_max)
    p_t = pu @ ch.cond
    cond = ch.cond[tr.symbols, t - 1]
    tr.stats["llr"] = np.log2(cond) - np.log2(p_t[t - 1])
    tr.stats["empirical_rate"] = entropy_of(p_u.mass) * tr.symbol_times.size / float(tr.symbol_times.sum())


def plugin_mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """Plug-in I(A;B) in bits from paired samples."""
    pairs, counts = np.unique(np.stack([a, b]), axis=1, return_counts=True)
    joint = counts / counts.sum()
    _, ca = np.unique(a, return_counts=True)
    _, cb = np.unique(b, return_counts=True)
    return entropy_of(ca / ca.sum()) + entropy_of(cb / cb.sum()) - entropy_of(joint)


def idle_times(tr: SimTrace) -> np.ndarray:
    """Z_k: uses spent waiting for energy after each send (first symbol: from slot 0)."""
    sends = np.flatnonzero(tr.inputs != 0)
    starts = np.concatenate([[0], sends + 1])
    charged = np.flatnonzero(tr.battery == 1)
    out = []
    for st in starts[:sends.size]:
        i = np.searchsorted(charged, st)
        out.append(charged[i] - st)
    return np.array(out, dtype=np.int64)


def write_trace(tr: SimTrace, path) -> None:
    """Columnar dump, one row per channel use: index E S X Y."""
    n = tr.arrivals.size
    cols = np.column_stack([np.arange(n), tr.arrivals, tr.battery, tr.inputs, tr.outputs])
    np.savetxt(path, cols, fmt="%d", header="index E S X Y", comments="")
