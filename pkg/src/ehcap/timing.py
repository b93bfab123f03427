"""Timing-channel view of the unit-battery channel.

After each transmitted 1 the encoder idles Z ~ Geometric(q) uses waiting for energy,
then waits V = v(U, Z) >= 1 more uses. The decoder sees T = V + Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ehcap.prob import DEFAULT_TAIL, Pmf, entropy_of, geometric_support


@dataclass(frozen=True)
class StrategyMap:
    kind: str  # "modulo" or "extended"
    N: int

    def __post_init__(self):
        if self.kind not in ("modulo", "extended"):
            raise ValueError(f"unknown strategy map {self.kind!r}")
        if self.N < 1:
            raise ValueError("frame length N must be >= 1")

    @classmethod
    def modulo(cls, N: int) -> "StrategyMap":
        return cls("modulo", N)

    @classmethod
    def extended(cls, N: int) -> "StrategyMap":
        return cls("extended", N)


def apply_map(m: StrategyMap, u: int, z: int) -> int:
    """Channel input v(u, z) in {1, 2, ...}."""
    if u < 0 or z < 0:
        raise ValueError("u and z must be nonnegative")
    if m.kind == "modulo":
        if u >= m.N:
            raise ValueError(f"modulo map needs u < N={m.N}, got u={u}")
        return (u - z) % m.N + 1
    if u >= z:
        return u - z + 1
    return (u - z) % m.N + 1


def decode_modulo(t: int, N: int) -> int:
    return (t - 1) % N


def modulo_residue_pmf(q: float, N: int) -> np.ndarray:
    """Law of Z mod N for Z ~ Geometric(q)."""
    if q == 1.0:
        out = np.zeros(N)
        out[0] = 1.0
        return out
    r = np.arange(N)
    w = q * (1 - q) ** r
    return w / w.sum()


def modulo_costs(q: float, N: int) -> np.ndarray:
    """Exact c(u) = 1 + E[(u - Z) mod N] + E[Z] for u = 0..N-1."""
    pi = modulo_residue_pmf(q, N)
    u = np.arange(N)
    wait = (u[:, None] - u[None, :]) % N
    return 1.0 + wait @ pi + (1 - q) / q


@dataclass(frozen=True)
class TimingChannel:
    """Conditional law p(t|u) on t = 1..t_max (column j holds t = j+1)."""

    map: StrategyMap
    q: float
    u_max: int
    t_max: int
    cond: np.ndarray
    cost: np.ndarray
    tail: float
    cost_error: float

    def output_pmf(self, p_u: np.ndarray) -> np.ndarray:
        return p_u @ self.cond


def default_t_max(m: StrategyMap, q: float, u_max: int, tol: float = DEFAULT_TAIL) -> int:
    if q >= 1.0:
        return u_max + m.N + 1
    return u_max + int(math.ceil(math.log(tol) / math.log1p(-q))) + m.N


def build_channel(m: StrategyMap, q: float, u_max: int, t_max: int | None = None,
                  tol: float = 1e-9) -> TimingChannel:
    """Tabulate p(t|u) = sum over z with v(u,z)+z = t of q(1-q)^z.

    Mass beyond ``t_max`` is folded into the last column; the exact per-row cost
    is kept, and the cost shift induced by folding is reported as ``cost_error``.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q!r}")
    if m.kind == "modulo" and u_max >= m.N:
        raise ValueError("modulo channel needs u_max < N")
    if t_max is None:
        t_max = default_t_max(m, q, u_max)
    z_max = t_max  # T > Z, so z >= t_max only lands beyond the table
    z = np.arange(z_max)
    pz = q * (1 - q) ** z if q < 1 else (z == 0).astype(float)
    z_tail = 0.0 if q == 1 else (1 - q) ** z_max

    cond = np.zeros((u_max + 1, t_max))
    cost = np.zeros(u_max + 1)
    tails = np.zeros(u_max + 1)
    for u in range(u_max + 1):
        v = (u - z) % m.N + 1
        if m.kind == "extended":
            v = np.where(u >= z, u - z + 1, v)
        t = v + z
        inside = t <= t_max
        np.add.at(cond[u], t[inside] - 1, pz[inside])
        tails[u] = pz[~inside].sum() + z_tail
        # beyond z_max every branch has v <= max(u+1, N)
        cost[u] = np.dot(t, pz) + _cost_tail(m, q, u, z_max)
    worst = tails.max()
    if worst > tol:
        raise ValueError(f"t_max={t_max} leaves tail mass {worst:.3g}; increase t_max")
    folded_cost = cond @ np.arange(1, t_max + 1) + tails * t_max
    cond[:, -1] += tails
    cond /= cond.sum(axis=1, keepdims=True)
    cond.setflags(write=False)
    cost.setflags(write=False)
    return TimingChannel(m, q, u_max, t_max, cond, cost, float(worst),
                         float(np.max(np.abs(cost - folded_cost))))


def _cost_tail(m: StrategyMap, q: float, u: int, z0: int) -> float:
    """E[T; Z >= z0] for Z ~ Geometric(q), exact for both maps when z0 > u."""
    if q >= 1.0:
        return 0.0
    a = (1 - q) ** z0
    if a == 0.0:
        return 0.0
    # E[Z; Z >= z0] = a (z0 + (1-q)/q); v depends on Z only via Z mod N
    ez = a * (z0 + (1 - q) / q)
    if m.kind == "extended" and u >= z0:
        raise ValueError("z_max must exceed u_max")
    pi = modulo_residue_pmf(q, m.N)
    shift = z0 % m.N
    r = (np.arange(m.N) + shift) % m.N
    ev = np.dot(pi, (u - r) % m.N + 1)
    return ez + a * ev


def mutual_information(p_u, ch: TimingChannel) -> float:
    """I(U;T) = H(T) - sum_u p(u) H(T | U=u), in bits."""
    p = _as_vector(p_u, ch.u_max)
    pt = p @ ch.cond
    row_h = np.array([entropy_of(r) for r in ch.cond])
    return max(entropy_of(pt) - float(np.dot(p, row_h)), 0.0)


def expected_duration(p_u, ch: TimingChannel) -> float:
    return float(np.dot(_as_vector(p_u, ch.u_max), ch.cost))


def _as_vector(p_u, u_max: int) -> np.ndarray:
    if isinstance(p_u, Pmf):
        if p_u.offset < 0 or p_u.support_max > u_max:
            raise ValueError("p_u support must lie in {0..u_max}")
        return p_u.padded(0, u_max)
    p = np.asarray(p_u, dtype=float)
    if p.size != u_max + 1:
        raise ValueError("p_u length must be u_max + 1")
    return p
