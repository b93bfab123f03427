"""Probability primitives on integer supports.

All entropies are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TAIL = 1e-12


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on the contiguous support ``offset, offset+1, ...``.

    The mass vector is validated and renormalized on construction. ``tail`` records
    how much probability was discarded by truncation (zero for exact pmfs).
    """

    offset: int
    mass: np.ndarray
    tail: float = 0.0
    support_max: int = field(init=False)

    def __post_init__(self):
        m = np.array(self.mass, dtype=float).ravel()
        if m.size == 0:
            raise ValueError("empty support")
        if not np.all(np.isfinite(m)):
            raise ValueError("non-finite mass")
        if np.any(m < 0):
            raise ValueError("negative mass")
        total = m.sum()
        if total <= 0:
            raise ValueError("mass sums to zero")
        if abs(total - 1.0) > 1e-6 and self.tail == 0.0:
            raise ValueError(f"mass sums to {total!r}, not 1")
        m = m / total
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "support_max", int(self.offset) + m.size - 1)

    @classmethod
    def point(cls, x: int) -> "Pmf":
        return cls(x, np.ones(1))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "Pmf":
        """Uniform on {lo, ..., hi}."""
        return cls(lo, np.full(hi - lo + 1, 1.0 / (hi - lo + 1)))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.mass.size)

    def __len__(self):
        return self.mass.size

    def __getitem__(self, x: int) -> float:
        i = x - self.offset
        if 0 <= i < self.mass.size:
            return float(self.mass[i])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(self.support, self.mass))

    def expect(self, f) -> float:
        return float(np.dot(f(self.support), self.mass))

    def padded(self, lo: int, hi: int) -> np.ndarray:
        """Mass vector on {lo..hi}, zero outside the support."""
        if lo > self.offset or hi < self.support_max:
            raise ValueError("padding range does not cover the support")
        out = np.zeros(hi - lo + 1)
        out[self.offset - lo:self.offset - lo + self.mass.size] = self.mass
        return out

    def mix(self, other: "Pmf", lam: float) -> "Pmf":
        lo = min(self.offset, other.offset)
        hi = max(self.support_max, other.support_max)
        return Pmf(lo, lam * self.padded(lo, hi) + (1 - lam) * other.padded(lo, hi))


def entropy_of(mass) -> float:
    """Entropy in bits of a nonnegative vector that sums to one."""
    m = np.asarray(mass, dtype=float)
    m = m[m > 0]
    return float(-np.dot(m, np.log2(m)))


def entropy(p: Pmf) -> float:
    return max(entropy_of(p.mass), 0.0)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binary_entropy needs p in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def geometric(q: float, max_support: int | None = None, tol: float = DEFAULT_TAIL) -> Pmf:
    """Geometric(q) on {0, 1, ...}: mass q(1-q)^z, truncated at ``max_support``.

    If ``max_support`` is omitted the smallest support with tail below ``tol`` is used.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"geometric needs q in (0, 1], got {q!r}")
    if q == 1.0:
        return Pmf.point(0)
    if max_support is None:
        max_support = geometric_support(q, tol)
    tail = (1 - q) ** (max_support + 1)
    if tail > tol:
        raise ValueError(
            f"truncation at {max_support} leaves tail mass {tail:.3g} > {tol:.3g}")
    z = np.arange(max_support + 1)
    return Pmf(0, q * (1 - q) ** z, tail=tail)


def geometric_support(q: float, tol: float = DEFAULT_TAIL) -> int:
    """Smallest z_max with P[Z > z_max] = (1-q)^(z_max+1) <= tol."""
    if q >= 1.0:
        return 0
    return max(int(math.ceil(math.log(tol) / math.log1p(-q))) - 1, 0)


def truncated_geometric(q: float, t: int) -> Pmf:
    """Geometric(q) conditioned on Z < t, i.e. supported on {0..t-1}."""
    z = np.arange(t)
    w = q * (1 - q) ** z
    return Pmf(0, w / w.sum())


def truncated_geom_gap(q: float, t: int) -> float:
    """H(Z) - H(Z_t): entropy lost by truncating Geometric(q) to {0..t-1}."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q!r}")
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t!r}")
    a = (1 - q) ** t
    if a == 0.0:
        return 0.0
    return binary_entropy(a) / (1 - a)


def truncated_geom_gaps(q: float, t_max: int) -> np.ndarray:
    """Vector of truncated_geom_gap(q, t) for t = 1..t_max."""
    t = np.arange(1, t_max + 1)
    a = (1 - q) ** t
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -a * np.log2(a) - (1 - a) * np.log2(1 - a)
    h = np.where((a > 0) & (a < 1), h, 0.0)
    return h / (1 - a)
