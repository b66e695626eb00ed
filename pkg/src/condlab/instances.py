"""Hard-instance generators: bucketed YES/NO pairs and uniblock distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dist_core import StructuredDistribution, SupportIndex, SupportRange, flat_uniform
from .rng import RandomSource

YES, NO = "YES", "NO"
EVEN, ODD = "even", "odd"

DEGENERATE = "paper-mode parameters degenerate; use lab mode"


def log2_exact(n: int):
    """log2(n) as an int for powers of two, otherwise a float."""
    if n > 0 and n & (n - 1) == 0:
        return n.bit_length() - 1
    return math.log2(n)


def sqrt_floor(x) -> int:
    return math.isqrt(x) if isinstance(x, int) else math.floor(math.sqrt(x))


def sqrt_ceil(x) -> int:
    if isinstance(x, int):
        r = math.isqrt(x)
        return r if r * r == x else r + 1
    return math.ceil(math.sqrt(x))


@dataclass(frozen=True)
class EquivParams:
    n: int
    kappa: int
    rho: int
    tau: int
    mode: str = "lab"

    def __post_init__(self):
        if self.n < 2 or self.kappa < 0 or self.rho < 2 or self.tau < 1:
            raise ValueError("need n >= 2, kappa >= 0, rho >= 2, tau >= 1")
        if self.m > self.n:
            raise ValueError(f"support size m={self.m} exceeds n={self.n}")
        if any(s % 2 for s in self.bucket_sizes):
            raise ValueError("every bucket size b*rho^j must be even")

    @property
    def b(self) -> int:
        return 1 << self.kappa

    @property
    def bucket_sizes(self) -> tuple[int, ...]:
        return tuple(self.b * self.rho**j for j in range(1, self.tau + 1))

    @property
    def m(self) -> int:
        return sum(self.bucket_sizes)

    def with_kappa(self, kappa: int) -> "EquivParams":
        return EquivParams(self.n, kappa, self.rho, self.tau, self.mode)

    @classmethod
    def lab(cls, n: int, kappa: int | None = None, rho: int = 8, tau: int = 4,
            b: int | None = None) -> "EquivParams":
        if b is not None:
            if b <= 0 or b & (b - 1):
                raise ValueError("b must be a power of two")
            kappa = b.bit_length() - 1
        if kappa is None:
            raise ValueError("lab mode needs kappa or b")
        return cls(n, kappa, rho, tau, "lab")


def paper_shape(n: int) -> tuple[int, int, int]:
    """(rho, tau, largest admissible kappa) for paper mode."""
    lg = log2_exact(n)
    if lg < 1:
        raise ValueError(DEGENERATE)
    rho = 1 << sqrt_ceil(lg)
    tau = sqrt_floor(lg) // 4
    if tau < 1:
        raise ValueError(DEGENERATE)
    per_b = sum(rho**j for j in range(1, tau + 1))
    kmax = -1
    for kappa in range(0, math.floor(lg / 2) + 1):
        if (per_b << kappa) > n:
            break
        kmax = kappa
    if kmax < 0:
        raise ValueError(DEGENERATE)
    return rho, tau, kmax


def derive_paper_params(n: int, rng: RandomSource) -> EquivParams:
    rho, tau, kmax = paper_shape(n)
    kappa = rng.randbelow(kmax + 1)
    return EquivParams(n, kappa, rho, tau, "paper")


@dataclass
class InstancePair:
    d1: StructuredDistribution
    d2: StructuredDistribution
    label: str
    params: EquivParams
    epsilon: Fraction
    # hidden layout, in support positions
    buckets: list[SupportRange] = field(default_factory=list)
    heavy: list[SupportRange] = field(default_factory=list)
    light: list[SupportRange] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def support(self) -> np.ndarray:
        return self.d1.support

    def dist(self, k: int) -> StructuredDistribution:
        if k == 1:
            return self.d1
        if k == 2:
            return self.d2
        raise ValueError("k must be 1 or 2")

    def bucket_of(self, elems) -> np.ndarray:
        """1-based bucket index per element, 0 outside the support."""
        pos = self.d1.index.positions(np.asarray(elems, dtype=np.int64))
        starts = np.asarray([r.start for r in self.buckets] + [self.params.m], dtype=np.int64)
        j = np.searchsorted(starts, pos, side="right")
        return np.where(pos < 0, 0, j)


def sample_support(n: int, m: int, rng: RandomSource) -> np.ndarray:
    """m distinct elements of [n] in uniformly random order."""
    return rng.subset(n, m).astype(np.int64)


def gen_equivalence(params: EquivParams, label: str, rng: RandomSource) -> InstancePair:
    if label not in (YES, NO):
        raise ValueError("label must be YES or NO")
    p = params
    support = sample_support(p.n, p.m, rng)
    index = SupportIndex(p.n, support)
    # the support comes back in random order, so contiguous slices are a
    # uniformly random partition and halves of a slice a random halving
    buckets, heavy, light = [], [], []
    bounds1, masses1, bounds2, masses2 = [0], [], [0], []
    start = 0
    for j, size in enumerate(p.bucket_sizes, start=1):
        stop, mid = start + size, start + size // 2
        buckets.append(SupportRange(start, stop))
        heavy.append(SupportRange(start, mid))
        light.append(SupportRange(mid, stop))
        unit = Fraction(1, p.tau * size)
        bounds1.append(stop)
        masses1.append(unit)
        bounds2 += [mid, stop]
        masses2 += [3 * unit / 2, unit / 2]
        start = stop
    d1 = StructuredDistribution(p.n, support, bounds1, masses1, "bucket-uniform", index)
    if label == YES:
        d2, eps = d1, Fraction(0)
    else:
        d2 = StructuredDistribution(p.n, support, bounds2, masses2, "bucket-split", index)
        eps = Fraction(1, 4)
    return InstancePair(d1, d2, label, p, eps, buckets, heavy, light)


@dataclass
class UniblockInstance:
    dist: StructuredDistribution
    kappa: int
    parity: str

    @property
    def support_size(self) -> int:
        return self.dist.m


def uniblock_kappa_range(n: int) -> range:
    lg = log2_exact(n)
    lo = math.ceil(lg / 8)
    hi = math.floor(3 * lg / 8)
    while hi >= lo and (1 << (2 * hi + 1)) > n:
        hi -= 1
    return range(lo, hi + 1)


def uniblock_size(kappa: int, parity: str) -> int:
    if parity not in (EVEN, ODD):
        raise ValueError("parity must be even or odd")
    return 1 << (2 * kappa + (parity == ODD))


def gen_uniblock(n: int, parity: str, rng: RandomSource, kappa: int | None = None) -> UniblockInstance:
    if kappa is None:
        ks = uniblock_kappa_range(n)
        if len(ks) == 0:
            raise ValueError(f"no admissible kappa for n={n}")
        kappa = ks[rng.randbelow(len(ks))]
    size = uniblock_size(kappa, parity)
    if size > n:
        raise ValueError(f"support size {size} exceeds n={n}")
    return UniblockInstance(flat_uniform(n, sample_support(n, size, rng)), kappa, parity)


def gen_uniblock_pair(n: int, rng: RandomSource, kappa: int | None = None):
    """Even and odd instances sharing kappa, with independent supports."""
    even = gen_uniblock(n, EVEN, rng, kappa)
    odd = gen_uniblock(n, ODD, rng, even.kappa)
    return even, odd
