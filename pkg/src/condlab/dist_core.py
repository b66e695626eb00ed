"""Structured distributions over [n] with exact rational masses.

A StructuredDistribution keeps its support as an ordered array of element
ids.  Contiguous position ranges of that array form layers, and every
element of a layer carries the same mass.  Nothing here iterates over [n].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .rng import RandomSource

DENSE_INDEX_LIMIT = 1 << 22
URN_DRAW_LIMIT = 10**6


def as_elements(a) -> np.ndarray:
    """Normalize an element collection to a sorted unique int64 array."""
    if isinstance(a, np.ndarray) and a.dtype == np.int64:
        arr = a
    else:
        arr = np.asarray(list(a) if isinstance(a, (set, frozenset)) else a, dtype=np.int64)
    arr = arr.reshape(-1)
    if arr.size > 1 and not np.all(arr[1:] > arr[:-1]):
        arr = np.unique(arr)
    return arr


@dataclass(frozen=True)
class SupportRange:
    """Compressed set: support positions [start, stop) of some distribution."""

    start: int
    stop: int

    def __len__(self):
        return max(0, self.stop - self.start)


class SupportIndex:
    """Element id -> support position lookup, shared by sibling distributions."""

    def __init__(self, n: int, support: np.ndarray):
        self.n = n
        self.support = support
        if n <= DENSE_INDEX_LIMIT:
            self._table = np.full(n, -1, dtype=np.int64)
            self._table[support] = np.arange(support.size, dtype=np.int64)
            self._sorted = None
        else:
            self._table = None
            order = np.argsort(support, kind="stable")
            self._sorted = support[order]
            self._order = order

    def positions(self, elems: np.ndarray) -> np.ndarray:
        """Support position of each element, -1 when outside the support."""
        elems = np.asarray(elems, dtype=np.int64)
        if self._table is not None:
            return self._table[elems]
        if self._sorted.size == 0:
            return np.full(elems.shape, -1, dtype=np.int64)
        idx = np.minimum(np.searchsorted(self._sorted, elems), self._sorted.size - 1)
        return np.where(self._sorted[idx] == elems, self._order[idx], -1)


class StructuredDistribution:
    """Distribution over [n] built from equal-mass layers of an ordered support."""

    def __init__(self, n: int, support: np.ndarray, bounds: Sequence[int],
                 masses: Sequence[Fraction], kind: str, index: SupportIndex | None = None):
        support = np.asarray(support, dtype=np.int64)
        if len(bounds) != len(masses) + 1 or bounds[0] != 0 or bounds[-1] != support.size:
            raise ValueError("layer bounds must tile the support")
        if any(bounds[i] > bounds[i + 1] for i in range(len(masses))):
            raise ValueError("layer bounds must be non-decreasing")
        self.n = int(n)
        self.support = support
        self.bounds = tuple(int(b) for b in bounds)
        self.masses = tuple(Fraction(x) for x in masses)
        self.kind = kind
        if any(x < 0 for x in self.masses):
            raise ValueError("negative mass")
        if self.total_mass() != 1:
            raise ValueError("masses do not sum to 1")
        self.index = index if index is not None else SupportIndex(self.n, support)
        self.denom = math.lcm(*(x.denominator for x in self.masses)) if self.masses else 1
        self.int_masses = tuple(int(x * self.denom) for x in self.masses)
        self._bounds_arr = np.asarray(self.bounds, dtype=np.int64)
        self._layer_table = None

    @property
    def m(self) -> int:
        return int(self.support.size)

    @property
    def n_layers(self) -> int:
        return len(self.masses)

    def layer_sizes(self) -> list[int]:
        return [self.bounds[i + 1] - self.bounds[i] for i in range(self.n_layers)]

    def total_mass(self) -> Fraction:
        return sum((x * (self.bounds[i + 1] - self.bounds[i]) for i, x in enumerate(self.masses)),
                   Fraction(0))

    def check_range(self, elems: np.ndarray):
        if elems.size and (elems.min() < 0 or elems.max() >= self.n):
            raise ValueError(f"element outside [0, {self.n})")

    def layer_of_positions(self, pos: np.ndarray) -> np.ndarray:
        lay = np.searchsorted(self._bounds_arr, pos, side="right") - 1
        return np.where(pos < 0, -1, lay)

    def layers_of(self, elems) -> np.ndarray:
        """Layer index per element, -1 outside the support."""
        elems = np.asarray(elems, dtype=np.int64)
        self.check_range(elems)
        if self.n <= DENSE_INDEX_LIMIT:
            if self._layer_table is None:
                table = np.full(self.n, -1, dtype=np.int32)
                for i in range(self.n_layers):
                    table[self.support[self.bounds[i]:self.bounds[i + 1]]] = i
                self._layer_table = table
            return self._layer_table[elems]
        return self.layer_of_positions(self.index.positions(elems))

    def layer_counts(self, elems) -> np.ndarray:
        lay = self.layers_of(elems)
        return np.bincount(lay[lay >= 0], minlength=self.n_layers)

    def mass_of_counts(self, counts) -> Fraction:
        return Fraction(self.int_weight_of_counts(counts), self.denom)

    def int_weight_of_counts(self, counts) -> int:
        return sum(int(c) * w for c, w in zip(counts, self.int_masses))

    def element_mass(self, x: int) -> Fraction:
        x = int(x)
        if not 0 <= x < self.n:
            raise ValueError(f"element {x} outside [0, {self.n})")
        lay = int(self.layers_of(np.array([x]))[0])
        return self.masses[lay] if lay >= 0 else Fraction(0)

    def set_mass(self, a) -> Fraction:
        if isinstance(a, SupportRange):
            return self._range_mass(a.start, a.stop)
        elems = as_elements(a)
        if elems.size == 0:
            return Fraction(0)
        return self.mass_of_counts(self.layer_counts(elems))

    def _range_mass(self, start: int, stop: int) -> Fraction:
        total = Fraction(0)
        for i, x in enumerate(self.masses):
            lo, hi = max(start, self.bounds[i]), min(stop, self.bounds[i + 1])
            if hi > lo:
                total += x * (hi - lo)
        return total

    def elements(self, r: SupportRange) -> np.ndarray:
        return np.sort(self.support[r.start:r.stop])

    def law(self) -> dict[int, Fraction]:
        """Element -> mass over the support (small distributions only)."""
        out = {}
        for i, x in enumerate(self.masses):
            for e in self.support[self.bounds[i]:self.bounds[i + 1]]:
                out[int(e)] = x
        return out


def from_masses(n: int, masses: dict[int, Fraction], kind: str = "explicit") -> StructuredDistribution:
    """Build a distribution from an element -> mass map (zero masses dropped)."""
    items = sorted(((Fraction(v), int(k)) for k, v in masses.items() if v != 0))
    support, bounds, layer_masses = [], [0], []
    for v, k in items:
        if layer_masses and layer_masses[-1] == v:
            bounds[-1] += 1
        else:
            layer_masses.append(v)
            bounds.append(bounds[-1] + 1)
        support.append(k)
    return StructuredDistribution(n, np.array(support, dtype=np.int64), bounds, layer_masses, kind)


def flat_uniform(n: int, support) -> StructuredDistribution:
    support = np.asarray(support, dtype=np.int64)
    return StructuredDistribution(n, support, [0, support.size], [Fraction(1, support.size)],
                                  "flat-uniform")


def element_mass(d: StructuredDistribution, x: int) -> Fraction:
    return d.element_mass(x)


def set_mass(d: StructuredDistribution, a) -> Fraction:
    return d.set_mass(a)


def tv_exact(d1: StructuredDistribution, d2: StructuredDistribution) -> Fraction:
    """Exact total variation from (layer of d1, layer of d2) intersection counts."""
    if d1.n != d2.n:
        raise ValueError("distributions live on different domains")
    l1, l2 = d1.n_layers, d2.n_layers
    pos_in_1 = d1.index.positions(d2.support)
    lay1 = d1.layer_of_positions(pos_in_1)
    lay2 = d2.layer_of_positions(np.arange(d2.m, dtype=np.int64))
    common = lay1 >= 0
    joint = np.bincount(lay1[common] * l2 + lay2[common], minlength=l1 * l2).reshape(l1, l2)
    only1 = np.asarray(d1.layer_sizes()) - joint.sum(axis=1)
    only2 = np.asarray(d2.layer_sizes()) - joint.sum(axis=0)
    denom = math.lcm(d1.denom, d2.denom)
    w1 = [int(x * denom) for x in d1.masses]
    w2 = [int(x * denom) for x in d2.masses]
    l1_norm = 0
    for a in range(l1):
        l1_norm += int(only1[a]) * w1[a]
        for b in range(l2):
            c = int(joint[a, b])
            if c:
                l1_norm += c * abs(w1[a] - w2[b])
    for b in range(l2):
        l1_norm += int(only2[b]) * w2[b]
    return Fraction(l1_norm, 2 * denom)


def cond_sample(d: StructuredDistribution, a, rng: RandomSource) -> int:
    """Draw from d conditioned on a; uniform over a when d(a) = 0."""
    elems = as_elements(a)
    if elems.size == 0:
        raise ValueError("empty conditioning set")
    lay = d.layers_of(elems)
    counts = np.bincount(lay[lay >= 0], minlength=d.n_layers)
    weights = [int(c) * w for c, w in zip(counts, d.int_masses)]
    if sum(weights) == 0:
        return int(elems[rng.randbelow(elems.size)])
    layer = rng.weighted_index(weights)
    members = elems[lay == layer]
    return int(members[rng.randbelow(members.size)])


def cond_law(d: StructuredDistribution, a) -> dict[int, Fraction]:
    """Exact law of cond_sample(d, a)."""
    elems = as_elements(a)
    if elems.size == 0:
        raise ValueError("empty conditioning set")
    masses = {int(e): d.element_mass(int(e)) for e in elems}
    total = sum(masses.values(), Fraction(0))
    if total == 0:
        return {e: Fraction(1, elems.size) for e in masses}
    return {e: x / total for e, x in masses.items()}


@dataclass(frozen=True)
class HypergeomParams:
    draws: int
    successes: int
    population: int

    def __post_init__(self):
        if not (0 <= self.successes <= self.population and 0 <= self.draws <= self.population):
            raise ValueError("need 0 <= K <= N and 0 <= draws <= N")

    @property
    def mean(self) -> Fraction:
        return Fraction(self.draws * self.successes, self.population) if self.population else Fraction(0)

    @property
    def support_range(self) -> range:
        lo = max(0, self.draws + self.successes - self.population)
        return range(lo, min(self.draws, self.successes) + 1)


def hypergeometric_sample(p: HypergeomParams, rng: RandomSource, size: int | None = None):
    """Exact urn simulation; vectorized across ``size`` independent urns."""
    if p.draws > URN_DRAW_LIMIT:
        raise ValueError(f"urn simulation limited to {URN_DRAW_LIMIT} draws")
    shape = 1 if size is None else size
    k_left = np.full(shape, p.successes, dtype=np.int64)
    hits = np.zeros(shape, dtype=np.int64)
    remaining = p.population
    for _ in range(p.draws):
        # every urn has the same number of balls left at each step
        u = rng.integers(0, remaining, size=shape)
        got = u < k_left
        hits += got
        k_left -= got
        remaining -= 1
    return int(hits[0]) if size is None else hits


def hypergeometric_pmf(k: int, p: HypergeomParams) -> Fraction:
    """Exact pmf using the ratio pmf(j+1)/pmf(j) walked up from the lowest value."""
    rng_k = p.support_range
    if k not in rng_k:
        return Fraction(0)
    n, big_k, big_n = p.draws, p.successes, p.population
    j = rng_k.start
    val = Fraction(math.comb(big_k, j) * math.comb(big_n - big_k, n - j), math.comb(big_n, n))
    while j < k:
        val *= Fraction((big_k - j) * (n - j), (j + 1) * (big_n - big_k - n + j + 1))
        j += 1
    return val


def chernoff_bound(mu: float, lam: float) -> float:
    """Two-sided tail bound 2 exp(-lam^2 mu / 3), valid for 0 <= lam <= 1."""
    return 2.0 * math.exp(-lam * lam * mu / 3.0)
