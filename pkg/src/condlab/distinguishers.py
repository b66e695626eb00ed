"""Known-support distinguisher and its pair-probe primitive.

Given the support size s, draw S by keeping each element of [n] with
probability c/s, collect support members of S by conditioning on S
repeatedly, then condition D2 on pairs of found members.  Under a YES
instance same-bucket pairs are fair coins; under NO, a heavy/light pair
lands 3:1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .dist_core import StructuredDistribution
from .instances import InstancePair
from .rng import RandomSource
from .testers import ACCEPT, REJECT


@dataclass(frozen=True)
class DistinguisherConfig:
    c: float = 8
    probe_trials: int = 200
    decision_threshold: float = 0.65
    draws_per_c: int = 20
    max_found: int | None = None
    band: tuple = (0.2, 0.8)

    def __post_init__(self):
        if self.c < 4:
            raise ValueError("c must be at least 4")
        if self.probe_trials < 1:
            raise ValueError("probe_trials must be positive")
        if not 0.5 < self.decision_threshold < 0.75:
            raise ValueError("decision_threshold must lie in (1/2, 3/4)")

    @property
    def draws(self) -> int:
        return int(self.draws_per_c * self.c)

    @property
    def found_cap(self) -> int:
        return int(2 * self.c) if self.max_found is None else self.max_found

    @property
    def query_cap(self) -> int:
        """Largest possible query count; depends on c only."""
        return self.draws + math.comb(self.found_cap, 2) * self.probe_trials


def _draw_weighted(d: StructuredDistribution, elems: np.ndarray, size: int, rng: RandomSource) -> np.ndarray:
    """``size`` independent conditional samples of d on elems (exact integer weights)."""
    lay = d.layers_of(elems)
    w = np.where(lay >= 0, np.asarray(d.int_masses + (0,), dtype=object)[lay], 0)
    total = int(sum(w))
    if total == 0:
        return elems[rng.integers(0, elems.size, size=size)]
    if total >= 1 << 62:
        picks = [rng.weighted_index([int(x) for x in w]) for _ in range(size)]
        return elems[np.asarray(picks, dtype=np.int64)]
    cum = np.cumsum(w.astype(np.int64))
    r = rng.integers(0, total, size=size)
    return elems[np.searchsorted(cum, r, side="right")]


def pair_probe(pair: InstancePair, s: int, s2: int, trials: int, rng: RandomSource) -> float:
    """Fraction of COND_{D2}({s, s2}) answers equal to s."""
    if s == s2:
        raise ValueError("pair probe needs two distinct elements")
    elems = np.array([s, s2], dtype=np.int64)
    got = _draw_weighted(pair.d2, elems, trials, rng)
    return float(np.mean(got == s))


def draw_probe_set(n: int, s: int, c: float, rng: RandomSource) -> np.ndarray:
    """Each element of [n] kept independently with probability c/s.

    Drawn as a Binomial(n, c/s) size followed by a uniform subset of that size.
    """
    if s <= 0:
        raise ValueError("support size must be positive")
    size = int(rng.gen.binomial(n, min(1.0, c / s)))
    return np.sort(rng.subset(n, size).astype(np.int64))


@dataclass
class DistinguishResult:
    verdict: str
    queries: int
    probe_set_size: int
    found: int
    pairs_used: int
    fractions: list


def known_support_distinguish(pair: InstancePair, s: int, cfg: DistinguisherConfig,
                              rng: RandomSource) -> DistinguishResult:
    big_s = draw_probe_set(pair.n, s, cfg.c, rng)
    if big_s.size == 0:
        return DistinguishResult(ACCEPT, 0, 0, 0, 0, [])
    draws = _draw_weighted(pair.d2, big_s, cfg.draws, rng)
    _, first = np.unique(draws, return_index=True)
    found = draws[np.sort(first)][:cfg.found_cap].tolist()
    queries = cfg.draws
    fractions = []
    verdict = ACCEPT
    lo, hi = cfg.band
    for a, b in combinations(found, 2):
        f = pair_probe(pair, a, b, cfg.probe_trials, rng)
        queries += cfg.probe_trials
        fractions.append(f)
        # only near-balanced pairs are treated as same-bucket candidates
        if lo <= f <= hi and (f > cfg.decision_threshold or f < 1 - cfg.decision_threshold):
            verdict = REJECT
    used = sum(1 for f in fractions if lo <= f <= hi)
    return DistinguishResult(verdict, queries, int(big_s.size), len(found), used, fractions)
