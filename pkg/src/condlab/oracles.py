"""COND and WCOND oracles over an instance pair, in the three-step form.

Step 1 picks an old element or the fresh set U with probability
proportional to D_k.  If U wins, an atom piece V of U is picked (by mass for
COND, by size for WCOND) and a D_k-sample is drawn inside V.  All weights
are exact integers; only bounded-integer draws touch the RNG.
"""

from __future__ import annotations

import hashlib
import json
from functools import cached_property
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dist_core import as_elements
from .instances import InstancePair
from .rng import RandomSource

COND, WCOND = "COND", "WCOND"
PICK_U = -1


@dataclass(frozen=True)
class QueryDirective:
    which: int
    old_picks: frozenset = frozenset()
    fresh_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.which not in (1, 2):
            raise ValueError("which must be 1 or 2")
        object.__setattr__(self, "old_picks", frozenset(int(i) for i in self.old_picks))
        counts = {int(a): int(c) for a, c in self.fresh_counts.items() if c}
        if any(c < 0 for c in counts.values()):
            raise ValueError("fresh counts must be non-negative")
        object.__setattr__(self, "fresh_counts", counts)

    @property
    def n_fresh(self) -> int:
        return sum(self.fresh_counts.values())

    def to_dict(self) -> dict:
        return {"which": self.which, "old_picks": sorted(self.old_picks),
                "fresh_counts": {str(a): c for a, c in sorted(self.fresh_counts.items())}}


@dataclass
class QuerySet:
    o: np.ndarray
    pieces: dict  # atom signature -> sorted fresh elements drawn from that atom
    index: int

    @cached_property
    def u(self) -> np.ndarray:
        if not self.pieces:
            return np.empty(0, dtype=np.int64)
        if len(self.pieces) == 1:
            return next(iter(self.pieces.values()))
        return np.sort(np.concatenate(list(self.pieces.values())))

    @cached_property
    def elements(self) -> np.ndarray:
        if self.o.size == 0:
            return self.u
        return np.union1d(self.o, self.u)

    @property
    def size(self) -> int:
        return int(self.o.size) + sum(int(p.size) for p in self.pieces.values())


@dataclass
class Step:
    """Hidden record of one answered query."""

    sample: int
    pick: int          # index into qs.o, or PICK_U
    atom: int | None   # signature of the atom piece used when U won
    fallback: bool     # D_k(A_i) = 0, answered uniformly


@dataclass
class Transcript:
    oracle_kind: str
    directives: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    configurations: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    # atom registry (signature -> size) after each query; analysis only
    partitions: list = field(default_factory=list)
    verdict: str | None = None
    seed: int | None = None
    _samples: list = field(default_factory=list, repr=False, compare=False)

    @property
    def query_count(self) -> int:
        return len(self.steps)

    @property
    def samples(self) -> list[int]:
        # steps are append-only, so extend the cached list
        if len(self._samples) != len(self.steps):
            if len(self._samples) > len(self.steps):
                self._samples.clear()
            self._samples.extend(s.sample for s in self.steps[len(self._samples):])
        return list(self._samples)

    @property
    def atom_picks(self) -> list:
        return [s.atom for s in self.steps]

    def to_dict(self, reveal: bool = False) -> dict:
        out = {"oracle": self.oracle_kind, "seed": self.seed, "query_count": self.query_count,
               "directives": [d.to_dict() for d in self.directives],
               "configurations": [[list(c.collide), list(c.member)] for c in self.configurations],
               "verdict": self.verdict}
        if reveal:
            out["sealed"] = {
                "samples": self.samples,
                "step1": [s.pick for s in self.steps],
                "atom_picks": [s.atom for s in self.steps],
                "fallback": [s.fallback for s in self.steps],
                "old_sets": [q.o.tolist() for q in self.queries],
                "fresh_sizes": [{str(a): int(p.size) for a, p in sorted(q.pieces.items())}
                                for q in self.queries],
                "fresh_digest": [_digest(q.u) for q in self.queries],
            }
        return out

    def body_bytes(self) -> bytes:
        """Everything except the oracle tag, serialized canonically."""
        d = self.to_dict(reveal=True)
        d.pop("oracle")
        return json.dumps(d, sort_keys=True, separators=(",", ":")).encode()


def _digest(arr: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(arr, dtype=np.int64).tobytes(), digest_size=12).hexdigest()


def resolve_query(transcript: Transcript, d: QueryDirective, partition, rng: RandomSource) -> QuerySet:
    """Turn a directive into concrete sets O_i and U_i."""
    i = transcript.query_count
    samples = transcript.samples
    for ell in d.old_picks:
        if not 0 <= ell < i:
            raise ValueError(f"old pick {ell} is not a prior sample index")
    o = as_elements([samples[ell] for ell in d.old_picks])
    seen = as_elements(samples)
    pieces = {}
    for sig, count in sorted(d.fresh_counts.items()):
        piece = partition.sample_fresh(sig, count, seen, rng)
        if piece.size > 1 and not np.all(piece[1:] > piece[:-1]):
            piece = np.sort(piece)
        pieces[sig] = piece
    return QuerySet(o, pieces, i)


class _Weights:
    """Exact integer D_k weights of the candidates of one query."""

    def __init__(self, pair: InstancePair, qs: QuerySet, which: int):
        self.dist = dist = pair.dist(which)
        self.o_w = [dist.int_masses[l] if l >= 0 else 0 for l in dist.layers_of(qs.o).tolist()]
        self.sigs, self.arrs, self.layers, self.counts, self.p_w = [], [], [], [], []
        for sig, arr in qs.pieces.items():
            lay = dist.layers_of(arr)
            # shift by one so elements outside the support land in bin 0
            counts = np.bincount(lay + 1, minlength=dist.n_layers + 1)[1:]
            self.sigs.append(sig)
            self.arrs.append(arr)
            self.layers.append(lay)
            self.counts.append(counts)
            self.p_w.append(dist.int_weight_of_counts(counts))
        self.u_w = sum(self.p_w)
        self.total = sum(self.o_w) + self.u_w

    def layer_weights(self, v: int) -> list[int]:
        return [int(c) * w for c, w in zip(self.counts[v], self.dist.int_masses)]

    def atom_weights(self, kind: str) -> list[int]:
        if kind == COND:
            return self.p_w
        return [int(a.size) for a in self.arrs]


def _sample_in_piece(w: _Weights, v: int, rng: RandomSource) -> int:
    arr = w.arrs[v]
    if w.p_w[v] == 0:
        return int(arr[rng.randbelow(arr.size)])
    layer = rng.weighted_index(w.layer_weights(v))
    members = arr[w.layers[v] == layer]
    return int(members[rng.randbelow(members.size)])


def _answer(pair: InstancePair, qs: QuerySet, which: int, rng: RandomSource,
            transcript: Transcript | None, kind: str) -> int:
    if qs.size == 0:
        raise ValueError("empty conditioning set")
    w = _Weights(pair, qs, which)
    if w.total == 0:
        # D_k(A_i) = 0: uniform over A_i, with U laid out piece by piece
        r = rng.randbelow(qs.size)
        if r < qs.o.size:
            step = Step(int(qs.o[r]), r, None, True)
        else:
            r -= qs.o.size
            for v, arr in enumerate(w.arrs):
                if r < arr.size:
                    step = Step(int(arr[r]), PICK_U, w.sigs[v], True)
                    break
                r -= arr.size
    else:
        cands = w.o_w + ([w.u_w] if w.arrs else [])
        t = rng.weighted_index(cands)
        if t < qs.o.size:
            step = Step(int(qs.o[t]), t, None, False)
        else:
            v = rng.weighted_index(w.atom_weights(kind))
            step = Step(_sample_in_piece(w, v, rng), PICK_U, w.sigs[v], False)
    if transcript is not None:
        transcript.steps.append(step)
    return step.sample


def answer_cond(pair, qs, which, rng, transcript=None) -> int:
    return _answer(pair, qs, which, rng, transcript, COND)


def answer_wcond(pair, qs, which, rng, transcript=None) -> int:
    return _answer(pair, qs, which, rng, transcript, WCOND)


def answer(kind: str, pair, qs, which, rng, transcript=None) -> int:
    if kind not in (COND, WCOND):
        raise ValueError("oracle must be COND or WCOND")
    return _answer(pair, qs, which, rng, transcript, kind)


def answer_law(kind: str, pair: InstancePair, qs: QuerySet, which: int) -> dict[int, Fraction]:
    """Exact output law of the oracle, composed from the same three steps."""
    w = _Weights(pair, qs, which)
    law: dict[int, Fraction] = {}

    def add(e, p):
        law[int(e)] = law.get(int(e), Fraction(0)) + p

    if w.total == 0:
        for e in qs.elements:
            add(e, Fraction(1, qs.size))
        return law
    for e, ow in zip(qs.o.tolist(), w.o_w):
        if ow:
            add(e, Fraction(ow, w.total))
    if not w.arrs or w.u_w == 0:
        return law
    p_u = Fraction(w.u_w, w.total)
    aw = w.atom_weights(kind)
    a_total = sum(aw)
    for v, arr in enumerate(w.arrs):
        p_v = p_u * Fraction(aw[v], a_total)
        if p_v == 0:
            continue
        if w.p_w[v] == 0:
            for e in arr.tolist():
                add(e, p_v / arr.size)
            continue
        for e, lay in zip(arr.tolist(), w.layers[v].tolist()):
            if lay >= 0:
                add(e, p_v * Fraction(w.dist.int_masses[lay], w.p_w[v]))
    return law
