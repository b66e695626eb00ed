"""Atoms, configurations, core-adaptive testers and the run loop.

Testers never see element ids.  They get a TesterView holding the
configurations so far and an atom registry (signature -> size and unseen
residue).  An atom signature is an int whose bit l is set when the atom lies
inside query set A_{l+1}; signature 0 is the never-queried complement.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .dist_core import DENSE_INDEX_LIMIT
from .instances import InstancePair
from .oracles import COND, WCOND, QueryDirective, QuerySet, Transcript, answer, resolve_query
from .rng import RandomSource

ACCEPT, REJECT = "ACCEPT", "REJECT"


class AtomPartition:
    """Lazy partition of [n] generated by the query sets so far.

    Only elements that appeared in some query set get an explicit atom; the
    complement atom is tracked by count.  Lookups use a dense per-element
    table for moderate n and a sorted index otherwise.
    """

    def __init__(self, n: int):
        self.n = n
        self.sigs: list[int] = []
        self.sizes: list[int] = []
        self.by_sig: dict[int, int] = {}
        self.history: list[np.ndarray] = []
        self._members: list[np.ndarray] = []
        self._explicit = 0
        self._table = np.full(n, -1, dtype=np.int32) if n <= DENSE_INDEX_LIMIT else None
        # sparse mode: sorted explicit elements and their atoms
        self._elems = np.empty(0, dtype=np.int64)
        self._atom_of = np.empty(0, dtype=np.int64)

    @property
    def n_queries(self) -> int:
        return len(self.history)

    @property
    def complement_size(self) -> int:
        return self.n - self._explicit

    def registry(self) -> dict[int, int]:
        """Signature -> size for every nonempty atom."""
        reg = {self.sigs[a]: self.sizes[a] for a in range(len(self.sigs)) if self.sizes[a]}
        if self.complement_size:
            reg[0] = self.complement_size
        return dict(sorted(reg.items()))

    def _lookup(self, elems: np.ndarray) -> np.ndarray:
        """Atom index per element, -1 for the complement."""
        if self._table is not None:
            return self._table[elems]
        if self._elems.size == 0:
            return np.full(elems.shape, -1, dtype=np.int64)
        idx = np.minimum(np.searchsorted(self._elems, elems), self._elems.size - 1)
        return np.where(self._elems[idx] == elems, self._atom_of[idx], -1)

    def sigs_of(self, elems) -> list[int]:
        ids = self._lookup(np.asarray(elems, dtype=np.int64).reshape(-1))
        return [self.sigs[a] if a >= 0 else 0 for a in ids.tolist()]

    def members(self, sig: int) -> np.ndarray:
        if sig == 0:
            raise ValueError("the complement atom is implicit")
        a = self.by_sig.get(sig)
        if a is None:
            return np.empty(0, dtype=np.int64)
        return self._members[a]

    def residue_counts(self, seen) -> dict[int, int]:
        reg = self.registry()
        for sig in self.sigs_of(seen):
            reg[sig] -= 1
        return reg

    def sample_fresh(self, sig: int, k: int, seen: np.ndarray, rng: RandomSource) -> np.ndarray:
        """Uniform k-subset of atom `sig` minus the seen elements."""
        if k == 0:
            return np.empty(0, dtype=np.int64)
        if sig == 0:
            return self._sample_complement(k, rng)
        pool = self.members(sig)
        if seen.size:
            pool = pool[~np.isin(pool, seen)]
        return _take(pool, k, rng)

    def _sample_complement(self, k: int, rng: RandomSource) -> np.ndarray:
        comp = self.complement_size
        if k > comp:
            raise ValueError("fresh count exceeds atom residue")
        if 4 * k >= comp:
            everything = np.arange(self.n, dtype=np.int64)
            return _take(everything[self._lookup(everything) < 0], k, rng)
        # rejection: the distinct values of iid uniform draws avoiding the
        # explicit elements form, given their number, a uniform subset
        got = np.empty(0, dtype=np.int64)
        while got.size < k:
            need = k - got.size
            batch = rng.integers(0, self.n, size=int(need * self.n / comp * 1.1) + 16)
            if self._explicit:
                batch = batch[self._lookup(batch) < 0]
            got = np.unique(np.concatenate([got, batch]))
        return _take(got, k, rng)

    def update(self, a_set: np.ndarray) -> "AtomPartition":
        """Refine by a new query set (sorted unique ids), in place."""
        bit = 1 << self.n_queries
        a_set = np.asarray(a_set, dtype=np.int64)
        ids = self._lookup(a_set)
        present = ids >= 0
        known, kids = a_set[present], ids[present]
        if known.size:
            counts = np.bincount(kids, minlength=len(self.sigs))
            touched = np.flatnonzero(counts).tolist()
            for a in touched:
                c = int(counts[a])
                if c == self.sizes[a]:
                    del self.by_sig[self.sigs[a]]
                    self.sigs[a] |= bit
                    self.by_sig[self.sigs[a]] = a
                else:
                    moved = known if len(touched) == 1 else known[kids == a]
                    na = self._new_atom(self.sigs[a] | bit, moved)
                    self._assign(moved, na)
                    rest = self._members[a]
                    self._members[a] = rest[self._lookup(rest) == a]
                    self.sizes[a] -= c
        new = a_set[~present]
        if new.size:
            self._add_new(new, self._new_atom(bit, new))
        self.history.append(a_set)
        return self

    def _new_atom(self, sig: int, elems: np.ndarray) -> int:
        self.sigs.append(sig)
        self.sizes.append(int(elems.size))
        self._members.append(elems)
        self.by_sig[sig] = len(self.sigs) - 1
        return len(self.sigs) - 1

    def _assign(self, elems: np.ndarray, atom: int):
        if self._table is not None:
            self._table[elems] = atom
        else:
            idx = np.searchsorted(self._elems, elems)
            self._atom_of[idx] = atom

    def _add_new(self, elems: np.ndarray, atom: int):
        self._explicit += int(elems.size)
        if self._table is not None:
            self._table[elems] = atom
            return
        pos = np.searchsorted(self._elems, elems)
        self._elems = np.insert(self._elems, pos, elems)
        self._atom_of = np.insert(self._atom_of, pos, np.full(elems.size, atom, dtype=np.int64))


def _take(pool: np.ndarray, k: int, rng: RandomSource) -> np.ndarray:
    """Uniform k-subset of pool; taking everything uses no randomness."""
    if k > pool.size:
        raise ValueError("fresh count exceeds atom residue")
    if k == pool.size:
        return pool
    return pool[rng.subset(pool.size, k)]


def atom_update(partition: AtomPartition, new_query: QuerySet) -> AtomPartition:
    return partition.update(new_query.elements)


@dataclass(frozen=True)
class Configuration:
    collide: tuple
    member: tuple

    def __len__(self):
        return len(self.collide) + len(self.member)

    def encode(self) -> str:
        return "".join(map(str, self.collide)) + ":" + "".join(map(str, self.member))


def configuration_of(i: int, transcript: Transcript) -> Configuration:
    """Configuration of sample i (0-based) against the earlier samples and sets."""
    samples = transcript.samples
    s = samples[i]
    collide = tuple(int(samples[ell] == s) for ell in range(i))
    member = []
    for ell in range(i):
        a = transcript.queries[ell].elements
        j = int(np.searchsorted(a, s))
        member.append(int(j < a.size and a[j] == s))
    return Configuration(collide, tuple(member))


_NODES: dict[str, tuple] = {}


def node_id(configurations, registry: dict | None = None) -> str:
    """Canonical, collision-checked id of a configuration sequence."""
    key = tuple(c.encode() for c in configurations)
    h = hashlib.blake2b("/".join(key).encode(), digest_size=16).hexdigest()
    reg = _NODES if registry is None else registry
    prev = reg.setdefault(h, key)
    if prev != key:
        raise RuntimeError("node id collision")
    return h


ROOT_ID = node_id(())


def first_occurrences(configs) -> list[int]:
    """Indices of samples that do not repeat an earlier sample."""
    return [i for i, c in enumerate(configs) if not any(c.collide)]


def sample_class(configs, i: int) -> int:
    """Index of the first sample equal to sample i."""
    c = configs[i]
    return c.collide.index(1) if any(c.collide) else i


@dataclass
class AtomView:
    size: int
    residue: int


@dataclass
class TesterView:
    """Everything a tester may look at."""

    n_samples: int
    configurations: tuple
    atoms: dict  # signature -> AtomView


class CoreAdaptiveTester:
    """Base class.  Subclasses implement next() and optionally verdict()."""

    name = "base"
    restricted = False

    def __init__(self, q: int):
        if q < 1:
            raise ValueError("query budget must be >= 1")
        self.q = q
        self.rng: RandomSource | None = None

    def start(self, rng: RandomSource):
        self.rng = rng

    def next(self, view: TesterView) -> QueryDirective | None:
        raise NotImplementedError

    def verdict(self, configurations) -> str:
        return ACCEPT


class TrivialAcceptTester(CoreAdaptiveTester):
    """One fresh element from the never-queried atom per query; always accepts."""

    name = "trivial-accept"

    def next(self, view):
        return QueryDirective(1, (), {0: 1})


class UniformFreshTester(CoreAdaptiveTester):
    """Up to k fresh elements from every atom with unseen residue.

    With ``old`` set, every earlier distinct sample joins the query as well.
    """

    name = "uniform-fresh"

    def __init__(self, q: int, k: int = 64, which: int = 1, old: bool = False):
        super().__init__(q)
        self.k = k
        self.which = which
        self.old = bool(old)

    def next(self, view):
        counts = {s: min(self.k, a.residue) for s, a in view.atoms.items() if a.residue}
        picks = first_occurrences(view.configurations) if self.old else ()
        return QueryDirective(self.which, picks, counts)


class RandomPolicyTester(CoreAdaptiveTester):
    """Randomized mix of old picks and fresh counts, driven by its own stream.

    Each prior distinct sample is re-queried with probability p_old and each
    atom contributes up to k fresh elements with probability p_fresh.
    Rejects when more than half of the answers repeat an earlier sample.
    """

    name = "random-policy"

    def __init__(self, q: int, k: int = 64, p_old: float = 0.5, p_fresh: float = 0.7):
        super().__init__(q)
        self.k, self.p_old, self.p_fresh = k, p_old, p_fresh

    def next(self, view):
        r = self.rng
        which = 1 + r.randbelow(2)
        old = [i for i in first_occurrences(view.configurations) if r.random() < self.p_old]
        counts = {}
        for s, a in view.atoms.items():
            if a.residue and r.random() < self.p_fresh:
                counts[s] = 1 + r.randbelow(min(self.k, a.residue))
        if not old and not counts:
            counts[max(view.atoms, key=lambda s: view.atoms[s].residue)] = 1
        return QueryDirective(which, old, counts)

    def verdict(self, configurations):
        repeats = sum(1 for c in configurations if any(c.collide))
        return REJECT if 2 * repeats > len(configurations) else ACCEPT


class PairProbeTester(CoreAdaptiveTester):
    """Known-support distinguisher phrased as a core-adaptive tester.

    Query 1 takes a Binomial(n, c/s)-sized fresh set S, and it and the next
    draws-1 queries condition on S to collect support members; then every pair
    among the first `max_found` distinct members is probed `probes` times
    with an old-only query.  Rejects when some pair looks biased.
    """

    name = "pair-probe"

    def __init__(self, support_size: int, c: float = 8, draws: int | None = None,
                 probes: int = 60, max_found: int = 6, threshold: float = 0.65,
                 band: tuple = (0.2, 0.8)):
        draws = int(20 * c) if draws is None else draws
        super().__init__(draws + math.comb(max_found, 2) * probes)
        self.s, self.c, self.draws, self.probes = support_size, c, draws, probes
        self.max_found, self.threshold, self.band = max_found, threshold, band

    def start(self, rng):
        super().start(rng)
        self._plan = None

    def next(self, view):
        i = view.n_samples
        if i == 0:
            n = view.atoms[0].size
            size = int(self.rng.gen.binomial(n, min(1.0, self.c / self.s)))
            return QueryDirective(2, (), {0: max(1, size)})
        if i < self.draws:
            # condition on S again: its seen members plus the unseen rest
            inside = {s: a.residue for s, a in view.atoms.items() if s & 1 and a.residue}
            return QueryDirective(2, first_occurrences(view.configurations), inside)
        if self._plan is None:
            found = first_occurrences(view.configurations[:self.draws])[:self.max_found]
            self._plan = [p for p in combinations(found, 2) for _ in range(self.probes)]
        k = i - self.draws
        if k >= len(self._plan):
            return None
        return QueryDirective(2, self._plan[k], {})

    def verdict(self, configurations):
        if self._plan is None:
            return ACCEPT
        tally: dict[tuple, list] = {}
        for k, pair in enumerate(self._plan[:len(configurations) - self.draws]):
            got = sample_class(configurations, self.draws + k)
            tally.setdefault(pair, []).append(got == pair[0])
        lo, hi = self.band
        for hits in tally.values():
            f = sum(hits) / len(hits)
            if lo <= f <= hi and (f > self.threshold or f < 1 - self.threshold):
                return REJECT
        return ACCEPT


class RestrictedUnseenTester(CoreAdaptiveTester):
    """All-unseen queries, with an all-old re-query of two samples every `every` steps."""

    name = "restricted-unseen"
    restricted = True

    def __init__(self, q: int, every: int = 3):
        super().__init__(q)
        self.every = every

    def next(self, view):
        firsts = first_occurrences(view.configurations)
        if len(firsts) >= 2 and view.n_samples % self.every == self.every - 1:
            return QueryDirective(2, firsts[-2:], {})
        counts = {s: a.residue for s, a in view.atoms.items() if a.residue}
        return QueryDirective(1 + view.n_samples % 2, (), counts)


class RestrictedComplementTester(CoreAdaptiveTester):
    """Alternates k fresh never-queried elements with probes of the last two samples."""

    name = "restricted-complement"
    restricted = True

    def __init__(self, q: int, k: int = 32):
        super().__init__(q)
        self.k = k

    def next(self, view):
        firsts = first_occurrences(view.configurations)
        if view.n_samples % 2 == 1 and len(firsts) >= 2:
            return QueryDirective(2, firsts[-2:], {})
        return QueryDirective(1, (), {0: min(self.k, view.atoms[0].residue)})


class RestrictedRandomTester(CoreAdaptiveTester):
    """Random restricted directives: one atom's fresh elements, or old samples only."""

    name = "restricted-random"
    restricted = True

    def __init__(self, q: int, k: int = 32):
        super().__init__(q)
        self.k = k

    def next(self, view):
        r = self.rng
        which = 1 + r.randbelow(2)
        firsts = first_occurrences(view.configurations)
        if firsts and r.random() < 0.5:
            old = [i for i in firsts if r.random() < 0.6] or [firsts[-1]]
            return QueryDirective(which, old, {})
        live = [s for s, a in view.atoms.items() if a.residue]
        s = live[r.randbelow(len(live))]
        return QueryDirective(which, (), {s: 1 + r.randbelow(min(self.k, view.atoms[s].residue))})

    def verdict(self, configurations):
        return REJECT if sum(1 for c in configurations if any(c.collide)) % 2 else ACCEPT


ZOO = {
    TrivialAcceptTester.name: TrivialAcceptTester,
    UniformFreshTester.name: UniformFreshTester,
    RandomPolicyTester.name: RandomPolicyTester,
    PairProbeTester.name: PairProbeTester,
    RestrictedUnseenTester.name: RestrictedUnseenTester,
    RestrictedComplementTester.name: RestrictedComplementTester,
    RestrictedRandomTester.name: RestrictedRandomTester,
}


def make_tester(spec: str, q: int | None = None, **defaults) -> CoreAdaptiveTester:
    """Build a zoo tester from 'name' or 'name:key=val,key=val'."""
    name, _, rest = spec.partition(":")
    if name not in ZOO:
        raise ValueError(f"unknown tester {name!r}; choose from {sorted(ZOO)}")
    kwargs = dict(defaults)
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        kwargs[key.strip()] = _parse_value(val.strip())
    if name != PairProbeTester.name:
        kwargs.setdefault("q", 3 if q is None else q)
    return ZOO[name](**kwargs)


def _parse_value(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val


def check_restricted(d: QueryDirective):
    if d.old_picks and d.fresh_counts:
        raise ValueError("restricted directive mixes old and fresh elements")
    if len(d.fresh_counts) > 1:
        raise ValueError("restricted fresh directive spans several atoms")


@dataclass
class RunResult:
    transcript: Transcript
    verdict: str

    @property
    def configurations(self):
        return self.transcript.configurations


def run(tester: CoreAdaptiveTester, pair: InstancePair, oracle_kind: str, rng: RandomSource) -> RunResult:
    """Play the tester against the oracle for up to q rounds."""
    if oracle_kind not in (COND, WCOND):
        raise ValueError("oracle must be COND or WCOND")
    tr = Transcript(oracle_kind, seed=rng.seed)
    part = AtomPartition(pair.n)
    oracle_rng = rng.child("oracle")
    tester.start(rng.child("tester"))
    samples = np.empty(0, dtype=np.int64)
    for _ in range(tester.q):
        seen = np.unique(samples)
        reg = part.registry()
        residue = part.residue_counts(seen)
        view = TesterView(tr.query_count, tuple(tr.configurations),
                          {s: AtomView(reg[s], residue[s]) for s in reg})
        d = tester.next(view)
        if d is None:
            break
        if tester.restricted:
            check_restricted(d)
        if d.n_fresh == 0 and not d.old_picks:
            raise ValueError("directive selects an empty query set")
        for s, c in d.fresh_counts.items():
            if c > residue.get(s, 0):
                raise ValueError("fresh count exceeds atom residue")
        qs = resolve_query(tr, d, part, oracle_rng)
        tr.directives.append(d)
        tr.queries.append(qs)
        s = answer(oracle_kind, pair, qs, d.which, oracle_rng, tr)
        # member bits are the atom signature of s before A_i is added
        sig = part.sigs_of([s])[0]
        i = samples.size
        collide = tuple((samples == s).astype(int).tolist())
        member = tuple(map(int, format(sig, "b")[::-1].ljust(i, "0")[:i])) if i else ()
        tr.configurations.append(Configuration(collide, member))
        samples = np.append(samples, s)
        atom_update(part, qs)
        tr.partitions.append(part.registry())
    tr.verdict = tester.verdict(tuple(tr.configurations))
    return RunResult(tr, tr.verdict)


def level_ids(result: RunResult, q: int | None = None) -> list[str]:
    """Node ids of the path: entry i is the node after i+1 answers."""
    configs = result.configurations
    q = len(configs) if q is None else q
    return [node_id(configs[:i + 1]) for i in range(min(q, len(configs)))]
