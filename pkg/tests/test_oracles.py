import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from condlab.dist_core import cond_law, cond_sample, from_masses
from condlab.instances import YES, EquivParams, InstancePair
from condlab.oracles import (COND, PICK_U, WCOND, QueryDirective, QuerySet, Step, Transcript,
                             answer, answer_cond, answer_law, answer_wcond, resolve_query)
from condlab.rng import RandomSource
from condlab.testers import AtomPartition, make_tester, run

from conftest import small_pair


def custom_pair(n: int, masses: dict) -> InstancePair:
    d = from_masses(n, masses)
    return InstancePair(d, d, YES, EquivParams.lab(n, 0, 2, 1), Fraction(0))


def qs(o=(), **pieces) -> QuerySet:
    return QuerySet(np.asarray(sorted(o), dtype=np.int64),
                    {int(k[1:]): np.asarray(sorted(v), dtype=np.int64) for k, v in pieces.items()}, 0)


def two_atom_pair():
    # V1 = 0..99 with mass 0.3, V2 = 100..199 with mass 0.1, the rest elsewhere
    masses = {e: Fraction(3, 1000) for e in range(100)}
    masses.update({e: Fraction(1, 1000) for e in range(100, 800)})
    return custom_pair(1000, masses)


# directives and resolution

def test_directive_validation():
    with pytest.raises(ValueError):
        QueryDirective(3)
    with pytest.raises(ValueError):
        QueryDirective(1, fresh_counts={0: -1})
    d = QueryDirective(2, {1}, {0: 0, 4: 2})
    assert d.fresh_counts == {4: 2} and d.n_fresh == 2


def transcript_with(samples):
    tr = Transcript(COND)
    tr.steps = [Step(s, PICK_U, 0, False) for s in samples]
    return tr


def test_resolve_old_only():
    tr = transcript_with([17, 4])
    got = resolve_query(tr, QueryDirective(1, {1}), AtomPartition(50), RandomSource(0))
    assert got.o.tolist() == [4] and got.u.size == 0
    assert got.index == 2


def test_resolve_old_pick_must_be_earlier():
    tr = transcript_with([3])
    with pytest.raises(ValueError):
        resolve_query(tr, QueryDirective(1, {1}), AtomPartition(50), RandomSource(0))


def test_resolve_whole_atom_minus_seen():
    part = AtomPartition(50)
    part.update(np.array([3, 9]))
    tr = transcript_with([3, 9])
    got = resolve_query(tr, QueryDirective(1, fresh_counts={0: 48}), part, RandomSource(0))
    assert got.u.tolist() == [e for e in range(50) if e not in (3, 9)]


def test_resolve_fresh_is_uniform():
    part = AtomPartition(1000)
    part.update(np.arange(100, 200, dtype=np.int64))
    sig = part.sigs_of([100])[0]
    rng = RandomSource(5)
    counts = np.zeros(1000)
    for _ in range(10000):
        got = resolve_query(Transcript(COND), QueryDirective(1, fresh_counts={sig: 10}), part, rng)
        assert got.u.size == 10 and np.all((got.u >= 100) & (got.u < 200))
        counts[got.u] += 1
    freq = counts[100:200] / 10000
    assert np.all(np.abs(freq - 0.1) <= 4 * math.sqrt(0.1 * 0.9 / 10000))


def test_resolve_complement_avoids_explicit_elements():
    part = AtomPartition(1 << 16)
    part.update(np.arange(0, 1 << 15, dtype=np.int64))
    rng = RandomSource(2)
    for k in (1, 100, 1 << 15):
        got = resolve_query(Transcript(COND), QueryDirective(1, fresh_counts={0: k}), part, rng)
        assert got.u.size == k and len(np.unique(got.u)) == k
        assert np.all(got.u >= 1 << 15)


# answering

def test_old_singleton_is_certain():
    pair = small_pair()
    s = int(pair.support[0])
    assert answer_law(COND, pair, qs([s]), 2) == {s: 1}
    assert answer_cond(pair, qs([s]), 2, RandomSource(0)) == s


def test_cross_sub_bucket_pair_is_three_to_one():
    pair = small_pair()
    h, lo = int(pair.support[pair.heavy[1].start]), int(pair.support[pair.light[1].start])
    assert answer_law(COND, pair, qs([h, lo]), 2) == {h: Fraction(3, 4), lo: Fraction(1, 4)}


def test_wcond_vs_cond_atom_pick():
    pair = two_atom_pair()
    q = qs(u1=range(100), u2=range(100, 200))
    cond = answer_law(COND, pair, q, 1)
    wcond = answer_law(WCOND, pair, q, 1)
    assert sum(p for e, p in cond.items() if e < 100) == Fraction(3, 4)
    assert sum(p for e, p in wcond.items() if e < 100) == Fraction(1, 2)


def test_wcond_single_atom_equals_cond():
    pair = small_pair()
    q = qs(o=[int(pair.support[0])], u1=np.arange(0, 256, 3))
    assert answer_law(WCOND, pair, q, 2) == answer_law(COND, pair, q, 2)


def test_step_one_choice_shared_by_both_oracles():
    # O = {s} with D(s) = D(U): s half the time under either oracle
    masses = {0: Fraction(1, 4), 1: Fraction(1, 8), 2: Fraction(1, 8), 3: Fraction(1, 2)}
    pair = custom_pair(16, masses)
    q = qs([0], u1=[1], u2=[2, 5])
    for kind in (COND, WCOND):
        rng = RandomSource(3)
        hits = sum(answer(kind, pair, q, 1, rng) == 0 for _ in range(10000))
        assert abs(hits / 10000 - 0.5) <= 4 * math.sqrt(0.25 / 10000)


def test_three_step_matches_direct_conditioning():
    raw = {e: (e % 5) + (e % 3 == 0) for e in range(20)}
    total = sum(raw.values())
    pair = custom_pair(20, {e: Fraction(v, total) for e, v in raw.items()})
    q = qs([0, 7, 12], u1=[1, 2, 3, 4], u2=[5, 6, 15, 19], u4=[9, 10])
    assert {e: p for e, p in answer_law(COND, pair, q, 1).items() if p} == \
        {e: p for e, p in cond_law(pair.d1, q.elements).items() if p}
    draws = 100000
    a_rng, b_rng = RandomSource(1), RandomSource(2)
    a = Counter(answer_cond(pair, q, 1, a_rng) for _ in range(draws))
    b = Counter(cond_sample(pair.d1, q.elements, b_rng) for _ in range(draws))
    tv = sum(abs(a[e] - b[e]) for e in set(a) | set(b)) / (2 * draws)
    assert tv <= 0.01


def test_zero_mass_query_falls_back_to_uniform():
    pair = small_pair()
    outside = np.setdiff1d(np.arange(pair.n), pair.support)[:6]
    q = qs(outside[:2], u1=outside[2:])
    law = answer_law(WCOND, pair, q, 2)
    assert law == {int(e): Fraction(1, 6) for e in outside}
    tr = Transcript(WCOND)
    answer_wcond(pair, q, 2, RandomSource(0), tr)
    assert tr.steps[0].fallback


def test_answer_rejects_unknown_oracle():
    with pytest.raises(ValueError):
        answer("DUAL", small_pair(), qs([1]), 1, RandomSource(0))


# transcripts

@pytest.mark.parametrize("spec", ["uniform-fresh", "random-policy", "restricted-random"])
def test_transcript_invariants(spec):
    pair = small_pair(seed=2, params=(4096, 2, 4, 3))
    for t in range(30):
        tr = run(make_tester(spec, 4), pair, COND, RandomSource(t)).transcript
        assert len(tr.queries) == len(tr.configurations) == len(tr.directives) == tr.query_count
        for i, (q, s) in enumerate(zip(tr.queries, tr.samples)):
            assert s in set(q.elements.tolist())
            assert all(ell < i for ell in tr.directives[i].old_picks)


def test_transcript_dict_hides_sealed_data():
    pair = small_pair()
    tr = run(make_tester("uniform-fresh", 2), pair, COND, RandomSource(0)).transcript
    assert "sealed" not in tr.to_dict()
    sealed = tr.to_dict(reveal=True)["sealed"]
    assert sealed["samples"] == tr.samples
