import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condlab.dist_core import (HypergeomParams, StructuredDistribution, SupportRange, as_elements,
                               chernoff_bound, cond_law, cond_sample, element_mass, flat_uniform,
                               from_masses, hypergeometric_pmf, hypergeometric_sample, set_mass,
                               tv_exact)
from condlab.rng import RandomSource

from conftest import small_pair, support_elems


def brute_tv(d1, d2):
    l1, l2 = d1.law(), d2.law()
    return sum((abs(l1.get(e, 0) - l2.get(e, 0)) for e in set(l1) | set(l2)), Fraction(0)) / 2


masses_st = st.dictionaries(st.integers(0, 63), st.integers(1, 6), min_size=1, max_size=20)


def normalized(raw):
    total = sum(raw.values())
    return {k: Fraction(v, total) for k, v in raw.items()}


# element and set mass

def test_element_mass_bucket_one(lab_no):
    x = int(lab_no.support[lab_no.buckets[0].start])
    assert element_mass(lab_no.d1, x) == Fraction(1, 512)


def test_element_mass_heavy_half(lab_no):
    x = int(lab_no.support[lab_no.heavy[0].start])
    assert element_mass(lab_no.d2, x) == Fraction(3, 1024)


def test_element_mass_outside_support(lab_no):
    outside = np.setdiff1d(np.arange(2000), lab_no.support)[0]
    assert element_mass(lab_no.d1, int(outside)) == 0


def test_element_mass_out_of_domain():
    d = flat_uniform(8, [1, 2])
    with pytest.raises(ValueError):
        d.element_mass(8)


def test_set_mass_examples(lab_no):
    for j in range(4):
        assert set_mass(lab_no.d1, lab_no.buckets[j]) == Fraction(1, 4)
        assert set_mass(lab_no.d1, support_elems(lab_no, lab_no.buckets[j])) == Fraction(1, 4)
        assert set_mass(lab_no.d2, lab_no.heavy[j]) == Fraction(3, 16)
    assert set_mass(lab_no.d1, []) == 0


@given(masses_st, st.data())
def test_set_mass_matches_sum_of_element_masses(raw, data):
    d = from_masses(64, normalized(raw))
    a = data.draw(st.sets(st.integers(0, 63)))
    assert d.set_mass(a) == sum((d.element_mass(x) for x in a), Fraction(0))


@given(masses_st)
def test_total_mass_is_one_and_layers_are_flat(raw):
    d = from_masses(64, normalized(raw))
    assert d.total_mass() == 1
    law = d.law()
    for i in range(d.n_layers):
        members = d.support[d.bounds[i]:d.bounds[i + 1]]
        assert {law[int(e)] for e in members} == {d.masses[i]}


def test_range_mass_matches_element_mass(lab_no):
    r = SupportRange(100, 300)
    assert lab_no.d2.set_mass(r) == lab_no.d2.set_mass(lab_no.support[100:300])


def test_masses_must_sum_to_one():
    with pytest.raises(ValueError):
        StructuredDistribution(4, np.array([0, 1]), [0, 2], [Fraction(1, 3)], "bad")


def test_as_elements_sorts_and_dedups():
    assert as_elements({3, 1, 2}).tolist() == [1, 2, 3]
    assert as_elements([5, 1, 5]).tolist() == [1, 5]


# total variation

def test_tv_uniform_four_vs_eight():
    assert tv_exact(flat_uniform(8, range(4)), flat_uniform(8, range(8))) == Fraction(1, 2)


@pytest.mark.parametrize("seed", range(5))
def test_tv_no_instance_is_quarter(seed):
    pair = small_pair(seed=seed)
    assert tv_exact(pair.d1, pair.d2) == Fraction(1, 4)
    assert brute_tv(pair.d1, pair.d2) == Fraction(1, 4)


@settings(max_examples=60)
@given(masses_st, masses_st)
def test_tv_matches_brute_force(r1, r2):
    d1, d2 = from_masses(64, normalized(r1)), from_masses(64, normalized(r2))
    assert tv_exact(d1, d2) == brute_tv(d1, d2)
    assert tv_exact(d1, d2) == tv_exact(d2, d1)
    assert 0 <= tv_exact(d1, d2) <= 1


def test_tv_domains_must_match():
    with pytest.raises(ValueError):
        tv_exact(flat_uniform(4, [0]), flat_uniform(8, [0]))


# conditional sampling

def test_cond_sample_singleton():
    d = flat_uniform(10, [3, 4])
    assert cond_sample(d, [7], RandomSource(0)) == 7


def test_cond_sample_cross_sub_bucket_pair(lab_no):
    h = int(lab_no.support[lab_no.heavy[1].start])
    lo = int(lab_no.support[lab_no.light[1].start])
    assert cond_law(lab_no.d2, [h, lo]) == {h: Fraction(3, 4), lo: Fraction(1, 4)}
    rng = RandomSource(4)
    hits = sum(cond_sample(lab_no.d2, [h, lo], rng) == h for _ in range(10000))
    assert abs(hits / 10000 - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / 10000)


def test_cond_sample_zero_mass_set_is_uniform():
    d = flat_uniform(20, [0, 1])
    a = [5, 9, 13, 17]
    rng = RandomSource(8)
    draws = [cond_sample(d, a, rng) for _ in range(10000)]
    sd = math.sqrt(0.25 * 0.75 / 10000)
    for x in a:
        assert abs(draws.count(x) / 10000 - 0.25) <= 3 * sd


def test_cond_sample_matches_law():
    d = from_masses(16, {0: Fraction(1, 2), 3: Fraction(1, 4), 5: Fraction(1, 4)})
    a = [0, 3, 7]
    law = cond_law(d, a)
    assert law == {0: Fraction(2, 3), 3: Fraction(1, 3), 7: 0}
    rng = RandomSource(1)
    draws = [cond_sample(d, a, rng) for _ in range(9000)]
    assert draws.count(7) == 0
    assert abs(draws.count(0) / 9000 - 2 / 3) < 4 * math.sqrt(2 / 9 / 9000)


def test_cond_sample_empty_set():
    with pytest.raises(ValueError):
        cond_sample(flat_uniform(4, [0]), [], RandomSource(0))


# hypergeometric

def test_hypergeometric_degenerate_draws():
    rng = RandomSource(2)
    assert hypergeometric_sample(HypergeomParams(10, 10, 10), rng) == 10
    assert set(hypergeometric_sample(HypergeomParams(2, 1, 2), rng, size=50).tolist()) == {1}


def test_hypergeometric_pmf_examples():
    assert hypergeometric_pmf(1, HypergeomParams(2, 1, 2)) == 1
    p = HypergeomParams(5, 3, 10)
    assert sum(hypergeometric_pmf(k, p) for k in range(6)) == 1


def test_hypergeometric_pmf_brute_force():
    p = HypergeomParams(4, 5, 12)
    good = set(range(5))
    draws = list(combinations(range(12), 4))
    fav = sum(1 for c in draws if len(good.intersection(c)) == 2)
    assert hypergeometric_pmf(2, p) == Fraction(fav, len(draws))


@given(st.integers(1, 30), st.data())
def test_hypergeometric_pmf_matches_binomials(big_n, data):
    k = data.draw(st.integers(0, big_n))
    n = data.draw(st.integers(0, big_n))
    p = HypergeomParams(n, k, big_n)
    for j in range(-1, n + 2):
        expect = (Fraction(math.comb(k, j) * math.comb(big_n - k, n - j), math.comb(big_n, n))
                  if 0 <= j <= n else Fraction(0))
        assert hypergeometric_pmf(j, p) == expect


def test_hypergeometric_mean():
    p = HypergeomParams(100, 300, 1000)
    xs = hypergeometric_sample(p, RandomSource(6), size=100000)
    var = 100 * 0.3 * 0.7 * 900 / 999
    assert abs(xs.mean() - 30) <= 3 * math.sqrt(var / 100000)


def test_hypergeometric_rejects_bad_params():
    with pytest.raises(ValueError):
        HypergeomParams(3, 5, 4)


def test_chernoff_bound_value():
    assert chernoff_bound(30, 0.5) == pytest.approx(2 * math.exp(-0.25 * 30 / 3))
