from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condlab.dist_core import tv_exact
from condlab.instances import (EVEN, NO, ODD, YES, EquivParams, derive_paper_params,
                               gen_equivalence, gen_uniblock, gen_uniblock_pair, paper_shape,
                               uniblock_kappa_range)
from condlab.rng import RandomSource

from conftest import small_pair, support_elems

lab_params = st.tuples(st.sampled_from([1 << 10, 1 << 12, 1 << 14]), st.integers(0, 3),
                       st.sampled_from([2, 4]), st.integers(1, 3))


def test_lab_bucket_sizes():
    p = EquivParams.lab(1 << 20, 4, 8, 4)
    assert p.b == 16
    assert p.bucket_sizes == (128, 1024, 8192, 65536)
    assert p.m == 74880


def test_lab_from_b():
    assert EquivParams.lab(1 << 20, b=16, rho=8, tau=4).kappa == 4
    with pytest.raises(ValueError):
        EquivParams.lab(1 << 20, b=12)


def test_support_larger_than_domain():
    with pytest.raises(ValueError):
        EquivParams.lab(1 << 10, 6, 8, 4)


def test_paper_shape_symbolic_large_n():
    rho, tau, _ = paper_shape(1 << 256)
    assert (rho, tau) == (1 << 16, 4)


def test_paper_shape_single_bucket():
    rho, tau, kmax = paper_shape(1 << 16)
    assert (rho, tau) == (16, 1)
    assert kmax == 8


def test_paper_shape_degenerate():
    with pytest.raises(ValueError):
        paper_shape(1 << 8)


def test_paper_kappa_is_uniform_over_admissible_range():
    _, _, kmax = paper_shape(1 << 16)
    got = Counter(derive_paper_params(1 << 16, RandomSource(s)).kappa for s in range(900))
    assert set(got) == set(range(kmax + 1))
    for k in got:
        assert derive_paper_params(1 << 16, RandomSource(0)).with_kappa(k).m <= 1 << 16


@pytest.mark.parametrize("label,tv", [(YES, 0), (NO, Fraction(1, 4))])
def test_label_tv(label, tv):
    pair = gen_equivalence(EquivParams.lab(1 << 20, 4, 8, 4), label, RandomSource(1))
    assert tv_exact(pair.d1, pair.d2) == tv
    assert pair.epsilon == tv


def test_yes_shares_layers():
    pair = small_pair(YES)
    assert pair.d1 is pair.d2


@settings(max_examples=40, deadline=None)
@given(lab_params, st.sampled_from([YES, NO]), st.integers(0, 1 << 32))
def test_bucket_structure(params, label, seed):
    p = EquivParams.lab(*params)
    pair = gen_equivalence(p, label, RandomSource(seed))
    assert len(np.unique(pair.support)) == p.m
    assert pair.d1.total_mass() == pair.d2.total_mass() == 1
    for j, size in enumerate(p.bucket_sizes):
        assert len(pair.buckets[j]) == size
        assert len(pair.heavy[j]) == len(pair.light[j]) == size // 2
        assert pair.d1.set_mass(pair.buckets[j]) == pair.d2.set_mass(pair.buckets[j]) == Fraction(1, p.tau)
        if label == NO:
            assert pair.d2.set_mass(pair.heavy[j]) == Fraction(3, 4 * p.tau)
            assert pair.d2.set_mass(pair.light[j]) == Fraction(1, 4 * p.tau)
        assert set(pair.bucket_of(support_elems(pair, pair.buckets[j])).tolist()) == {j + 1}


def test_bucket_of_outside_support():
    pair = small_pair()
    outside = np.setdiff1d(np.arange(pair.n), pair.support)[:5]
    assert pair.bucket_of(outside).tolist() == [0] * 5


def test_generation_is_seeded():
    a, b = small_pair(seed=3), small_pair(seed=3)
    assert np.array_equal(a.support, b.support)
    assert not np.array_equal(a.support, small_pair(seed=4).support)


def test_bad_label():
    with pytest.raises(ValueError):
        gen_equivalence(EquivParams.lab(256, 1, 4, 2), "MAYBE", RandomSource(0))


def test_uniblock_sizes_and_masses():
    even = gen_uniblock(1 << 16, EVEN, RandomSource(0), kappa=2)
    odd = gen_uniblock(1 << 16, ODD, RandomSource(0), kappa=2)
    assert even.support_size == 16 and odd.support_size == 32
    assert set(even.dist.law().values()) == {Fraction(1, 16)}


@pytest.mark.parametrize("seed", range(10))
def test_uniblock_pair_separated(seed):
    even, odd = gen_uniblock_pair(1 << 16, RandomSource(seed))
    assert even.kappa == odd.kappa
    assert tv_exact(even.dist, odd.dist) >= Fraction(1, 2)


def test_uniblock_kappa_range():
    ks = uniblock_kappa_range(1 << 16)
    assert ks.start == 2 and ks.stop - 1 == 6
    for n in (1 << 16, 1 << 24, 1 << 32):
        for k in uniblock_kappa_range(n):
            assert 1 << (2 * k + 1) <= n


def test_uniblock_bad_parity():
    with pytest.raises(ValueError):
        gen_uniblock(1 << 16, "neither", RandomSource(0), kappa=2)
