import math

import numpy as np
import pytest

from condlab.distinguishers import (DistinguisherConfig, draw_probe_set, known_support_distinguish,
                                    pair_probe)
from condlab.instances import NO, YES, EquivParams, gen_equivalence
from condlab.rng import RandomSource
from condlab.testers import ACCEPT, REJECT

P = EquivParams.lab(1 << 20, 4, 8, 4)


def test_same_bucket_pair_is_fair(lab_yes):
    b = lab_yes.buckets[2]
    s, s2 = int(lab_yes.support[b.start]), int(lab_yes.support[b.start + 1])
    f = pair_probe(lab_yes, s, s2, 10000, RandomSource(1))
    assert abs(f - 0.5) <= 4 * math.sqrt(0.25 / 10000)


def test_cross_sub_bucket_pair_is_biased(lab_no):
    s = int(lab_no.support[lab_no.heavy[2].start])
    s2 = int(lab_no.support[lab_no.light[2].start])
    f = pair_probe(lab_no, s, s2, 10000, RandomSource(2))
    assert abs(f - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / 10000)


def test_pair_probe_needs_distinct_elements(lab_no):
    with pytest.raises(ValueError):
        pair_probe(lab_no, 5, 5, 10, RandomSource(0))


def test_probe_set_size():
    sizes = [draw_probe_set(1 << 20, 1 << 14, 8, RandomSource(s)).size for s in range(400)]
    assert abs(np.mean(sizes) - 512) <= 4 * math.sqrt(512 / 400)


def test_config_validation():
    for kwargs in ({"c": 2}, {"probe_trials": 0}, {"decision_threshold": 0.8}):
        with pytest.raises(ValueError):
            DistinguisherConfig(**kwargs)


@pytest.mark.parametrize("label,want", [(YES, ACCEPT), (NO, REJECT)])
def test_verdict_rates(label, want):
    cfg = DistinguisherConfig()
    rng = RandomSource(5)
    hits = 0
    for t in range(100):
        pair = gen_equivalence(P, label, rng.child("inst", t))
        res = known_support_distinguish(pair, P.m, cfg, rng.child("run", t))
        assert res.queries <= cfg.query_cap
        hits += res.verdict == want
    assert hits >= 90


def test_query_count_ignores_n():
    # same seed schedule: the distinguisher only sees n through the probe set
    cfg = DistinguisherConfig()
    counts = []
    for lg in (20, 24):
        p = EquivParams.lab(1 << lg, 4, 8, 4)
        pair = gen_equivalence(p, YES, RandomSource(9))
        counts.append([known_support_distinguish(pair, p.m, cfg, RandomSource(t)).queries
                       for t in range(30)])
    assert max(max(c) for c in counts) <= cfg.query_cap
    assert abs(np.mean(counts[0]) - np.mean(counts[1])) < cfg.query_cap / 4
