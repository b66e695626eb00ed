"""Verification suites behind ``condlab verify``.

Each suite returns a list of report records {lemma, params, estimate, se,
bound, pass}.  Trials are indexed and seeded by index, so any mapper (serial
or a process pool) gives the same merged result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, partial
from typing import Callable

import numpy as np

from . import analysis as an
from .dist_core import (HypergeomParams, chernoff_bound, cond_law, hypergeometric_sample,
                        tv_exact)
from .distinguishers import DistinguisherConfig, known_support_distinguish, pair_probe
from .instances import NO, YES, EquivParams, gen_equivalence, gen_uniblock_pair
from .oracles import COND, WCOND, QuerySet, answer_law
from .rng import RandomSource
from .testers import make_tester, run

# (n, kappa, rho, tau) presets
LAB_DEFAULT = (1 << 20, 4, 8, 4)
# lab instance on which uniform-fresh runs pass only through good nodes
# for gamma=64, alpha=2, phi=5
GOOD_NODE = (1 << 16, 8, 2, 6)
GOOD_NODE_AP = (64, 2, 5)
LAB_GRID = [(1 << 12, 1, 4, 3), (1 << 16, 3, 8, 3), (1 << 16, 8, 2, 6), (1 << 20, 4, 8, 4),
            (1 << 20, 2, 16, 3), (1 << 22, 6, 4, 5)]
HYPERGEOM_SETS = [(100, 300, 1000), (10, 10, 10), (5, 3, 10), (40, 25, 50), (200, 1000, 5000)]


@dataclass
class SuiteContext:
    seed: int
    trials: int
    params: EquivParams | None = None
    ap: an.AnalysisParams | None = None
    tester: str | None = None
    q: int | None = None
    oracle: str = COND
    mapper: Callable = map
    extras: dict = field(default_factory=dict)


def params_dict(p: EquivParams | None) -> dict | None:
    if p is None:
        return None
    return {"n": p.n, "kappa": p.kappa, "b": p.b, "rho": p.rho, "tau": p.tau, "m": p.m,
            "mode": p.mode, "bucket_sizes": list(p.bucket_sizes)}


def ap_dict(ap: an.AnalysisParams | None) -> dict | None:
    if ap is None:
        return None
    return {"gamma": str(ap.gamma), "alpha": str(ap.alpha), "phi": ap.phi, "beta": str(ap.beta),
            "delta": str(ap.delta), "mode": ap.mode, "loose_cond3": ap.loose_cond3}


def record(lemma: str, params, estimate, se, bound, ok: bool, **extra) -> dict:
    out = {"lemma": lemma, "params": params, "estimate": estimate, "se": se, "bound": bound,
           "pass": bool(ok)}
    out.update(extra)
    return out


def _rate_se(x: float, trials: int) -> float:
    return math.sqrt(max(x * (1 - x), 0.0) / trials) if trials else float("nan")


@lru_cache(maxsize=8)
def _pairs(params: EquivParams, seed: int, count: int, label: str) -> tuple:
    rng = RandomSource(seed).child("pairs", label)
    return tuple(gen_equivalence(params, label, rng.child(i)) for i in range(count))


@lru_cache(maxsize=4)
def _label_pool(params: EquivParams, seed: int, size: int):
    return an.label_pool(params, size, RandomSource(seed).child("label-pool"))


# exact separation and bucket structure

def _tv_quarter_trial(t: int, seed: int, grid: tuple) -> tuple:
    rng = RandomSource(seed).child("tv-quarter", t)
    p = EquivParams.lab(*grid[t % len(grid)])
    no = gen_equivalence(p, NO, rng.child("no"))
    yes = gen_equivalence(p, YES, rng.child("yes"))
    return tv_exact(no.d1, no.d2) == Fraction(1, 4), tv_exact(yes.d1, yes.d2) == 0


def suite_tv_quarter(ctx: SuiteContext) -> list[dict]:
    grid = (ctx.params.n, ctx.params.kappa, ctx.params.rho, ctx.params.tau) if ctx.params else None
    grid = (grid,) if grid else tuple(LAB_GRID)
    got = list(ctx.mapper(partial(_tv_quarter_trial, seed=ctx.seed, grid=grid), range(ctx.trials)))
    no_ok = sum(a for a, _ in got)
    yes_ok = sum(b for _, b in got)
    return [record("tv-quarter NO", [list(g) for g in grid], f"{no_ok}/{ctx.trials} equal 1/4",
                   0.0, "1/4 exactly", no_ok == ctx.trials),
            record("tv-quarter YES", [list(g) for g in grid], f"{yes_ok}/{ctx.trials} equal 0",
                   0.0, "0 exactly", yes_ok == ctx.trials)]


def bucket_structure_ok(pair) -> bool:
    p = pair.params
    for j, size in enumerate(p.bucket_sizes):
        b, h, lo = pair.buckets[j], pair.heavy[j], pair.light[j]
        if len(b) != size or len(h) != size // 2 or len(lo) != size // 2:
            return False
        for d in (pair.d1, pair.d2):
            if d.set_mass(b) != Fraction(1, p.tau):
                return False
        if pair.label == NO:
            if pair.d2.set_mass(h) != Fraction(3, 4 * p.tau):
                return False
            if pair.d2.set_mass(lo) != Fraction(1, 4 * p.tau):
                return False
    return True


def _bucket_trial(t: int, seed: int, grid: tuple) -> bool:
    rng = RandomSource(seed).child("buckets", t)
    p = EquivParams.lab(*grid[t % len(grid)])
    return all(bucket_structure_ok(gen_equivalence(p, lab, rng.child(lab))) for lab in (YES, NO))


def suite_buckets(ctx: SuiteContext) -> list[dict]:
    grid = ((ctx.params.n, ctx.params.kappa, ctx.params.rho, ctx.params.tau),) if ctx.params \
        else tuple(LAB_GRID)
    ok = sum(ctx.mapper(partial(_bucket_trial, seed=ctx.seed, grid=grid), range(ctx.trials)))
    return [record("bucket structure", [list(g) for g in grid], f"{ok}/{ctx.trials} exact",
                   0.0, "all exact", ok == ctx.trials)]


# hypergeometric sampler

def suite_hypergeometric(ctx: SuiteContext) -> list[dict]:
    rng = RandomSource(ctx.seed).child("hypergeometric")
    out = []
    for draws, k, big_n in HYPERGEOM_SETS:
        p = HypergeomParams(draws, k, big_n)
        xs = hypergeometric_sample(p, rng.child(draws, k, big_n), size=ctx.trials)
        mu = float(p.mean)
        var = draws * (k / big_n) * (1 - k / big_n) * (big_n - draws) / (big_n - 1) if big_n > 1 else 0
        se = math.sqrt(var / ctx.trials)
        dev = abs(float(xs.mean()) - mu)
        out.append(record("hypergeometric mean", [draws, k, big_n], float(xs.mean()), se,
                          mu, dev <= 3 * se + 1e-12))
        for lam in (0.1, 0.3, 0.5):
            if mu == 0:
                continue
            freq = float(np.mean(np.abs(xs - mu) >= lam * mu))
            bound = chernoff_bound(mu, lam)
            fse = _rate_se(freq, ctx.trials)
            out.append(record("chernoff tail", [draws, k, big_n, lam], freq, fse, bound,
                              freq <= bound + 3 * fse))
    return out


# 3-step COND decomposition

def random_small_query(pair, rng: RandomSource, max_size: int = 24) -> QuerySet:
    """Random O and a random split of U into pieces, over a small instance."""
    n = pair.n
    size = 1 + rng.randbelow(min(max_size, n))
    elems = np.sort(rng.subset(n, size).astype(np.int64))
    # mix in support members so masses are not all zero
    sup = pair.support[rng.subset(pair.support.size, min(4, pair.support.size))]
    elems = np.unique(np.concatenate([elems, sup]))
    labels = rng.integers(0, 4, size=elems.size)
    o = elems[labels == 0]
    pieces = {s: elems[labels == s] for s in (1, 2, 3) if np.any(labels == s)}
    return QuerySet(o, pieces, 0)


def _nonzero(law: dict) -> dict:
    return {e: p for e, p in law.items() if p}


def suite_cond_decomposition(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(256, 1, 4, 2)
    rng = RandomSource(ctx.seed).child("cond-decomposition")
    ok = 0
    for t in range(ctx.trials):
        pair = gen_equivalence(p, (YES, NO)[t % 2], rng.child("inst", t))
        qs = random_small_query(pair, rng.child("query", t))
        which = 1 + t % 2
        ok += _nonzero(answer_law(COND, pair, qs, which)) == _nonzero(
            cond_law(pair.dist(which), qs.elements))
    return [record("COND 3-step law equals D|A", params_dict(p), f"{ok}/{ctx.trials} equal",
                   0.0, "exact", ok == ctx.trials)]


# pair probe and known-support distinguisher

def suite_pair_probe(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(*LAB_DEFAULT)
    rng = RandomSource(ctx.seed).child("pair-probe")
    out = []
    no = gen_equivalence(p, NO, rng.child("no"))
    yes = gen_equivalence(p, YES, rng.child("yes"))
    j = p.tau - 1
    h, lo, b = no.heavy[j], no.light[j], yes.buckets[j]
    f_no = pair_probe(no, int(no.support[h.start]), int(no.support[lo.start]), ctx.trials,
                      rng.child("probe-no"))
    f_yes = pair_probe(yes, int(yes.support[b.start]), int(yes.support[b.start + 1]), ctx.trials,
                       rng.child("probe-yes"))
    for name, f, target in (("NO cross sub-bucket", f_no, 0.75), ("YES same bucket", f_yes, 0.5)):
        out.append(record(f"pair probe {name}", params_dict(p), f, _rate_se(f, ctx.trials), target,
                          abs(f - target) <= 0.015))
    return out


def _distinguish_trial(t: int, seed: int, params: EquivParams, label: str,
                       cfg: DistinguisherConfig) -> tuple:
    rng = RandomSource(seed).child("distinguish", label, t)
    pair = gen_equivalence(params, label, rng.child("instance"))
    res = known_support_distinguish(pair, params.m, cfg, rng.child("run"))
    return res.verdict, res.queries, res.probe_set_size, res.found, res.pairs_used


def suite_distinguisher(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(*LAB_DEFAULT)
    cfg = ctx.extras.get("cfg") or DistinguisherConfig()
    out = []
    for label, want in ((YES, "ACCEPT"), (NO, "REJECT")):
        rows = list(ctx.mapper(partial(_distinguish_trial, seed=ctx.seed, params=p, label=label,
                                       cfg=cfg), range(ctx.trials)))
        rate = sum(r[0] == want for r in rows) / ctx.trials
        out.append(record(f"distinguisher {want} rate on {label}", params_dict(p), rate,
                          _rate_se(rate, ctx.trials), 0.9, rate >= 0.9,
                          mean_queries=float(np.mean([r[1] for r in rows]))))
    return out


# bad-kappa counting

def random_node_shape(n: int, rng: RandomSource, max_q: int = 4):
    """Random atom sizes summing to n plus U decompositions over those atoms."""
    q = 1 + rng.randbelow(max_q)
    n_atoms = 1 + rng.randbelow(min(2**q, 8))
    cuts = sorted(rng.randbelow(n + 1) for _ in range(n_atoms - 1))
    sizes = [b - a for a, b in zip([0] + cuts, cuts + [n])]
    sizes = [s for s in sizes if s] or [n]
    u_hist = []
    for _ in range(q):
        u = {}
        for a, s in enumerate(sizes):
            if rng.random() < 0.5:
                u[a] = 1 + rng.randbelow(s)
        u_hist.append(u or {0: 1})
    return sizes, u_hist


def suite_bad_kappa(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(*LAB_DEFAULT)
    ap = ctx.ap or an.AnalysisParams.lab(8, 4, 2)
    rng = RandomSource(ctx.seed).child("bad-kappa")
    worst, ok = 0.0, 0
    for t in range(ctx.trials):
        sizes, u_hist = random_node_shape(p.n, rng.child(t))
        count, bound = an.count_bad_kappas(sizes, u_hist, p, ap)
        ok += count <= bound
        worst = max(worst, count / bound if bound else math.inf)
    return [record("bad kappa count <= analytic bound", params_dict(p), f"{ok}/{ctx.trials}",
                   0.0, "count <= bound", ok == ctx.trials, max_ratio=worst,
                   analysis=ap_dict(ap))]


# oracle equivalence and level TV

RESTRICTED = ("restricted-unseen", "restricted-complement", "restricted-random")


def _restricted_trial(t: int, seed: int, params: EquivParams, testers: tuple, q: int) -> bool:
    pair = _pairs(params, seed, 4, NO)[t % 4]
    ok = True
    for name in testers:
        rng = RandomSource(seed).child("restricted", name, t)
        a = run(make_tester(name, q), pair, COND, rng)
        b = run(make_tester(name, q), pair, WCOND, rng)
        ok &= a.transcript.body_bytes() == b.transcript.body_bytes()
    return ok


def suite_restricted(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(*GOOD_NODE)
    testers = (ctx.tester,) if ctx.tester else RESTRICTED
    q = ctx.q or 6
    same = sum(ctx.mapper(partial(_restricted_trial, seed=ctx.seed, params=p, testers=testers, q=q),
                          range(ctx.trials)))
    out = [record("restricted transcripts COND == WCOND", params_dict(p),
                  f"{same}/{ctx.trials} byte-identical", 0.0, "all", same == ctx.trials,
                  testers=list(testers))]
    for name in testers:
        rep = level_tv_report(ctx, name, q, p, pairing="oracle")
        top = rep.levels[-1]
        out.append(record(f"restricted level TV ({name})", params_dict(p), top.tv, top.se, 0.0,
                          top.tv <= 3 * top.se + 1e-12))
    return out


def _tv_worker(t: int, spec: str, q: int, pairing: str, seed: int, params: EquivParams,
               n_pairs: int, ap, oracle: str, pool: int | None, label: str):
    rng = RandomSource(seed).child("level-tv", spec)
    factory = partial(make_tester, spec, q)
    if pairing == "oracle":
        return an.tv_trial(t, factory, "oracle", q, rng, pairs=_pairs(params, seed, n_pairs, label),
                           ap=ap)
    pooled = _label_pool(params, seed, pool) if pool else None
    return an.tv_trial(t, factory, "label", q, rng, params=params, ap=ap, oracle=oracle,
                       pooled=pooled)


def level_tv_report(ctx: SuiteContext, spec: str, q: int, params: EquivParams, *, pairing: str,
                    ap=None, n_pairs: int = 16, pool: int | None = 64, label: str = NO):
    work = partial(_tv_worker, spec=spec, q=q, pairing=pairing, seed=ctx.seed, params=params,
                   n_pairs=n_pairs, ap=ap, oracle=ctx.oracle, pool=pool, label=label)
    return an.summarize_trials(list(ctx.mapper(work, range(ctx.trials))), q)


def suite_level_tv(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(*GOOD_NODE)
    ap = ctx.ap or an.AnalysisParams.lab(*GOOD_NODE_AP)
    q = ctx.q or 5
    spec = ctx.tester or "uniform-fresh:k=2048,which=2"
    rep = level_tv_report(ctx, spec, q, p, pairing="oracle", ap=ap)
    out = []
    for lv, cd in zip(rep.levels, rep.conditioned):
        bound = 4 * lv.level / float(ap.gamma)
        out.append(record(f"COND vs WCOND level {lv.level} TV", params_dict(p), lv.tv, lv.se, bound,
                          lv.tv <= bound + 3 * lv.se, conditioned_tv=cd.tv, conditioned_se=cd.se,
                          tester=spec, analysis=ap_dict(ap)))
    return out


def _good_worker(t: int, spec: str, q: int, seed: int, params: EquivParams, ap) -> tuple:
    pair = _pairs(params, seed, 16, NO if t % 2 else YES)[t % 16]
    res = run(make_tester(spec, q), pair, COND, RandomSource(seed).child("good-events", t))
    ev = an.good_events(res, pair, ap)
    return ev.good1, ev.good2, ev.good3, ev.bucket_distinct


def suite_good_events(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(*GOOD_NODE)
    ap = ctx.ap or an.AnalysisParams.lab(*GOOD_NODE_AP)
    q = ctx.q or 2
    spec = ctx.tester or "uniform-fresh:k=8192,old=1,which=2"
    rows = list(ctx.mapper(partial(_good_worker, spec=spec, q=q, seed=ctx.seed, params=p, ap=ap),
                           range(ctx.trials)))
    cond = [g3 for g1, g2, g3, _ in rows if g1 and g2]
    f3 = float(np.mean(cond)) if cond else float("nan")
    se3 = _rate_se(f3, len(cond)) if cond else float("nan")
    b3 = 1 - 2 / float(ap.gamma)
    fb = float(np.mean([r[3] for r in rows]))
    seb = _rate_se(fb, len(rows))
    bb = 1 - q * q / ap.phi
    return [record("Good3 given Good1 and Good2", params_dict(p), f3, se3, b3,
                   bool(cond) and f3 >= b3 - 3 * se3, conditioned_runs=len(cond), tester=spec,
                   analysis=ap_dict(ap)),
            record("Good2 distinct buckets", params_dict(p), fb, seb, bb, fb >= bb - 3 * seb,
                   tester=spec, analysis=ap_dict(ap))]


def suite_indistinguishability(ctx: SuiteContext) -> list[dict]:
    p = ctx.params or EquivParams.lab(*GOOD_NODE)
    q = ctx.q or 3
    names = (ctx.tester,) if ctx.tester else ("trivial-accept", "uniform-fresh", "random-policy",
                                              *RESTRICTED)
    out = []
    for name in names:
        rep = level_tv_report(ctx, name, q, p, pairing="label")
        leaf = rep.levels[-1]
        out.append(record(f"YES/NO leaf TV ({name})", params_dict(p), leaf.tv, leaf.se, 0.15,
                          leaf.tv <= 0.15, q=q, verdict_tv=rep.verdict_tv[0]))
    return out


# uniblock

def _uniblock_trial(t: int, seed: int, n: int) -> bool:
    even, odd = gen_uniblock_pair(n, RandomSource(seed).child("uniblock", t))
    return tv_exact(even.dist, odd.dist) >= Fraction(1, 2)


def suite_uniblock(ctx: SuiteContext) -> list[dict]:
    n = ctx.params.n if ctx.params else 1 << 16
    ok = sum(ctx.mapper(partial(_uniblock_trial, seed=ctx.seed, n=n), range(ctx.trials)))
    out = [record("uniblock tv >= 1/2", {"n": n}, f"{ok}/{ctx.trials}", 0.0, "1/2", ok == ctx.trials)]
    for lg in range(16, 33):
        _, per_atom, bound = an.uniblock_bad_kappas(an.uniblock_size_grid(1 << lg), 1 << lg)
        out.append(record("uniblock bad kappa per atom", {"n": 1 << lg}, max(per_atom), 0.0, bound,
                          max(per_atom) <= bound))
    beta = an.AnalysisParams.paper(n).beta if n >= 1 << 16 else 2
    for size in (1, 1 << 6, n >> 2):
        hits = list(ctx.mapper(partial(_uniblock_band_trial, seed=ctx.seed, n=n, size=size,
                                       beta=beta), range(ctx.trials)))
        rate = float(np.mean([h for h, _ in hits]))
        tail = float(np.mean([b for _, b in hits]))
        se = _rate_se(rate, ctx.trials)
        out.append(record("uniblock beta band", {"n": n, "atom": size, "beta": str(beta)}, rate, se,
                          tail, rate <= tail + 3 * se))
    return out


def _uniblock_band_trial(t: int, seed: int, n: int, size: int, beta) -> tuple:
    rng = RandomSource(seed).child("uniblock-band", size, t)
    inst = gen_uniblock_pair(n, rng.child("instance"))[t % 2]
    atom = rng.subset(n, size).astype(np.int64)
    bad = bool(an.uniblock_concentration(inst, {0: atom}, beta))
    return bad, an.uniblock_tail(size, inst.support_size, n, beta)


SUITES = {
    "tv-quarter": suite_tv_quarter,
    "buckets": suite_buckets,
    "hypergeometric": suite_hypergeometric,
    "cond-decomposition": suite_cond_decomposition,
    "pair-probe": suite_pair_probe,
    "distinguisher": suite_distinguisher,
    "bad-kappa": suite_bad_kappa,
    "restricted": suite_restricted,
    "level-tv": suite_level_tv,
    "good-events": suite_good_events,
    "indistinguishability": suite_indistinguishability,
    "uniblock": suite_uniblock,
}
