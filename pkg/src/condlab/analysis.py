"""Lemma checks: phi_A, node classification, good events, bad-kappa counting,
concentration reports and level TV estimation.

Band and threshold comparisons use exact rationals.  Monte Carlo estimates
are floats with jackknife standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .dist_core import chernoff_bound
from .instances import (NO, YES, EquivParams, InstancePair, UniblockInstance, gen_equivalence,
                        log2_exact, sqrt_ceil)
from .oracles import COND, PICK_U, WCOND
from .rng import RandomSource
from .testers import RunResult, level_ids, run

GOOD, BAD = "good", "bad"


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _log2(x) -> float:
    """log2 that is exact for powers of two (int or Fraction)."""
    x = _frac(x)
    if x.numerator & (x.numerator - 1) == 0 and x.denominator & (x.denominator - 1) == 0:
        return x.numerator.bit_length() - x.denominator.bit_length()
    return math.log2(x.numerator) - math.log2(x.denominator)


@dataclass(frozen=True)
class AnalysisParams:
    gamma: Fraction
    alpha: Fraction
    phi: int
    beta: Fraction = Fraction(2)
    delta: Fraction = Fraction(1, 100)
    mode: str = "lab"
    loose_cond3: bool = False

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta", "delta"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        if not (self.gamma > 2 and self.alpha > 1 and self.phi >= 1 and self.beta > 1):
            raise ValueError("need gamma > 2, alpha > 1, phi >= 1, beta > 1")

    @classmethod
    def lab(cls, gamma, alpha, phi: int, beta=2, loose_cond3: bool = False) -> "AnalysisParams":
        return cls(_frac(gamma), _frac(alpha), int(phi), _frac(beta), mode="lab",
                   loose_cond3=loose_cond3)

    @classmethod
    def paper(cls, n: int) -> "AnalysisParams":
        """Paper values rounded up to powers of two (phi up to an integer)."""
        lg = log2_exact(n)
        if lg < 16:
            raise ValueError("paper-mode analysis parameters need n >= 2^16")
        llg = math.log2(lg)
        gamma = Fraction(2) ** math.ceil(9 * math.log2(llg) - 1e-12)
        alpha = Fraction(2) ** math.ceil(llg**3 - 1e-9)
        phi = math.ceil(llg**20 - 1e-6)
        beta = Fraction(2) ** (math.isqrt(lg) // 4 if isinstance(lg, int) else math.floor(math.sqrt(lg) / 4))
        return cls(gamma, alpha, phi, beta, mode="paper")


@dataclass(frozen=True)
class NodeClass:
    verdict: str
    violated: frozenset = frozenset()


def phi_of(atom_size: int, p: EquivParams, ap: AnalysisParams) -> int:
    return _phi(atom_size, p.n, p.b, p.rho, p.tau, ap.alpha)


def _phi(size: int, n: int, b: int, rho: int, tau: int, alpha: Fraction) -> int:
    an, ad = alpha.numerator, alpha.denominator
    for d in range(tau):
        # size * b * rho^(tau-d) / n < 1/alpha
        if size * b * rho ** (tau - d) * an < n * ad:
            return d
    return tau


def _atom_sizes(atoms) -> list[int]:
    if isinstance(atoms, Mapping):
        return [int(v) for v in atoms.values()]
    return [int(s[1]) if isinstance(s, tuple) else int(s) for s in atoms]


def _piece_sizes(u) -> list[int]:
    return _atom_sizes(u)


def _atom_bad(a: int, n: int, b: int, rho: int, tau: int, ap: AnalysisParams) -> set:
    """Violated atom conditions (1 and 2) for one atom size, in integers."""
    an, ad = ap.alpha.numerator, ap.alpha.denominator
    bad = set()
    for j in range(1, tau + 1):
        x = a * b * rho**j
        # alpha <= x/n or x/n <= 1/alpha
        if not (x * ad >= an * n or x * an <= ad * n):
            bad.add("cond1")
            break
    e = tau - ap.phi
    if e >= 0:
        large = a * b * rho**e * ad >= an * n
    else:
        large = a * b * ad >= an * n * rho ** (-e)
    small = a * b * rho**tau * an <= ad * n
    if not (large or small):
        bad.add("cond2")
    return bad


def _u_bad(total: int, n: int, b: int, rho: int, tau: int, ap: AnalysisParams) -> bool:
    """Condition 3 for one U set; ``total`` is the sum of phi_A |A| over its pieces."""
    gn, gd = ap.gamma.numerator, ap.gamma.denominator
    for j in range(1, tau + 1):
        if ap.loose_cond3:
            # total/(tau n) >= gamma  or  <= 1/gamma
            ok = total * gd >= gn * tau * n or total * gn <= gd * tau * n
        else:
            # total/(tau n) >= gamma/(tau b rho^j)  or  <= 1/(gamma tau b rho^j)
            x = total * b * rho**j
            ok = x * gd >= gn * n or x * gn <= gd * n
        if not ok:
            return True
    return False


def _classify(sizes: Sequence[int], u_history: Sequence, n: int, b: int, rho: int, tau: int,
              ap: AnalysisParams) -> NodeClass:
    bad = set()
    for a in set(sizes):
        if a:
            bad |= _atom_bad(a, n, b, rho, tau, ap)
    for u in u_history:
        total = sum(_phi(c, n, b, rho, tau, ap.alpha) * c for c in _piece_sizes(u))
        if _u_bad(total, n, b, rho, tau, ap):
            bad.add("cond3")
    return NodeClass(BAD if bad else GOOD, frozenset(bad))


def classify_node(atoms, u_history, p: EquivParams, ap: AnalysisParams) -> NodeClass:
    """Good/bad verdict for a node with the given atoms and fresh-set history.

    ``atoms`` maps atom id -> size (or is a list of sizes / (id, size));
    each entry of ``u_history`` maps atom id -> fresh count of one U set.
    """
    return _classify(_atom_sizes(atoms), u_history, p.n, p.b, p.rho, p.tau, ap)


def kappa_bound(q: int, p: EquivParams, ap: AnalysisParams) -> float:
    """tau 2^(q+1) log a + 2^q (2 log a + phi log rho) + 2 q tau log g."""
    la, lg, lr = _log2(ap.alpha), _log2(ap.gamma), _log2(p.rho)
    return (p.tau * 2 ** (q + 1) * la + 2**q * (2 * la + ap.phi * lr) + 2 * q * p.tau * lg)


def count_bad_kappas(atom_sizes, u_decomps, p: EquivParams, ap: AnalysisParams):
    """Count kappa in {0..floor(log2 n / 2)} making the node bad; returns (count, bound).

    Only n, rho and tau of ``p`` are used.
    """
    sizes = _atom_sizes(atom_sizes)
    kmax = math.floor(log2_exact(p.n) / 2)
    count = sum(1 for k in range(kmax + 1)
                if _classify(sizes, u_decomps, p.n, 1 << k, p.rho, p.tau, ap).verdict == BAD)
    return count, kappa_bound(len(u_decomps), p, ap)


def bad_kappa_intervals(atom_sizes, p: EquivParams, ap: AnalysisParams) -> set[int]:
    """Kappas in the union of the K1 and K2 open intervals (no U sets)."""
    out = set()
    kmax = math.floor(log2_exact(p.n) / 2)
    for a in _atom_sizes(atom_sizes):
        if a == 0:
            continue
        for k in range(kmax + 1):
            b = 1 << k
            # K1: n/(alpha a rho^j) < b < n alpha/(a rho^j)
            for j in range(1, p.tau + 1):
                if Fraction(p.n, a * p.rho**j) / ap.alpha < b < Fraction(p.n, a * p.rho**j) * ap.alpha:
                    out.add(k)
            # K2: n/(alpha a rho^tau) < b < n alpha rho^phi/(a rho^tau)
            lo = Fraction(p.n, a * p.rho**p.tau) / ap.alpha
            hi = Fraction(p.n, a * p.rho**p.tau) * ap.alpha * Fraction(p.rho) ** ap.phi
            if lo < b < hi:
                out.add(k)
    return out


@dataclass
class Violation:
    atom: object
    kind: str
    index: int
    observed: Fraction
    expected: Fraction


class Complement:
    """Marker for the never-queried atom: everything outside ``explicit``."""

    def __init__(self, explicit: np.ndarray):
        self.explicit = np.asarray(explicit, dtype=np.int64)


def _bucket_counts(pair: InstancePair, elems: np.ndarray) -> np.ndarray:
    return np.bincount(pair.bucket_of(elems), minlength=pair.params.tau + 1)[1:]


def concentration_report(pair: InstancePair, atoms: Mapping, ap: AnalysisParams) -> list[Violation]:
    """Bucket-count and mass bands for every atom (values: arrays or Complement)."""
    p = pair.params
    out = []
    for key, content in atoms.items():
        if isinstance(content, Complement):
            size = p.n - content.explicit.size
            counts = np.asarray(p.bucket_sizes) - _bucket_counts(pair, content.explicit)
            masses = [1 - pair.dist(k).set_mass(content.explicit) for k in (1, 2)]
        else:
            arr = np.asarray(content, dtype=np.int64)
            size = arr.size
            counts = _bucket_counts(pair, arr)
            masses = [pair.dist(k).set_mass(arr) for k in (1, 2)]
        if size == 0:
            continue
        phi_a = phi_of(size, p, ap)
        lo, hi = 1 - 1 / ap.gamma, 1 + 1 / ap.gamma
        for j in range(1, p.tau + 1):
            c = int(counts[j - 1])
            mu = Fraction(size * p.b * p.rho**j, p.n)
            if j <= p.tau - phi_a:
                if c != 0:
                    out.append(Violation(key, "bucket-zero", j, Fraction(c), Fraction(0)))
            elif not lo * mu <= c <= hi * mu:
                out.append(Violation(key, "bucket-band", j, Fraction(c), mu))
        expect = Fraction(phi_a * size, p.tau * p.n)
        for k, m in zip((1, 2), masses):
            if phi_a == 0:
                if m != 0:
                    out.append(Violation(key, "mass-zero", k, m, Fraction(0)))
            elif not lo * expect <= m <= hi * expect:
                out.append(Violation(key, "mass-band", k, m, expect))
    return out


def concentration_tail(atom_sizes, p: EquivParams, ap: AnalysisParams) -> float:
    """Union bound on any concentration violation for atoms of these sizes.

    Markov for buckets that must be empty; the Chernoff lemma with
    lambda = 1/gamma for whole buckets and for both halves (which covers the
    split-mass band).
    """
    lam = 1 / float(ap.gamma)
    total = 0.0
    for size in _atom_sizes(atom_sizes):
        if size == 0:
            continue
        phi_a = phi_of(size, p, ap)
        for j in range(1, p.tau + 1):
            mu = size * p.b * p.rho**j / p.n
            if j <= p.tau - phi_a:
                total += mu
            else:
                total += chernoff_bound(mu, lam) + 2 * chernoff_bound(mu / 2, lam)
    return min(1.0, total)


@dataclass
class EventReport:
    good1: bool
    good2: bool
    good3: bool
    bucket_distinct: bool
    ratios_ok: bool
    first_bad: int | None = None
    min_ratio: float | None = None


def node_history(result: RunResult):
    """(atom registry, U decompositions) for the node reached after each query."""
    tr = result.transcript
    u_hist = [{s: int(a.size) for s, a in q.pieces.items()} for q in tr.queries]
    return [(tr.partitions[i], u_hist[:i + 1]) for i in range(tr.query_count)]


def good_events(result: RunResult, pair: InstancePair, ap: AnalysisParams) -> EventReport:
    tr = result.transcript
    p = pair.params
    first_bad = None
    for i, (atoms, u_hist) in enumerate(node_history(result)):
        if _classify(_atom_sizes(atoms), u_hist, p.n, p.b, p.rho, p.tau, ap).verdict == BAD:
            first_bad = i + 1
            break
    good1 = first_bad is None

    samples = tr.samples
    d = (pair.d1, pair.d2)
    uniq = sorted(set(samples))
    m1 = {s: d[0].element_mass(s) for s in uniq}
    m2 = {s: d[1].element_mass(s) for s in uniq}
    live = [s for s in uniq if m1[s] or m2[s]]
    buckets = pair.bucket_of(np.asarray(live, dtype=np.int64)).tolist() if live else []
    bucket_distinct = len(set(buckets)) == len(buckets)

    lo, hi = 1 / (3 * ap.gamma), 3 * ap.gamma
    ratios_ok = True
    u_mass = []
    for i, qs in enumerate(tr.queries):
        um = (d[0].set_mass(qs.u), d[1].set_mass(qs.u))
        u_mass.append(um)
        for s in set(samples[:i + 1]):
            for k, ms in ((0, m1[s]), (1, m2[s])):
                if ms and lo <= um[k] / ms <= hi:
                    ratios_ok = False
    good2 = bucket_distinct and ratios_ok

    good3 = True
    min_ratio = math.inf
    for i, (qs, step) in enumerate(zip(tr.queries, tr.steps)):
        cands = [(e, (m1[e], m2[e])) for e in qs.o.tolist()]
        if qs.u.size:
            cands.append((PICK_U, u_mass[i]))
        if len(cands) == 1:
            heaviest = 0
        else:
            heaviest = None
            for h, (_, mh) in enumerate(cands):
                if all(mh[k] > me[k] for g, (_, me) in enumerate(cands) if g != h for k in (0, 1)):
                    heaviest = h
                    break
            if heaviest is not None:
                mh = cands[heaviest][1]
                for g, (_, me) in enumerate(cands):
                    if g != heaviest:
                        for k in (0, 1):
                            min_ratio = min(min_ratio, float(mh[k] / me[k]) if me[k] else math.inf)
        picked = len(qs.o) if step.pick == PICK_U else step.pick
        if heaviest is None or picked != heaviest:
            good3 = False
    return EventReport(good1, good2, good3, bucket_distinct, ratios_ok, first_bad,
                       None if min_ratio == math.inf else min_ratio)


@dataclass
class LevelTV:
    level: int
    tv: float
    se: float
    nodes: int


def plugin_tv(xs: Sequence, ys: Sequence) -> tuple[float, float]:
    """Plug-in TV between two empirical distributions with a jackknife SE.

    Deletion is done side by side (the two samples are treated as
    independent); the two jackknife variances are added.
    """
    if not xs or not ys:
        return float("nan"), float("nan")
    cats = {v: i for i, v in enumerate(sorted(set(xs) | set(ys)))}
    a = np.bincount([cats[v] for v in xs], minlength=len(cats)).astype(float)
    b = np.bincount([cats[v] for v in ys], minlength=len(cats)).astype(float)
    na, nb = len(xs), len(ys)
    tv = 0.5 * np.abs(a / na - b / nb).sum()
    var = 0.0
    for own, other, n_own, n_other in ((a, b, na, nb), (b, a, nb, na)):
        if n_own < 2:
            continue
        base = np.abs(own / (n_own - 1) - other / n_other)
        total = base.sum()
        # deleting one observation of category c
        loo = 0.5 * (total - base + np.abs((own - 1) / (n_own - 1) - other / n_other))
        w = own / n_own
        mean = (w * loo).sum()
        var += (n_own - 1) * (own * (loo - mean) ** 2).sum() / n_own
    return float(tv), float(math.sqrt(var))


def level_tv(paths_a: Sequence[Sequence[str]], paths_b: Sequence[Sequence[str]], q: int,
             keep_a=None, keep_b=None) -> list[LevelTV]:
    out = []
    for i in range(q):
        xs = [p[i] for t, p in enumerate(paths_a) if len(p) > i and (keep_a is None or keep_a[t])]
        ys = [p[i] for t, p in enumerate(paths_b) if len(p) > i and (keep_b is None or keep_b[t])]
        tv, se = plugin_tv(xs, ys)
        out.append(LevelTV(i + 1, tv, se, len(set(xs) | set(ys))))
    return out


@dataclass
class TVReport:
    levels: list
    conditioned: list | None = None
    good_rate: tuple | None = None
    verdict_tv: tuple | None = None
    extras: dict = field(default_factory=dict)


@dataclass
class TrialRecord:
    """Both sides of one trial: node paths, verdicts and Good1-and-Good2 flags."""

    paths: tuple
    verdicts: tuple
    flags: tuple | None = None


def label_pool(params: EquivParams, size: int, rng: RandomSource) -> tuple[list, list]:
    """``size`` YES and ``size`` NO instances for pooled label pairing."""
    return tuple([gen_equivalence(params, lab, rng.child("pool", lab, i)) for i in range(size)]
                 for lab in (YES, NO))


def tv_trial(t: int, tester_factory: Callable, pairing: str, q: int, rng: RandomSource, *,
             pairs: Sequence[InstancePair] | None = None, params: EquivParams | None = None,
             ap: AnalysisParams | None = None, oracle: str = COND,
             sides: tuple[str, str] | None = None, pooled=None) -> TrialRecord:
    """Run trial t on both sides; side streams are both rng.child(t)."""
    if pairing not in ("oracle", "label"):
        raise ValueError("pairing must be 'oracle' or 'label'")
    trial_rng = rng.child(t)
    paths, verdicts, flags = [], [], []
    for side in (0, 1):
        if pairing == "oracle":
            pair, kind = pairs[t % len(pairs)], (sides or (COND, WCOND))[side]
        else:
            if pooled:
                pair = pooled[side][t % len(pooled[side])]
            else:
                pair = gen_equivalence(params, (YES, NO)[side], trial_rng.child("instance"))
            kind = oracle
        res = run(tester_factory(), pair, kind, trial_rng.child("run"))
        paths.append(level_ids(res, q))
        verdicts.append(res.verdict)
        if ap is not None:
            ev = good_events(res, pair, ap)
            flags.append(ev.good1 and ev.good2)
    return TrialRecord(tuple(paths), tuple(verdicts), tuple(flags) if ap is not None else None)


def summarize_trials(records: Sequence[TrialRecord], q: int) -> TVReport:
    """Merge trial records (in trial order) into per-level TV estimates."""
    paths = [[r.paths[s] for r in records] for s in (0, 1)]
    verdicts = [[r.verdicts[s] for r in records] for s in (0, 1)]
    rep = TVReport(level_tv(paths[0], paths[1], q), verdict_tv=plugin_tv(verdicts[0], verdicts[1]))
    if records and records[0].flags is not None:
        flags = [[r.flags[s] for r in records] for s in (0, 1)]
        rep.conditioned = level_tv(paths[0], paths[1], q, flags[0], flags[1])
        rep.good_rate = (float(np.mean(flags[0])), float(np.mean(flags[1])))
    return rep


def estimate_level_tv(tester_factory: Callable, pairing: str, q: int, trials: int, rng: RandomSource,
                      *, pairs: Sequence[InstancePair] | None = None, params: EquivParams | None = None,
                      ap: AnalysisParams | None = None, oracle: str = COND,
                      sides: tuple[str, str] | None = None, pool: int | None = None) -> TVReport:
    """Per-level node TV between two run regimes.

    pairing="oracle": side A uses COND, side B WCOND (or ``sides``) on the
    given instances, cycled by trial.  pairing="label": one oracle, side A on
    YES instances, side B on NO instances, fresh per trial or cycled from
    ``pool`` instances per side.  Testers are label-blind and an instance is
    a uniform relabeling of a fixed layout, so a pool leaves the node law
    unchanged.  With ``ap`` the report also carries the estimate restricted
    to runs where Good1 and Good2 hold.
    """
    if pairing not in ("oracle", "label"):
        raise ValueError("pairing must be 'oracle' or 'label'")
    pooled = label_pool(params, pool, rng) if pairing == "label" and pool else None
    records = [tv_trial(t, tester_factory, pairing, q, rng, pairs=pairs, params=params, ap=ap,
                        oracle=oracle, sides=sides, pooled=pooled) for t in range(trials)]
    return summarize_trials(records, q)


# uniblock instances

LARGE, SMALL, NEITHER = "large", "small", "neither"


def _sqrt_log(n: int):
    lg = log2_exact(n)
    if isinstance(lg, int) and math.isqrt(lg) ** 2 == lg:
        return math.isqrt(lg)
    return math.sqrt(lg)


def uniblock_classify(atom_size: int, support_size: int, n: int) -> str:
    """large if |A||S|/n >= 2^sqrt(log n), small if < 2^-sqrt(log n)."""
    if atom_size == 0:
        return SMALL
    t = _sqrt_log(n)
    x = Fraction(atom_size * support_size, n)
    if isinstance(t, int):
        thr = Fraction(2) ** t
        return LARGE if x >= thr else SMALL if x < 1 / thr else NEITHER
    lx = _log2(x)
    return LARGE if lx >= t else SMALL if lx < -t else NEITHER


def uniblock_kappas(n: int) -> range:
    lg = log2_exact(n)
    return range(math.ceil(lg / 8), math.floor(3 * lg / 8) + 1)


def uniblock_size_grid(n: int) -> list[int]:
    """Atom sizes covering every interval on which the classification is constant.

    Each threshold |A| = 2^(+-sqrt(log n)) n / |S| contributes the sizes just
    below and at it, so scanning this grid is exhaustive over 1..n.
    """
    t = _sqrt_log(n)
    lg = log2_exact(n)
    out = {1, n}
    for k in uniblock_kappas(n):
        for s_exp in (2 * k, 2 * k + 1):
            for sign in (1, -1):
                e = lg + sign * t - s_exp
                if isinstance(e, int):
                    v = 1 << e if e >= 0 else 1
                else:
                    v = math.ceil(2.0**e)
                for size in (v - 1, v):
                    if 1 <= size <= n:
                        out.add(size)
    return sorted(out)


def uniblock_bad_kappas(atom_sizes, n: int):
    """(kappas where some atom is 'neither' for S_e or S_o, per-atom counts, per-atom bound)."""
    sizes = _atom_sizes(atom_sizes)
    bad_any = set()
    per_atom = []
    for a in sizes:
        bad = {k for k in uniblock_kappas(n)
               if NEITHER in (uniblock_classify(a, 1 << (2 * k), n),
                              uniblock_classify(a, 1 << (2 * k + 1), n))}
        per_atom.append(len(bad))
        bad_any |= bad
    return len(bad_any), per_atom, 2 * sqrt_ceil(log2_exact(n))


def uniblock_concentration(instance: UniblockInstance, atoms: Mapping, beta) -> list[Violation]:
    d = instance.dist
    beta = _frac(beta)
    out = []
    for key, content in atoms.items():
        arr = np.asarray(content, dtype=np.int64)
        cls = uniblock_classify(arr.size, d.m, d.n)
        hits = int((d.layers_of(arr) >= 0).sum()) if arr.size else 0
        expect = Fraction(arr.size * d.m, d.n)
        if cls == SMALL and hits:
            out.append(Violation(key, "uniblock-zero", 0, Fraction(hits), Fraction(0)))
        elif cls == LARGE and not (1 - 1 / beta) * expect <= hits <= (1 + 1 / beta) * expect:
            out.append(Violation(key, "uniblock-band", 0, Fraction(hits), expect))
    return out


def uniblock_tail(atom_size: int, support_size: int, n: int, beta) -> float:
    """Markov for small atoms, the Chernoff lemma with lambda = 1/beta for large ones."""
    cls = uniblock_classify(atom_size, support_size, n)
    mu = atom_size * support_size / n
    if cls == SMALL:
        return min(1.0, mu)
    if cls == LARGE:
        return min(1.0, chernoff_bound(mu, 1 / float(_frac(beta))))
    return 1.0
