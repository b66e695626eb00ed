"""condlab command-line driver.

Exit codes: 0 run completed or all checks passed, 1 a verification suite
missed its threshold, 2 usage or parameter error.  Output goes to stdout and
is byte-identical for identical arguments; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import partial

from . import analysis as an
from . import suites
from .dist_core import tv_exact
from .distinguishers import DistinguisherConfig
from .instances import (EVEN, NO, ODD, YES, EquivParams, derive_paper_params, gen_equivalence,
                        gen_uniblock)
from .oracles import COND, WCOND
from .rng import RandomSource
from .testers import ZOO, level_ids, make_tester, run

SCHEMA_VERSION = 1
COMMANDS = ("gen-instance", "run-tester", "verify", "compare-oracles", "distinguish")


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="condlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("suite", nargs="?", help="verify only: " + ", ".join(suites.SUITES))
    ap.add_argument("--mode", choices=("paper", "lab"), default="lab")
    ap.add_argument("--n", type=int)
    ap.add_argument("--kappa", type=int)
    ap.add_argument("--rho", type=int)
    ap.add_argument("--tau", type=int)
    ap.add_argument("--label", choices=(YES, NO))
    ap.add_argument("--parity", choices=(EVEN, ODD), help="gen-instance: uniblock instance instead")
    ap.add_argument("--tester", help="NAME[:key=val,...]; one of " + ", ".join(sorted(ZOO)))
    ap.add_argument("--oracle", choices=("cond", "wcond"), default="cond")
    ap.add_argument("--q", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", choices=("json", "csv"), default="json")
    ap.add_argument("--reveal", action="store_true", help="include sealed transcript data")
    ap.add_argument("--gamma", type=Fraction, help="lab analysis parameter")
    ap.add_argument("--alpha", type=Fraction, help="lab analysis parameter")
    ap.add_argument("--phi", type=int, help="lab analysis parameter")
    return ap


def _seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for stochastic commands")
    if not 0 <= args.seed < 1 << 64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return args.seed


def _trials(args, default: int) -> int:
    t = default if args.trials is None else args.trials
    if t < 1:
        raise UsageError("--trials must be >= 1")
    return t


def _params(args, rng: RandomSource | None = None, default=None) -> EquivParams | None:
    """Equivalence parameters from flags; None when nothing was given and no default."""
    given = [args.n, args.kappa, args.rho, args.tau]
    if args.mode == "paper":
        if args.n is None:
            raise UsageError("paper mode needs --n")
        return derive_paper_params(args.n, rng or RandomSource(0))
    if all(v is None for v in given):
        return EquivParams.lab(*default) if default else None
    base = default or suites.LAB_DEFAULT
    n, kappa, rho, tau = (v if v is not None else d for v, d in zip(given, base))
    return EquivParams.lab(n, kappa, rho, tau)


def _analysis(args, default=None):
    vals = (args.gamma, args.alpha, args.phi)
    if all(v is None for v in vals):
        return an.AnalysisParams.lab(*default) if default else None
    base = default or suites.GOOD_NODE_AP
    return an.AnalysisParams.lab(*(v if v is not None else d for v, d in zip(vals, base)))


def _oracle(args) -> str:
    return COND if args.oracle == "cond" else WCOND


def _mapper(jobs: int):
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if jobs == 1:
        return map, None
    pool = ProcessPoolExecutor(max_workers=jobs)
    # Executor.map yields in input order, so merging is deterministic
    return partial(pool.map, chunksize=16), pool


def _emit(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=str) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# commands

def cmd_gen_instance(args) -> tuple[str, int]:
    seed = _seed(args)
    rng = RandomSource(seed)
    if args.parity:
        if args.n is None:
            raise UsageError("uniblock instances need --n")
        inst = gen_uniblock(args.n, args.parity, rng.child("instance"), kappa=args.kappa)
        body = {"kind": "uniblock", "n": args.n, "kappa": inst.kappa, "parity": inst.parity,
                "support_size": inst.support_size, "mass": str(inst.dist.masses[0])}
        rows = [["uniblock", inst.support_size, str(inst.dist.masses[0]), "", ""]]
    else:
        p = _params(args, rng.child("params"), default=suites.LAB_DEFAULT)
        pair = gen_equivalence(p, args.label or NO, rng.child("instance"))
        buckets = []
        for j, size in enumerate(p.bucket_sizes):
            buckets.append({"j": j + 1, "size": size,
                            "mass_d1": str(pair.d1.set_mass(pair.buckets[j])),
                            "mass_d2": str(pair.d2.set_mass(pair.buckets[j])),
                            "heavy_mass_d2": str(pair.d2.set_mass(pair.heavy[j])),
                            "light_mass_d2": str(pair.d2.set_mass(pair.light[j]))})
        body = {"kind": "equivalence", "label": pair.label, "params": suites.params_dict(p),
                "bucket_sizes": list(p.bucket_sizes), "epsilon": str(pair.epsilon),
                "tv_exact": str(tv_exact(pair.d1, pair.d2)), "buckets": buckets}
        if args.reveal:
            body["sealed"] = {"support_head": pair.support[:16].tolist()}
        rows = [[b["j"], b["size"], b["mass_d1"], b["heavy_mass_d2"], b["light_mass_d2"]]
                for b in buckets]
    if args.out == "csv":
        return _csv(["bucket", "size", "mass_d1", "heavy_mass_d2", "light_mass_d2"], rows), 0
    body.update(schema_version=SCHEMA_VERSION, command="gen-instance", seed=seed)
    return _emit(body), 0


def _run_trial(t: int, seed: int, params: EquivParams, label: str, spec: str, q: int,
               oracle: str, reveal: bool) -> dict:
    rng = RandomSource(seed).child("run-tester", t)
    pair = gen_equivalence(params, label, rng.child("instance"))
    res = run(make_tester(spec, q), pair, oracle, rng.child("run"))
    out = res.transcript.to_dict(reveal)
    out["trial"] = t
    out["leaf"] = level_ids(res)[-1] if res.configurations else None
    return out


def cmd_run_tester(args) -> tuple[str, int]:
    seed = _seed(args)
    trials = _trials(args, 1)
    p = _params(args, RandomSource(seed).child("params"), default=suites.GOOD_NODE)
    spec = args.tester or "uniform-fresh"
    make_tester(spec, args.q)  # validate early
    mapper, pool = _mapper(args.jobs)
    try:
        work = partial(_run_trial, seed=seed, params=p, label=args.label or NO, spec=spec,
                       q=args.q, oracle=_oracle(args), reveal=args.reveal)
        rows = list(mapper(work, range(trials)))
    finally:
        if pool:
            pool.shutdown()
    if args.out == "csv":
        return _csv(["trial", "verdict", "query_count", "leaf"],
                    [[r["trial"], r["verdict"], r["query_count"], r["leaf"]] for r in rows]), 0
    return _emit({"schema_version": SCHEMA_VERSION, "command": "run-tester", "seed": seed,
                  "trials": trials, "tester": spec, "oracle": _oracle(args),
                  "label": args.label or NO, "params": suites.params_dict(p), "runs": rows}), 0


def _suite_context(args, seed: int, trials: int, mapper) -> suites.SuiteContext:
    return suites.SuiteContext(seed=seed, trials=trials,
                               params=_params(args, RandomSource(seed).child("params")),
                               ap=_analysis(args), tester=args.tester, q=args.q,
                               oracle=_oracle(args), mapper=mapper)


def cmd_verify(args) -> tuple[str, int]:
    if args.suite not in suites.SUITES:
        raise UsageError(f"verify needs a suite: {', '.join(suites.SUITES)}")
    seed = _seed(args)
    trials = _trials(args, 200)
    mapper, pool = _mapper(args.jobs)
    try:
        reports = suites.SUITES[args.suite](_suite_context(args, seed, trials, mapper))
    finally:
        if pool:
            pool.shutdown()
    ok = all(r["pass"] for r in reports)
    if args.out == "csv":
        text = _csv(["lemma", "estimate", "se", "bound", "pass"],
                    [[r["lemma"], r["estimate"], r["se"], r["bound"], r["pass"]] for r in reports])
    else:
        text = _emit({"schema_version": SCHEMA_VERSION, "command": "verify", "suite": args.suite,
                      "seed": seed, "trials": trials, "pass": ok, "reports": reports})
    return text, 0 if ok else 1


def cmd_compare_oracles(args) -> tuple[str, int]:
    seed = _seed(args)
    trials = _trials(args, 1000)
    p = _params(args, RandomSource(seed).child("params"), default=suites.GOOD_NODE)
    ap = _analysis(args)
    q = args.q or 5
    spec = args.tester or "uniform-fresh:k=2048,which=2"
    make_tester(spec, q)
    mapper, pool = _mapper(args.jobs)
    ctx = suites.SuiteContext(seed=seed, trials=trials, mapper=mapper)
    try:
        rep = suites.level_tv_report(ctx, spec, q, p, pairing="oracle", ap=ap,
                                     label=args.label or NO)
    finally:
        if pool:
            pool.shutdown()
    levels = []
    ok = True
    for i, lv in enumerate(rep.levels):
        row = {"level": lv.level, "tv": lv.tv, "se": lv.se, "nodes": lv.nodes}
        if ap is not None:
            row["bound"] = 4 * lv.level / float(ap.gamma)
            row["pass"] = lv.tv <= row["bound"] + 3 * lv.se
            row["conditioned_tv"] = rep.conditioned[i].tv
            row["conditioned_se"] = rep.conditioned[i].se
            ok &= row["pass"]
        levels.append(row)
    if args.out == "csv":
        keys = list(levels[0])
        return _csv(keys, [[r[k] for k in keys] for r in levels]), 0 if ok else 1
    body = {"schema_version": SCHEMA_VERSION, "command": "compare-oracles", "seed": seed,
            "trials": trials, "tester": spec, "q": q, "params": suites.params_dict(p),
            "analysis": suites.ap_dict(ap), "levels": levels,
            "verdict_tv": {"estimate": rep.verdict_tv[0], "se": rep.verdict_tv[1]}}
    if rep.good_rate is not None:
        body["good_rate"] = list(rep.good_rate)
    return _emit(body), 0 if ok else 1


def cmd_distinguish(args) -> tuple[str, int]:
    seed = _seed(args)
    trials = _trials(args, 200)
    p = _params(args, RandomSource(seed).child("params"), default=suites.LAB_DEFAULT)
    cfg = DistinguisherConfig()
    labels = (args.label,) if args.label else (YES, NO)
    mapper, pool = _mapper(args.jobs)
    rows = []
    try:
        for label in labels:
            work = partial(suites._distinguish_trial, seed=seed, params=p, label=label, cfg=cfg)
            for t, r in enumerate(mapper(work, range(trials))):
                rows.append([t, label, *r])
    finally:
        if pool:
            pool.shutdown()
    header = ["trial", "label", "verdict", "queries", "probe_set_size", "found", "pairs_used"]
    if args.out == "csv":
        return _csv(header, rows), 0
    summary = {}
    for label in labels:
        mine = [r for r in rows if r[1] == label]
        summary[label] = {"accept_rate": sum(r[2] == "ACCEPT" for r in mine) / len(mine),
                          "mean_queries": sum(r[3] for r in mine) / len(mine),
                          "max_queries": max(r[3] for r in mine)}
    return _emit({"schema_version": SCHEMA_VERSION, "command": "distinguish", "seed": seed,
                  "trials": trials, "params": suites.params_dict(p),
                  "config": {"c": cfg.c, "probe_trials": cfg.probe_trials,
                             "decision_threshold": cfg.decision_threshold, "draws": cfg.draws,
                             "query_cap": cfg.query_cap},
                  "summary": summary,
                  "trials_detail": [dict(zip(header, r)) for r in rows]}), 0


HANDLERS = {
    "gen-instance": cmd_gen_instance,
    "run-tester": cmd_run_tester,
    "verify": cmd_verify,
    "compare-oracles": cmd_compare_oracles,
    "distinguish": cmd_distinguish,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    if args.suite is not None and args.command != "verify":
        print(f"condlab: unexpected argument {args.suite!r}", file=sys.stderr)
        return 2
    try:
        text, code = HANDLERS[args.command](args)
    except (UsageError, ValueError) as e:
        print(f"condlab: {e}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
