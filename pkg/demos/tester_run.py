"""Play a zoo tester against COND and WCOND and show the transcripts."""

import json

from condlab import COND, WCOND, EquivParams, RandomSource, gen_equivalence, make_tester, run

pair = gen_equivalence(EquivParams.lab(1 << 16, 8, 2, 6), "NO", RandomSource(3))
for oracle in (COND, WCOND):
    res = run(make_tester("uniform-fresh:k=2048,which=2", 3), pair, oracle, RandomSource(5))
    tr = res.transcript.to_dict(reveal=True)
    print(oracle, "verdict", res.verdict)
    print("  configurations", tr["configurations"])
    print("  samples", tr["sealed"]["samples"], "atom picks", tr["sealed"]["atom_picks"])
    print("  directives", json.dumps(tr["directives"]))
