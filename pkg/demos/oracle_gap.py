"""Per-level node distance between COND and WCOND runs, with the 4i/gamma bound."""

from condlab import EquivParams, RandomSource, gen_equivalence, make_tester
from condlab.analysis import AnalysisParams, estimate_level_tv
from condlab.suites import GOOD_NODE, GOOD_NODE_AP

params = EquivParams.lab(*GOOD_NODE)
ap = AnalysisParams.lab(*GOOD_NODE_AP)
q, trials = 5, 1000
pairs = [gen_equivalence(params, "NO", RandomSource(15).child(i)) for i in range(16)]
rep = estimate_level_tv(lambda: make_tester("uniform-fresh:k=2048,which=2", q), "oracle", q,
                        trials, RandomSource(15), pairs=pairs, ap=ap)
print(f"{trials} runs per side, Good1 and Good2 rates {rep.good_rate}")
for lv, cd in zip(rep.levels, rep.conditioned):
    print(f"level {lv.level}: tv {lv.tv:.4f} +- {lv.se:.4f}  conditioned {cd.tv:.4f}"
          f"  bound {4 * lv.level / float(ap.gamma):.4f}  nodes {lv.nodes}")
