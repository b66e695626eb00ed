"""The known-support distinguisher: verdict rates and query counts across n."""

import numpy as np

from condlab import EquivParams, RandomSource, gen_equivalence
from condlab.distinguishers import DistinguisherConfig, known_support_distinguish

cfg = DistinguisherConfig()
print("query cap", cfg.query_cap)
for lg in (20, 24, 28):
    p = EquivParams.lab(1 << lg, 4, 8, 4)
    for label in ("YES", "NO"):
        rng = RandomSource(lg).child(label)
        res = [known_support_distinguish(gen_equivalence(p, label, rng.child("i", t)), p.m, cfg,
                                         rng.child("r", t)) for t in range(50)]
        acc = np.mean([r.verdict == "ACCEPT" for r in res])
        print(f"n=2^{lg} {label}: accept rate {acc:.2f}, "
              f"mean queries {np.mean([r.queries for r in res]):.0f}")
