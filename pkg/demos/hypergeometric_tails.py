"""Urn-simulated hypergeometric draws against the exact pmf and the tail bound."""

import numpy as np

from condlab import HypergeomParams, RandomSource, chernoff_bound, hypergeometric_pmf
from condlab import hypergeometric_sample

p = HypergeomParams(40, 25, 50)
xs = hypergeometric_sample(p, RandomSource(0), size=50000)
for k in range(14, 27, 2):
    print(f"k={k}: empirical {np.mean(xs == k):.4f} exact {float(hypergeometric_pmf(k, p)):.4f}")
mu = float(p.mean)
for lam in (0.1, 0.2, 0.3):
    print(f"lambda={lam}: tail {np.mean(np.abs(xs - mu) >= lam * mu):.4f}"
          f" <= bound {chernoff_bound(mu, lam):.4f}")
