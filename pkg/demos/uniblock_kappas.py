"""Uniblock pairs: exact separation and the per-atom count of bad kappas."""

from condlab import RandomSource, tv_exact
from condlab.analysis import uniblock_bad_kappas, uniblock_size_grid
from condlab.instances import gen_uniblock_pair

even, odd = gen_uniblock_pair(1 << 16, RandomSource(2))
print(f"kappa {even.kappa}: sizes {even.support_size}/{odd.support_size}, "
      f"tv = {tv_exact(even.dist, odd.dist)}")
for lg in (16, 20, 24, 28, 32):
    _, per_atom, bound = uniblock_bad_kappas(uniblock_size_grid(1 << lg), 1 << lg)
    print(f"n=2^{lg}: worst atom has {max(per_atom)} bad kappas (bound {bound})")
