"""Generate a YES/NO pair and print its bucket layout and exact distance."""

from condlab import EquivParams, RandomSource, gen_equivalence, tv_exact

params = EquivParams.lab(1 << 20, kappa=4, rho=8, tau=4)
for label in ("YES", "NO"):
    pair = gen_equivalence(params, label, RandomSource(1))
    print(f"{label}: tv(d1, d2) = {tv_exact(pair.d1, pair.d2)}")
    for j, size in enumerate(params.bucket_sizes):
        heavy = pair.d2.set_mass(pair.heavy[j])
        print(f"  bucket {j + 1}: size {size:6d}  d1 mass {pair.d1.set_mass(pair.buckets[j])}"
              f"  heavy-half d2 mass {heavy}")
