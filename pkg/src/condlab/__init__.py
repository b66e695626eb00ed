"""Simulation lab for distribution testing with conditional-sampling oracles."""

from .dist_core import (HypergeomParams, StructuredDistribution, SupportRange, chernoff_bound,
                        cond_sample, element_mass, hypergeometric_pmf, hypergeometric_sample,
                        set_mass, tv_exact)
from .instances import (NO, YES, EquivParams, InstancePair, UniblockInstance, derive_paper_params,
                        gen_equivalence, gen_uniblock)
from .oracles import COND, WCOND, QueryDirective, QuerySet, Transcript, answer_cond, answer_wcond
from .rng import RandomSource
from .testers import ACCEPT, REJECT, AtomPartition, CoreAdaptiveTester, make_tester, run

__version__ = "0.1.0"

__all__ = [
    "ACCEPT", "REJECT", "COND", "WCOND", "YES", "NO",
    "AtomPartition", "CoreAdaptiveTester", "EquivParams", "HypergeomParams", "InstancePair",
    "QueryDirective", "QuerySet", "RandomSource", "StructuredDistribution", "SupportRange",
    "Transcript", "UniblockInstance",
    "answer_cond", "answer_wcond", "chernoff_bound", "cond_sample", "derive_paper_params",
    "element_mass", "gen_equivalence", "gen_uniblock", "hypergeometric_pmf",
    "hypergeometric_sample", "make_tester", "run", "set_mass", "tv_exact",
]
