"""
Building a synthetic starting population
========================================

Families are drawn from size and age templates, raked to the age, sex and
insurance margins, and given survey-style spending by demographic cell.
"""

import numpy as np

from lhiem.population import AGE_GROUPS, FEMALE, INS_CAT, age_group, weighted_spending_summary
from lhiem.synthpop import generate_population, load_targets

pop = generate_population(20_000, seed=0)
print(f"{len(pop)} persons in {pop.n_families} families, {pop['wt'].sum() / 1e6:.1f}M weighted")

# Mean spending by bucket of the spending distribution, next to the targets.
targets = load_targets()
summary = weighted_spending_summary(pop)
for k, v in summary.items():
    print(f"  {k:>10}: {v:9,.0f}   target {targets.spending_bucket_means[k]:9,.0f}")

# Every five-year age band holds 7-10% of the weight.
w = pop["wt"]
shares = np.bincount(np.minimum(pop["age"] // 5, 12), weights=w) / w.sum()
print("five-year age shares:", np.round(100 * shares, 1))

# Percent female and insurance mix by age group.
ag = age_group(pop["age"])
for g, name in enumerate(AGE_GROUPS):
    sel = ag == g
    female = 100 * w[sel & (pop["sex"] == FEMALE)].sum() / w[sel].sum()
    mix = np.bincount(pop["ins_cat"][sel], weights=w[sel], minlength=len(INS_CAT)) / w[sel].sum()
    print(f"  {name:>5}: {female:.1f}% female, " + ", ".join(f"{c} {100 * m:.0f}%" for c, m in zip(INS_CAT, mix)))
