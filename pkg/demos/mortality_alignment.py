"""
Aligning deaths to a life-table target
======================================

Individual death probabilities start from the life table and rise with a
person's place in the spending distribution. Deaths are drawn and then
adjusted so their weighted count matches the year's target, and decedents'
spending is inflated for end-of-life care.
"""

import numpy as np

from lhiem.mortality import (individual_death_prob, inflate_end_of_life, load_life_table, load_link, select_deaths,
                             spending_percentile)
from lhiem.synthpop import generate_population

pop = generate_population(20_000, seed=5)
lt, link = load_life_table(), load_link()
w = pop["wt"]
pct = spending_percentile(pop["med_spend"], w)
q = individual_death_prob(lt.base_q(pop["age"], pop["sex"]), pct, link)
target = lt.target(1, pop["age"], pop["sex"], w)

for seed in range(5):
    dead = select_deaths(q, w, np.random.default_rng(seed).random(len(w)), target)
    print(f"seed {seed}: deaths {w[dead].sum():10,.0f}  target {target:10,.0f}  records {dead.sum()}")

spend = pop["med_spend"][dead]
full = inflate_end_of_life(spend, q[dead], pop["morbidity"][dead], link)
chronic = inflate_end_of_life(spend, q[dead], pop["morbidity"][dead], link, chronic_only=True)
print(f"decedent spending {spend.sum():,.0f} -> {full.sum():,.0f} (all), {chronic.sum():,.0f} (chronic only)")
