"""
Family income mobility
======================

Family income moves each year by a factor drawn from the head's income
quintile, age group and sex. Large drops are treated as job loss and land in
the bottom 15% of the income distribution; families there may leave it by a
separate exit draw.
"""

import numpy as np

from lhiem.income import BOTTOM_SHARE, IncomeSnapshot, load_exit_sampler, load_income_sampler, update_family_income
from lhiem.weighted import weighted_quantile

rng = np.random.default_rng(0)
n = 20_000
income = np.exp(rng.normal(11, 0.8, n))
w = np.ones(n)
age = rng.integers(18, 65, n)
sex = rng.integers(0, 2, n)
sampler, exits = load_income_sampler(), load_exit_sampler()

start_q = IncomeSnapshot.from_families(income, w).quintile(income)
for year in range(1, 11):
    snap = IncomeSnapshot.from_families(income, w)
    income, lost, left = update_family_income(income, age, sex, np.ones(n, bool), snap, sampler, exits, 1.02,
                                              rng.random((n, 4)))
    med = weighted_quantile(income, w, 0.5)
    print(f"year {year:2d}: median {med:9,.0f}  job losses {lost.mean():.3f}  exits from bottom {left.mean():.3f}"
          f"  p15/median {weighted_quantile(income, w, BOTTOM_SHARE) / med:.3f}")

# Ten-year quintile transition matrix.
end_q = IncomeSnapshot.from_families(income, w).quintile(income)
m = np.zeros((5, 5))
np.add.at(m, (start_q, end_q), 1)
print(np.round(m / m.sum(axis=1, keepdims=True), 2))
