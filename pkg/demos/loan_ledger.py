"""
Loan-financed coverage for three families
=========================================

Eligible members borrow their covered costs each year. Interest accrues on
the balance after new draws, and repayment is capped at a share of family
income above a poverty-line multiple.
"""

import numpy as np

from lhiem.income import load_fpl
from lhiem.policy import LoanLedger, PolicyParams, apply_policy_year, federal_cost_summary
from lhiem.population import Population, PersonRecord

people = [
    PersonRecord("a1", "low", "low", 1.0, 1.0, "Female", 34, "Black", fam_income=18_000.0, ins_cat="Uninsured"),
    PersonRecord("a2", "low", "low", 1.0, 1.0, "Male", 6, "Black", fam_income=18_000.0, ins_cat="Uninsured"),
    PersonRecord("b1", "mid", "mid", 1.0, 1.0, "Male", 50, "White", fam_income=70_000.0, ins_cat="NonGroupPrivate",
                 deduct=2_000.0),
    PersonRecord("c1", "high", "high", 1.0, 1.0, "Female", 45, "Hispanic", fam_income=250_000.0,
                 ins_cat="Uninsured"),
]
pop = Population.from_records(people, 0)
fpl = load_fpl()
params = PolicyParams()
ledger = LoanLedger()
rng = np.random.default_rng(1)

for year in range(1, 6):
    pop.data["med_spend"] = np.round(rng.exponential(4_000, len(pop)), 2)
    oop, ledger, _ = apply_policy_year(pop, ledger, params, fpl, year)
    balances = {f: round(a[0]) for f, a in sorted(ledger.accounts.items())}
    print(f"year {year}: status quo OOP {oop['sq_oop'].sum():8,.0f}  policy OOP {oop['policy_oop'].sum():8,.0f}"
          f"  balances {balances}")

print(federal_cost_summary(ledger).round(0).to_string(index=False))
print("ledger identity error:", ledger.identity_error())
