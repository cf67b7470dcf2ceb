import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhiem.income import FplTable
from lhiem.policy import (CLOSED, OPEN, WRITTEN_OFF, LoanLedger, PolicyParams, apply_policy_year,
                          federal_cost_summary, status_quo_oop)
from lhiem.population import INS_CAT

from helpers import family_of, person, toy_population

FPL = FplTable(np.array([12_490.0, 16_910.0]), 4_420.0, 0.0)
UNINS = INS_CAT.index("Uninsured")
NONGROUP = INS_CAT.index("NonGroupPrivate")
ZERO = PolicyParams(repay_rate=0.0, interest=0.0, utilization=(1.0,) * 5, price=1.0)


def _run(pop, params, years, spend=None, ledger=None):
    ledger = ledger or LoanLedger()
    for y in range(1, years + 1):
        if spend is not None:
            pop = pop.copy()
            pop.data["med_spend"] = spend(y, len(pop))
        oop, ledger, summary = apply_policy_year(pop, ledger, params, FPL, y)
    return oop, ledger, summary


# -- status quo comparator -------------------------------------------------------------
def test_status_quo_uninsured_pays_all():
    assert status_quo_oop([1000.0], [UNINS], [0.0])[0] == 1000.0


def test_status_quo_deductible_and_coinsurance():
    assert status_quo_oop([1500.0], [NONGROUP], [500.0])[0] == pytest.approx(700.0)


def test_status_quo_zero_spend():
    assert status_quo_oop([0.0, 0.0], [UNINS, NONGROUP], [0.0, 500.0]).tolist() == [0.0, 0.0]


# -- ledger accounting -----------------------------------------------------------------------
def test_all_zero_params_balance_is_cumulative_spend():
    pop = toy_population(family_of(3, "a", income=500_000.0, ins_cat="Uninsured")
                         + family_of(2, "b", income=20_000.0, ins_cat="NonGroupPrivate"))
    spend = np.array([100.0, 200.0, 300.0, 400.0, 500.0])
    _, ledger, _ = _run(pop, ZERO, 4, spend=lambda y, n: spend * y)
    t = ledger.totals()
    assert t["balance"] == pytest.approx(spend.sum() * (1 + 2 + 3 + 4))
    assert t["repaid"] == 0.0 and t["interest"] == 0.0
    assert ledger.accounts["a"][0] == pytest.approx(600.0 * 10)


def test_full_repayment_when_surplus_covers_balance():
    pop = toy_population(family_of(2, "a", income=1e6, ins_cat="Uninsured", med_spend=3000.0))
    params = PolicyParams(repay_rate=1.0, interest=0.0, utilization=(1.0,) * 5, price=1.0)
    oop, ledger, _ = _run(pop, params, 3)
    acc = ledger.accounts["a"]
    assert acc[0] == 0.0 and ledger.status["a"] == CLOSED
    assert acc[3] == pytest.approx(3 * 6000.0)
    assert oop["policy_oop"].sum() == pytest.approx(6000.0)


def test_repayment_capped_by_means_test():
    income = 30_000.0
    pop = toy_population(family_of(2, "a", income=income, ins_cat="Uninsured", med_spend=50_000.0))
    params = PolicyParams(repay_rate=0.5, threshold_fpl=1.0, interest=0.0, utilization=(1.0,) * 5, price=1.0)
    _, ledger, _ = _run(pop, params, 1)
    assert ledger.accounts["a"][3] == pytest.approx(0.5 * (income - FPL.threshold(2)))


def test_compound_interest_without_repayment():
    pop = toy_population([person("p", "a", ins_cat="Uninsured", med_spend=100.0, fam_income=0.0)])
    params = PolicyParams(repay_rate=0.0, interest=0.05, utilization=(1.0,) * 5, price=1.0)
    _, ledger, _ = _run(pop, params, 2, spend=lambda y, n: np.full(n, 100.0 if y == 1 else 0.0))
    assert ledger.accounts["a"][0] == pytest.approx(110.25, rel=1e-12)
    assert federal_cost_summary(ledger)["balance"].iloc[-1] == pytest.approx(110.25, rel=1e-12)


def test_interest_charged_after_draws_before_repayment():
    pop = toy_population([person("p", "a", ins_cat="Uninsured", med_spend=1000.0, fam_income=20_000.0)])
    params = PolicyParams(repay_rate=0.1, threshold_fpl=1.0, interest=0.1, utilization=(1.0,) * 5, price=1.0)
    _, ledger, _ = _run(pop, params, 1)
    pay = min(1100.0, 0.1 * (20_000.0 - FPL.threshold(1)))
    assert ledger.accounts["a"][2] == pytest.approx(100.0)
    assert ledger.accounts["a"][0] == pytest.approx(1100.0 - pay)


def test_ineligible_keep_status_quo():
    pop = toy_population(family_of(2, "a", ins_cat="OtherPrivate", med_spend=1500.0, deduct=500.0)
                         + [person("old", "b", age=70, ins_cat="Uninsured", med_spend=900.0)])
    oop, ledger, summary = apply_policy_year(pop, LoanLedger(), PolicyParams(), FPL, 1)
    assert np.array_equal(oop["policy_oop"], oop["sq_oop"])
    assert not ledger.accounts and summary["participants"] == 0.0


def test_disabled_policy_is_status_quo():
    pop = toy_population(family_of(3, "a", ins_cat="Uninsured", med_spend=800.0))
    oop, ledger, summary = apply_policy_year(pop, LoanLedger(), PolicyParams(enabled=False), FPL, 1)
    assert np.array_equal(oop["policy_oop"], oop["sq_oop"]) and not ledger.accounts
    assert summary["participants"] == 0.0


def test_repayment_attributed_by_covered_spend_share():
    pop = toy_population(family_of(2, "a", income=1e6, ins_cat="Uninsured"))
    pop.data["med_spend"] = np.array([300.0, 100.0])
    params = PolicyParams(repay_rate=1.0, interest=0.0, utilization=(1.0,) * 5, price=1.0)
    oop, _, _ = apply_policy_year(pop, LoanLedger(), params, FPL, 1)
    assert oop["policy_oop"].tolist() == pytest.approx([300.0, 100.0])


def test_write_off_when_no_adult_remains():
    recs = [person("kid", "a", age=10, ins_cat="Uninsured", med_spend=2000.0),
            person("mom", "a", age=40, ins_cat="Uninsured", med_spend=0.0, survive=False)]
    pop = toy_population(recs)
    _, ledger, summary = apply_policy_year(pop, LoanLedger(), ZERO, FPL, 1)
    acc = ledger.accounts["a"]
    assert ledger.status["a"] == WRITTEN_OFF and acc[0] == 0.0 and acc[4] == pytest.approx(2000.0)
    assert summary["year_written_off"] == pytest.approx(2000.0)


def test_closed_account_reopens_on_new_draw():
    pop = toy_population([person("p", "a", ins_cat="Uninsured", med_spend=100.0, fam_income=1e6)])
    params = PolicyParams(repay_rate=1.0, interest=0.0, utilization=(1.0,) * 5, price=1.0)
    _, ledger, _ = _run(pop, params, 1)
    assert ledger.status["a"] == CLOSED
    pop2 = toy_population([person("p", "a", ins_cat="Uninsured", med_spend=50.0, fam_income=0.0)])
    _, ledger, _ = apply_policy_year(pop2, ledger, params, FPL, 2)
    assert ledger.status["a"] == OPEN and ledger.accounts["a"][0] == pytest.approx(50.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 0.2), st.floats(0, 2))
def test_ledger_identity_property(seed, r, i, tau):
    rng = np.random.default_rng(seed)
    n = 30
    fids = rng.integers(0, 8, n)
    recs = [person(f"p{k}", f"f{fids[k]}", age=int(rng.integers(0, 80)),
                   ins_cat=INS_CAT[rng.integers(0, 5)], fam_income=0.0) for k in range(n)]
    pop = toy_population(recs)
    inc = {f: float(rng.exponential(40_000)) for f in set(pop["fid"])}
    pop.data["fam_income"] = np.array([inc[f] for f in pop["fid"]])
    params = PolicyParams(repay_rate=r, interest=i, threshold_fpl=tau)
    ledger = LoanLedger()
    for y in range(1, 6):
        pop.data["med_spend"] = rng.exponential(3000, n) * (rng.random(n) < 0.7)
        _, ledger, _ = apply_policy_year(pop, ledger, params, FPL, y)
        assert ledger.identity_error() <= 1e-9
        m = np.array(list(ledger.accounts.values()))
        assert m.size == 0 or np.all(m >= -1e-12)


# -- federal summary -------------------------------------------------------------------------
def test_zero_ledger_summary():
    out = federal_cost_summary(LoanLedger(), horizon=3)
    assert len(out) == 3
    assert (out.drop(columns="year") == 0).all().all()


def test_net_position_nonnegative_when_repaid():
    pop = toy_population(family_of(2, "a", income=1e6, ins_cat="Uninsured", med_spend=1000.0))
    params = PolicyParams(repay_rate=1.0, interest=0.05, utilization=(1.0,) * 5, price=1.0)
    _, ledger, _ = _run(pop, params, 3)
    s = federal_cost_summary(ledger)
    cum = s[["draws", "interest", "repaid"]].cumsum()
    assert np.all(cum["repaid"] >= cum["draws"] + cum["interest"] - 1e-9)
    assert np.all(s["net_position"] >= 0)


# -- persistence -----------------------------------------------------------------------------
def test_ledger_save_load_round_trip(tmp_path):
    pop = toy_population(family_of(3, "a", income=25_000.0, ins_cat="Uninsured", med_spend=1234.567)
                         + family_of(2, "b", income=90_000.0, ins_cat="NonGroupPrivate", med_spend=98.7654321))
    _, ledger, _ = _run(pop, PolicyParams(), 3)
    path = tmp_path / "ledger.csv"
    ledger.save(path)
    back = LoanLedger.load(path)
    assert back == ledger
    assert back.weighted_totals() == ledger.weighted_totals()
    pd.testing.assert_frame_equal(federal_cost_summary(back), federal_cost_summary(ledger), check_exact=True)


def test_params_round_trip_and_validation():
    p = PolicyParams(repay_rate=0.3, utilization=(2.0, 1.0, 1.0, 0.5, 1.0))
    assert PolicyParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        PolicyParams(repay_rate=1.5)
    with pytest.raises(ValueError):
        PolicyParams(utilization=(0.0, 1.0, 1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        PolicyParams(interest=float("nan"))
