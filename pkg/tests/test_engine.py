from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhiem.engine import (ScenarioConfig, ZeroBase, build_context, calibrate_medical_inflation, load_config,
                          run_simulation, step_year)
from lhiem.errors import StepError
from lhiem.health import RecoveryCurve
from lhiem.income import ExitSampler, IncomeChangeSampler
from lhiem.mortality import LifeTable
from lhiem.policy import LoanLedger, PolicyParams
from lhiem.population import EXTRA_FIELDS, FIELDS
from lhiem.synthpop import generate_population

from helpers import family_of, identity_context, person, toy_population


@pytest.fixture(scope="module")
def pop2k():
    return generate_population(2000, seed=21)


@pytest.fixture(scope="module")
def ctx2k(pop2k):
    return build_context(ScenarioConfig(), pop2k)


def _frame(results):
    return pd.DataFrame([r.aggregates for r in results])


# -- identity scenario ---------------------------------------------------------------------
def test_identity_scenario_only_ages():
    recs = (family_of(3, "a", income=45_000.0, ins_cat="Uninsured", med_spend=800.0)
            + family_of(2, "b", income=90_000.0, ins_cat="OtherPrivate", med_spend=2500.0, deduct=700.0)
            + [person("c0", "c", age=60, morbidity="Chronic", hs="Bad", fam_income=30_000.0, wage_prop=1.0,
                      med_spend=12_000.0, wt=2.5, wth=2.5)])
    pop = toy_population(recs)
    cfg = ScenarioConfig(g_star=0.0, nhea_factor=1.0, cpi_rate=0.0, policy=PolicyParams(enabled=False))
    out, _, _, _ = step_year(pop, LoanLedger(), identity_context(pop), cfg, 1)
    assert len(out) == len(pop)
    for name in FIELDS + EXTRA_FIELDS:
        if name == "age":
            assert np.array_equal(out[name], pop[name] + 1)
        else:
            assert np.array_equal(out[name], pop[name]), name


def test_step_errors_name_year_and_phase(pop2k, ctx2k):
    from lhiem.demographics import ImmigrantPool, MigrationSchedule
    from lhiem.errors import EmptyPool

    bad = replace(ctx2k, migration=MigrationSchedule({3: 500.0}),
                  pool=ImmigrantPool(pop2k.subset(np.zeros(len(pop2k), bool))))
    with pytest.raises(StepError) as err:
        step_year(pop2k, LoanLedger(), bad, ScenarioConfig(), 3)
    assert err.value.year == 3 and err.value.submodel == "immigrants"
    assert isinstance(err.value.__cause__, EmptyPool)


# -- calibration -------------------------------------------------------------------------------
def test_calibration_factor_from_stated_rates():
    prev = np.array([100.0, 250.0, 4000.0])
    w = np.array([1.0, 2.0, 0.5])
    _, factor, growth = calibrate_medical_inflation(prev, prev * 1.069, w, 0.051)
    assert abs(factor - 1.051 / 1.069) <= 1e-12
    assert growth == pytest.approx(0.069, abs=1e-12)


def test_calibration_fixed_point():
    prev = np.array([10.0, 20.0])
    _, factor, _ = calibrate_medical_inflation(prev, prev * 1.051, np.ones(2), 0.051)
    assert abs(factor - 1.0) <= 1e-12


def test_calibration_two_persons():
    out, _, _ = calibrate_medical_inflation([100.0, 100.0], [150.0, 90.0], np.ones(2), 0.05)
    assert out.sum() == pytest.approx(210.0, rel=1e-12)
    assert out[0] / out[1] == pytest.approx(150 / 90)


def test_calibration_zero_base():
    with pytest.raises(ZeroBase):
        calibrate_medical_inflation(np.zeros(3), np.ones(3), np.ones(3), 0.05)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1e5), st.floats(0, 1e5), st.floats(0.1, 10)), min_size=1, max_size=60),
       st.floats(-0.5, 0.5))
def test_calibrated_growth_equals_target(rows, g):
    prev = np.array([r[0] for r in rows])
    nxt = np.array([r[1] for r in rows])
    w = np.array([r[2] for r in rows])
    if w @ prev <= 1e-6 or w @ nxt <= 1e-6:
        return
    out, _, _ = calibrate_medical_inflation(prev, nxt, w, g)
    assert (w @ out) / (w @ prev) - 1 == pytest.approx(g, rel=1e-9, abs=1e-12)


def test_engine_growth_equals_target_each_year(pop2k, ctx2k):
    res = run_simulation(ScenarioConfig(horizon=3, seed=2, snapshots=False), pop2k, ctx=ctx2k)
    for r in res:
        a = r.aggregates
        assert a["spend_calibrated_total"] / a["spend_prev_total"] == pytest.approx(1.051, rel=1e-9)


# -- runs ----------------------------------------------------------------------------------------
def test_horizon_one(pop2k, ctx2k):
    assert len(run_simulation(ScenarioConfig(horizon=1, snapshots=False), pop2k, ctx=ctx2k)) == 1


def test_same_seed_identical(pop2k, ctx2k, tmp_path):
    cfg = ScenarioConfig(horizon=3, seed=5)
    run_simulation(cfg, pop2k, tmp_path / "a", ctx=ctx2k)
    run_simulation(cfg, pop2k, tmp_path / "b", ctx=ctx2k)
    for name in ("aggregates.csv", "ledger.csv", "snapshots/year_003.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seeds_differ(pop2k, ctx2k):
    a = _frame(run_simulation(ScenarioConfig(horizon=2, seed=1, snapshots=False), pop2k, ctx=ctx2k))
    b = _frame(run_simulation(ScenarioConfig(horizon=2, seed=2, snapshots=False), pop2k, ctx=ctx2k))
    assert not a.equals(b)


def test_snapshot_setting_does_not_change_results(pop2k, ctx2k, tmp_path):
    a = _frame(run_simulation(ScenarioConfig(horizon=3, seed=5, snapshots=True), pop2k, tmp_path, ctx=ctx2k))
    b = _frame(run_simulation(ScenarioConfig(horizon=3, seed=5, snapshots=False), pop2k, ctx=ctx2k))
    pd.testing.assert_frame_equal(a, b, check_exact=True)


def test_resume_reproduces_remaining_years(pop2k, ctx2k, tmp_path):
    cfg = ScenarioConfig(horizon=5, seed=8)
    full = run_simulation(cfg, pop2k, tmp_path / "full", ctx=ctx2k)
    rest = run_simulation(cfg, pop2k, tmp_path / "full", resume_from=2, ctx=ctx2k)
    pd.testing.assert_frame_equal(_frame(full[2:]).reset_index(drop=True), _frame(rest), check_exact=True)


def test_thread_count_does_not_change_results(pop2k, ctx2k, tmp_path):
    for t in (1, 4):
        run_simulation(ScenarioConfig(horizon=2, seed=3, threads=t), pop2k, tmp_path / f"t{t}", ctx=ctx2k)
    for name in ("aggregates.csv", "ledger.csv", "snapshots/year_001.csv", "snapshots/year_002.csv"):
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t4" / name).read_bytes(), name


def test_row_dot_independent_of_chunking():
    from lhiem.expenditure.covariates import row_dot

    rng = np.random.default_rng(0)
    X = rng.normal(size=(1001, 23))
    c = rng.normal(size=23)
    whole = row_dot(X, c)
    parts = np.concatenate([row_dot(X[a:b], c) for a, b in ((0, 3), (3, 500), (500, 1001))])
    assert np.array_equal(whole, parts)
    assert np.allclose(whole, X @ c)


def test_population_identity_each_year(pop2k, ctx2k):
    res = run_simulation(ScenarioConfig(horizon=4, seed=4, snapshots=False), pop2k, ctx=ctx2k)
    wmax = pop2k["wt"].max()
    prev_end = None
    for r in res:
        a = r.aggregates
        assert abs(a["population_end"] - (a["population_start"] + a["births"] + a["immigrants"] - a["deaths"])) <= wmax
        if prev_end is not None:
            assert a["population_start"] == pytest.approx(prev_end)
        prev_end = a["population_end"]


def test_policy_only_changes_policy_fields(pop2k, ctx2k):
    on = _frame(run_simulation(ScenarioConfig(horizon=2, seed=6, snapshots=False), pop2k, ctx=ctx2k))
    off = _frame(run_simulation(ScenarioConfig(horizon=2, seed=6, snapshots=False,
                                               policy=PolicyParams(enabled=False)), pop2k, ctx=ctx2k))
    policy_cols = [c for c in on.columns if c.startswith(("policy_oop", "participants", "part_", "loan_"))
                   or c == "covered_spend"]
    rest = [c for c in on.columns if c not in policy_cols]
    pd.testing.assert_frame_equal(on[rest], off[rest], check_exact=True)
    assert (off[policy_cols].drop(columns=[c for c in policy_cols if c.startswith("policy_oop")]) == 0).all().all()


# -- modularity ----------------------------------------------------------------------------------
def _trajectories(pop0, ctx, years=4):
    cfg = ScenarioConfig(seed=9, policy=PolicyParams(enabled=False))
    pop, led, out = pop0, LoanLedger(), []
    for y in range(1, years + 1):
        pop, led, _, _ = step_year(pop, led, ctx, cfg, y)
        out.append(pop.to_frame().set_index("pid"))
    return out


def test_health_stub_leaves_income_and_insurance_unchanged(pop2k, ctx2k):
    base = replace(ctx2k, life_table=LifeTable(np.zeros((111, 2))))
    stub = replace(base, hazards=base.hazards.uncalibrated(), recovery=RecoveryCurve(1e300, 1e300, 1.0))
    stub.hazards.p_acute[:] = 0.0
    stub.hazards.p_chronic[:] = 0.0
    stub.hazards._grid = None
    for a, b in zip(_trajectories(pop2k, base), _trajectories(pop2k, stub)):
        for col in ("fam_income", "ins_cat", "age", "wage_prop", "sex"):
            assert a[col].equals(b[col]), col
    # and health itself is frozen under the stub
    frozen = _trajectories(pop2k, stub, 1)[0]
    start = pop2k.to_frame().set_index("pid")
    assert frozen.loc[start.index, "morbidity"].equals(start["morbidity"])


def test_income_stub_leaves_health_unchanged(pop2k, ctx2k):
    base = replace(ctx2k, life_table=LifeTable(np.zeros((111, 2))))
    stub = replace(base, sampler=IncomeChangeSampler.constant(1.0), exits=ExitSampler.degenerate(0.0, 0.0))
    for a, b in zip(_trajectories(pop2k, base), _trajectories(pop2k, stub)):
        for col in ("morbidity", "hs", "age", "survive"):
            assert a[col].equals(b[col]), col


# -- configuration --------------------------------------------------------------------------------
def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        ScenarioConfig(horizon=0)
    with pytest.raises(ValueError):
        ScenarioConfig(g_star=-1.0)
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"nonsense": 1})


def test_shipped_config_loads():
    from pathlib import Path

    cfg = load_config(Path(__file__).parents[1] / "configs" / "baseline.yaml")
    assert cfg.horizon == 15 and cfg.g_star == pytest.approx(0.051)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
