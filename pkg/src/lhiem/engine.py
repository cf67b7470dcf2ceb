"""Year-step orchestration, medical-inflation calibration and run management.

Each simulated year runs the submodels in a fixed order: income (with
retirement), insurance redraw, poverty-line update, health, pregnancy,
spending with maternity costs and calibration, mortality, end-of-life
inflation or ageing, newborns, immigrants and finally the policy ledger.
All randomness comes from counter-based streams keyed by (seed, year, tag,
person or family), so a year is a pure function of the previous snapshot.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import demographics as demo
from . import health, income, mortality
from .errors import DataError, LhiemError, StepError
from .expenditure import covariates as cv
from .expenditure.costs import NHEA_FACTOR, MaternityCostSampler
from .expenditure.twopart import TwoPartModel
from .policy import LoanLedger, PolicyParams, apply_policy_year
from .population import (CHRONIC, OTHER_PUBLIC, Population, age_group, read_population, require_valid,
                         save_population)
from .rng import Streams, keys_of
from .synthpop import cell_deductibles, load_population, load_spending_map
from .tables import data_path
from .weighted import weighted_median

log = logging.getLogger(__name__)

PRE_MEDICARE_AGE = 65
TABLE_KEYS = ("hazards", "health_target", "life_table", "death_targets", "mortality_v", "mortality_m",
              "fertility", "omega", "migration", "income_sampler", "income_exit", "fpl", "insurance_by_fpl",
              "spending_map", "model")


class ZeroBase(LhiemError):
    """Previous-year weighted spending is zero; calibration is skipped."""


@dataclass
class ScenarioConfig:
    horizon: int = 15
    seed: int = 0
    start_year: int = 2015
    g_star: float = 0.051
    nhea_factor: float = NHEA_FACTOR
    cpi_rate: float = 0.02
    calibrate_inflation: bool = True
    calibrate_health: bool = True
    chronic_only_eol: bool = False
    mortality_delta: float = 1.0
    insurance_corrections: bool = False
    policy: PolicyParams = field(default_factory=PolicyParams)
    tables: dict[str, str | None] = field(default_factory=dict)
    population: str | None = None  # initial snapshot; synthesized when absent
    synth_n: int = 100_000
    snapshots: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not self.g_star > -1:
            raise ValueError("g* must exceed -1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        unknown = set(self.tables) - set(TABLE_KEYS)
        if unknown:
            raise ValueError(f"unknown table keys: {sorted(unknown)}")

    def table(self, key: str):
        return self.tables.get(key)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ScenarioConfig":
        d = dict(d or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "policy" in d:
            d["policy"] = PolicyParams.from_dict(d["policy"] or {})
        if base_dir is not None:
            tables = {k: (str(base_dir / v) if v is not None and not Path(v).is_absolute() else v)
                      for k, v in (d.get("tables") or {}).items()}
            d["tables"] = tables
            if d.get("population") and not Path(d["population"]).is_absolute():
                d["population"] = str(base_dir / d["population"])
        return cls(**d)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        from .errors import ParseError
        raise ParseError(str(exc), path=path) from exc
    return ScenarioConfig.from_dict(raw, base_dir=path.parent)


@dataclass
class Context:
    """Fitted models and tables shared by every year step."""

    model: TwoPartModel
    hazards: health.HealthHazards
    recovery: health.RecoveryCurve
    sampler: income.IncomeChangeSampler
    exits: income.ExitSampler
    fpl: income.FplTable
    ins_by_fpl: income.InsuranceByFpl
    life_table: mortality.LifeTable
    link: mortality.EolSpendingLink
    fertility: demo.FertilityTable
    omega: demo.OmegaDistribution
    migration: demo.MigrationSchedule
    maternity: MaternityCostSampler
    pool: demo.ImmigrantPool
    deductibles: np.ndarray  # (4, 5) by age group and ins_cat


def _try(loader, key, path):
    try:
        return loader(path)
    except (OSError, FileNotFoundError) as exc:
        raise DataError(f"cannot read {key} table {path}: {exc}") from exc


def initial_population(cfg: ScenarioConfig) -> Population:
    if cfg.population:
        return load_population(cfg.population)
    from .synthpop import generate_population
    return generate_population(cfg.synth_n, seed=cfg.seed)


def build_context(cfg: ScenarioConfig, pop0: Population) -> Context:
    t = cfg.table
    hz = health.load_hazards(t("hazards"))
    if cfg.calibrate_health:
        hz = health.calibrate_hazards(hz, health.load_health_target(t("health_target")))
    else:
        hz = hz.uncalibrated()
    fpl = income.load_fpl(t("fpl"), cfg.cpi_rate)
    fallback = income.load_insurance_by_fpl(t("insurance_by_fpl"))
    band0 = income.fpl_band(income.fpl_ratio(pop0["fam_income"], family_sizes(pop0), fpl, 0))
    ins_by_fpl = income.insurance_from_population(pop0["ins_cat"], age_group(pop0["age"]), band0, pop0["wt"], fallback)
    model_path = t("model") or data_path("default_model.json")
    model = _try(TwoPartModel.load, "model", model_path)
    pool = demo.ImmigrantPool(pop0.subset(pop0["immigrant"] & pop0.alive))
    return Context(
        model=model, hazards=hz, recovery=health.RecoveryCurve(),
        sampler=income.load_income_sampler(t("income_sampler")), exits=income.load_exit_sampler(t("income_exit")),
        fpl=fpl, ins_by_fpl=ins_by_fpl,
        life_table=mortality.load_life_table(t("life_table"), t("death_targets")),
        link=mortality.load_link(t("mortality_v"), t("mortality_m"), cfg.mortality_delta),
        fertility=demo.load_fertility(t("fertility")), omega=demo.load_omega(t("omega")),
        migration=demo.load_migration(t("migration")), maternity=MaternityCostSampler.fit(),
        pool=pool, deductibles=cell_deductibles(load_spending_map(t("spending_map"))),
    )


def family_sizes(pop: Population) -> np.ndarray:
    """Alive members per person's family, broadcast to persons."""
    n = np.bincount(pop["fam"], weights=pop.alive.astype(float))
    return np.maximum(n[pop["fam"]], 1).astype(int)


def calibrate_medical_inflation(prev, nxt, weights, g_star: float):
    """Scale next-year spending so weighted growth equals ``g_star`` exactly.

    Returns (scaled spending, factor, uncalibrated growth). Raises ZeroBase
    when the previous weighted total is zero.
    """
    prev = np.asarray(prev, dtype=float)
    nxt = np.asarray(nxt, dtype=float)
    w = np.asarray(weights, dtype=float)
    base = float(np.dot(w, prev))
    if base <= 0:
        raise ZeroBase("previous-year weighted spending is zero")
    total = float(np.dot(w, nxt))
    if total <= 0:
        raise ZeroBase("next-year weighted spending is zero")
    factor = (1.0 + g_star) * base / total
    return nxt * factor, factor, total / base - 1.0


@dataclass
class YearResult:
    year: int
    aggregates: dict[str, float]
    snapshot: Path | None = None


def _chunks(n: int, threads: int):
    if threads <= 1 or n < 2 * threads:
        return [slice(0, n)]
    edges = np.linspace(0, n, threads + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def _parallel(fn, n: int, threads: int):
    """Apply ``fn(slice)`` over contiguous chunks; results concatenate in order."""
    parts = _chunks(n, threads)
    if len(parts) == 1:
        return fn(parts[0])
    with ThreadPoolExecutor(max_workers=threads) as ex:
        out = list(ex.map(fn, parts))
    if isinstance(out[0], tuple):
        return tuple(np.concatenate(x) for x in zip(*out))
    return np.concatenate(out)


def _family_heads(pop: Population):
    """Oldest alive member aged 18-64 of each family (index or -1)."""
    fam, age = pop["fam"], pop["age"]
    nf = int(fam.max()) + 1
    ok = pop.alive & (age >= 18) & (age <= 64)
    order = np.lexsort((np.asarray(pop["key"]), -age, ~ok, fam))  # per family: eligible, oldest, key
    first = order[np.r_[True, fam[order][1:] != fam[order][:-1]]]
    head = np.full(nf, -1)
    head[fam[first]] = np.where(ok[first], first, -1)
    return head


def step_year(pop: Population, ledger: LoanLedger, ctx: Context, cfg: ScenarioConfig, year: int):
    """Advance one year; returns (population, ledger, YearResult, per-person OOP frame)."""
    phase = "setup"
    try:
        streams = Streams(cfg.seed)
        pop = pop.subset(pop.alive)  # decedents of last year leave the population
        pop.year = year
        d = pop.data
        n = len(pop)
        keys = pop["key"]
        n_start = float(d["wt"].sum())

        # income, retirement, insurance, poverty line
        phase = "income"
        fam = d["fam"]
        nf = int(fam.max()) + 1
        first = np.unique(fam, return_index=True)[1]
        fam_keys = keys_of(d["fid"][first])
        fam_income = d["fam_income"][first].copy()
        head = _family_heads(pop)
        has_head = head >= 0
        hidx = np.where(has_head, head, first)
        snap = income.IncomeSnapshot.from_families(fam_income, d["wth"][first])
        u_inc = streams.uniform(year, "income", fam_keys, 4)
        new_income, lost, left = income.update_family_income(
            fam_income, d["age"][hidx], d["sex"][hidx], has_head, snap, ctx.sampler, ctx.exits,
            ctx.fpl.cpi_factor(year), u_inc)
        retiring = (d["age"] >= PRE_MEDICARE_AGE) & (d["wage_prop"] > 0)
        keep = np.ones(nf)
        np.multiply.at(keep, fam[retiring], 1.0 - d["wage_prop"][retiring])
        new_income = new_income * keep
        d["wage_prop"] = np.where(retiring, 0.0, d["wage_prop"])
        old_person_income = d["fam_income"].copy()
        d["fam_income"] = new_income[fam]

        sizes = family_sizes(pop)
        band = income.fpl_band(income.fpl_ratio(d["fam_income"], sizes, ctx.fpl, year))
        ag = age_group(d["age"])
        u_ins = streams.uniform(year, "insurance", keys)
        ins, _ = income.maybe_redraw_insurance(d["ins_cat"], old_person_income, d["fam_income"], ag, band,
                                               ctx.ins_by_fpl, u_ins)
        ins = np.where(d["age"] >= PRE_MEDICARE_AGE, OTHER_PUBLIC, ins).astype(np.int8)
        changed = ins != d["ins_cat"]
        d["deduct"] = np.where(changed, ctx.deductibles[ag, ins], d["deduct"])
        d["ins_cat"] = ins

        # health
        phase = "health"
        u_h = streams.uniform(year, "health", keys)
        d["morbidity"] = health.transition(d["age"], d["sex"], d["morbidity"], u_h, ctx.hazards, ctx.recovery)
        d["hs"] = health.status_of(d["morbidity"])

        # pregnancy and spending
        phase = "pregnancy"
        u_p = streams.uniform(year, "pregnancy", keys)
        preg = demo.sample_pregnancies(d["age"], d["race"], d["sex"], np.ones(n, bool), ctx.fertility, u_p)
        phase = "spending"
        prev = d["med_spend"].copy()
        u_s = streams.uniform(year, "spending", keys, 2)
        rows = cv.rows_from_population(pop)
        rows["preg"] = np.zeros(n, dtype=bool)  # maternity is costed separately
        rows["spend_t"] = prev / cfg.nhea_factor  # the model works at survey scale

        def predict(sl):
            part = {k: v[sl] for k, v in rows.items()}
            from scipy.special import ndtri
            return ctx.model.draw(part, u_s[sl, 0], ndtri(u_s[sl, 1])) * cfg.nhea_factor

        spend = _parallel(predict, n, cfg.threads)
        u_m = streams.uniform(year, "maternity", keys)
        spend = spend + np.where(preg, ctx.maternity.quantile(u_m), 0.0)
        factor, growth = 1.0, float("nan")
        if cfg.calibrate_inflation:
            try:
                spend, factor, growth = calibrate_medical_inflation(prev, spend, d["wt"], cfg.g_star)
            except ZeroBase as exc:
                log.warning("year %d: %s; calibration skipped", year, exc)
        d["med_spend"] = spend
        d["preg"] = preg
        calibrated_total = float(np.dot(d["wt"], spend))
        prev_total = float(np.dot(d["wt"], prev))

        # mortality, end-of-life spending, ageing
        phase = "mortality"
        pct = mortality.spending_percentile(d["med_spend"], d["wt"], tiebreak=keys)
        q = mortality.individual_death_prob(ctx.life_table.base_q(d["age"], d["sex"]), pct, ctx.link)
        target = ctx.life_table.target(year, d["age"], d["sex"], d["wt"])
        u_d = streams.uniform(year, "mortality", keys)
        dead = mortality.select_deaths(q, d["wt"], u_d, target, tiebreak=keys)
        d["med_spend"] = np.where(dead, mortality.inflate_end_of_life(d["med_spend"], q, d["morbidity"], ctx.link,
                                                                      cfg.chronic_only_eol), d["med_spend"])
        d["survive"] = ~dead
        d["death_year"] = np.where(dead, year, d["death_year"])
        d["age"] = np.where(dead, d["age"], d["age"] + 1)
        aged_out = ~dead & (d["age"] >= PRE_MEDICARE_AGE) & (d["ins_cat"] != OTHER_PUBLIC)
        d["deduct"] = np.where(aged_out, ctx.deductibles[3, OTHER_PUBLIC], d["deduct"])
        d["ins_cat"] = np.where(aged_out, OTHER_PUBLIC, d["ins_cat"]).astype(np.int8)

        # newborns
        phase = "newborns"
        mothers = np.flatnonzero(preg)
        pop_out = pop
        births = 0.0
        if mothers.size:
            mk = keys[mothers]
            u_b = streams.uniform(year, "newborn", mk, 3)
            babies = demo.newborns_for(pop, mothers, year, u_b[:, 0], u_b[:, 1], u_b[:, 2], ctx.omega)
            births = float(babies["wt"].sum())
            pop_out = pop_out.append(babies)
        pop_out["preg"] = np.zeros(len(pop_out), dtype=bool)

        # immigrants
        phase = "immigrants"
        imm = demo.add_immigrants(ctx.migration.count(year), ctx.pool, year, streams.generator(year, "immigrants"),
                                  income_scale=ctx.fpl.cpi_index(year), spend_scale=(1 + cfg.g_star) ** year)
        immigrants = 0.0
        if imm is not None:
            immigrants = float(imm["wt"].sum())
            pop_out = pop_out.append(imm)
        pop_out.year = year

        # policy
        phase = "policy"
        present = np.ones(len(pop_out), dtype=bool)
        oop, ledger, pol = apply_policy_year(pop_out, ledger, cfg.policy, ctx.fpl, year, present)

        deaths = float(d["wt"][dead].sum())
        agg = {
            "year": year, "records": len(pop_out), "population_start": n_start,
            "population_end": float(pop_out["wt"][pop_out.alive].sum()),
            "births": births, "immigrants": immigrants, "deaths": deaths, "death_target": target,
            "job_losses": float(d["wth"][first][lost].sum()), "bottom_exits": float(d["wth"][first][left].sum()),
            "spend_prev_total": prev_total, "spend_calibrated_total": calibrated_total,
            "uncalibrated_growth": growth, "calibration_factor": factor,
            **_spending_aggregates(pop_out), **_oop_aggregates(pop_out, oop),
            "participants": pol.get("participants", 0.0), **_participant_aggregates(pop_out, oop),
            **{f"loan_{k}": v for k, v in ledger.weighted_totals().items()},
        }
        return pop_out, ledger, YearResult(year, agg), oop
    except LhiemError as exc:
        if isinstance(exc, StepError):
            raise
        raise StepError(year, phase, exc) from exc
    except (ValueError, IndexError, FloatingPointError) as exc:
        raise StepError(year, phase, exc) from exc


def _in_scope(pop: Population) -> np.ndarray:
    """Under-65 persons counted this year (survivors and this year's decedents)."""
    age_at_event = np.where(pop["survive"], pop["age"] - 1, pop["age"])
    return age_at_event < PRE_MEDICARE_AGE


def _spending_aggregates(pop: Population) -> dict[str, float]:
    m = _in_scope(pop)
    s, w = pop["med_spend"][m], pop["wt"][m]
    fam = pop["fam"][m]
    hh = np.bincount(fam, weights=s)
    present = np.bincount(fam, minlength=hh.size) > 0
    first = np.unique(fam, return_index=True)[1]
    hw = np.zeros(hh.size)
    hw[fam[first]] = pop["wth"][m][first]
    hh, hw = hh[present], hw[present]
    return {
        "persons": float(w.sum()),
        "mean_spend": float(np.dot(w, s) / w.sum()), "median_spend": weighted_median(s, w),
        "mean_household_spend": float(np.dot(hw, hh) / hw.sum()), "median_household_spend": weighted_median(hh, hw),
        "p25_household_spend": _wq(hh, hw, 0.25), "p75_household_spend": _wq(hh, hw, 0.75),
    }


def _wq(v, w, q):
    from .weighted import weighted_quantile
    return float(weighted_quantile(v, w, q))


def _oop_aggregates(pop: Population, oop: pd.DataFrame) -> dict[str, float]:
    out = {}
    w = pop["wt"]
    m = _in_scope(pop)
    for name, cat in (("uninsured", 0), ("nongroup", 3)):
        sel = m & (pop["ins_cat"] == cat)
        tot = w[sel].sum()
        for col in ("sq_oop", "policy_oop"):
            out[f"{col}_{name}"] = float(np.dot(w[sel], oop[col].to_numpy()[sel]) / tot) if tot > 0 else 0.0
    out["covered_spend"] = float(np.dot(w, oop["covered"].to_numpy()))
    return out


def _participant_aggregates(pop: Population, oop: pd.DataFrame) -> dict[str, float]:
    from .population import RACE, SEX
    from .population import AGE_GROUPS as GROUPS

    part = oop["participant"].to_numpy(bool)
    w = pop["wt"] * part
    out = {}
    for name, col, labels in (("sex", pop["sex"], SEX), ("race", pop["race"], RACE),
                              ("age", age_group(pop["age"]), GROUPS)):
        counts = np.bincount(col.astype(int), weights=w, minlength=len(labels))
        for lab, c in zip(labels, counts):
            out[f"part_{name}_{lab}"] = float(c)
    tot = w.sum()
    out["part_mean_family_income"] = float(np.dot(w, pop["fam_income"]) / tot) if tot > 0 else 0.0
    return out


# -- runs ------------------------------------------------------------------------------
def apply_insurance_corrections(pop: Population, fpl: income.FplTable) -> Population:
    """Reassign self-reported insurance that conflicts with family income.

    Medicaid at or above 400% FPL becomes OtherPrivate, Medicaid between 200%
    and 400% becomes NonGroupPrivate, and NonGroupPrivate at or below 100%
    becomes Uninsured. Applying the rules twice equals applying them once.
    """
    from .population import MEDICAID, NONGROUP, OTHER_PRIVATE, UNINSURED

    out = pop.copy()
    ratio = income.fpl_ratio(out["fam_income"], family_sizes(out), fpl, 0)
    ins = out["ins_cat"].copy()
    ins = np.where((ins == MEDICAID) & (ratio >= 4.0), OTHER_PRIVATE, ins)
    ins = np.where((ins == MEDICAID) & (ratio >= 2.0) & (ratio < 4.0), NONGROUP, ins)
    ins = np.where((out["ins_cat"] == NONGROUP) & (ratio <= 1.0), UNINSURED, ins)
    out["ins_cat"] = ins.astype(np.int8)
    return out


def run_simulation(cfg: ScenarioConfig, pop0: Population, out_dir=None, resume_from: int | None = None,
                   ctx: Context | None = None, keep_oop: bool = False):
    """Run ``cfg.horizon`` years; returns the list of YearResult (plus OOP frames if requested).

    With ``resume_from=k`` the year-k snapshot and ledger in ``out_dir`` are
    loaded and years k+1.. are simulated.
    """
    require_valid(pop0)
    out = Path(out_dir) if out_dir is not None else None
    if cfg.insurance_corrections:
        pop0 = apply_insurance_corrections(pop0, income.load_fpl(cfg.table("fpl"), cfg.cpi_rate))
    ctx = build_context(cfg, pop0) if ctx is None else ctx
    pop, ledger, start = pop0, LoanLedger(), 1
    if resume_from is not None:
        if out is None:
            raise ValueError("resuming needs the run directory")
        pop = read_population(snapshot_path(out, resume_from))
        ledger = LoanLedger.load(ledger_path(out, resume_from))
        start = resume_from + 1
    results, oops = [], {}
    for year in range(start, cfg.horizon + 1):
        pop, ledger, res, oop = step_year(pop, ledger, ctx, cfg, year)
        bad = ledger.identity_error()
        if bad > 1e-9 * max(1.0, ledger.totals()["draws"]):
            raise StepError(year, "policy", ValueError(f"ledger identity off by {bad}"))
        if out is not None and cfg.snapshots:
            save_population(pop, snapshot_path(out, year))
            ledger.save(ledger_path(out, year))
            res.snapshot = snapshot_path(out, year)
        if keep_oop:
            oops[year] = (oop, pop)
        log.info("year %d: %.0f persons, mean spend %.0f", year, res.aggregates["persons"],
                 res.aggregates["mean_spend"])
        results.append(res)
    if out is not None:
        write_aggregates(results, out / "aggregates.csv")
        ledger.to_frame().to_csv(out / "ledger.csv", index=False, float_format=None)
        from .policy import federal_cost_summary
        federal_cost_summary(ledger).to_csv(out / "federal_costs.csv", index=False, float_format=None)
    return (results, oops) if keep_oop else results


def snapshot_path(out: Path, year: int) -> Path:
    return Path(out) / "snapshots" / f"year_{year:03d}.csv"


def ledger_path(out: Path, year: int) -> Path:
    return Path(out) / "snapshots" / f"ledger_{year:03d}.csv"


def write_aggregates(results, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.aggregates for r in results])
    frame.to_csv(path, index=False, float_format=None)


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    return replace(cfg, **kw)
