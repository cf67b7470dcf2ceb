"""Uncertainty-analysis variant suite and comparison reports.

Seven variants each change one module relative to the baseline policy run:
policy off, lower medical inflation, no health calibration, chronic-only
end-of-life inflation, mortality deflation and insurance-category corrections.
All variants share the master seed, so differences isolate the varied module.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .engine import ScenarioConfig, apply_insurance_corrections, run_simulation
from .errors import LhiemError, UnknownVariant
from .population import AGE_GROUPS, RACE, SEX, Population

log = logging.getLogger(__name__)

BASELINE = 2
REPORT_YEARS = (5, 15)
PARTICIPATION_YEARS = (1, 5, 10, 15)
LOWER_INFLATION = 0.041
MORTALITY_DEFLATION = 0.75


@dataclass(frozen=True)
class VariantSpec:
    id: int
    module: str
    description: str
    overrides: tuple[tuple[str, object], ...] = ()


VARIANTS = {
    1: VariantSpec(1, "policy", "status quo: policy module off", (("policy.enabled", False),)),
    2: VariantSpec(2, "policy", "baseline policy"),
    3: VariantSpec(3, "spending", "baseline policy with lower medical inflation", (("g_star", LOWER_INFLATION),)),
    4: VariantSpec(4, "health", "baseline policy without health-status calibration", (("calibrate_health", False),)),
    5: VariantSpec(5, "mortality", "end-of-life inflation only for chronic conditions", (("chronic_only_eol", True),)),
    6: VariantSpec(6, "mortality", "deflated mortality scaling factor", (("mortality_delta", MORTALITY_DEFLATION),)),
    7: VariantSpec(7, "income and insurance", "baseline policy with insurance category corrections",
                   (("insurance_corrections", True),)),
}


def variant(vid: int) -> VariantSpec:
    try:
        return VARIANTS[int(vid)]
    except (KeyError, ValueError, TypeError):
        raise UnknownVariant(f"unknown variant {vid!r}; expected 1-7") from None


def apply_variant(cfg: ScenarioConfig, v: VariantSpec | int) -> ScenarioConfig:
    """Baseline settings for the variant's module plus its documented override."""
    v = v if isinstance(v, VariantSpec) else variant(v)
    base = replace(cfg, policy=replace(cfg.policy, enabled=True))
    out = base
    for key, value in v.overrides:
        if key == "policy.enabled":
            out = replace(out, policy=replace(out.policy, enabled=value))
        else:
            out = replace(out, **{key: value})
    return out


insurance_corrections = apply_insurance_corrections


@dataclass
class ComparisonReport:
    individual: pd.DataFrame  # variant x year: mean/median individual and household, % change of medians
    household: pd.DataFrame  # variant x year: mean, p25, p50, p75 household spending
    aggregates: dict[int, pd.DataFrame]  # full per-year aggregates per variant

    def save(self, out_dir):
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.individual.to_csv(out / "variant_spending.csv", index=False, float_format=None)
        self.household.to_csv(out / "household_percentiles.csv", index=False, float_format=None)
        for vid, frame in self.aggregates.items():
            frame.to_csv(out / f"aggregates_variant_{vid}.csv", index=False, float_format=None)
        oop_long(self.aggregates).to_csv(out / "oop_long.csv", index=False, float_format=None)

    def __eq__(self, other):
        return (isinstance(other, ComparisonReport) and self.individual.equals(other.individual)
                and self.household.equals(other.household))


def run_suite(cfg: ScenarioConfig, variants, pop0: Population, out_dir=None) -> ComparisonReport:
    variants = [int(v) for v in variants]
    if not variants:
        raise ValueError("variant list is empty")
    aggs = {}
    for vid in variants:
        vcfg = apply_variant(cfg, vid)
        sub = None if out_dir is None else f"{out_dir}/variant_{vid}"
        try:
            results = run_simulation(vcfg, pop0, sub)
        except LhiemError:
            log.error("variant %d failed", vid)
            raise
        aggs[vid] = pd.DataFrame([r.aggregates for r in results])
    return compare(aggs, cfg.horizon)


def compare(aggs: dict[int, pd.DataFrame], horizon: int) -> ComparisonReport:
    years = [y for y in REPORT_YEARS if y <= horizon] or [horizon]
    ref = aggs.get(BASELINE)
    rows, hh = [], []
    for vid, frame in aggs.items():
        for y in years:
            a = frame.loc[frame["year"] == y].iloc[0]
            row = {"variant": vid, "year": y, "mean_individual": a["mean_spend"], "median_individual": a["median_spend"],
                   "mean_household": a["mean_household_spend"], "median_household": a["median_household_spend"]}
            if ref is not None and vid != BASELINE:
                b = ref.loc[ref["year"] == y].iloc[0]
                row["pct_change_median_individual"] = 100 * (a["median_spend"] - b["median_spend"]) / b["median_spend"]
                row["pct_change_median_household"] = (
                    100 * (a["median_household_spend"] - b["median_household_spend"]) / b["median_household_spend"])
            elif ref is not None:
                row["pct_change_median_individual"] = 0.0
                row["pct_change_median_household"] = 0.0
            rows.append(row)
            hh.append({"variant": vid, "year": y, "mean": a["mean_household_spend"], "p25": a["p25_household_spend"],
                       "p50": a["median_household_spend"], "p75": a["p75_household_spend"]})
    return ComparisonReport(pd.DataFrame(rows), pd.DataFrame(hh), aggs)


def oop_long(aggs: dict[int, pd.DataFrame]) -> pd.DataFrame:
    """Plot-ready mean OOP by variant, year, prior coverage and scenario."""
    rows = []
    for vid, frame in aggs.items():
        for _, a in frame.iterrows():
            for group in ("uninsured", "nongroup"):
                rows.append({"variant": vid, "year": int(a["year"]), "prior_coverage": group,
                             "status_quo_oop": a[f"sq_oop_{group}"], "policy_oop": a[f"policy_oop_{group}"]})
    return pd.DataFrame(rows)


def participation_report(results, policy=None) -> pd.DataFrame:
    """Participant counts and shares by sex, race and age group, plus mean family income."""
    frame = pd.DataFrame([r.aggregates for r in results]) if not isinstance(results, pd.DataFrame) else results
    horizon = int(frame["year"].max())
    rows = []
    off = policy is not None and not policy.enabled
    for y in [y for y in PARTICIPATION_YEARS if y <= horizon]:
        a = frame.loc[frame["year"] == y].iloc[0]
        total = 0.0 if off else float(a["participants"])
        row = {"year": y, "participants": total,
               "mean_family_income": 0.0 if off or total == 0 else float(a["part_mean_family_income"])}
        for name, labels in (("sex", SEX), ("race", RACE), ("age", AGE_GROUPS)):
            for lab in labels:
                c = 0.0 if off else float(a[f"part_{name}_{lab}"])
                row[f"{name}_{lab}"] = c
                row[f"share_{name}_{lab}"] = c / total if total > 0 else 0.0
        rows.append(row)
    return pd.DataFrame(rows)


def share_drift(report: pd.DataFrame) -> float:
    """Largest absolute change (in points) of any participant share between the first and last year."""
    cols = [c for c in report.columns if c.startswith("share_")]
    first, last = report.iloc[0][cols].to_numpy(float), report.iloc[-1][cols].to_numpy(float)
    return float(np.max(np.abs(last - first)) * 100)
