"""Write the shipped default tables into src/lhiem/data.

The defaults are synthetic, plausibly shaped stand-ins for survey-derived
tables. Run from the repository root: ``python tools/make_tables.py``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

DATA = Path(__file__).resolve().parents[1] / "src" / "lhiem" / "data"

SEXES = ("Male", "Female")
RACES = ("Hispanic", "White", "Black", "Other")
AGE_GROUPS = ("0-18", "19-34", "35-49", "50-64")
INCOME_AGE_GROUPS = ("18-24", "25-34", "35-49", "50-64")
INS = ("Uninsured", "Medicaid", "OtherPublic", "NonGroupPrivate", "OtherPrivate")

HEALTH_BANDS = [(0, 4), (5, 14), (15, 24), (25, 34), (35, 44), (45, 54), (55, 64), (65, 74), (75, 84), (85, 120)]
P_ACUTE = [0.0045, 0.0085, 0.0052, 0.0035, 0.0035, 0.0035, 0.0038, 0.0045, 0.006, 0.009]
P_CHRONIC = [0.0006, 0.0006, 0.0010, 0.0018, 0.0032, 0.0055, 0.0090, 0.0150, 0.0230, 0.0330]
FEMALE_ACUTE, FEMALE_CHRONIC = 0.95, 0.90
# multipliers that generate the shipped good-health target (the calibration recovers them)
TARGET_MULTIPLIERS = {0: 1.8, 5: 1.3, 15: 1.6}


def write(frame: pd.DataFrame, name: str, header: str = ""):
    path = DATA / name
    with open(path, "w", newline="") as fh:
        if header:
            fh.write("".join(f"# {line}\n" for line in header.splitlines()))
        frame.to_csv(fh, index=False, float_format="%.10g")
    print("wrote", path)


def health():
    rows = []
    for (lo, hi), a, c in zip(HEALTH_BANDS, P_ACUTE, P_CHRONIC):
        for s in SEXES:
            f = s == "Female"
            rows.append((lo, hi, s, round(a * (FEMALE_ACUTE if f else 1.0), 6),
                         round(c * (FEMALE_CHRONIC if f else 1.0), 6), 1.0))
    hz = pd.DataFrame(rows, columns=["age_lo", "age_hi", "sex", "p_acute", "p_chronic", "multiplier"])
    write(hz, "health_hazards.csv", "annual onset probabilities by age band and sex; multiplier scales acute onset")

    import sys
    sys.path.insert(0, str(DATA.parents[1]))
    from lhiem.health import good_health_by_band, load_hazards

    bands = [b for b in HEALTH_BANDS if b[1] <= 64]
    truth = load_hazards(DATA / "health_hazards.csv").with_multipliers(TARGET_MULTIPLIERS)
    good = good_health_by_band(truth, bands)
    target = pd.DataFrame({"age_lo": [b[0] for b in bands], "age_hi": [b[1] for b in bands],
                           "p_good": np.round(good, 4)})
    write(target, "health_target.csv", "survey-style proportion in good health by age band")


def fpl():
    sizes = np.arange(1, 9)
    frame = pd.DataFrame({"year": 0, "family_size": sizes, "threshold": 12490 + 4420 * (sizes - 1)})
    write(frame, "fpl.csv", "poverty threshold by family size in base-year dollars; +4420 per person beyond 8")


def life_table():
    ages = np.arange(0, 111)
    rows = []
    for s, scale in zip(SEXES, (1.0, 0.62)):
        q = 0.00012 + 0.000042 * np.exp(0.088 * ages) + 0.0007 * np.exp(-(((ages - 22) / 7.0) ** 2)) * (1.6 if s == "Male" else 0.5)
        q = q * scale
        q[0] = 0.0058 if s == "Male" else 0.0048
        q[1:5] = np.array([0.0004, 0.00027, 0.0002, 0.00016]) * scale
        q = np.minimum(q, 0.6)
        q[30:] = np.maximum.accumulate(q[30:])  # no dip after the young-adult hump
        rows += [(a, s, round(float(v), 7)) for a, v in zip(ages, q)]
    write(pd.DataFrame(rows, columns=["age", "sex", "q"]), "life_table.csv", "baseline annual death probability")


def mortality_links():
    v = pd.DataFrame({"percentile": [0, 25, 50, 75, 90, 95, 99, 100],
                      "v": [0.55, 0.65, 0.8, 1.0, 1.5, 2.2, 4.0, 5.0]})
    write(v, "mortality_v.csv", "death-probability scale by spending percentile")
    m = pd.DataFrame({"risk": [0.0, 0.001, 0.01, 0.05, 0.2, 1.0], "m": [1.0, 1.5, 3.0, 5.0, 8.0, 8.0]})
    write(m, "mortality_m.csv", "last-year-of-life spending multiplier by individual death probability")


def fertility():
    bands = [(15, 19), (20, 24), (25, 29), (30, 34), (35, 39), (40, 44), (45, 49)]
    base = [0.019, 0.072, 0.101, 0.099, 0.051, 0.011, 0.0009]
    race = {"Hispanic": 1.15, "White": 0.95, "Black": 1.05, "Other": 0.92}
    rows = [(lo, hi, r, round(b * m, 5)) for (lo, hi), b in zip(bands, base) for r, m in race.items()]
    write(pd.DataFrame(rows, columns=["age_lo", "age_hi", "race", "p"]), "fertility.csv", "annual birth probability")


def newborn_omega():
    write(pd.DataFrame({"omega": [1, 2, 3, 4, 5], "p": [0.55, 0.25, 0.12, 0.06, 0.02]}),
          "newborn_omega.csv", "newborn health score distribution (1 good .. 5 poor)")


def migration():
    years = np.arange(1, 41)
    count = np.round(385000 - 1500 * (years - 1), 0)
    write(pd.DataFrame({"year": years, "weighted_family_count": count.astype(int)}),
          "migration.csv", "weighted immigrant families added per simulation year")


AGE_DRIFT = (0.095, 0.07, 0.045, 0.03)
QUINTILE_DRIFT = (0.032, 0.008, 0.0, -0.006, -0.018)


def income_sampler(points: int = 40, age_drift=AGE_DRIFT, quintile_drift=QUINTILE_DRIFT):
    """Quantile-discretized growth factor distributions per (quintile, age group, sex)."""
    rows = []
    probs = (np.arange(points) + 0.5) / points
    for q in range(1, 6):
        for ai, ag in enumerate(INCOME_AGE_GROUPS):
            for s in SEXES:
                job_loss = [0.028, 0.017, 0.013, 0.018][ai] + (0.006 if q == 1 else 0.0) - (0.003 if q == 5 else 0.0)
                if s == "Female":
                    job_loss += 0.002
                drift = age_drift[ai] + quintile_drift[q - 1]
                sd = [0.28, 0.22, 0.18, 0.19][ai] + (0.06 if q in (1, 5) else 0.0)
                body = np.exp(np.log1p(drift) - sd * sd / 2 + sd * stats.norm.ppf(probs))
                body = np.maximum(body, 0.11)
                w_body = (1 - job_loss) / points
                for g in body:
                    rows.append((q, ag, s, round(float(g), 6), w_body))
                for g in (0.0, 0.03, 0.06, 0.09):
                    rows.append((q, ag, s, g, job_loss / 4))
    frame = pd.DataFrame(rows, columns=["quintile", "age_group", "sex", "growth_factor", "weight"])
    write(frame, "income_sampler.csv", "annual real family income growth factors; factors <= 0.10 mark job loss")


def income_exit():
    rows = []
    mult = np.exp(np.log(1.6) + 0.45 * stats.norm.ppf((np.arange(20) + 0.5) / 20))
    for ai, ag in enumerate(INCOME_AGE_GROUPS):
        for s in SEXES:
            p = [0.34, 0.33, 0.29, 0.22][ai] - (0.02 if s == "Female" else 0.0)
            for m in mult:
                rows.append((ag, s, p, round(float(m), 6), 0.05))
    frame = pd.DataFrame(rows, columns=["age_group", "sex", "exit_prob", "multiple", "weight"])
    write(frame, "income_exit.csv",
          "exit from the bottom 15 percent: probability and new income as a multiple of the 15th percentile")


INS_BY_FPL = {  # age group -> FPL band (<1, 1-2, 2-4, >=4) -> shares in INS order
    "0-18": [[0.06, 0.78, 0.02, 0.024, 0.116], [0.07, 0.55, 0.03, 0.04, 0.31],
             [0.05, 0.18, 0.03, 0.048, 0.692], [0.03, 0.04, 0.02, 0.048, 0.862]],
    "19-34": [[0.27, 0.45, 0.02, 0.048, 0.212], [0.25, 0.22, 0.02, 0.064, 0.446],
              [0.14, 0.07, 0.02, 0.064, 0.706], [0.07, 0.02, 0.02, 0.056, 0.834]],
    "35-49": [[0.25, 0.45, 0.03, 0.056, 0.214], [0.22, 0.2, 0.03, 0.072, 0.478],
              [0.11, 0.06, 0.03, 0.064, 0.736], [0.05, 0.02, 0.02, 0.056, 0.854]],
    "50-64": [[0.18, 0.4, 0.12, 0.064, 0.236], [0.15, 0.18, 0.1, 0.08, 0.49],
              [0.08, 0.05, 0.06, 0.072, 0.738], [0.04, 0.02, 0.04, 0.064, 0.836]],
}


def insurance_by_fpl():
    rows = []
    for ag, bands in INS_BY_FPL.items():
        for b, shares in enumerate(bands):
            for ins, p in zip(INS, shares):
                rows.append((ag, b, ins, p))
    frame = pd.DataFrame(rows, columns=["age_group", "fpl_band", "ins_cat", "p"])
    write(frame, "insurance_by_fpl.csv", "insurance shares by age group and FPL band (0: <100%, 1: 100-200%, 2: 200-400%, 3: >=400%)")


def synth_targets():
    shares = np.array([0.0735, 0.0754, 0.0765, 0.0775, 0.0812, 0.0838, 0.0810,
                       0.0780, 0.0745, 0.0790, 0.0810, 0.0815, 0.0740])
    shares = shares / shares.sum()
    targets = {
        "total_population": 271_000_000,
        "age_band_shares": {f"{5 * i}-{5 * i + 4}": round(float(s), 6) for i, s in enumerate(shares)},
        "uninsured_millions": {"0-18": 4.53, "19-34": 10.38, "35-49": 7.78, "50-64": 5.78},
        "percent_female": {"0-18": 49.0, "19-34": 49.9, "35-49": 50.8, "50-64": 51.6},
        "spending_bucket_means": {"overall": 4748, "bottom_50": 271, "top_50": 9224, "top_30": 14379,
                                  "top_10": 33267, "top_5": 52524, "top_1": 131250},
        "nhea_factor": 1.27,
        "family_size_probs": {"1": 0.28, "2": 0.34, "3": 0.15, "4": 0.13, "5": 0.07, "6": 0.03},
        "immigrant_family_share": 0.04,
        "median_family_income": 62000,
        "race_shares": {"Hispanic": 0.18, "White": 0.61, "Black": 0.13, "Other": 0.08},
    }
    path = DATA / "synth_targets.json"
    path.write_text(json.dumps(targets, indent=2) + "\n")
    print("wrote", path)


if __name__ == "__main__":
    health()
    fpl()
    life_table()
    mortality_links()
    fertility()
    newborn_omega()
    migration()
    income_sampler()
    income_exit()
    insurance_by_fpl()
    synth_targets()
