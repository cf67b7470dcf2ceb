"""Synthetic two-year person panel used to fit the shipped default spending model.

Rows mimic a two-year household survey panel: covariates in year t, spending in
year t (``spend_t``) and year t+1 (``spend_t1``). Spending follows a known
two-part process, so fitted models can be checked against the truth.
"""

from __future__ import annotations

import numpy as np
from scipy import special

PANEL_ROWS = 13468

# true hurdle: logit P(spend_t1 > 0)
HURDLE_TRUTH = {
    "intercept": -1.95, "age_19_34": -0.35, "age_35_49": 0.0, "age_50_64": 0.45,
    "female": 0.45, "hs_bad": 0.7, "ins_Medicaid": 0.55, "ins_OtherPublic": 0.6,
    "ins_NonGroupPrivate": 0.5, "ins_OtherPrivate": 0.75, "race_Hispanic": -0.3,
    "race_Black": -0.25, "race_Other": -0.2, "log_income": 0.08, "pregnant": 2.0,
    "nonzero_last": 1.9, "log_last_spend": 0.06,
}

AGE_P = np.array([0.27, 0.25, 0.23, 0.25])
RACE_P = np.array([0.19, 0.58, 0.13, 0.10])
INS_P = np.array([  # by age group: Uninsured, Medicaid, OtherPublic, NonGroup, OtherPrivate
    [0.06, 0.38, 0.02, 0.05, 0.49],
    [0.15, 0.16, 0.02, 0.08, 0.59],
    [0.11, 0.12, 0.03, 0.08, 0.66],
    [0.09, 0.11, 0.07, 0.09, 0.64],
])
HS_BAD_P = np.array([0.06, 0.12, 0.22, 0.36])
LEVEL_SHIFT = 0.17  # log-scale shift of next-year positive spending


def _level_of_prior(rng, n, ag, ins, hs):
    """Year-t spending: zero-inflated lognormal by age group, insurance and health."""
    p_zero = np.array([0.20, 0.36, 0.27, 0.17])[ag] + np.where(ins == 0, 0.25, 0.0) - 0.12 * hs
    zero = rng.random(n) < np.clip(p_zero, 0.02, 0.9)
    mu = np.array([6.1, 6.4, 6.9, 7.5])[ag] + 0.9 * hs - 0.4 * (ins == 0)
    spend = np.exp(mu + 1.45 * rng.standard_normal(n))
    return np.where(zero, 0.0, np.round(spend, 2))


def _part_two_mean(x, ag, sex, hs, ins, race, linc):
    """True conditional mean of ln(spend_t1) given positive spending.

    Piecewise in prior log spending: non-spenders start low, prior spending
    carries over with a kink, heavy spenders form their own regime.
    """
    base = np.select(
        [x <= 0, x < 5.5, x < 7.3, x < 8.9],
        [5.15, 5.45 + 0.18 * (x - 3.0), 6.45 + 0.15 * (x - 6.4), 7.25 + 0.12 * (x - 8.1)],
        default=8.45 + 0.25 * (x - 9.5),
    )
    return (base + LEVEL_SHIFT + np.array([0.0, -0.2, 0.15, 0.45])[ag] + 0.12 * (sex == 1) + 0.75 * hs
            + np.array([-0.55, -0.05, 0.25, 0.0, 0.05])[ins]
            + np.array([-0.15, 0.0, -0.1, -0.1])[race] + 0.06 * (linc - 11.0))


def synthetic_panel(n: int = PANEL_ROWS, seed: int = 20150616) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    ag = rng.choice(4, n, p=AGE_P)
    sex = (rng.random(n) < 0.51).astype(np.int8)
    race = rng.choice(4, n, p=RACE_P)
    ins = np.array([rng.choice(5, p=INS_P[a]) for a in ag])
    hs = (rng.random(n) < HS_BAD_P[ag]).astype(np.int8)
    fam_income = np.round(np.exp(11.0 + 0.85 * rng.standard_normal(n)), 0)
    preg = (sex == 1) & (ag > 0) & (ag < 3) & (rng.random(n) < 0.06)
    spend_t = _level_of_prior(rng, n, ag, ins, hs)

    x = np.log(spend_t + 1.0)
    linc = np.log(fam_income + 1.0)
    terms = {
        "intercept": np.ones(n), "age_19_34": ag == 1, "age_35_49": ag == 2, "age_50_64": ag == 3,
        "female": sex == 1, "hs_bad": hs == 1, "ins_Medicaid": ins == 1, "ins_OtherPublic": ins == 2,
        "ins_NonGroupPrivate": ins == 3, "ins_OtherPrivate": ins == 4, "race_Hispanic": race == 0,
        "race_Black": race == 2, "race_Other": race == 3, "log_income": linc, "pregnant": preg,
        "nonzero_last": spend_t > 0, "log_last_spend": x,
    }
    eta = sum(HURDLE_TRUTH[k] * np.asarray(v, dtype=float) for k, v in terms.items())
    nonzero = rng.random(n) < special.expit(eta)
    mean = _part_two_mean(x, ag, sex, hs, ins, race, linc)
    level = np.exp(mean + 1.15 * rng.standard_normal(n))
    spend_t1 = np.where(nonzero, np.maximum(np.round(level, 2), 1.0), 0.0)
    return {
        "age_group": ag.astype(np.int8), "sex": sex, "hs": hs, "ins_cat": ins.astype(np.int8),
        "race": race.astype(np.int8), "fam_income": fam_income, "preg": preg,
        "spend_t": spend_t, "spend_t1": spend_t1,
    }


PANEL_COLUMNS = ("age_group", "sex", "hs", "ins_cat", "race", "fam_income", "preg", "spend_t", "spend_t1")


def load_panel(path) -> dict[str, np.ndarray]:
    """Read a two-year panel table; categorical columns take labels or integer codes."""
    from ..population import AGE_GROUPS, CATEGORIES
    from ..tables import read_table

    t = read_table(path, PANEL_COLUMNS, ("fam_income", "spend_t", "spend_t1"))
    labels = {"age_group": AGE_GROUPS, **CATEGORIES}
    out = {}
    for col in PANEL_COLUMNS:
        raw = t[col].to_numpy()
        if col in ("fam_income", "spend_t", "spend_t1"):
            out[col] = raw.astype(float)
        elif col == "preg":
            out[col] = np.array([str(v).strip() in ("Pregnant", "1", "TRUE", "True", "true") for v in raw])
        else:
            lookup = {lab: i for i, lab in enumerate(labels[col])}
            out[col] = np.array([lookup[v] if v in lookup else int(v) for v in map(str, raw)], dtype=np.int8)
    return out


def save_panel(panel: dict[str, np.ndarray], path) -> None:
    import pandas as pd

    pd.DataFrame({c: panel[c] for c in PANEL_COLUMNS}).to_csv(path, index=False, float_format=None)
