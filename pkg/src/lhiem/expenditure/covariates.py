"""Covariate encoding for the two-part spending model.

Input rows are mappings of equal-length arrays with the columns in
``COVARIATES``. Categorical columns carry integer codes from
:mod:`lhiem.population`.
"""

from __future__ import annotations

import numpy as np

from ..errors import MissingCovariate
from ..population import AGE_GROUPS, INS_CAT, RACE, age_group

COVARIATES = ("age_group", "sex", "hs", "ins_cat", "race", "fam_income", "preg", "spend_t")

HURDLE_TERMS = (
    "intercept", "age_19_34", "age_35_49", "age_50_64", "female", "hs_bad",
    "ins_Medicaid", "ins_OtherPublic", "ins_NonGroupPrivate", "ins_OtherPrivate",
    "race_Hispanic", "race_Black", "race_Other", "log_income", "pregnant",
    "nonzero_last", "log_last_spend",
)
GLM_TERMS = (
    "intercept", "log_last_spend", "age_19_34", "age_35_49", "age_50_64",
    "ins_Medicaid", "ins_OtherPublic", "ins_NonGroupPrivate", "ins_OtherPrivate",
    "female", "log_income", "race_Hispanic", "race_Black", "race_Other", "hs_bad",
)

# tree features: name -> number of categorical levels (0 = numeric)
TREE_FEATURES = {
    "log_last_spend": 0,
    "age_group": len(AGE_GROUPS),
    "sex": 2,
    "hs": 2,
    "ins_cat": len(INS_CAT),
    "race": len(RACE),
    "log_income": 0,
}


def log_spend(spend):
    """Previous-spend predictor; the +1 keeps zero spenders representable."""
    return np.log(np.asarray(spend, dtype=float) + 1.0)


def log_income(income):
    return np.log(np.asarray(income, dtype=float) + 1.0)


def _col(rows, name):
    try:
        v = rows[name]
    except (KeyError, IndexError):
        raise MissingCovariate(f"missing covariate {name!r}") from None
    v = np.asarray(v)
    if v.dtype.kind == "f" and np.isnan(v).any():
        raise MissingCovariate(f"covariate {name!r} has missing values")
    return v


def check(rows):
    for name in COVARIATES:
        _col(rows, name)


def _terms(rows):
    ag = _col(rows, "age_group").astype(int)
    ins = _col(rows, "ins_cat").astype(int)
    race = _col(rows, "race").astype(int)
    spend = _col(rows, "spend_t").astype(float)
    n = ag.shape[0]
    return {
        "intercept": np.ones(n),
        "age_19_34": (ag == 1).astype(float),
        "age_35_49": (ag == 2).astype(float),
        "age_50_64": (ag == 3).astype(float),
        "female": (_col(rows, "sex") == 1).astype(float),
        "hs_bad": (_col(rows, "hs") == 1).astype(float),
        "ins_Medicaid": (ins == 1).astype(float),
        "ins_OtherPublic": (ins == 2).astype(float),
        "ins_NonGroupPrivate": (ins == 3).astype(float),
        "ins_OtherPrivate": (ins == 4).astype(float),
        "race_Hispanic": (race == 0).astype(float),
        "race_Black": (race == 2).astype(float),
        "race_Other": (race == 3).astype(float),
        "log_income": log_income(_col(rows, "fam_income")),
        "pregnant": _col(rows, "preg").astype(float),
        "nonzero_last": (spend > 0).astype(float),
        "log_last_spend": log_spend(spend),
    }


def design(rows, terms) -> np.ndarray:
    t = _terms(rows)
    return np.column_stack([t[name] for name in terms])


def row_dot(X, coef) -> np.ndarray:
    """``X @ coef`` summed term by term, so each row's value does not depend on
    which other rows share the call (BLAS kernels vary with length and alignment)."""
    out = np.zeros(X.shape[0])
    for j, c in enumerate(coef):
        out += X[:, j] * c
    return out


def tree_matrix(rows) -> np.ndarray:
    """Feature matrix with columns in ``TREE_FEATURES`` order."""
    cols = {
        "log_last_spend": log_spend(_col(rows, "spend_t")),
        "age_group": _col(rows, "age_group").astype(float),
        "sex": _col(rows, "sex").astype(float),
        "hs": _col(rows, "hs").astype(float),
        "ins_cat": _col(rows, "ins_cat").astype(float),
        "race": _col(rows, "race").astype(float),
        "log_income": log_income(_col(rows, "fam_income")),
    }
    return np.column_stack([cols[name] for name in TREE_FEATURES])


def rows_from_population(pop, idx=None) -> dict[str, np.ndarray]:
    """Covariate rows for the persons at ``idx`` (all persons when None)."""
    sel = slice(None) if idx is None else idx
    return {
        "age_group": age_group(pop["age"][sel]),
        "sex": pop["sex"][sel],
        "hs": pop["hs"][sel],
        "ins_cat": pop["ins_cat"][sel],
        "race": pop["race"][sel],
        "fam_income": pop["fam_income"][sel],
        "preg": pop["preg"][sel],
        "spend_t": pop["med_spend"][sel],
    }


def rows_from_record(person) -> dict[str, np.ndarray]:
    from ..population import encode

    return {
        "age_group": age_group(np.array([person.age])),
        "sex": np.array([encode("sex", person.sex)]),
        "hs": np.array([encode("hs", person.hs)]),
        "ins_cat": np.array([encode("ins_cat", person.ins_cat)]),
        "race": np.array([encode("race", person.race)]),
        "fam_income": np.array([float(person.fam_income)]),
        "preg": np.array([person.preg == "Pregnant"]),
        "spend_t": np.array([float(person.med_spend)]),
    }
