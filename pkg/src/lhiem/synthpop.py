"""Synthetic initial population.

Families are generated from per-family counter-based streams, person weights
are raked to age, sex and uninsured margins, and spending is drawn from a
per-(age group, insurance) distribution map and scaled to national accounts.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import special

from .errors import InvalidTargets
from .expenditure.costs import NHEA_FACTOR
from .health import HealthHazards, calibrate_hazards, load_hazards, load_health_target, state_distribution
from .income import InsuranceByFpl, fpl_band, fpl_ratio, load_fpl, load_insurance_by_fpl
from .population import (AGE_GROUPS, FIELDS, INS_CAT, RACE, UNINSURED, Population, age_group,
                         read_population, require_valid)
from .rng import Streams, categorical, keys_of
from .tables import read_table, resolve

log = logging.getLogger(__name__)

N_BANDS = 13  # 5-year bands 0-4 .. 60-64
MAX_FAMILY = 6


@dataclass
class SynthTargets:
    total_population: float
    age_band_shares: np.ndarray  # (13,)
    uninsured: np.ndarray  # persons, by age group
    percent_female: np.ndarray  # by age group
    spending_bucket_means: dict[str, float]
    nhea_factor: float = NHEA_FACTOR
    family_size_probs: np.ndarray = field(default_factory=lambda: np.array([0.28, 0.34, 0.15, 0.13, 0.07, 0.03]))
    immigrant_family_share: float = 0.04
    median_family_income: float = 62000.0
    race_shares: np.ndarray = field(default_factory=lambda: np.array([0.18, 0.61, 0.13, 0.08]))

    def validate(self):
        s = np.asarray(self.age_band_shares, dtype=float)
        if s.shape != (N_BANDS,) or np.any(s < 0) or s.sum() > 1 + 1e-4:
            raise InvalidTargets("age-band shares must be 13 nonnegative values summing to at most 1 (rounding tolerance 1e-4)")
        if s.sum() <= 0 or self.total_population <= 0:
            raise InvalidTargets("population total must be positive")
        totals = self.group_totals()
        if np.any(np.asarray(self.uninsured) < 0) or np.any(np.asarray(self.uninsured) > totals):
            raise InvalidTargets("uninsured counts must lie between 0 and the age-group total")
        pf = np.asarray(self.percent_female, dtype=float)
        if np.any((pf < 0) | (pf > 100)):
            raise InvalidTargets("percent female must lie in [0, 100]")
        fp = np.asarray(self.family_size_probs, dtype=float)
        if fp.size < 1 or fp.size > MAX_FAMILY or np.any(fp < 0) or fp.sum() <= 0:
            raise InvalidTargets(f"family-size probabilities must cover sizes 1..{MAX_FAMILY} and be nonnegative")
        if not 0 <= self.immigrant_family_share <= 1:
            raise InvalidTargets("immigrant family share must lie in [0, 1]")
        if self.nhea_factor <= 0:
            raise InvalidTargets("NHEA factor must be positive")

    def band_totals(self) -> np.ndarray:
        s = np.asarray(self.age_band_shares, dtype=float)
        return self.total_population * s / s.sum()

    def group_totals(self) -> np.ndarray:
        """Age-group totals, splitting the 15-19 band 4:1 between <=18 and 19-34."""
        b = self.band_totals()
        return np.array([b[0:3].sum() + 0.8 * b[3], 0.2 * b[3] + b[4:7].sum(), b[7:10].sum(), b[10:13].sum()])


def load_targets(path=None) -> SynthTargets:
    from .tables import data_path

    p = data_path("synth_targets.json") if path is None else path
    try:
        d = json.loads(open(p, encoding="utf-8").read())
    except OSError as exc:
        from .errors import ParseError
        raise ParseError(str(exc), path=p) from exc
    try:
        t = SynthTargets(
            total_population=float(d["total_population"]),
            age_band_shares=np.array(list(d["age_band_shares"].values()), dtype=float),
            uninsured=np.array([d["uninsured_millions"][g] for g in AGE_GROUPS], dtype=float) * 1e6,
            percent_female=np.array([d["percent_female"][g] for g in AGE_GROUPS], dtype=float),
            spending_bucket_means={k: float(v) for k, v in d.get("spending_bucket_means", {}).items()},
            nhea_factor=float(d.get("nhea_factor", NHEA_FACTOR)),
            family_size_probs=np.array(list(d.get("family_size_probs", {"1": 1}).values()), dtype=float),
            immigrant_family_share=float(d.get("immigrant_family_share", 0.04)),
            median_family_income=float(d.get("median_family_income", 62000)),
            race_shares=np.array([d.get("race_shares", {}).get(r, s) for r, s in
                                  zip(RACE, (0.18, 0.61, 0.13, 0.08))], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidTargets(f"{p}: malformed targets ({exc})") from exc
    t.validate()
    return t


# -- spending map ------------------------------------------------------------------------
SPEND_COLUMNS = ("p_zero", "log_mean", "log_sd", "tail_weight", "tail_scale", "tail_alpha", "mean_deductible")


@dataclass
class SpendingMap:
    """Per (age group, ins_cat) cell: zero-inflated lognormal with an optional Pareto tail."""

    cells: dict[tuple[int, int], dict[str, float]]

    def __post_init__(self):
        for key, c in self.cells.items():
            if not (0 <= c["p_zero"] <= 1 and 0 <= c["tail_weight"] <= 1):
                raise ValueError(f"cell {key}: probabilities must lie in [0, 1]")
            if not c["log_sd"] >= 0:
                raise ValueError(f"cell {key}: log_sd must be nonnegative")
            if c["tail_weight"] > 0 and not (c["tail_scale"] > 0 and c["tail_alpha"] > 0):
                raise ValueError(f"cell {key}: tail needs positive scale and alpha")

    def to_frame(self) -> pd.DataFrame:
        rows = [{"age_group": AGE_GROUPS[g], "ins_cat": INS_CAT[i], **c} for (g, i), c in sorted(self.cells.items())]
        return pd.DataFrame(rows, columns=["age_group", "ins_cat", *SPEND_COLUMNS])

    def save(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.10g")


def load_spending_map(path=None) -> SpendingMap:
    t = read_table(resolve(path, "spending_map.csv"), ("age_group", "ins_cat", *SPEND_COLUMNS), SPEND_COLUMNS)
    cells = {}
    for _, r in t.iterrows():
        cells[(AGE_GROUPS.index(r["age_group"]), INS_CAT.index(r["ins_cat"]))] = {c: float(r[c]) for c in SPEND_COLUMNS}
    return SpendingMap(cells)


def draw_cell_spending(params: dict[str, np.ndarray], u) -> np.ndarray:
    """Spending from three uniforms per person: zero draw, tail draw, amount."""
    u = np.asarray(u)
    zero = u[:, 0] < params["p_zero"]
    tail = u[:, 1] < params["tail_weight"]
    body = np.exp(params["log_mean"] + params["log_sd"] * special.ndtri(u[:, 2]))
    with np.errstate(divide="ignore", invalid="ignore"):
        pareto = params["tail_scale"] * np.power(u[:, 2], -1.0 / np.where(params["tail_alpha"] > 0, params["tail_alpha"], 1.0))
    spend = np.where(tail, pareto, body)
    return np.where(zero, 0.0, spend)


def assign_spending_attributes(pop: Population, smap: SpendingMap, seed: int, nhea_factor: float = 1.0) -> Population:
    """Spending and deductibles from each person's (age group, ins_cat) cell.

    Persons in cells missing from the map keep their current spending and get
    the weighted overall average deductible.
    """
    out = pop.copy()
    ag = age_group(out["age"])
    ins = out["ins_cat"].astype(int)
    n = len(out)
    params = {c: np.full(n, np.nan) for c in SPEND_COLUMNS}
    known = np.zeros(n, dtype=bool)
    for (g, i), cell in smap.cells.items():
        sel = (ag == g) & (ins == i)
        known |= sel
        for c in SPEND_COLUMNS:
            params[c][sel] = cell[c]
    u = Streams(seed).uniform(0, "synth-spend", out["key"], 3)
    spend = np.round(draw_cell_spending({k: np.nan_to_num(v) for k, v in params.items()}, u) * nhea_factor, 2)
    out["med_spend"] = np.where(known, spend, out["med_spend"])
    w = out["wt"]
    overall = float(np.sum(w[known] * params["mean_deductible"][known]) / w[known].sum()) if known.any() else 0.0
    out["deduct"] = np.where(known, params["mean_deductible"], overall)
    return out


def cell_deductibles(smap: SpendingMap) -> np.ndarray:
    """(4, 5) mean deductibles; missing cells get the unweighted average of present ones."""
    d = np.full((4, 5), np.nan)
    for (g, i), c in smap.cells.items():
        d[g, i] = c["mean_deductible"]
    return np.where(np.isnan(d), np.nanmean(d), d)


# -- family generation ------------------------------------------------------------------
_U_PER_FAMILY = 32


def _family_uniforms(seed: int, n_families: int) -> np.ndarray:
    keys = np.arange(n_families, dtype=np.uint64) + np.uint64(1)
    return Streams(seed).uniform(0, "synth-family", keys, _U_PER_FAMILY)


def _build_families(u, targets: SynthTargets, n: int):
    """Vectorized family composition; returns per-person columns (unweighted)."""
    fp = np.asarray(targets.family_size_probs, dtype=float)
    size = categorical(u[:, 0], fp) + 1
    cum = np.cumsum(size)
    nf = int(np.searchsorted(cum, n, side="left")) + 1
    size = size[:nf].copy()
    size[-1] -= cum[nf - 1] - n
    u = u[:nf]

    # head: age 19-64, more mass at 25-55 for larger families
    young = np.where(size == 1, 0.0, 0.35)
    head_age = 19 + np.floor(46 * special.betainc(1.0 + young, 1.0 + young, u[:, 4]) - 1e-9).astype(int)
    head_age = np.clip(head_age, 19, 64)
    head_female = u[:, 5] < np.where(size == 1, 0.52, 0.42)
    couple = (size >= 2) & (u[:, 3] < 0.62)
    race = categorical(u[:, 2], targets.race_shares)
    immigrant = u[:, 1] < targets.immigrant_family_share

    cols = {k: [] for k in ("fam", "member", "age", "sex", "adult")}
    for m in range(MAX_FAMILY):
        has = size > m
        f = np.flatnonzero(has)
        if m == 0:
            age, sex, adult = head_age[f], head_female[f].astype(int), np.ones(f.size, bool)
        elif m == 1:
            sp = couple[f]
            sp_age = np.clip(np.round(head_age[f] + 6 * special.ndtri(u[f, 6])), 19, 64).astype(int)
            kid_age, kid_adult = _other_member(u[f], head_age[f], m)
            age = np.where(sp, sp_age, kid_age)
            adult = np.where(sp, True, kid_adult)
            sex = np.where(sp, 1 - head_female[f].astype(int), (u[f, 14 + m] < 0.488).astype(int))
        else:
            age, adult = _other_member(u[f], head_age[f], m)
            sex = (u[f, 14 + m] < 0.488).astype(int)
        cols["fam"].append(f)
        cols["member"].append(np.full(f.size, m))
        cols["age"].append(age)
        cols["sex"].append(sex)
        cols["adult"].append(adult)
    out = {k: np.concatenate(v) for k, v in cols.items()}
    order = np.lexsort((out["member"], out["fam"]))
    out = {k: v[order] for k, v in out.items()}
    return out, size, race, immigrant, couple, u


def _other_member(u, head_age, m):
    """Child (0-18, at least 17 years younger than the head) or adult relative."""
    adult = u[:, 8 + m] < 0.22
    span = np.clip(head_age - 16, 1, 19)
    child_age = np.floor(u[:, 20 + m] * span).astype(int)
    rel_age = np.where(head_age >= 40, 19 + np.floor(u[:, 20 + m] * 8), 19 + np.floor(u[:, 20 + m] * 46)).astype(int)
    return np.where(adult, rel_age, child_age), adult


def rake(weights, margins, max_iter: int = 500, tol: float = 1e-10):
    """Iterative proportional fitting of person weights.

    ``margins`` is a list of (category codes, target totals) pairs.
    """
    w = np.asarray(weights, dtype=float).copy()
    for it in range(max_iter):
        worst = 0.0
        for codes, target in margins:
            cur = np.bincount(codes, weights=w, minlength=len(target))
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(cur > 0, np.asarray(target) / cur, 1.0)
            if np.any((cur <= 0) & (np.asarray(target) > 0)):
                raise InvalidTargets("a raking margin has a target for a category with no persons")
            w *= f[codes]
            worst = max(worst, float(np.max(np.abs(f - 1.0))))
        if worst < tol:
            return w
    log.warning("raking stopped after %d iterations (max adjustment %.2e)", max_iter, worst)
    return w


def _present_margin(codes, target, total: float):
    """Margin restricted to categories that have persons, rescaled to ``total``.

    Small samples cannot populate every category; their target mass is spread
    proportionally over the categories that are present.
    """
    target = np.asarray(target, dtype=float)
    present = np.bincount(codes, minlength=target.size) > 0
    if present.all():
        return codes, target
    log.warning("raking margin: %d empty categories dropped", int((~present).sum()))
    kept = np.where(present, target, 0.0)
    if kept.sum() <= 0:
        kept = present.astype(float)
    return codes, kept * total / kept.sum()


def generate_population(n: int, targets: SynthTargets | None = None, smap: SpendingMap | None = None,
                        seed: int = 0, hazards: HealthHazards | None = None,
                        ins_table: InsuranceByFpl | None = None) -> Population:
    if n < 1:
        raise ValueError("n must be at least 1")
    targets = load_targets() if targets is None else targets
    targets.validate()
    smap = load_spending_map() if smap is None else smap
    if hazards is None:
        hazards = calibrate_hazards(load_hazards(), load_health_target())
    ins_table = load_insurance_by_fpl() if ins_table is None else ins_table
    fpl = load_fpl()

    u_fam = _family_uniforms(seed, n)  # every family has at least one person
    p, size, race, immigrant, couple, u_fam = _build_families(u_fam, targets, n)
    nf = size.size
    fam = p["fam"]
    pid = np.array([f"p{f}.{m}" for f, m in zip(fam, p["member"])], dtype=object)
    fid = np.array([f"f{f}" for f in fam], dtype=object)
    tid = np.array([f"f{f}.t{0 if (m <= 1 and (m == 0 or couple[f])) or not a else m}"
                    for f, m, a in zip(fam, p["member"], p["adult"])], dtype=object)
    n_adults = np.bincount(fam, weights=p["adult"].astype(float), minlength=nf)

    # family income: lognormal around the median, higher for multi-adult and prime-age heads
    head_age = p["age"][p["member"] == 0]
    shift = 0.28 * (n_adults - 1) - 0.0009 * (head_age - 48.0) ** 2 + 0.35 - np.where(np.isin(race, [0, 2]), 0.22, 0.0)
    income = np.exp(np.log(targets.median_family_income) + shift + 0.85 * special.ndtri(u_fam[:, 7]) - 0.28)
    income = np.round(np.where(u_fam[:, 9] < 0.015, 0.0, income), 0)

    # wage shares: labor share of income split by sampled adult earnings
    labor = 0.55 + 0.45 * u_fam[:, 10]
    keys = keys_of(pid)
    earn = np.where(p["adult"], 0.2 + Streams(seed).uniform(0, "synth-earnings", keys), 0.0)
    earn = np.where(p["member"] == 0, earn + 0.4, earn)
    esum = np.bincount(fam, weights=earn, minlength=nf)
    wage_prop = np.where(esum[fam] > 0, labor[fam] * earn / np.where(esum[fam] > 0, esum[fam], 1.0), 0.0)

    # person-level insurance and health
    up = Streams(seed).uniform(0, "synth-person", keys, 3)
    ag = age_group(p["age"])
    ratio = fpl_ratio(income[fam], size[fam], fpl, 0)
    ins = ins_table.draw(ag, fpl_band(ratio), up[:, 0])
    dist = state_distribution(hazards, max_age=64)
    morbidity = categorical(up[:, 1], dist[np.clip(p["age"], 0, 64), p["sex"]]).astype(np.int8)

    # weights: rake to age bands, age group x sex, age group x uninsured
    band = np.minimum(p["age"] // 5, N_BANDS - 1)
    groups = targets.group_totals()
    pf = np.asarray(targets.percent_female) / 100.0
    sex_target = np.column_stack([groups * (1 - pf), groups * pf]).ravel()
    unins = np.asarray(targets.uninsured, dtype=float)
    ins_target = np.column_stack([groups - unins, unins]).ravel()
    w0 = np.full(n, targets.total_population / n)
    total = float(targets.total_population)
    wt = rake(w0, [
        _present_margin(band, targets.band_totals(), total),
        _present_margin(ag * 2 + p["sex"], sex_target, total),
        _present_margin(ag * 2 + (ins == UNINSURED), ins_target, total),
    ])
    wth = np.bincount(fam, weights=wt, minlength=nf) / size
    data = {
        "pid": pid, "fid": fid, "tid": tid, "wt": wt, "wth": wth[fam],
        "sex": p["sex"], "age": p["age"], "race": race[fam], "survive": np.ones(n, bool),
        "fam_income": income[fam], "wage_prop": np.round(wage_prop, 6), "ins_cat": ins,
        "deduct": np.zeros(n), "med_spend": np.zeros(n), "visits": np.zeros(n, dtype=np.int64),
        "preg": np.zeros(n, bool), "hs": (morbidity != 0).astype(np.int8), "morbidity": morbidity,
        "immigrant": immigrant[fam], "death_year": np.full(n, -1),
    }
    pop = Population(0, data)
    pop = assign_spending_attributes(pop, smap, seed, targets.nhea_factor)
    visits = np.floor(np.log1p(pop["med_spend"] / 150.0) * (1.0 + up[:, 2])).astype(np.int64)
    pop["visits"] = visits
    return require_valid(pop)


def load_population(path) -> Population:
    """Read a snapshot file and require that it passes validation."""
    return require_valid(read_population(path))

