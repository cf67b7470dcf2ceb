"""Family income dynamics, retirement, poverty thresholds and insurance redraws.

Income evolves once per family, keyed to the family head: the oldest living
member aged 18-64. A growth factor at or below ``JOB_LOSS_FACTOR`` marks job
loss and sends the family to an income drawn from the bottom 15 percent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .population import AGE_GROUPS, INS_CAT, SEX, age_group
from .rng import categorical
from .tables import read_table, resolve
from .weighted import weighted_quantile

JOB_LOSS_FACTOR = 0.10
SHOCK_THRESHOLD = 0.10
SHOCK_EPS = 1.0
BOTTOM_SHARE = 0.15
RETIREMENT_AGE = 65
INCOME_AGE_GROUPS = ("18-24", "25-34", "35-49", "50-64")
_INCOME_AGE_EDGES = np.array([25, 35, 50])
FPL_BAND_EDGES = np.array([1.0, 2.0, 4.0])  # bands: <100%, 100-200%, 200-400%, >=400%


def income_age_group(age) -> np.ndarray:
    return np.searchsorted(_INCOME_AGE_EDGES, np.asarray(age), side="right")


def fpl_band(ratio) -> np.ndarray:
    return np.searchsorted(FPL_BAND_EDGES, np.asarray(ratio, dtype=float), side="right")


# -- tables ------------------------------------------------------------------------
@dataclass
class EmpiricalCells:
    """Discrete distributions indexed by an integer cell id."""

    values: list[np.ndarray]
    cumw: list[np.ndarray]

    def draw(self, cell, u) -> np.ndarray:
        cell = np.asarray(cell)
        u = np.asarray(u, dtype=float)
        out = np.empty(cell.shape)
        for c in np.unique(cell):
            sel = cell == c
            cw = self.cumw[c]
            idx = np.searchsorted(cw, u[sel] * cw[-1], side="right")
            out[sel] = self.values[c][np.minimum(idx, cw.size - 1)]
        return out

    def mass_at_or_below(self, cell: int, x: float) -> float:
        v, cw = self.values[cell], self.cumw[cell]
        w = np.diff(np.concatenate([[0.0], cw]))
        return float(w[v <= x].sum() / cw[-1])


def _cells(keys, values, weights, n_cells):
    vals, cws = [], []
    for c in range(n_cells):
        sel = keys == c
        if not sel.any():
            raise ValueError(f"empty sampler cell {c}")
        order = np.argsort(values[sel], kind="stable")
        vals.append(values[sel][order])
        cws.append(np.cumsum(weights[sel][order]))
    return EmpiricalCells(vals, cws)


@dataclass
class IncomeChangeSampler:
    """Real growth factor distributions per (quintile, income age group, sex)."""

    cells: EmpiricalCells

    @staticmethod
    def cell_id(quintile, age_grp, sex):
        return (np.asarray(quintile) * len(INCOME_AGE_GROUPS) + np.asarray(age_grp)) * 2 + np.asarray(sex)

    def draw(self, quintile, age_grp, sex, u):
        return self.cells.draw(self.cell_id(quintile, age_grp, sex), u)

    def job_loss_prob(self, quintile, age_grp, sex) -> float:
        return self.cells.mass_at_or_below(int(self.cell_id(quintile, age_grp, sex)), JOB_LOSS_FACTOR)

    @classmethod
    def constant(cls, factor: float):
        n = 5 * len(INCOME_AGE_GROUPS) * 2
        return cls(EmpiricalCells([np.array([factor])] * n, [np.array([1.0])] * n))


def load_income_sampler(path=None) -> IncomeChangeSampler:
    cols = ("quintile", "age_group", "sex", "growth_factor", "weight")
    t = read_table(resolve(path, "income_sampler.csv"), cols, ("quintile", "growth_factor", "weight"))
    if (t["growth_factor"] < 0).any():
        raise ValueError("growth factors must be nonnegative")
    q = t["quintile"].astype(int).to_numpy() - 1
    ag = np.array([INCOME_AGE_GROUPS.index(a) for a in t["age_group"]])
    sx = np.array([SEX.index(s) for s in t["sex"]])
    keys = IncomeChangeSampler.cell_id(q, ag, sx)
    return IncomeChangeSampler(_cells(keys, t["growth_factor"].to_numpy(float), t["weight"].to_numpy(float), 40))


@dataclass
class ExitSampler:
    """Re-employment from the bottom 15 percent, per (income age group, sex).

    ``relative`` values are multiples of the current 15th percentile; otherwise
    they are nominal amounts.
    """

    exit_prob: np.ndarray  # (4, 2)
    cells: EmpiricalCells
    relative: bool = True

    def draw(self, age_grp, sex, u, p15: float):
        x = self.cells.draw(np.asarray(age_grp) * 2 + np.asarray(sex), u)
        return x * p15 if self.relative else x

    @classmethod
    def degenerate(cls, prob: float, value: float, relative: bool = False):
        return cls(np.full((4, 2), prob), EmpiricalCells([np.array([value])] * 8, [np.array([1.0])] * 8), relative)


def load_exit_sampler(path=None) -> ExitSampler:
    cols = ("age_group", "sex", "exit_prob", "multiple", "weight")
    t = read_table(resolve(path, "income_exit.csv"), cols, ("exit_prob", "multiple", "weight"))
    ag = np.array([INCOME_AGE_GROUPS.index(a) for a in t["age_group"]])
    sx = np.array([SEX.index(s) for s in t["sex"]])
    prob = np.zeros((4, 2))
    prob[ag, sx] = t["exit_prob"].to_numpy(float)
    cells = _cells(ag * 2 + sx, t["multiple"].to_numpy(float), t["weight"].to_numpy(float), 8)
    return ExitSampler(prob, cells, relative=True)


@dataclass
class FplTable:
    """Poverty thresholds by family size (base year) and the CPI path."""

    base: np.ndarray  # index 0 -> size 1
    increment: float
    cpi_rate: float | list = 0.02

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        if np.any(np.diff(self.base) <= 0):
            raise ValueError("poverty thresholds must increase with family size")

    def cpi_factor(self, year: int) -> float:
        """CPI growth from year-1 to year (1.0 for year 0)."""
        if year <= 0:
            return 1.0
        if np.ndim(self.cpi_rate) == 0:
            return 1.0 + float(self.cpi_rate)
        rates = list(self.cpi_rate)
        return 1.0 + float(rates[min(year, len(rates)) - 1])

    def cpi_index(self, year: int) -> float:
        """Cumulative price level relative to year 0."""
        out = 1.0
        for t in range(1, year + 1):
            out *= self.cpi_factor(t)
        return out

    def threshold(self, size, year: int = 0) -> np.ndarray:
        size = np.maximum(np.asarray(size, dtype=np.int64), 1)
        top = self.base.size
        base = np.where(size <= top, self.base[np.minimum(size, top) - 1], self.base[-1] + self.increment * (size - top))
        return base * self.cpi_index(year)


def load_fpl(path=None, cpi_rate=0.02) -> FplTable:
    t = read_table(resolve(path, "fpl.csv"), ("year", "family_size", "threshold"), ("year", "family_size", "threshold"))
    t = t[t["year"] == t["year"].min()].sort_values("family_size")
    base = t["threshold"].to_numpy(float)
    inc = float(base[-1] - base[-2]) if base.size > 1 else 0.0
    return FplTable(base, inc, cpi_rate)


def fpl_ratio(fam_income, family_size, fpl: FplTable, year: int = 0):
    return np.asarray(fam_income, dtype=float) / fpl.threshold(family_size, year)


@dataclass
class InsuranceByFpl:
    """P(ins_cat | age group, FPL band): array (4, 4, 5)."""

    probs: np.ndarray

    def draw(self, age_grp, band, u):
        return categorical(np.asarray(u), self.probs[np.asarray(age_grp), np.asarray(band)]).astype(np.int8)


def load_insurance_by_fpl(path=None) -> InsuranceByFpl:
    t = read_table(resolve(path, "insurance_by_fpl.csv"), ("age_group", "fpl_band", "ins_cat", "p"), ("fpl_band", "p"))
    probs = np.zeros((4, 4, 5))
    for ag, b, ins, p in zip(t["age_group"], t["fpl_band"].astype(int), t["ins_cat"], t["p"]):
        probs[AGE_GROUPS.index(ag), b, INS_CAT.index(ins)] = p
    return InsuranceByFpl(probs)


def insurance_from_population(ins, age_grp, band, weights, fallback: InsuranceByFpl | None = None) -> InsuranceByFpl:
    """Empirical insurance distribution by (age group, FPL band); empty cells use the age-group marginal."""
    probs = np.zeros((4, 4, 5))
    np.add.at(probs, (age_grp, band, ins), weights)
    for g in range(4):
        marginal = probs[g].sum(axis=0)
        for b in range(4):
            if probs[g, b].sum() <= 0:
                if marginal.sum() > 0:
                    probs[g, b] = marginal
                elif fallback is not None:
                    probs[g, b] = fallback.probs[g, b]
                else:
                    probs[g, b] = np.eye(5)[4]
    return InsuranceByFpl(probs / probs.sum(axis=2, keepdims=True))


# -- rules ---------------------------------------------------------------------------
def is_income_shock(old, new, eps: float = SHOCK_EPS):
    old = np.asarray(old, dtype=float)
    new = np.asarray(new, dtype=float)
    return np.abs(new - old) / np.maximum(old, eps) >= SHOCK_THRESHOLD - 1e-12


def maybe_redraw_insurance(ins_cat, old_income, new_income, age_grp, band, dist: InsuranceByFpl, u):
    """Insurance codes after the year's income change; redraw only on a 10% shock."""
    ins_cat = np.asarray(ins_cat)
    shock = is_income_shock(old_income, new_income)
    return np.where(shock, dist.draw(age_grp, band, u), ins_cat).astype(np.int8), shock


def apply_retirement(fam_income: float, wage_prop: float) -> tuple[float, float]:
    """(new family income, retiree's new wage_prop)."""
    return fam_income * (1.0 - wage_prop), 0.0


@dataclass
class IncomeSnapshot:
    """Start-of-year income distribution over families (weights = household weights)."""

    quintile_edges: np.ndarray
    p15: float
    pool_income: np.ndarray
    pool_cumw: np.ndarray

    @classmethod
    def from_families(cls, income, weight):
        income = np.asarray(income, dtype=float)
        weight = np.asarray(weight, dtype=float)
        edges = np.array([weighted_quantile(income, weight, q) for q in (0.2, 0.4, 0.6, 0.8)])
        p15 = float(weighted_quantile(income, weight, BOTTOM_SHARE))
        below = (income < p15) & (weight > 0)
        order = np.argsort(income[below], kind="stable")
        return cls(edges, p15, income[below][order], np.cumsum(weight[below][order]))

    def quintile(self, income) -> np.ndarray:
        return np.searchsorted(self.quintile_edges, np.asarray(income, dtype=float), side="right")


def apply_job_loss(u, snap: IncomeSnapshot) -> np.ndarray:
    """Incomes drawn weight-proportionally from families below the 15th percentile."""
    u = np.asarray(u, dtype=float)
    if snap.pool_income.size == 0:
        return np.full(u.shape, snap.p15)
    idx = np.searchsorted(snap.pool_cumw, u * snap.pool_cumw[-1], side="right")
    return snap.pool_income[np.minimum(idx, snap.pool_income.size - 1)]


def update_family_income(income, head_age, head_sex, has_head, snap: IncomeSnapshot,
                         sampler: IncomeChangeSampler, exits: ExitSampler, cpi_factor: float, u):
    """New nominal family incomes.

    ``u`` holds four uniforms per family: growth draw, job-loss pool draw,
    re-employment check, re-employment amount. Families without a working-age
    head only follow the CPI. Returns (income, job_loss mask, exit mask).
    """
    income = np.asarray(income, dtype=float)
    u = np.asarray(u, dtype=float)
    ag = income_age_group(np.clip(head_age, 18, 64))
    sex = np.asarray(head_sex)
    q = snap.quintile(income)
    factor = sampler.draw(q, ag, sex, u[:, 0])
    new = income * factor * cpi_factor
    lost = has_head & (factor <= JOB_LOSS_FACTOR)
    new = np.where(lost, apply_job_loss(u[:, 1], snap), new)
    bottom = has_head & (income < snap.p15)
    leave = bottom & (u[:, 2] < exits.exit_prob[ag, sex])
    new = np.where(leave, exits.draw(ag, sex, u[:, 3], snap.p15), new)
    lost &= ~leave
    new = np.where(has_head, new, income * cpi_factor)
    return np.maximum(new, 0.0), lost, leave
