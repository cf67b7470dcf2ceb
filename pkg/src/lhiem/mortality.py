"""Deaths from life-table probabilities with spending-linked variability.

Individual probabilities scale the life-table value by ``v`` of the person's
spending percentile and a global factor ``delta``. Bernoulli deaths are then
aligned to the year's weighted target by adding the highest-risk survivors or
removing the lowest-risk decedents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .population import CHRONIC, SEX
from .tables import read_table, resolve


@dataclass
class LifeTable:
    q: np.ndarray  # (ages, 2)
    targets: dict[int, float] | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if np.any((self.q < 0) | (self.q > 1)):
            raise ValueError("death probabilities must lie in [0, 1]")

    def base_q(self, age, sex) -> np.ndarray:
        a = np.clip(np.asarray(age), 0, self.q.shape[0] - 1)
        return self.q[a, np.asarray(sex, dtype=np.int64)]

    def target(self, year: int, age, sex, weight) -> float:
        """Weighted death target; defaults to expected deaths under the base table."""
        if self.targets is not None and year in self.targets:
            return float(self.targets[year])
        return float(np.sum(np.asarray(weight) * self.base_q(age, sex)))


def load_life_table(path=None, targets_path=None) -> LifeTable:
    t = read_table(resolve(path, "life_table.csv"), ("age", "sex", "q"), ("age", "q"))
    ages = t["age"].astype(int).to_numpy()
    q = np.full((ages.max() + 1, 2), np.nan)
    q[ages, [SEX.index(s) for s in t["sex"]]] = t["q"].to_numpy(float)
    if np.isnan(q).any():
        raise ValueError("life table must cover every age for both sexes")
    targets = None
    if targets_path is not None:
        tt = read_table(targets_path, ("year", "target_deaths_weighted"), ("year", "target_deaths_weighted"))
        targets = dict(zip(tt["year"].astype(int), tt["target_deaths_weighted"].astype(float)))
    return LifeTable(q, targets)


@dataclass
class PiecewiseLinear:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("knots must be strictly increasing")

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.y)

    @property
    def nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.y) >= 0))


@dataclass
class EolSpendingLink:
    v: PiecewiseLinear  # spending percentile (0-100) -> death probability scale
    m: PiecewiseLinear  # individual death probability -> last-year spending multiplier
    delta: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if not (self.v.nondecreasing and self.m.nondecreasing):
            raise ValueError("v and m must be nondecreasing")
        if np.any(self.m.y < 1):
            raise ValueError("end-of-life multipliers must be at least 1")

    @classmethod
    def identity(cls, delta: float = 1.0):
        return cls(PiecewiseLinear([0, 100], [1, 1]), PiecewiseLinear([0, 1], [1, 1]), delta)


def load_link(v_path=None, m_path=None, delta: float = 1.0) -> EolSpendingLink:
    v = read_table(resolve(v_path, "mortality_v.csv"), ("percentile", "v"), ("percentile", "v"))
    m = read_table(resolve(m_path, "mortality_m.csv"), ("risk", "m"), ("risk", "m"))
    return EolSpendingLink(PiecewiseLinear(v["percentile"], v["v"]), PiecewiseLinear(m["risk"], m["m"]), delta)


def spending_percentile(spend, weight, tiebreak=None) -> np.ndarray:
    """Weighted mid-rank percentile (0-100) of each value; ties ordered by ``tiebreak``."""
    spend = np.asarray(spend, dtype=float)
    weight = np.asarray(weight, dtype=float)
    keys = (spend,) if tiebreak is None else (np.asarray(tiebreak), spend)
    order = np.lexsort(keys)
    w = weight[order]
    total = w.sum()
    if total <= 0:
        return np.full(spend.size, 50.0)
    mid = (np.cumsum(w) - 0.5 * w) / total * 100.0
    out = np.empty(spend.size)
    out[order] = mid
    return out


def individual_death_prob(base_q, percentile, link: EolSpendingLink):
    return np.clip(np.asarray(base_q) * link.v(percentile) * link.delta, 0.0, 1.0)


def select_deaths(q, weight, u, target: float, tiebreak=None) -> np.ndarray:
    """Death mask: Bernoulli draws aligned so weighted deaths are within one weight of target.

    ``tiebreak`` orders persons with equal risk (defaults to ``u``).
    """
    q = np.asarray(q, dtype=float)
    w = np.asarray(weight, dtype=float)
    u = np.asarray(u, dtype=float)
    tb = u if tiebreak is None else np.asarray(tiebreak)
    dead = u < q
    total = float(w[dead].sum())
    if total < target:
        cand = np.flatnonzero(~dead & (w > 0))
        cand = cand[np.lexsort((tb[cand], -q[cand]))]
        dead = _align(dead, cand, w, target - total, add=True)
    elif total > target:
        cand = np.flatnonzero(dead & (w > 0))
        cand = cand[np.lexsort((-tb[cand], q[cand]))]
        dead = _align(dead, cand, w, total - target, add=False)
    return dead


def _align(dead, cand, w, gap, add):
    if cand.size == 0:
        return dead
    cum = np.cumsum(w[cand])
    k = int(np.searchsorted(cum, gap, side="left"))  # first prefix reaching the gap
    k = min(k, cand.size - 1)
    # take k+1 persons unless stopping one short lands closer
    before = cum[k - 1] if k > 0 else 0.0
    take = k + 1 if abs(cum[k] - gap) <= abs(gap - before) else k
    dead = dead.copy()
    dead[cand[:take]] = add
    return dead


def inflate_end_of_life(spend, q, morbidity, link: EolSpendingLink, chronic_only: bool = False):
    spend = np.asarray(spend, dtype=float)
    mult = link.m(q)
    if chronic_only:
        mult = np.where(np.asarray(morbidity) == CHRONIC, mult, 1.0)
    return spend * mult
