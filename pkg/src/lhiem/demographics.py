"""Births and immigration."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyPool
from .expenditure.costs import newborn_cost_from_uniform
from .population import ACUTE, BAD, FEMALE, GOOD, NO_MORBIDITY, RACE, SEX, Population, PersonRecord
from .rng import categorical
from .tables import read_table, resolve

FERTILE_AGES = (15, 49)


@dataclass
class FertilityTable:
    p: np.ndarray  # (age 0..49, race)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if np.any((self.p < 0) | (self.p > 0.5)):
            raise ValueError("birth probabilities must lie in [0, 0.5]")

    def prob(self, age, race, sex) -> np.ndarray:
        age = np.asarray(age)
        eligible = (np.asarray(sex) == FEMALE) & (age >= FERTILE_AGES[0]) & (age <= FERTILE_AGES[1])
        a = np.clip(age, 0, self.p.shape[0] - 1)
        return np.where(eligible, self.p[a, np.asarray(race, dtype=np.int64)], 0.0)

    @classmethod
    def constant(cls, p: float):
        t = np.zeros((FERTILE_AGES[1] + 1, len(RACE)))
        t[FERTILE_AGES[0]:] = p
        return cls(t)


def load_fertility(path=None) -> FertilityTable:
    t = read_table(resolve(path, "fertility.csv"), ("age_lo", "age_hi", "race", "p"), ("age_lo", "age_hi", "p"))
    p = np.zeros((FERTILE_AGES[1] + 1, len(RACE)))
    for lo, hi, r, v in zip(t["age_lo"].astype(int), t["age_hi"].astype(int), t["race"], t["p"]):
        p[max(lo, FERTILE_AGES[0]):min(hi, FERTILE_AGES[1]) + 1, RACE.index(r)] = v
    return FertilityTable(p)


@dataclass
class OmegaDistribution:
    p: np.ndarray  # P(omega = 1..5)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.p = self.p / self.p.sum()

    def draw(self, u) -> np.ndarray:
        return categorical(np.asarray(u), self.p) + 1

    @classmethod
    def point(cls, omega: int):
        return cls(np.eye(5)[omega - 1])


def load_omega(path=None) -> OmegaDistribution:
    t = read_table(resolve(path, "newborn_omega.csv"), ("omega", "p"), ("omega", "p"))
    p = np.zeros(5)
    p[t["omega"].astype(int).to_numpy() - 1] = t["p"].to_numpy(float)
    return OmegaDistribution(p)


@dataclass
class MigrationSchedule:
    counts: dict[int, float]

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("immigrant counts must be nonnegative")

    def count(self, year: int) -> float:
        return float(self.counts.get(year, 0.0))


def load_migration(path=None) -> MigrationSchedule:
    t = read_table(resolve(path, "migration.csv"), ("year", "weighted_family_count"), ("year", "weighted_family_count"))
    return MigrationSchedule(dict(zip(t["year"].astype(int), t["weighted_family_count"].astype(float))))


def sample_pregnancies(age, race, sex, alive, ft: FertilityTable, u) -> np.ndarray:
    return np.asarray(alive) & (np.asarray(u) < ft.prob(age, race, sex))


def newborn_health(omega):
    bad = np.asarray(omega) >= 4
    return np.where(bad, BAD, GOOD).astype(np.int8), np.where(bad, ACUTE, NO_MORBIDITY).astype(np.int8)


def newborns_for(pop: Population, mothers: np.ndarray, year: int, u_sex, u_omega, u_cost,
                 omega_dist: OmegaDistribution) -> Population:
    """Infant records for the mothers at index array ``mothers``."""
    d = pop.data
    omega = omega_dist.draw(u_omega)
    hs, morb = newborn_health(omega)
    n = mothers.size
    pid = np.array([f"{p}.b{year}" for p in d["pid"][mothers]], dtype=object)
    data = {
        "pid": pid, "fid": d["fid"][mothers], "tid": d["tid"][mothers],
        "wt": d["wt"][mothers], "wth": d["wth"][mothers],
        "sex": (np.asarray(u_sex) < 0.5).astype(np.int8), "age": np.zeros(n, dtype=np.int64),
        "race": d["race"][mothers], "survive": np.ones(n, dtype=bool),
        "fam_income": d["fam_income"][mothers], "wage_prop": np.zeros(n),
        "ins_cat": d["ins_cat"][mothers], "deduct": d["deduct"][mothers],
        "med_spend": newborn_cost_from_uniform(omega, u_cost).astype(float),
        "visits": np.zeros(n, dtype=np.int64), "preg": np.zeros(n, dtype=bool),
        "hs": hs, "morbidity": morb, "immigrant": d["immigrant"][mothers],
        "death_year": np.full(n, -1, dtype=np.int64),
    }
    return Population(pop.year, data)


def create_newborn(mother: PersonRecord, omega_dist: OmegaDistribution, rng: np.random.Generator,
                   year: int = 0) -> tuple[PersonRecord, PersonRecord]:
    """(infant, mother with pregnancy cleared) for a pregnant mother."""
    if mother.preg != "Pregnant":
        raise ValueError(f"{mother.pid} is not pregnant")
    omega = int(omega_dist.draw(np.array([rng.random()]))[0])
    hs, morb = newborn_health(np.array([omega]))
    infant = replace(
        mother, pid=f"{mother.pid}.b{year}", sex=SEX[int(rng.random() < 0.5)], age=0,
        wage_prop=0.0, med_spend=float(newborn_cost_from_uniform(omega, rng.random())), visits=0,
        preg="NotPregnant", hs=("Good", "Bad")[int(hs[0])], morbidity=("None", "Chronic", "Acute")[int(morb[0])],
        survive=True, death_year=-1,
    )
    return infant, replace(mother, preg="NotPregnant")


@dataclass
class ImmigrantPool:
    """Template families (a Population) sampled with replacement."""

    templates: Population

    @property
    def n_families(self) -> int:
        return self.templates.n_families if len(self.templates) else 0

    def family_weights(self) -> np.ndarray:
        w = np.zeros(self.n_families)
        first = np.unique(self.templates["fam"], return_index=True)[1]
        w[self.templates["fam"][first]] = self.templates["wth"][first]
        return w


def add_immigrants(count: float, pool: ImmigrantPool, year: int, rng: np.random.Generator,
                   income_scale: float = 1.0, spend_scale: float = 1.0) -> Population | None:
    """Families sampled until their summed household weight is within one family-weight of ``count``."""
    if count <= 0:
        return None
    if pool.n_families == 0:
        raise EmptyPool("no immigrant template families available")
    fw = pool.family_weights()
    if np.all(fw <= 0):
        raise EmptyPool("immigrant templates all have zero weight")
    picks, total = [], 0.0
    while total < count:
        f = int(rng.integers(pool.n_families))
        if fw[f] <= 0:
            continue
        if count - total < total + fw[f] - count:  # stopping short is closer
            break
        picks.append(f)
        total += fw[f]
    if not picks:
        return None
    t = pool.templates
    rows, fids, pids = [], [], []
    for k, f in enumerate(picks):
        idx = np.flatnonzero(t["fam"] == f)
        rows.append(idx)
        fids += [f"{t['fid'][i]}.i{year}.{k}" for i in idx]
        pids += [f"{t['pid'][i]}.i{year}.{k}" for i in idx]
    idx = np.concatenate(rows)
    data = {k: v[idx].copy() for k, v in t.data.items() if k not in ("fam", "key")}
    data["pid"] = np.array(pids, dtype=object)
    data["fid"] = np.array(fids, dtype=object)
    data["tid"] = np.array([f"{x}.i{year}" for x in data["tid"]], dtype=object)
    data["fam_income"] = data["fam_income"] * income_scale
    data["med_spend"] = data["med_spend"] * spend_scale
    data["immigrant"] = np.ones(idx.size, dtype=bool)
    data["survive"] = np.ones(idx.size, dtype=bool)
    data["death_year"] = np.full(idx.size, -1, dtype=np.int64)
    data["preg"] = np.zeros(idx.size, dtype=bool)
    return Population(year, data)
