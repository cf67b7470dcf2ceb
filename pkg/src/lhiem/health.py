"""Health status dynamics: acute/chronic onset, acute recovery, calibration.

Morbidity moves only along None -> Acute, None -> Chronic and Acute -> None;
Chronic is absorbing. Health status is Bad exactly when morbidity is not None.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .errors import InvalidTarget, NoConvergence
from .population import ACUTE, BAD, CHRONIC, GOOD, MORBIDITY, NO_MORBIDITY, PersonRecord, SEX
from .tables import read_table, resolve

log = logging.getLogger(__name__)

MAX_AGE = 120


@dataclass(frozen=True)
class RecoveryCurve:
    """Acute half-life in years, linear from ``h0`` at birth to ``h_plateau`` at ``age_plateau``."""

    h0: float = 1.0
    h_plateau: float = 30.0
    age_plateau: float = 50.0

    def half_life(self, age):
        a = np.clip(np.asarray(age, dtype=float), 0.0, self.age_plateau)
        return self.h0 + (self.h_plateau - self.h0) / self.age_plateau * a


def recovery_prob(age, rc: RecoveryCurve = RecoveryCurve()):
    """Annual probability that an acute condition resolves: 1 - 2^(-1/h(age))."""
    out = -np.expm1(-np.log(2.0) / rc.half_life(age))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class HealthHazards:
    """Annual onset probabilities per (age band, sex) with per-band acute multipliers."""

    age_lo: np.ndarray
    age_hi: np.ndarray
    sex: np.ndarray
    p_acute: np.ndarray
    p_chronic: np.ndarray
    multiplier: np.ndarray
    _grid: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("age_lo", "age_hi", "sex"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        for name in ("p_acute", "p_chronic", "multiplier"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any((self.p_acute < 0) | (self.p_acute > 1) | (self.p_chronic < 0) | (self.p_chronic > 1)):
            raise ValueError("onset probabilities must lie in [0, 1]")
        if np.any(self.p_acute + self.p_chronic > 1 + 1e-12):
            raise ValueError("acute + chronic onset must not exceed 1")
        if np.any(self.multiplier < 0):
            raise ValueError("multipliers must be nonnegative")
        self._grid = None

    @property
    def bands(self) -> list[tuple[int, int]]:
        return sorted(set(zip(self.age_lo.tolist(), self.age_hi.tolist())))

    def _build(self):
        pa = np.full((MAX_AGE + 1, 2), np.nan)
        pc = np.full((MAX_AGE + 1, 2), np.nan)
        for lo, hi, s, a, c, m in zip(self.age_lo, self.age_hi, self.sex, self.p_acute, self.p_chronic, self.multiplier):
            ages = slice(lo, min(hi, MAX_AGE) + 1)
            pc[ages, s] = c
            pa[ages, s] = np.minimum(a * m, 1.0 - c)
        if np.isnan(pa).any():
            missing = np.argwhere(np.isnan(pa))[0]
            raise ValueError(f"hazard table does not cover age {missing[0]}, sex {SEX[missing[1]]}")
        self._grid = (pa, pc)

    def onset(self, age, sex):
        """Effective (acute, chronic) onset probabilities for persons."""
        if self._grid is None:
            self._build()
        pa, pc = self._grid
        a = np.clip(np.asarray(age), 0, MAX_AGE)
        s = np.asarray(sex, dtype=np.int64)
        return pa[a, s], pc[a, s]

    def band_multipliers(self) -> dict[int, float]:
        return {int(lo): float(m) for lo, m in zip(self.age_lo, self.multiplier)}

    def with_multipliers(self, mult: dict[int, float]) -> "HealthHazards":
        """Copy with the acute multiplier of each band (keyed by its lower age) replaced."""
        m = self.multiplier.copy()
        for lo, value in mult.items():
            m[self.age_lo == lo] = value
        return replace(self, multiplier=m)

    def uncalibrated(self) -> "HealthHazards":
        return replace(self, multiplier=np.ones_like(self.multiplier))

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame({
            "age_lo": self.age_lo, "age_hi": self.age_hi, "sex": [SEX[s] for s in self.sex],
            "p_acute": self.p_acute, "p_chronic": self.p_chronic, "multiplier": self.multiplier,
        })


def load_hazards(path=None) -> HealthHazards:
    cols = ("age_lo", "age_hi", "sex", "p_acute", "p_chronic", "multiplier")
    t = read_table(resolve(path, "health_hazards.csv"), cols, numeric=cols[:2] + cols[3:])
    sex = [SEX.index(s) for s in t["sex"]]
    return HealthHazards(t["age_lo"].astype(int), t["age_hi"].astype(int), sex,
                         t["p_acute"], t["p_chronic"], t["multiplier"])


# -- transitions -------------------------------------------------------------------
def transition(age, sex, morbidity, u, hz: HealthHazards, rc: RecoveryCurve = RecoveryCurve()):
    """Next-year morbidity codes from one uniform per person."""
    morbidity = np.asarray(morbidity)
    u = np.asarray(u)
    pa, pc = hz.onset(age, sex)
    rec = recovery_prob(np.asarray(age), rc)
    out = morbidity.copy()
    none = morbidity == NO_MORBIDITY
    out[none & (u < pa)] = ACUTE
    out[none & (u >= pa) & (u < pa + pc)] = CHRONIC
    out[(morbidity == ACUTE) & (u < rec)] = NO_MORBIDITY
    return out


def status_of(morbidity):
    return np.where(np.asarray(morbidity) == NO_MORBIDITY, GOOD, BAD).astype(np.int8)


def update_health(person: PersonRecord, hz: HealthHazards, rc: RecoveryCurve, rng: np.random.Generator) -> PersonRecord:
    m = MORBIDITY.index(person.morbidity)
    new = int(transition(np.array([person.age]), np.array([SEX.index(person.sex)]),
                         np.array([m]), np.array([rng.random()]), hz, rc)[0])
    return replace(person, morbidity=MORBIDITY[new], hs="Good" if new == NO_MORBIDITY else "Bad")


# -- cohort recursion ----------------------------------------------------------------
def state_distribution(hz: HealthHazards, rc: RecoveryCurve = RecoveryCurve(), max_age: int = 64,
                       newborn_acute: float = 0.08) -> np.ndarray:
    """Exact morbidity distribution by single age and sex for a closed birth cohort.

    Returns an array ``[age, sex, state]`` with states ordered as ``MORBIDITY``.
    """
    ages = np.arange(max_age + 1)
    out = np.zeros((ages.size, 2, 3))
    for s in (0, 1):
        d = np.array([1.0 - newborn_acute, 0.0, newborn_acute])
        pa, pc = hz.onset(ages, np.full(ages.size, s))
        rec = recovery_prob(ages, rc)
        for a in ages:
            out[a, s] = d
            none, chronic, acute = d
            d = np.array([
                none * (1 - pa[a] - pc[a]) + acute * rec[a],
                chronic + none * pc[a],
                none * pa[a] + acute * (1 - rec[a]),
            ])
    return out


def good_health_by_band(hz: HealthHazards, bands, rc: RecoveryCurve = RecoveryCurve(),
                        newborn_acute: float = 0.08, female_share: float = 0.5) -> np.ndarray:
    """Proportion in good health averaged over single ages within each (lo, hi) band."""
    top = max(hi for _, hi in bands)
    dist = state_distribution(hz, rc, top, newborn_acute)
    good = dist[:, 0, NO_MORBIDITY] * (1 - female_share) + dist[:, 1, NO_MORBIDITY] * female_share
    return np.array([good[lo:hi + 1].mean() for lo, hi in bands])


@dataclass
class HealthTarget:
    bands: list[tuple[int, int]]
    p_good: np.ndarray


def load_health_target(path=None) -> HealthTarget:
    t = read_table(resolve(path, "health_target.csv"), ("age_lo", "age_hi", "p_good"), ("age_lo", "age_hi", "p_good"))
    return HealthTarget(list(zip(t["age_lo"].astype(int), t["age_hi"].astype(int))), t["p_good"].to_numpy(float))


def calibrate_hazards(hz: HealthHazards, target: HealthTarget, sim=None, tol: float = 0.02,
                      calibrate_below: int = 25, max_iter: int = 200) -> HealthHazards:
    """Fit acute-onset multipliers of the bands starting below ``calibrate_below``.

    ``sim(hazards) -> proportions`` evaluates the model's proportion in good
    health for each target band (defaults to the cohort recursion). Bands are
    solved youngest first since later bands inherit earlier prevalence.
    """
    p = np.asarray(target.p_good, dtype=float)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise InvalidTarget("target proportions in good health must lie in [0, 1]")
    if sim is None:
        sim = lambda h: good_health_by_band(h, target.bands)
    calls = 0
    current = hz
    for k, (lo, hi) in enumerate(target.bands):
        if lo >= calibrate_below:
            continue
        if not np.any(hz.age_lo == lo):
            raise InvalidTarget(f"no hazard band starts at age {lo}")

        def gap(m):
            nonlocal calls
            calls += 1
            if calls > max_iter:
                raise NoConvergence(f"health calibration exceeded {max_iter} evaluations")
            return float(sim(current.with_multipliers({lo: m}))[k]) - p[k]

        m0 = float(current.multiplier[current.age_lo == lo][0])
        if abs(gap(m0)) <= 1e-12:
            continue
        if gap(0.0) < 0:
            raise NoConvergence(f"band {lo}-{hi}: target {p[k]:.4f} unreachable even with no acute onset")
        hi_m = max(m0, 1.0)
        while gap(hi_m) > 0:
            hi_m *= 2.0
            if hi_m > 1e4:
                raise NoConvergence(f"band {lo}-{hi}: target {p[k]:.4f} unreachable")
        m = optimize.brentq(gap, 0.0, hi_m, xtol=1e-12, rtol=1e-12, maxiter=100)
        current = current.with_multipliers({lo: m})
    final = np.asarray(sim(current))
    worst = [(b, f, t) for b, f, t in zip(target.bands, final, p) if b[0] < calibrate_below and abs(f - t) > tol]
    if worst:
        raise NoConvergence(f"calibrated bands outside tolerance: {worst}")
    log.info("health calibration multipliers: %s",
             {lo: round(m, 4) for lo, m in current.band_multipliers().items() if lo < calibrate_below})
    return current
