"""Maternity, first-year-of-life, and national-accounts cost adjustments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

NHEA_FACTOR = 1.27

MATERNITY_MEDIAN = 5123.0
MATERNITY_LOWER = 835.0
MATERNITY_UPPER = 26850.0


def apply_nhea_adjustment(spend, factor: float = NHEA_FACTOR):
    """Scale survey-based expenditures up to national health expenditure accounts."""
    return np.multiply(spend, factor)


@dataclass(frozen=True)
class MaternityCostSampler:
    log_mean: float
    log_sd: float
    lower: float = MATERNITY_LOWER
    upper: float = MATERNITY_UPPER
    median_target: float = MATERNITY_MEDIAN

    def __post_init__(self):
        if not 0 < self.lower < self.upper:
            raise ValueError("need 0 < lower < upper")
        if self.log_sd < 0:
            raise ValueError("log_sd must be >= 0")

    @classmethod
    def fit(cls, median=MATERNITY_MEDIAN, lower=MATERNITY_LOWER, upper=MATERNITY_UPPER, coverage=0.99):
        """Pick log-sd so [lower, upper] spans ``coverage`` of the untruncated law,
        then solve the log-mean so the truncated median equals ``median``."""
        z = special.ndtri(0.5 + coverage / 2)
        sd = (np.log(upper) - np.log(lower)) / (2 * z)

        def gap(mu):
            a = special.ndtr((np.log(lower) - mu) / sd)
            b = special.ndtr((np.log(upper) - mu) / sd)
            return special.ndtr((np.log(median) - mu) / sd) - 0.5 * (a + b)

        mu = optimize.brentq(gap, np.log(lower), np.log(upper), xtol=1e-14)
        return cls(float(mu), float(sd), lower, upper, median)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.log_sd == 0:
            return np.clip(np.full(u.shape, np.exp(self.log_mean)), self.lower, self.upper)
        a = special.ndtr((np.log(self.lower) - self.log_mean) / self.log_sd)
        b = special.ndtr((np.log(self.upper) - self.log_mean) / self.log_sd)
        z = special.ndtri(a + u * (b - a))
        return np.clip(np.exp(self.log_mean + self.log_sd * z), self.lower, self.upper)

    def median(self) -> float:
        return float(self.quantile(0.5))


def sample_maternity_cost(s: MaternityCostSampler, rng: np.random.Generator, size=None):
    u = rng.random(size)
    out = s.quantile(u)
    return float(out) if size is None else out


def newborn_rate(omega):
    """Poisson rate for first-year-of-life spending given health score 1 (good) .. 5 (poor)."""
    omega = np.asarray(omega)
    if np.any((omega < 1) | (omega > 5)):
        raise ValueError("omega must lie in 1..5")
    return np.power(omega.astype(float), 2.5) * 1000.0


def newborn_cost_from_uniform(omega, u):
    return stats.poisson.ppf(np.asarray(u, dtype=float), newborn_rate(omega))


def sample_newborn_cost(omega: int, rng: np.random.Generator, size=None):
    lam = newborn_rate(omega)
    out = rng.poisson(lam, size)
    return float(out) if size is None else out.astype(float)
