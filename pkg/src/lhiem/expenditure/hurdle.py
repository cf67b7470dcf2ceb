"""Part one: logistic model for the probability of any spending next year."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..errors import NonConvergence, Separation
from . import covariates as cv

log = logging.getLogger(__name__)


@dataclass
class HurdleModel:
    terms: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray | None = None
    converged: bool = True
    iterations: int = 0
    loglik: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        if not np.all(np.isfinite(self.coef)):
            raise ValueError("hurdle coefficients must be finite")

    def linear_predictor(self, rows) -> np.ndarray:
        return cv.row_dot(cv.design(rows, self.terms), self.coef)

    def to_dict(self):
        return {
            "terms": list(self.terms),
            "coef": self.coef.tolist(),
            "se": None if self.se is None else np.asarray(self.se).tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "loglik": self.loglik,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["terms"]), np.array(d["coef"]),
                   None if d.get("se") is None else np.array(d["se"]),
                   d.get("converged", True), d.get("iterations", 0), d.get("loglik", float("nan")))


def fit_logistic(X, y, max_iter=100, tol=1e-10):
    """Newton-Raphson (IRLS) maximum likelihood; returns (coef, se, iterations, loglik)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.min() == y.max():
        raise Separation("outcome has a single class")
    beta = np.zeros(X.shape[1])
    for it in range(1, max_iter + 1):
        eta = X @ beta
        p = special.expit(eta)
        w = p * (1 - p)
        hess = X.T @ (X * w[:, None])
        grad = X.T @ (y - p)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        beta = beta + step
        if np.max(np.abs(beta)) > 30:
            raise Separation("coefficients diverging; outcome is (quasi-)separated by the covariates")
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise NonConvergence(f"logistic fit did not converge in {max_iter} iterations")
    p = special.expit(X @ beta)
    w = p * (1 - p)
    cov = np.linalg.pinv(X.T @ (X * w[:, None]))
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    loglik = float(np.sum(y * np.log(p + 1e-300) + (1 - y) * np.log1p(-p + 1e-300)))
    return beta, se, it, loglik


def fit_hurdle(train, terms=cv.HURDLE_TERMS, outcome="spend_t1", max_iter=100) -> HurdleModel:
    """Fit P(next-year spend > 0) on person-year rows (``outcome`` column = next-year spend)."""
    X = cv.design(train, terms)
    y = (np.asarray(train[outcome], dtype=float) > 0).astype(float)
    if X.shape[0] < 200:
        log.warning("hurdle fitted on only %d rows", X.shape[0])
    beta, se, it, ll = fit_logistic(X, y, max_iter=max_iter)
    log.info("hurdle converged in %d iterations (loglik %.2f)", it, ll)
    return HurdleModel(tuple(terms), beta, se, True, it, ll)


def predict_nonzero_prob(m: HurdleModel, person) -> np.ndarray | float:
    """P(any spending) for covariate rows or a single :class:`PersonRecord`."""
    if hasattr(person, "pid"):
        return float(special.expit(m.linear_predictor(cv.rows_from_record(person)))[0])
    return special.expit(m.linear_predictor(person))
