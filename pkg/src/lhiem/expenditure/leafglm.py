"""Part two: per-leaf normal linear models on log spending."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ThinLeaf
from . import covariates as cv
from .tree import PartitionTree

MIN_LEAF_ROWS = 30


@dataclass
class LeafRegression:
    leaf: int
    terms: tuple[str, ...]
    coef: np.ndarray
    sigma: float
    n: int
    se: np.ndarray | None = None

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        if not np.all(np.isfinite(self.coef)):
            raise ValueError(f"leaf {self.leaf}: coefficients must be finite")
        if not self.sigma >= 0:
            raise ValueError(f"leaf {self.leaf}: residual sd must be nonnegative")

    def to_dict(self):
        return {"leaf": self.leaf, "terms": list(self.terms), "coef": self.coef.tolist(),
                "sigma": self.sigma, "n": self.n,
                "se": None if self.se is None else np.asarray(self.se).tolist()}

    @classmethod
    def from_dict(cls, d):
        se = d.get("se")
        return cls(d["leaf"], tuple(d["terms"]), np.array(d["coef"]), d["sigma"], d["n"],
                   None if se is None else np.array(se))


def fit_ols(X, y):
    """Least squares; returns (coef, se, sigma). Rank-deficient columns get min-norm coefficients."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    df = max(X.shape[0] - rank, 1)
    sigma = float(np.sqrt(resid @ resid / df))
    cov = np.linalg.pinv(X.T @ X) * sigma**2
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    return coef, se, sigma


def fit_leaf_glms(tree: PartitionTree, train, terms=cv.GLM_TERMS, outcome="spend_t1",
                  min_rows: int = MIN_LEAF_ROWS) -> dict[int, LeafRegression]:
    """One OLS fit of ln(next-year spend) per leaf; rows must have positive outcome."""
    spend = np.asarray(train[outcome], dtype=float)
    if np.any(spend <= 0):
        raise ValueError("part-two training rows must have positive next-year spending")
    y = np.log(spend)
    X = cv.design(train, terms)
    leaf_of = tree.apply(cv.tree_matrix(train))
    fits = {}
    for node in tree.leaves():
        sel = leaf_of == node.id
        n = int(sel.sum())
        if n < min_rows:
            raise ThinLeaf(f"leaf {node.id} has {n} training rows (minimum {min_rows})")
        coef, se, sigma = fit_ols(X[sel], y[sel])
        fits[node.id] = LeafRegression(node.id, tuple(terms), coef, sigma, n, se)
    return fits
