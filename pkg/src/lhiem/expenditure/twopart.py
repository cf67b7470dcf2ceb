"""Two-part spending model: hurdle, partition tree and per-leaf regressions."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from ..errors import TooFewRows
from . import covariates as cv
from .hurdle import HurdleModel, fit_hurdle
from .leafglm import LeafRegression, fit_leaf_glms
from .tree import CvCurve, PartitionTree, TreeControls, grow_tree, prune_one_se

log = logging.getLogger(__name__)

FORMAT = "lhiem-two-part"
VERSION = 1
TRAIN_SHARE = 0.85


@dataclass
class TwoPartModel:
    hurdle: HurdleModel
    tree: PartitionTree  # pruned tree used for prediction
    leaves: dict[int, LeafRegression]
    full_tree: PartitionTree | None = None
    curve: CvCurve | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = {n.id for n in self.tree.leaves()} - set(self.leaves)
        if missing:
            raise ValueError(f"no regression for leaves {sorted(missing)}")

    def to_dict(self):
        return {
            "format": FORMAT, "version": VERSION,
            "hurdle": self.hurdle.to_dict(),
            "tree": self.tree.to_dict(),
            "leaves": [self.leaves[k].to_dict() for k in sorted(self.leaves)],
            "full_tree": None if self.full_tree is None else self.full_tree.to_dict(),
            "curve": None if self.curve is None else self.curve.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT:
            raise ValueError("not a two-part model file")
        if d.get("version") != VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        return cls(
            HurdleModel.from_dict(d["hurdle"]),
            PartitionTree.from_dict(d["tree"]),
            {r["leaf"]: LeafRegression.from_dict(r) for r in d["leaves"]},
            None if d.get("full_tree") is None else PartitionTree.from_dict(d["full_tree"]),
            None if d.get("curve") is None else CvCurve.from_dict(d["curve"]),
            d.get("meta", {}),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    # prediction --------------------------------------------------------
    def nonzero_prob(self, rows) -> np.ndarray:
        return special.expit(self.hurdle.linear_predictor(rows))

    def leaf_predictor(self, rows) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(leaf id, linear predictor on log scale, residual sd) per row."""
        leaf = self.tree.apply(cv.tree_matrix(rows))
        designs = {}
        mu = np.empty(leaf.size)
        sd = np.empty(leaf.size)
        for lid, reg in self.leaves.items():
            sel = leaf == lid
            if sel.any():
                if reg.terms not in designs:
                    designs[reg.terms] = cv.design(rows, reg.terms)
                mu[sel] = cv.row_dot(designs[reg.terms][sel], reg.coef)
                sd[sel] = reg.sigma
        return leaf, mu, sd

    def draw(self, rows, u, z) -> np.ndarray:
        """Next-year spending from hurdle uniforms ``u`` and residual normals ``z``."""
        p = self.nonzero_prob(rows)
        _, mu, sd = self.leaf_predictor(rows)
        return np.where(np.asarray(u) < p, np.exp(mu + sd * np.asarray(z)), 0.0)


def predict_spending(model: TwoPartModel, person, rng: np.random.Generator) -> float:
    """Next-year spending for one :class:`PersonRecord`."""
    rows = cv.rows_from_record(person)
    u, z = rng.random(), rng.standard_normal()
    return float(model.draw(rows, np.array([u]), np.array([z]))[0])


def split_train_test(rows, seed: int, share: float = TRAIN_SHARE):
    n = len(next(iter(rows.values())))
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(share * n))
    pick = lambda idx: {k: np.asarray(v)[np.sort(idx)] for k, v in rows.items()}
    return pick(perm[:cut]), pick(perm[cut:])


def _subset(rows, mask):
    return {k: np.asarray(v)[mask] for k, v in rows.items()}


def part_two_rows(rows, outcome="spend_t1"):
    """Rows eligible for part two: positive next-year spending, not pregnant."""
    keep = (np.asarray(rows[outcome]) > 0) & ~np.asarray(rows["preg"], dtype=bool)
    return _subset(rows, keep)


def fit_two_part(panel, seed: int = 0, controls: TreeControls = TreeControls(),
                 override_cp: float | None = None, n_folds: int = 10) -> TwoPartModel:
    """85/15 split, hurdle on all training rows, tree + leaf regressions on part-two rows."""
    train, test = split_train_test(panel, seed)
    if len(train["spend_t1"]) < 200:
        raise TooFewRows(f"need at least 200 training rows, got {len(train['spend_t1'])}")
    hurdle = fit_hurdle(train)
    pos = part_two_rows(train)
    y = np.log(pos["spend_t1"])
    full, curve = grow_tree(cv.tree_matrix(pos), y, cv.TREE_FEATURES, controls, n_folds, seed)
    tree = prune_one_se(full, curve, override_cp)
    leaves = fit_leaf_glms(tree, pos)
    model = TwoPartModel(hurdle, tree, leaves, full, curve)
    model.meta = {
        "seed": seed, "override_cp": override_cp, "n_train": len(train["spend_t1"]),
        "n_part_two": len(y), "n_test": len(test["spend_t1"]),
        "controls": {"min_split": controls.min_split, "min_bucket": controls.min_bucket,
                     "cp": controls.cp, "max_depth": controls.max_depth},
        "n_splits": tree.n_splits, **holdout_metrics(model, test),
    }
    log.info("two-part model: %d splits, %d part-two rows", tree.n_splits, len(y))
    return model


def holdout_metrics(model: TwoPartModel, test) -> dict:
    if len(test["spend_t1"]) == 0:
        return {}
    p = model.nonzero_prob(test)
    y = np.asarray(test["spend_t1"]) > 0
    out = {"test_brier": float(np.mean((p - y) ** 2)), "test_accuracy": float(np.mean((p > 0.5) == y))}
    pos = part_two_rows(test)
    if len(pos["spend_t1"]):
        _, mu, _ = model.leaf_predictor(pos)
        out["test_log_rmse"] = float(np.sqrt(np.mean((np.log(pos["spend_t1"]) - mu) ** 2)))
    return out
