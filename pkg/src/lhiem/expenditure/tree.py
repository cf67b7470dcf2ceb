"""Regression trees with cost-complexity pruning and the one-SE rule.

Nodes are numbered rpart-style (root 1, children ``2i`` / ``2i + 1``). Node
``risk`` is the within-node sum of squared errors. Complexity parameters are
reported relative to the root risk, so ``cp * root.risk`` is the cost per leaf.
"""

from __future__ import annotations

import copy
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import TooFewRows

log = logging.getLogger(__name__)

_TIE = 1e-9


@dataclass
class Split:
    feature: int
    name: str
    threshold: float | None = None  # numeric: left iff x < threshold
    left_levels: tuple[int, ...] | None = None  # categorical: left iff x in left_levels

    def goes_left(self, x: np.ndarray) -> np.ndarray:
        if self.threshold is not None:
            return x < self.threshold
        return np.isin(x.astype(int), self.left_levels)

    def describe(self) -> str:
        if self.threshold is not None:
            return f"{self.name} < {self.threshold:.6g}"
        return f"{self.name} in {set(self.left_levels)}"

    def to_dict(self):
        return {"feature": self.feature, "name": self.name, "threshold": self.threshold,
                "left_levels": None if self.left_levels is None else list(self.left_levels)}

    @classmethod
    def from_dict(cls, d):
        lv = d.get("left_levels")
        return cls(d["feature"], d["name"], d.get("threshold"), None if lv is None else tuple(lv))


@dataclass
class Node:
    id: int
    n: int
    mean: float
    risk: float
    split: Split | None = None
    left: "Node | None" = None
    right: "Node | None" = None
    collapse_alpha: float = float("inf")

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    def walk(self):
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()

    def leaves(self):
        return [n for n in self.walk() if n.is_leaf]

    def to_dict(self):
        d = {"id": self.id, "n": self.n, "mean": self.mean, "risk": self.risk}
        if self.collapse_alpha != float("inf"):
            d["collapse_alpha"] = self.collapse_alpha
        if not self.is_leaf:
            d["split"] = self.split.to_dict()
            d["left"] = self.left.to_dict()
            d["right"] = self.right.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        node = cls(d["id"], d["n"], d["mean"], d["risk"],
                   collapse_alpha=d.get("collapse_alpha", float("inf")))
        if "split" in d:
            node.split = Split.from_dict(d["split"])
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


@dataclass
class TreeControls:
    min_split: int = 60
    min_bucket: int = 30
    cp: float = 0.001
    max_depth: int = 30


@dataclass
class PartitionTree:
    root: Node
    feature_names: tuple[str, ...] = ()

    @property
    def n_splits(self) -> int:
        return sum(1 for n in self.root.walk() if not n.is_leaf)

    @property
    def n_leaves(self) -> int:
        return self.n_splits + 1

    def leaves(self) -> list[Node]:
        return self.root.leaves()

    def leaf_table(self) -> list[dict]:
        return [{"leaf": n.id, "mean": n.mean, "share": n.n / self.root.n} for n in self.leaves()]

    def apply(self, X) -> np.ndarray:
        """Leaf id reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=np.int64)

        def route(node, idx):
            if node.is_leaf:
                out[idx] = node.id
                return
            left = node.split.goes_left(X[idx, node.split.feature])
            route(node.left, idx[left])
            route(node.right, idx[~left])

        route(self.root, np.arange(X.shape[0]))
        return out

    def predict(self, X) -> np.ndarray:
        means = {n.id: n.mean for n in self.leaves()}
        ids = self.apply(X)
        return np.array([means[i] for i in ids]) if ids.size < 64 else _lookup(ids, means)

    def subtree(self, alpha: float) -> "PartitionTree":
        """Minimal cost-complexity subtree for per-leaf cost ``alpha`` (absolute units)."""
        root = copy.deepcopy(self.root)
        bound = alpha * (1 + _TIE) + 1e-300
        for node in root.walk():
            if not node.is_leaf and node.collapse_alpha <= bound:
                node.split = node.left = node.right = None
        return PartitionTree(root, self.feature_names)

    def subtree_at_cp(self, cp: float) -> "PartitionTree":
        return self.subtree(cp * self.root.risk)

    def is_subtree_of(self, other: "PartitionTree") -> bool:
        mine = {n.id: n for n in self.root.walk()}
        theirs = {n.id: n for n in other.root.walk()}
        if not set(mine) <= set(theirs):
            return False
        return all(theirs[i].split is not None for i, n in mine.items() if n.split is not None)

    def internal_ids(self) -> frozenset[int]:
        return frozenset(n.id for n in self.root.walk() if not n.is_leaf)

    def to_dict(self):
        return {"feature_names": list(self.feature_names), "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(Node.from_dict(d["root"]), tuple(d.get("feature_names", ())))


def _lookup(ids, means):
    keys = np.array(sorted(means))
    vals = np.array([means[k] for k in keys])
    return vals[np.searchsorted(keys, ids)]


@dataclass
class CvCurve:
    """Pruning sequence from the root (largest cp) to the full tree (smallest cp)."""

    cp: np.ndarray
    n_splits: np.ndarray
    xerror: np.ndarray
    xstd: np.ndarray
    rel_error: np.ndarray = field(default=None)

    def __post_init__(self):
        self.cp = np.asarray(self.cp, dtype=float)
        self.n_splits = np.asarray(self.n_splits, dtype=int)
        self.xerror = np.asarray(self.xerror, dtype=float)
        self.xstd = np.asarray(self.xstd, dtype=float)
        if self.rel_error is not None:
            self.rel_error = np.asarray(self.rel_error, dtype=float)
        if self.cp.size == 0:
            raise ValueError("empty CV curve")
        if np.any(np.diff(self.cp) >= 0):
            raise ValueError("complexity parameters must be strictly decreasing")

    def __len__(self):
        return self.cp.size

    def rows(self):
        for i in range(len(self)):
            yield {
                "cp": float(self.cp[i]), "nsplit": int(self.n_splits[i]),
                "rel_error": None if self.rel_error is None else float(self.rel_error[i]),
                "xerror": float(self.xerror[i]), "xstd": float(self.xstd[i]),
            }

    def to_dict(self):
        return {k: getattr(self, k).tolist() if getattr(self, k) is not None else None
                for k in ("cp", "n_splits", "xerror", "xstd", "rel_error")}

    @classmethod
    def from_dict(cls, d):
        return cls(d["cp"], d["n_splits"], d["xerror"], d["xstd"], d.get("rel_error"))


# -- growing -------------------------------------------------------------------
def _best_numeric(x, y, min_bucket):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = ys.size
    cs, cs2 = np.cumsum(ys), np.cumsum(ys * ys)
    nl = np.arange(1, n)
    ok = (xs[1:] > xs[:-1]) & (nl >= min_bucket) & (n - nl >= min_bucket)
    if not ok.any():
        return None
    sl, sl2 = cs[:-1], cs2[:-1]
    sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
    sse = (sl2 - sl * sl / nl) + (sr2 - sr * sr / (n - nl))
    sse = np.where(ok, sse, np.inf)
    i = int(np.argmin(sse))
    return float(sse[i]), 0.5 * (xs[i] + xs[i + 1])


def _best_categorical(x, y, min_bucket):
    levels = np.unique(x.astype(int))
    if levels.size < 2:
        return None
    cnt = np.array([(x == lv).sum() for lv in levels], dtype=float)
    s = np.array([y[x == lv].sum() for lv in levels])
    s2 = np.array([(y[x == lv] ** 2).sum() for lv in levels])
    best = None
    rest = levels[1:]
    # all 2^(k-1) - 1 binary partitions; the first level always goes left
    for r in range(0, rest.size):
        for combo in itertools.combinations(range(1, levels.size), r):
            left = np.zeros(levels.size, dtype=bool)
            left[0] = True
            left[list(combo)] = True
            nl, nr = cnt[left].sum(), cnt[~left].sum()
            if nl < min_bucket or nr < min_bucket:
                continue
            sl, sr = s[left].sum(), s[~left].sum()
            sse = (s2[left].sum() - sl * sl / nl) + (s2[~left].sum() - sr * sr / nr)
            if best is None or sse < best[0] - 1e-12 * abs(best[0]):
                best = (float(sse), tuple(int(v) for v in levels[left]))
    return best


def grow(X, y, feature_levels: dict[str, int], controls: TreeControls = TreeControls()) -> PartitionTree:
    """Greedy variance-reduction growth (no pruning)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    names = tuple(feature_levels)
    kinds = [feature_levels[k] for k in names]
    if y.size < max(2, controls.min_split):
        raise TooFewRows(f"need at least {controls.min_split} rows to grow a tree, got {y.size}")
    root_risk = float(((y - y.mean()) ** 2).sum())
    min_gain = controls.cp * root_risk

    def build(idx, node_id, depth):
        yy = y[idx]
        mean = float(yy.mean())
        yc = yy - mean
        risk = float((yc * yc).sum())
        node = Node(node_id, int(idx.size), mean, risk)
        if idx.size < controls.min_split or depth >= controls.max_depth or risk <= 1e-12 * max(root_risk, 1e-300):
            return node
        best = None
        for j, kind in enumerate(kinds):
            xj = X[idx, j]
            found = _best_categorical(xj, yc, controls.min_bucket) if kind else _best_numeric(xj, yc, controls.min_bucket)
            if found is None:
                continue
            sse, where = found
            if best is None or sse < best[0] - 1e-12 * risk:
                best = (sse, j, where)
        if best is None:
            return node
        sse, j, where = best
        if risk - sse < min_gain or risk - sse <= 0:
            return node
        split = (Split(j, names[j], threshold=where) if not kinds[j]
                 else Split(j, names[j], left_levels=where))
        go_left = split.goes_left(X[idx, j])
        node.split = split
        node.left = build(idx[go_left], 2 * node_id, depth + 1)
        node.right = build(idx[~go_left], 2 * node_id + 1, depth + 1)
        return node

    tree = PartitionTree(build(np.arange(y.size), 1, 0), names)
    pruning_sequence(tree)
    return tree


# -- cost-complexity pruning -----------------------------------------------------
def pruning_sequence(tree: PartitionTree) -> list[tuple[float, int]]:
    """Weakest-link pruning; sets ``collapse_alpha`` on internal nodes.

    Returns ``[(alpha_k, n_splits_k)]`` from the full tree (alpha 0) to the root,
    where subtree k is optimal for per-leaf costs in ``[alpha_k, alpha_{k+1})``.
    """
    work = copy.deepcopy(tree.root)
    orig = {n.id: n for n in tree.root.walk()}
    for n in orig.values():
        n.collapse_alpha = float("inf")
    seq = [(0.0, sum(1 for n in work.walk() if not n.is_leaf))]
    while not work.is_leaf:
        stats = {}

        def visit(node):
            if node.is_leaf:
                return node.risk, 1
            rl, ll = visit(node.left)
            rr, lr = visit(node.right)
            r, leaves = rl + rr, ll + lr
            stats[node.id] = ((node.risk - r) / (leaves - 1), node)
            return r, leaves

        visit(work)
        alpha = min(g for g, _ in stats.values())
        alpha = max(alpha, seq[-1][0])
        cut = [node for g, node in stats.values() if g <= alpha * (1 + _TIE) + 1e-300]
        for node in cut:
            for sub in node.walk():
                if not sub.is_leaf:
                    o = orig[sub.id]
                    o.collapse_alpha = min(o.collapse_alpha, alpha)
        for node in cut:
            node.split = node.left = node.right = None
        n_splits = sum(1 for n in work.walk() if not n.is_leaf)
        if alpha <= seq[-1][0] * (1 + _TIE) + 1e-300:
            seq[-1] = (seq[-1][0], n_splits)
            if len(seq) == 1:
                seq[0] = (0.0, n_splits)
        else:
            seq.append((alpha, n_splits))
    return seq


def cp_table(tree: PartitionTree) -> tuple[np.ndarray, np.ndarray]:
    """(cp, n_splits) ordered root first, strictly decreasing cp."""
    seq = pruning_sequence(tree)
    root_risk = tree.root.risk if tree.root.risk > 0 else 1.0
    cps = np.array([a for a, _ in seq][::-1]) / root_risk
    splits = np.array([s for _, s in seq][::-1])
    return cps, splits


def _xcp(cps):
    prev = np.concatenate([[10.0], cps[:-1]])
    return np.sqrt(cps * prev)


def grow_tree(X, y, feature_levels, controls: TreeControls = TreeControls(), n_folds: int = 10, seed: int = 0):
    """Grow the full tree and cross-validate its pruning sequence.

    Returns ``(tree, curve)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    tree = grow(X, y, feature_levels, controls)
    cps, splits = cp_table(tree)
    root_risk = tree.root.risk
    rel = np.array([_risk_of(tree.subtree_at_cp(c)) for c in cps]) / (root_risk or 1.0)
    folds = np.random.default_rng(seed).permutation(y.size) % n_folds
    xcp = _xcp(cps)
    err = np.zeros((cps.size, y.size))
    for f in range(n_folds):
        test = folds == f
        ftree = grow(X[~test], y[~test], feature_levels, controls)
        for k, c in enumerate(xcp):
            pred = ftree.subtree_at_cp(c).predict(X[test])
            err[k, test] = (y[test] - pred) ** 2
    denom = root_risk if root_risk > 0 else 1.0
    xerror = err.sum(axis=1) / denom
    xstd = np.sqrt(((err - err.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)) / denom
    return tree, CvCurve(cps, splits, xerror, xstd, rel)


def _risk_of(tree: PartitionTree) -> float:
    return float(sum(n.risk for n in tree.leaves()))


def one_se_index(curve: CvCurve) -> int:
    """Smallest tree whose CV error is within one SD of the minimum."""
    m = int(np.argmin(curve.xerror))
    limit = curve.xerror[m] + curve.xstd[m]
    return int(np.flatnonzero(curve.xerror <= limit * (1 + 1e-12))[0])


def prune_one_se(tree: PartitionTree, curve: CvCurve, override_cp: float | None = None) -> PartitionTree:
    if override_cp is not None:
        return tree.subtree_at_cp(override_cp)
    return tree.subtree_at_cp(float(curve.cp[one_se_index(curve)]))
