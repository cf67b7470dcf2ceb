"""Brute-force reference implementations used to check the optimized code."""

from __future__ import annotations

import itertools

import numpy as np

from lhiem.expenditure.tree import CvCurve, Node, PartitionTree, Split, pruning_sequence
from lhiem.population import AGE_GROUPS, INS_CAT, RACE


# -- regression trees ------------------------------------------------------------------
def random_tree(rng: np.random.Generator, n_internal: int) -> PartitionTree:
    """Random tree with ``n_internal`` splits and consistent node risks.

    Leaf risks are random; an internal node's risk is its children's risk plus a
    random positive improvement, as for any greedy variance-reduction split.
    """
    shape = {1: None}
    frontier = [1]
    for _ in range(n_internal):
        nid = frontier.pop(int(rng.integers(len(frontier))))
        shape[nid] = (2 * nid, 2 * nid + 1)
        shape[2 * nid] = shape[2 * nid + 1] = None
        frontier += [2 * nid, 2 * nid + 1]

    def build(nid):
        if shape[nid] is None:
            return Node(nid, 10, 0.0, float(rng.uniform(0.5, 10.0)))
        left, right = build(shape[nid][0]), build(shape[nid][1])
        gain = float(rng.uniform(0.05, 8.0))
        node = Node(nid, 20, 0.0, left.risk + right.risk + gain, Split(0, "x", threshold=float(nid)), left, right)
        return node

    tree = PartitionTree(build(1), ("x",))
    pruning_sequence(tree)
    return tree


def rooted_subtrees(node: Node):
    """Every pruning of ``node`` as a frozenset of the internal node ids kept."""
    if node.is_leaf:
        return [frozenset()]
    out = [frozenset()]
    for a, b in itertools.product(rooted_subtrees(node.left), rooted_subtrees(node.right)):
        out.append(frozenset({node.id}) | a | b)
    return out


def _cost(root: Node, internal: frozenset, alpha: float) -> tuple[float, int]:
    risk, leaves = 0.0, 0
    stack = [root]
    while stack:
        n = stack.pop()
        if n.id in internal:
            stack += [n.left, n.right]
        else:
            risk += n.risk
            leaves += 1
    return risk + alpha * leaves, leaves


def oracle_subtree(tree: PartitionTree, alpha: float) -> frozenset:
    """Smallest rooted subtree minimizing risk + alpha * leaves."""
    best = None
    for sub in rooted_subtrees(tree.root):
        cost, leaves = _cost(tree.root, sub, alpha)
        key = (cost, leaves)
        if best is None:
            best = (key, sub)
            continue
        (bc, bl), _ = best
        tol = 1e-9 * max(abs(bc), 1.0)
        if cost < bc - tol or (abs(cost - bc) <= tol and leaves < bl):
            best = (key, sub)
    return best[1]


def oracle_one_se(curve: CvCurve) -> int:
    """Index of the fewest-split row within one SD of the minimum CV error."""
    rows = list(zip(curve.cp, curve.n_splits, curve.xerror, curve.xstd))
    m = min(range(len(rows)), key=lambda i: (rows[i][2], i))
    limit = rows[m][2] + rows[m][3]
    ok = [i for i in range(len(rows)) if rows[i][2] <= limit]
    return min(ok, key=lambda i: (rows[i][1], -rows[i][0]))


def random_curve(rng: np.random.Generator, tree: PartitionTree) -> CvCurve:
    from lhiem.expenditure.tree import cp_table

    cps, splits = cp_table(tree)
    k = cps.size
    xerror = rng.uniform(0.4, 1.2, k)
    if rng.random() < 0.3:
        xerror = np.sort(xerror)[::-1]  # monotone decreasing curve
    xstd = rng.uniform(0.005, 0.15, k)
    return CvCurve(cps, splits, xerror, xstd)


# -- covariate rows --------------------------------------------------------------------
def random_rows(rng: np.random.Generator, n: int, balanced: bool = False) -> dict[str, np.ndarray]:
    """Covariate rows shaped like a household survey panel."""
    if balanced:
        ag = rng.integers(0, len(AGE_GROUPS), n)
        ins = rng.integers(0, len(INS_CAT), n)
        race = rng.integers(0, len(RACE), n)
    else:
        ag = rng.choice(4, n, p=[0.27, 0.25, 0.23, 0.25])
        ins = rng.choice(5, n, p=[0.12, 0.2, 0.08, 0.15, 0.45])
        race = rng.choice(4, n, p=[0.19, 0.58, 0.13, 0.10])
    spend = np.where(rng.random(n) < 0.3, 0.0, np.round(np.exp(rng.normal(7.0, 1.4, n)), 2))
    return {
        "age_group": ag, "sex": rng.integers(0, 2, n), "hs": (rng.random(n) < 0.2).astype(int),
        "ins_cat": ins, "race": race, "fam_income": np.exp(rng.normal(11.0, 0.8, n)),
        "preg": rng.random(n) < 0.02, "spend_t": spend,
    }
