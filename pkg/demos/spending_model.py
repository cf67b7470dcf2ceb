"""
Fitting the two-part spending model
===================================

A logistic hurdle gives the chance of any spending next year; a pruned
regression tree splits the positive spenders into groups, each with its own
log-linear regression.
"""

import pandas as pd

from lhiem.expenditure import fit_two_part, prune_one_se
from lhiem.expenditure.panel import synthetic_panel
from lhiem.expenditure.tree import one_se_index

panel = synthetic_panel(n=20_000, seed=3)
model = fit_two_part(panel, seed=3, n_folds=5)

# Hurdle coefficients with standard errors.
h = model.hurdle
for term, b, se in zip(h.terms, h.coef, h.se):
    print(f"  {term:>16} {b:+.3f} ({se:.3f})")

# Cross-validated complexity table; the one-SE rule picks the smallest tree
# whose error is within one standard error of the best.
curve = model.curve
pick = one_se_index(curve)
for i, (cp, k, xe, xs) in enumerate(zip(curve.cp, curve.n_splits, curve.xerror, curve.xstd)):
    print(f"  cp {cp:.5f} splits {k:2d} xerror {xe:.4f} +- {xs:.4f}" + ("  <- one-SE" if i == pick else ""))

# A fixed complexity parameter can be forced instead.
forced = prune_one_se(model.full_tree, curve, override_cp=0.006)
print(f"one-SE tree: {model.tree.n_splits} splits; cp=0.006 tree: {forced.n_splits} splits")
print(pd.DataFrame(model.tree.leaf_table()).round(3).to_string(index=False))
