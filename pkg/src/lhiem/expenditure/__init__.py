"""Two-part medical spending model and per-event cost samplers."""

from .costs import (NHEA_FACTOR, MaternityCostSampler, apply_nhea_adjustment, newborn_rate, sample_maternity_cost,
                    sample_newborn_cost)
from .hurdle import HurdleModel, fit_hurdle, predict_nonzero_prob
from .leafglm import LeafRegression, fit_leaf_glms
from .tree import CvCurve, PartitionTree, TreeControls, grow_tree, prune_one_se
from .twopart import TwoPartModel, fit_two_part, predict_spending

__all__ = [
    "NHEA_FACTOR", "MaternityCostSampler", "apply_nhea_adjustment", "newborn_rate", "sample_maternity_cost",
    "sample_newborn_cost", "HurdleModel", "fit_hurdle", "predict_nonzero_prob", "LeafRegression", "fit_leaf_glms",
    "CvCurve", "PartitionTree", "TreeControls", "grow_tree", "prune_one_se", "TwoPartModel", "fit_two_part",
    "predict_spending",
]
