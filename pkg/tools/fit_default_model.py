"""Fit the shipped two-part spending model on the built-in synthetic panel."""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from lhiem.expenditure.panel import synthetic_panel  # noqa: E402
from lhiem.expenditure.twopart import fit_two_part  # noqa: E402

SEED = 5
OVERRIDE_CP = 0.006


def main():
    model = fit_two_part(synthetic_panel(), seed=SEED, override_cp=OVERRIDE_CP)
    out = ROOT / "src" / "lhiem" / "data" / "default_model.json"
    model.save(out)
    print(f"{model.tree.n_splits} splits, {model.tree.n_leaves} leaves -> {out}")
    print({k: v for k, v in model.meta.items() if k.startswith("test_")})


if __name__ == "__main__":
    main()
