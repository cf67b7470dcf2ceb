"""Fit the shipped per-cell spending map so the synthetic population matches
the target spending-bucket means after the national-accounts scaling.

Cell parameters share one structure: age and insurance shifts on the log mean
and zero probability are fixed, and the global level, spread, zero-probability
scale and tail are fitted by Nelder-Mead on common random numbers.
"""

import sys
from pathlib import Path

import numpy as np
from scipy import optimize

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from lhiem.population import age_group  # noqa: E402
from lhiem.rng import Streams  # noqa: E402
from lhiem.synthpop import SpendingMap, draw_cell_spending, generate_population, load_targets  # noqa: E402
from lhiem.weighted import bucket_means  # noqa: E402

AGE_SHIFT = np.array([-0.65, -0.30, 0.0, 0.32])
INS_SHIFT = np.array([-0.55, 0.10, 0.30, -0.05, 0.0])
AGE_ZERO = np.array([0.20, 0.30, 0.19, 0.11])
INS_ZERO = np.array([0.22, 0.00, -0.03, 0.04, 0.0])
DEDUCTIBLE = np.array([0.0, 60.0, 350.0, 3100.0, 1350.0])
AGE_DEDUCT = np.array([0.85, 0.95, 1.0, 1.08])

# centre of the acceptance windows for each bucket
FIT_TARGET = {"overall": 4850, "bottom_50": 271, "top_50": 9429, "top_30": 14379,
              "top_10": 33267, "top_5": 52524, "top_1": 118000}


def make_map(theta) -> SpendingMap:
    mu, log_sd, zscale, tail_w, tail_scale, alpha = theta
    cells = {}
    for g in range(4):
        for i in range(5):
            cells[(g, i)] = {
                "p_zero": float(np.clip(zscale * (AGE_ZERO[g] + INS_ZERO[i]), 0.0, 0.95)),
                "log_mean": float(mu + AGE_SHIFT[g] + INS_SHIFT[i]),
                "log_sd": float(abs(log_sd)),
                "tail_weight": float(np.clip(tail_w, 0.0, 0.2)),
                "tail_scale": float(abs(tail_scale) * np.exp(0.5 * AGE_SHIFT[g])),
                "tail_alpha": float(max(alpha, 2.05)),
                "mean_deductible": float(round(DEDUCTIBLE[i] * AGE_DEDUCT[g], 2)),
            }
    return SpendingMap(cells)


def main(n=200_000, seed=11):
    targets = load_targets()
    flat = make_map([7.0, 1.4, 1.0, 0.0, 1.0, 3.0])
    pop = generate_population(n, targets, flat, seed=seed)
    ag, ins, w = age_group(pop["age"]), pop["ins_cat"].astype(int), pop["wt"]
    u = Streams(seed).uniform(0, "fit-spend", pop["key"], 3)
    tiebreak = pop["pid"].astype(str)
    names = list(FIT_TARGET)
    tgt = np.array([FIT_TARGET[k] for k in names], dtype=float)

    def loss(theta):
        m = make_map(theta)
        params = {c: np.array([m.cells[(g, i)][c] for g, i in zip(ag, ins)]) for c in
                  ("p_zero", "log_mean", "log_sd", "tail_weight", "tail_scale", "tail_alpha")}
        s = draw_cell_spending(params, u) * targets.nhea_factor
        b = bucket_means(s, w)
        return float(np.sum(np.log(np.array([b[k] for k in names]) / tgt) ** 2)), b

    x0 = np.array([7.2, 1.35, 1.0, 0.01, 60000.0, 2.6])
    res = optimize.minimize(lambda t: loss(t)[0], x0, method="Nelder-Mead",
                            options={"maxiter": 800, "xatol": 1e-4, "fatol": 1e-8})
    val, b = loss(res.x)
    print("theta", res.x.tolist(), "loss", val)
    for k in names:
        print(f"{k:10s} {b[k]:10.1f} target {FIT_TARGET[k]}")
    make_map(res.x).save(ROOT / "src" / "lhiem" / "data" / "spending_map.csv")


if __name__ == "__main__":
    main()
