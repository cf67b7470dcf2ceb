"""
Comparing model variants
========================

The status quo, the baseline policy and model variants run on common random
numbers; medians are compared with the baseline policy run.
"""

from lhiem.engine import ScenarioConfig
from lhiem.harness import participation_report, run_suite, share_drift
from lhiem.synthpop import generate_population


def main():
    pop = generate_population(5_000, seed=2)
    cfg = ScenarioConfig(horizon=5, seed=2, snapshots=False)
    rep = run_suite(cfg, [1, 2, 4, 6], pop)
    print(rep.individual.round(2).to_string(index=False))
    print()
    print(rep.household.round(0).to_string(index=False))
    part = participation_report(rep.aggregates[2])
    print(f"\nparticipants by year: {part['participants'].round(0).tolist()}")
    print(f"largest demographic share drift: {share_drift(part):.2f} points")


if __name__ == "__main__":
    main()
