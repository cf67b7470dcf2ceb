"""Builders for small hand-made populations used across the tests."""

from __future__ import annotations

from lhiem.population import Population, PersonRecord

ACCEPTANCE_LINES: list[str] = []


def person(pid, fid, **kw) -> PersonRecord:
    base = dict(pid=pid, fid=fid, tid=fid, wt=1.0, wth=1.0, sex="Female", age=30, race="White")
    base.update(kw)
    return PersonRecord(**base)


def toy_population(records, year=0) -> Population:
    return Population.from_records(records, year)


def family_of(n=3, fid="f1", income=60_000.0, **kw) -> list[PersonRecord]:
    ages = [40, 38, 10, 8, 5, 3][:n]
    sexes = ["Male", "Female", "Female", "Male", "Female", "Male"][:n]
    return [person(f"{fid}p{i}", fid, age=a, sex=s, fam_income=income,
                   wage_prop=(0.6 if i == 0 else 0.4 if i == 1 else 0.0), **kw)
            for i, (a, s) in enumerate(zip(ages, sexes))]


class PassThroughModel:
    """Spending model stub: next-year spending equals this year's."""

    def draw(self, rows, u, z):
        import numpy as np

        return np.asarray(rows["spend_t"], dtype=float).copy()


def identity_context(pop: Population, **overrides):
    """Context in which every submodel leaves its attributes unchanged."""
    import numpy as np

    from lhiem import demographics as demo
    from lhiem import health, income, mortality
    from lhiem.engine import Context
    from lhiem.expenditure import MaternityCostSampler

    ctx = Context(
        model=PassThroughModel(),
        hazards=health.HealthHazards([0, 0], [120, 120], [0, 1], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0]),
        recovery=health.RecoveryCurve(),
        sampler=income.IncomeChangeSampler.constant(1.0),
        exits=income.ExitSampler.degenerate(0.0, 0.0),
        fpl=income.FplTable(np.array([12_490.0, 16_910.0]), 4_420.0, 0.0),
        ins_by_fpl=income.InsuranceByFpl(np.tile(np.eye(5)[4], (4, 4, 1))),
        life_table=mortality.LifeTable(np.zeros((111, 2))),
        link=mortality.EolSpendingLink.identity(),
        fertility=demo.FertilityTable.constant(0.0),
        omega=demo.OmegaDistribution.point(1),
        migration=demo.MigrationSchedule({}),
        maternity=MaternityCostSampler.fit(),
        pool=demo.ImmigrantPool(pop.subset(np.zeros(len(pop), bool))),
        deductibles=np.zeros((4, 5)),
    )
    for k, v in overrides.items():
        setattr(ctx, k, v)
    return ctx
