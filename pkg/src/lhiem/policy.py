"""Loan-financed coverage policy and its ledger.

Eligible persons finance covered care through family loan accounts that are
repaid at a means-tested rate on family income above a poverty-line multiple.
The module only reads finalized spending; it never feeds back into the
population dynamics, so turning it off leaves every other attribute unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .income import FplTable, fpl_ratio
from .population import INS_CAT, NONGROUP, UNINSURED, Population

COINSURANCE = 0.20
ADULT_AGE = 19

OPEN, CLOSED, WRITTEN_OFF = "open", "closed", "written_off"


@dataclass
class PolicyParams:
    enabled: bool = True
    eligible: tuple[int, ...] = (UNINSURED, NONGROUP)
    repay_rate: float = 0.5  # r: share of income above the threshold
    threshold_fpl: float = 0.25  # tau: threshold as a poverty-line multiple
    interest: float = 0.03  # i
    utilization: tuple[float, ...] = (4.0, 1.0, 1.0, 1.0, 1.0)  # u per prior ins_cat
    price: float = 0.33  # p
    max_age: int = 64  # persons above this age are outside the program

    def __post_init__(self):
        self.eligible = tuple(int(e) for e in self.eligible)
        self.utilization = tuple(float(x) for x in self.utilization)
        vals = (self.repay_rate, self.threshold_fpl, self.interest, self.price, *self.utilization)
        if not np.all(np.isfinite(vals)):
            raise ValueError("policy parameters must be finite")
        if not 0 <= self.repay_rate <= 1:
            raise ValueError("repayment rate must lie in [0, 1]")
        if self.interest < 0 or self.threshold_fpl < 0 or self.price < 0:
            raise ValueError("interest, threshold and price must be nonnegative")
        if len(self.utilization) != len(INS_CAT) or min(self.utilization) <= 0:
            raise ValueError(f"need {len(INS_CAT)} positive utilization multipliers")

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyParams":
        d = dict(d)
        if "eligible" in d:
            d["eligible"] = tuple(INS_CAT.index(e) if isinstance(e, str) else int(e) for e in d["eligible"])
        if isinstance(d.get("utilization"), dict):
            u = [1.0] * len(INS_CAT)
            for k, v in d["utilization"].items():
                u[INS_CAT.index(k)] = float(v)
            d["utilization"] = tuple(u)
        return cls(**d)

    def to_dict(self) -> dict:
        return {"enabled": self.enabled, "eligible": [INS_CAT[e] for e in self.eligible],
                "repay_rate": self.repay_rate, "threshold_fpl": self.threshold_fpl, "interest": self.interest,
                "utilization": dict(zip(INS_CAT, self.utilization)), "price": self.price, "max_age": self.max_age}


@dataclass
class LoanLedger:
    """Per-family loan accounts; ``balance = draws + interest - repaid - written_off``."""

    accounts: dict[str, np.ndarray] = field(default_factory=dict)
    status: dict[str, str] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)  # latest family weight per account
    history: list[dict] = field(default_factory=list)

    COLUMNS = ("balance", "draws", "interest", "repaid", "written_off")

    def _account(self, fid: str) -> np.ndarray:
        acc = self.accounts.get(fid)
        if acc is None:
            acc = self.accounts[fid] = np.zeros(len(self.COLUMNS))
            self.status[fid] = OPEN
        return acc

    def totals(self) -> dict[str, float]:
        if not self.accounts:
            return {c: 0.0 for c in self.COLUMNS}
        m = np.array([self.accounts[k] for k in sorted(self.accounts)])
        return dict(zip(self.COLUMNS, m.sum(axis=0).tolist()))

    def weighted_totals(self) -> dict[str, float]:
        """Account totals scaled to the national population by family weight."""
        if not self.accounts:
            return {c: 0.0 for c in self.COLUMNS}
        keys = sorted(self.accounts)  # fixed order so a reloaded ledger sums identically
        m = np.array([self.accounts[k] for k in keys])
        w = np.array([self.weights.get(k, 0.0) for k in keys])
        return dict(zip(self.COLUMNS, (w @ m).tolist()))

    def identity_error(self) -> float:
        """Largest |balance - (draws + interest - repaid - written_off)| over accounts."""
        if not self.accounts:
            return 0.0
        m = np.array(list(self.accounts.values()))
        return float(np.max(np.abs(m[:, 0] - (m[:, 1] + m[:, 2] - m[:, 3] - m[:, 4]))))

    def copy(self) -> "LoanLedger":
        return LoanLedger({k: v.copy() for k, v in self.accounts.items()}, dict(self.status), dict(self.weights),
                          list(self.history))

    def to_frame(self) -> pd.DataFrame:
        rows = [{"fid": f, "status": self.status[f], "weight": self.weights.get(f, 0.0),
                 **dict(zip(self.COLUMNS, a.tolist()))} for f, a in sorted(self.accounts.items())]
        return pd.DataFrame(rows, columns=["fid", "status", "weight", *self.COLUMNS])

    def save(self, path):
        self.to_frame().to_csv(path, index=False, float_format=None)
        pd.DataFrame(self.history).to_csv(str(path).replace(".csv", "_history.csv"), index=False, float_format=None)

    @classmethod
    def load(cls, path) -> "LoanLedger":
        t = pd.read_csv(path, dtype={"fid": str, "status": str}, keep_default_na=False, float_precision="round_trip")
        led = cls()
        for r in t.itertuples(index=False):
            led.accounts[r.fid] = np.array([float(getattr(r, c)) for c in cls.COLUMNS])
            led.status[r.fid] = r.status
            led.weights[r.fid] = float(r.weight)
        hist = str(path).replace(".csv", "_history.csv")
        try:
            led.history = pd.read_csv(hist, float_precision="round_trip").to_dict("records")
        except (OSError, pd.errors.EmptyDataError):
            led.history = []
        return led

    def __eq__(self, other):
        if not isinstance(other, LoanLedger) or self.status != other.status:
            return False
        return (self.accounts.keys() == other.accounts.keys() and self.weights == other.weights
                and all(np.array_equal(v, other.accounts[k]) for k, v in self.accounts.items()))


def status_quo_oop(med_spend, ins_cat, deduct) -> np.ndarray:
    """Uninsured pay everything; insured pay the deductible plus coinsurance above it."""
    s = np.asarray(med_spend, dtype=float)
    d = np.asarray(deduct, dtype=float)
    insured = np.asarray(ins_cat) != UNINSURED
    return np.where(insured, np.minimum(s, d) + COINSURANCE * np.maximum(s - d, 0.0), s)


def eligible_mask(pop: Population, params: PolicyParams) -> np.ndarray:
    return pop.alive & np.isin(pop["ins_cat"], params.eligible) & (pop["age"] <= params.max_age)


def covered_spend(pop: Population, params: PolicyParams) -> np.ndarray:
    """Covered cost under the policy: spending times utilization and price multipliers."""
    u = np.asarray(params.utilization)[pop["ins_cat"].astype(int)]
    return np.where(eligible_mask(pop, params), pop["med_spend"] * u * params.price, 0.0)


def apply_policy_year(pop: Population, ledger: LoanLedger, params: PolicyParams, fpl: FplTable,
                      year: int, present=None):
    """Post the year's loans and repayments; returns (per-person OOP frame, ledger, summary).

    ``present`` marks records counted this year (defaults to alive records);
    decedents of the year are included so their last-year costs are financed.
    """
    present = pop.alive if present is None else np.asarray(present, dtype=bool)
    sq = status_quo_oop(pop["med_spend"], pop["ins_cat"], pop["deduct"])
    if not params.enabled:
        oop = pd.DataFrame({"pid": pop["pid"], "sq_oop": sq, "policy_oop": sq, "covered": 0.0,
                            "participant": False})
        return oop, ledger, {"participants": 0.0}

    ledger = ledger.copy()
    elig = present & np.isin(pop["ins_cat"], params.eligible) & (pop["age"] <= params.max_age)
    u = np.asarray(params.utilization)[pop["ins_cat"].astype(int)]
    cov = np.where(elig, pop["med_spend"] * u * params.price, 0.0)

    fam = pop["fam"]
    nf = int(fam.max()) + 1 if len(pop) else 0
    fam_draw = np.bincount(fam, weights=cov, minlength=nf)
    fam_elig = np.bincount(fam, weights=elig.astype(float), minlength=nf)
    alive = pop.alive
    size = np.bincount(fam, weights=alive.astype(float), minlength=nf)
    adults = np.bincount(fam, weights=(alive & (pop["age"] >= ADULT_AGE)).astype(float), minlength=nf)
    first = np.unique(fam, return_index=True)[1]
    fid = pop["fid"][first]
    income = pop["fam_income"][first]
    surplus = np.maximum(0.0, income - params.threshold_fpl * fpl.threshold(np.maximum(size, 1), year))
    cap = params.repay_rate * surplus

    fam_w = pop["wth"][first]
    repaid = np.zeros(nf)
    year_tot = np.zeros(4)  # draws, interest, repaid, written_off; weighted by family weight
    for f in range(nf):
        key = fid[f]
        if key not in ledger.accounts and fam_draw[f] <= 0:
            continue
        acc = ledger._account(key)
        if ledger.status[key] != OPEN:
            if fam_draw[f] <= 0:
                continue
            ledger.status[key] = OPEN
        draw = fam_draw[f]
        acc[1] += draw
        acc[0] += draw
        interest = params.interest * acc[0]  # balance after draws, before repayment
        acc[2] += interest
        acc[0] += interest
        pay = min(acc[0], cap[f])
        acc[3] += pay
        acc[0] -= pay
        repaid[f] = pay
        forgiven = 0.0
        if adults[f] == 0:  # last adult has died: forgive the remaining balance
            forgiven = acc[0]
            acc[4] += forgiven
            acc[0] = 0.0
            ledger.status[key] = WRITTEN_OFF
        elif acc[0] <= 0.0:
            acc[0] = 0.0
            ledger.status[key] = CLOSED
        year_tot += fam_w[f] * np.array([draw, interest, pay, forgiven])
        ledger.weights[key] = fam_w[f]

    # attribute each family's repayment to eligible members by covered-spend share
    share_base = np.bincount(fam, weights=cov, minlength=nf)
    member_share = np.where(share_base[fam] > 0, cov / np.where(share_base[fam] > 0, share_base[fam], 1.0),
                            np.where(elig, 1.0 / np.maximum(fam_elig[fam], 1.0), 0.0))
    orphan = (fam_elig[fam] == 0) & present
    n_present = np.bincount(fam, weights=present.astype(float), minlength=nf)
    member_share = np.where(orphan, 1.0 / np.maximum(n_present[fam], 1.0), member_share)
    pay_person = repaid[fam] * member_share
    policy_oop = np.where(elig, pay_person, sq + np.where(orphan, pay_person, 0.0))
    oop = pd.DataFrame({"pid": pop["pid"], "sq_oop": sq, "policy_oop": policy_oop, "covered": cov,
                        "participant": elig})
    t = ledger.weighted_totals()
    row = {"year": year, **{f"year_{k}": v for k, v in zip(("draws", "interest", "repaid", "written_off"), year_tot)},
           **{f"cum_{k}": v for k, v in t.items()}}
    ledger.history.append(row)
    return oop, ledger, {"participants": float(pop["wt"][elig].sum()), **row}


def federal_cost_summary(ledger: LoanLedger, horizon: int | None = None) -> pd.DataFrame:
    """Per-year federal position: outstanding balance, draws, repayments, interest, write-offs."""
    cols = ["year", "draws", "repaid", "interest", "written_off", "balance", "net_position"]
    if not ledger.history:
        return pd.DataFrame([dict.fromkeys(cols, 0.0) | {"year": y} for y in range(1, (horizon or 0) + 1)],
                            columns=cols)
    rows = []
    for h in ledger.history:
        if horizon is not None and h["year"] > horizon:
            continue
        rows.append({
            "year": h["year"], "draws": h["year_draws"], "repaid": h["year_repaid"],
            "interest": h["year_interest"], "written_off": h["year_written_off"], "balance": h["cum_balance"],
            # cash recovered less cash lent, before counting outstanding balances
            "net_position": h["cum_repaid"] - h["cum_draws"],
        })
    return pd.DataFrame(rows, columns=cols)
