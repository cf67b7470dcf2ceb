"""Population data model, validation, harmonization, and snapshot files.

A :class:`Population` stores one numpy array per person attribute. Categorical
attributes are held as small integer codes into the label tuples below; the
snapshot file and :class:`PersonRecord` use the labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from . import rng as _rng
from .errors import ParseError, UnknownRawValue, ValidationError
from .weighted import bucket_means

SEX = ("Male", "Female")
RACE = ("Hispanic", "White", "Black", "Other")
INS_CAT = ("Uninsured", "Medicaid", "OtherPublic", "NonGroupPrivate", "OtherPrivate")
PREG = ("NotPregnant", "Pregnant")
HS = ("Good", "Bad")
MORBIDITY = ("None", "Chronic", "Acute")

MALE, FEMALE = 0, 1
HISPANIC, WHITE, BLACK, OTHER_RACE = 0, 1, 2, 3
UNINSURED, MEDICAID, OTHER_PUBLIC, NONGROUP, OTHER_PRIVATE = 0, 1, 2, 3, 4
GOOD, BAD = 0, 1
NO_MORBIDITY, CHRONIC, ACUTE = 0, 1, 2

# Spending/insurance age groups: <=18, 19-34, 35-49, 50-64 (older ages fold into the last).
AGE_GROUPS = ("0-18", "19-34", "35-49", "50-64")
_AGE_GROUP_EDGES = np.array([19, 35, 50])


def age_group(age) -> np.ndarray:
    return np.searchsorted(_AGE_GROUP_EDGES, np.asarray(age), side="right")


CATEGORIES = {
    "sex": SEX,
    "race": RACE,
    "ins_cat": INS_CAT,
    "preg": PREG,
    "hs": HS,
    "morbidity": MORBIDITY,
}

# Snapshot column order; the trailing two are engine bookkeeping, optional on load.
FIELDS = (
    "pid", "fid", "tid", "wt", "wth", "sex", "age", "race", "survive",
    "fam_income", "wage_prop", "ins_cat", "deduct", "med_spend", "visits",
    "preg", "hs", "morbidity",
)
EXTRA_FIELDS = ("immigrant", "death_year")

DTYPES = {
    "pid": object, "fid": object, "tid": object,
    "wt": np.float64, "wth": np.float64,
    "sex": np.int8, "age": np.int64, "race": np.int8, "survive": np.bool_,
    "fam_income": np.float64, "wage_prop": np.float64, "ins_cat": np.int8,
    "deduct": np.float64, "med_spend": np.float64, "visits": np.int64,
    "preg": np.bool_, "hs": np.int8, "morbidity": np.int8,
    "immigrant": np.bool_, "death_year": np.int64,
}


@dataclass
class PersonRecord:
    pid: str
    fid: str
    tid: str
    wt: float
    wth: float
    sex: str
    age: int
    race: str
    survive: bool = True
    fam_income: float = 0.0
    wage_prop: float = 0.0
    ins_cat: str = "OtherPrivate"
    deduct: float = 0.0
    med_spend: float = 0.0
    visits: int = 0
    preg: str = "NotPregnant"
    hs: str = "Good"
    morbidity: str = "None"
    immigrant: bool = False
    death_year: int = -1


@dataclass(frozen=True)
class Violation:
    pid: str | None
    rule: str

    def __str__(self):
        return f"{self.pid}: {self.rule}" if self.pid is not None else self.rule


class Population:
    """Weighted, family-structured person table (the Markov chain state)."""

    def __init__(self, year: int, data: dict[str, np.ndarray]):
        self.year = int(year)
        n = len(data["pid"])
        self.data = {}
        for name in FIELDS + EXTRA_FIELDS:
            if name in data:
                self.data[name] = np.asarray(data[name], dtype=DTYPES[name])
            elif name == "immigrant":
                self.data[name] = np.zeros(n, dtype=np.bool_)
            elif name == "death_year":
                self.data[name] = np.full(n, -1, dtype=np.int64)
            else:
                raise KeyError(name)
        # fam: family index in order of first appearance; key: hashed pid
        self.data["fam"] = (
            np.asarray(data["fam"], dtype=np.int64) if "fam" in data
            else pd.factorize(self.data["fid"])[0].astype(np.int64)
        )
        self.data["key"] = (
            np.asarray(data["key"], dtype=np.uint64) if "key" in data
            else _rng.keys_of(self.data["pid"])
        )

    # -- basic access ------------------------------------------------------
    def __len__(self):
        return len(self.data["pid"])

    def __getitem__(self, name):
        return self.data[name]

    def __setitem__(self, name, value):
        self.data[name] = np.asarray(value, dtype=self.data[name].dtype)

    @property
    def n_families(self) -> int:
        return int(self.data["fam"].max()) + 1 if len(self) else 0

    @property
    def alive(self) -> np.ndarray:
        return self.data["survive"]

    @property
    def families(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for pid, fid in zip(self.data["pid"], self.data["fid"]):
            out.setdefault(fid, []).append(pid)
        return out

    def copy(self) -> "Population":
        return Population(self.year, {k: v.copy() for k, v in self.data.items()})

    def subset(self, mask) -> "Population":
        data = {k: v[mask] for k, v in self.data.items() if k != "fam"}
        return Population(self.year, data)

    def append(self, other: "Population") -> "Population":
        """Rows of ``other`` appended; its families get fresh indices unless shared by fid."""
        data = {k: np.concatenate([self.data[k], other.data[k]]) for k in FIELDS + EXTRA_FIELDS}
        data["key"] = np.concatenate([self.data["key"], other.data["key"]])
        return Population(self.year, data)

    def total_weight(self, alive_only=True) -> float:
        w = self.data["wt"]
        return float(w[self.alive].sum() if alive_only else w.sum())

    # -- records -----------------------------------------------------------
    def record(self, i: int) -> PersonRecord:
        vals = {}
        for f in fields(PersonRecord):
            v = self.data[f.name][i]
            if f.name in CATEGORIES:
                v = CATEGORIES[f.name][int(v)]
            elif f.name == "preg":
                v = PREG[int(v)]
            elif isinstance(v, np.generic):
                v = v.item()
            vals[f.name] = v
        return PersonRecord(**vals)

    def records(self) -> list[PersonRecord]:
        return [self.record(i) for i in range(len(self))]

    @classmethod
    def from_records(cls, records, year: int = 0) -> "Population":
        cols: dict[str, list] = {name: [] for name in FIELDS + EXTRA_FIELDS}
        for r in records:
            for name in cols:
                v = getattr(r, name)
                if name in CATEGORIES:
                    v = encode(name, v)
                cols[name].append(v)
        return cls(year, {k: np.array(v, dtype=DTYPES[k]) for k, v in cols.items()})

    def to_frame(self) -> pd.DataFrame:
        out = {}
        for name in FIELDS + EXTRA_FIELDS:
            col = self.data[name]
            if name in CATEGORIES:
                col = np.asarray(CATEGORIES[name], dtype=object)[col.astype(int)]
            out[name] = col
        return pd.DataFrame(out)

    def __eq__(self, other):
        if not isinstance(other, Population) or self.year != other.year or len(self) != len(other):
            return False
        return all(np.array_equal(self.data[k], other.data[k]) for k in FIELDS + EXTRA_FIELDS)


def encode(name: str, label) -> int:
    labels = CATEGORIES[name]
    if isinstance(label, (bool, np.bool_)) and name == "preg":
        return int(label)
    if isinstance(label, (int, np.integer)):
        if not 0 <= int(label) < len(labels):
            raise ValueError(f"{name} code {label} out of range")
        return int(label)
    try:
        return labels.index(label)
    except ValueError:
        raise ValueError(f"unknown {name} level {label!r}; expected one of {labels}") from None


# -- validation ----------------------------------------------------------------
def validate_population(pop: Population) -> list[Violation]:
    """All invariant violations; an empty list means the population is well formed."""
    out: list[Violation] = []
    d = pop.data
    pid = d["pid"]
    if len(pop) == 0 or d["wt"].sum() <= 0:
        out.append(Violation(None, "total weight must be positive"))
    if len(pop) == 0:
        return out

    def flag(mask, rule):
        for p in pid[mask]:
            out.append(Violation(str(p), rule))

    _, first, counts = np.unique(pid.astype(str), return_index=True, return_counts=True)
    if (counts > 1).any():
        dup = np.zeros(len(pop), dtype=bool)
        dup[first[counts > 1]] = True
        flag(dup, "duplicate pid")
    flag(d["wt"] < 0, "wt must be nonnegative")
    flag(d["wth"] < 0, "wth must be nonnegative")
    flag(d["age"] < 0, "age must be >= 0")
    flag(d["fam_income"] < 0, "fam_income must be >= 0")
    flag(d["deduct"] < 0, "deduct must be >= 0")
    flag(d["med_spend"] < 0, "med_spend must be >= 0")
    flag(d["visits"] < 0, "visits must be >= 0")
    flag((d["wage_prop"] < 0) | (d["wage_prop"] > 1), "wage_prop must lie in [0, 1]")
    for name, labels in CATEGORIES.items():
        if name == "preg":
            continue
        flag((d[name] < 0) | (d[name] >= len(labels)), f"{name} code out of range")
    preg = d["preg"]
    flag(preg & ((d["sex"] != FEMALE) | (d["age"] < 15) | (d["age"] > 49)),
         "Pregnant requires Female aged 15-49")
    flag((d["morbidity"] == NO_MORBIDITY) & (d["hs"] != GOOD), "morbidity None requires hs Good")
    flag((d["morbidity"] != NO_MORBIDITY) & (d["hs"] != BAD), "Chronic/Acute morbidity requires hs Bad")
    alive = d["survive"]
    wp = np.bincount(d["fam"], weights=np.where(alive, d["wage_prop"], 0.0), minlength=pop.n_families)
    bad_fam = wp > 1 + 1e-9
    if bad_fam.any():
        first_member = np.zeros(len(pop), dtype=bool)
        _, idx = np.unique(d["fam"], return_index=True)
        first_member[idx] = True
        flag(first_member & bad_fam[d["fam"]], "family wage_prop sum exceeds 1")
    return out


# -- harmonization ---------------------------------------------------------------
@dataclass
class HarmonizationRules:
    """(dataset, variable, raw) -> harmonized value lookup."""

    entries: dict[tuple[str, str, str], str] = field(default_factory=dict)
    # (dataset, variable) -> harmonized value for raw codes not listed (e.g. HISPAN "all other")
    defaults: dict[tuple[str, str], str] = field(default_factory=dict)

    def add(self, dataset, variable, raw, harmonized):
        key = (str(dataset).upper(), str(variable).upper(), _norm_raw(raw))
        if key in self.entries and self.entries[key] != harmonized:
            raise ValueError(f"conflicting harmonization for {key}")
        self.entries[key] = harmonized


def _norm_raw(raw) -> str:
    s = str(raw).strip()
    try:
        f = float(s)
    except ValueError:
        return s
    return str(int(f)) if f.is_integer() else s


def load_harmonization(path=None) -> HarmonizationRules:
    """Read a rules file with columns dataset, variable, raw, harmonized.

    ``raw == "*"`` sets the default for codes not otherwise listed.
    """
    if path is None:
        from .tables import data_path
        path = data_path("harmonization.csv")
    rules = HarmonizationRules()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"dataset", "variable", "raw", "harmonized"} - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"missing column(s) {sorted(missing)}", path=path, column=sorted(missing)[0])
        for i, row in enumerate(reader, start=2):
            if row["raw"].strip() == "*":
                rules.defaults[(row["dataset"].upper(), row["variable"].upper())] = row["harmonized"]
            else:
                rules.add(row["dataset"], row["variable"], row["raw"], row["harmonized"])
    return rules


def harmonize(rules: HarmonizationRules, dataset: str, variable: str, raw):
    key = (str(dataset).upper(), str(variable).upper(), _norm_raw(raw))
    try:
        return rules.entries[key]
    except KeyError:
        default = rules.defaults.get(key[:2])
        if default is not None:
            return default
        raise UnknownRawValue(f"no harmonization for {dataset}.{variable} = {raw!r}") from None


# -- summaries -----------------------------------------------------------------
def weighted_spending_summary(pop: Population, alive_only: bool = False) -> dict[str, float]:
    """Weighted mean med_spend overall and by spending-distribution bucket."""
    mask = pop.alive if alive_only else np.ones(len(pop), dtype=bool)
    return bucket_means(pop["med_spend"][mask], pop["wt"][mask], tiebreak=np.asarray(pop["pid"][mask]).astype(str))


# -- snapshot files --------------------------------------------------------------
def save_population(pop: Population, path) -> None:
    frame = pop.to_frame()
    frame["survive"] = frame["survive"].map({True: "TRUE", False: "FALSE"})
    frame["immigrant"] = frame["immigrant"].map({True: "TRUE", False: "FALSE"})
    frame["preg"] = np.where(pop["preg"], "Pregnant", "NotPregnant")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# year={pop.year}\n")
        frame.to_csv(fh, index=False, float_format=None)


_BOOL = {"TRUE": True, "FALSE": False, "1": True, "0": False, "true": True, "false": False}


def read_population(path, year: int | None = None) -> Population:
    """Parse a snapshot file (no invariant validation; see ``synthpop.load_population``)."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc
    skip = 0
    if first.startswith("#"):
        skip = 1
        if year is None and "year=" in first:
            year = int(first.split("year=")[1].strip())
    try:
        frame = pd.read_csv(path, skiprows=skip, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(str(exc), path=path) from exc
    for name in FIELDS:
        if name not in frame.columns:
            raise ParseError("missing required column", path=path, column=name)
    data = {}
    for name in FIELDS + EXTRA_FIELDS:
        if name not in frame.columns:
            continue
        raw = frame[name].to_numpy()
        try:
            if name in ("pid", "fid", "tid"):
                col = raw.astype(object)
            elif name in ("survive", "immigrant"):
                col = np.array([_BOOL[s.strip()] for s in raw], dtype=bool)
            elif name == "preg":
                col = np.array([PREG.index(s.strip()) for s in raw], dtype=bool)
            elif name in CATEGORIES:
                lookup = {lab: i for i, lab in enumerate(CATEGORIES[name])}
                col = np.array([lookup[s.strip()] for s in raw], dtype=np.int8)
            elif DTYPES[name] is np.int64:
                col = np.array([int(s) for s in raw], dtype=np.int64)
            else:
                col = np.array([float(s) for s in raw], dtype=np.float64)
        except (KeyError, ValueError) as exc:
            bad = _first_bad_row(raw, name)
            raise ParseError(f"invalid value {raw[bad]!r}", path=path, row=bad + 2 + skip, column=name) from exc
        data[name] = col
    return Population(year if year is not None else 0, data)


def _first_bad_row(raw, name):
    for i, s in enumerate(raw):
        s = s.strip()
        try:
            if name in ("survive", "immigrant"):
                _BOOL[s]
            elif name == "preg":
                PREG.index(s)
            elif name in CATEGORIES:
                CATEGORIES[name].index(s)
            elif DTYPES[name] is np.int64:
                int(s)
            else:
                float(s)
        except (KeyError, ValueError):
            return i
    return 0


def require_valid(pop: Population) -> Population:
    violations = validate_population(pop)
    if violations:
        raise ValidationError(violations)
    return pop
