"""Observed-data containers, CSV ingestion, simulation and the CISS filter."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, DomainError

DV_UNAVAILABLE = 999
PASSENGER_BODYCAT = frozenset(range(1, 7))
REAR_END = "D"

GV_COLUMNS = ("CASEID", "VEHNO", "BODYCAT", "CRASHCONF", "DVTOTAL", "CASEWGT")
OCC_COLUMNS = ("CASEID", "VEHNO", "MAIS")


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Non-negative observations with strictly positive survey weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if v.shape != w.shape:
            raise DataError("values and weights differ in length")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise DataError("values must be finite and non-negative")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise DataError("weights must be finite and positive")
        v.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def unweighted(cls, values) -> "WeightedSample":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones_like(values))

    def __len__(self):
        return self.values.size

    @property
    def n_effective(self) -> float:
        """Sum of weights, i.e. the population count the records stand for."""
        return math.fsum(self.weights)


def weighted_draw_without_replacement(weights, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n`` successive weighted picks without replacement.

    Each pick chooses among the remaining items with probability
    proportional to weight. Uses Efraimidis-Spirakis keys ``log(U) / w``:
    sorting the keys in decreasing order yields exactly the successive-pick
    sequence, so the top ``n`` keys are the first ``n`` picks.
    """
    w = np.asarray(weights, dtype=float)
    if not 0 <= n <= w.size:
        raise DomainError(f"cannot pick {n} of {w.size} items")
    u = rng.random(w.size)
    with np.errstate(divide="ignore"):
        keys = np.log(u) / w
    return np.argsort(-keys, kind="stable")[:n]


def simulate_biased(
    n_pool: int,
    lam: float,
    mu: float,
    sigma: float,
    n_obs: int,
    rng: np.random.Generator,
) -> WeightedSample:
    """Biased sample from an exponential pool, selected by a logistic curve.

    ``n_pool`` values are drawn from Exp(lam), each gets selection weight
    ``F(x | mu, sigma)``, and ``n_obs`` of them are picked without
    replacement, renormalising after every pick. Values come back in pick
    order with weight 1.
    """
    if not (lam > 0 and sigma > 0 and math.isfinite(mu)):
        raise DomainError("need lam > 0, sigma > 0 and finite mu")
    if not 0 <= n_obs <= n_pool:
        raise DomainError(f"n_obs={n_obs} must lie in [0, n_pool={n_pool}]")
    pool = rng.exponential(1.0 / lam, n_pool)
    w = np.exp(-np.logaddexp(0.0, -(pool - mu) / sigma))
    return WeightedSample.unweighted(pool[weighted_draw_without_replacement(w, n_obs, rng)])


def stratified_reported_sample(
    p, n: int, rng: np.random.Generator, total_weight: float | None = None,
) -> WeightedSample:
    """One reported value per probability stratum ``[(i-1)/n, i/n)``.

    Values are drawn uniformly within each stratum of the reported
    (exponential-logistic) CDF, a stratified design with far less sampling
    noise than ``n`` independent draws. Every record gets weight
    ``total_weight / n`` (or 1 when ``total_weight`` is None).
    """
    from .distributions import reported_quantile

    if n < 1:
        raise DomainError("need at least one record")
    levels = (np.arange(n) + rng.random(n)) / n
    values = reported_quantile(p, levels)
    w = 1.0 if total_weight is None else total_weight / n
    return WeightedSample(np.atleast_1d(values), np.full(n, w))


def _parse_float(text, row, column):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise DataError(f"row {row}, column {column!r}: cannot parse {text!r}") from None


def read_weighted_csv(path, value_column: str = "value", weight_column: str | None = None):
    """Read a comma-separated file with a header row.

    Rows are numbered from 1 for the first data line. Without
    ``weight_column`` every record gets weight 1.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (value_column, weight_column) if c and c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        values, weights = [], []
        for i, rec in enumerate(reader, start=1):
            v = _parse_float(rec[value_column], i, value_column)
            if not (math.isfinite(v) and v >= 0):
                raise DataError(f"row {i}, column {value_column!r}: value must be >= 0, got {v!r}")
            values.append(v)
            if weight_column:
                w = _parse_float(rec[weight_column], i, weight_column)
                if not (math.isfinite(w) and w > 0):
                    raise DataError(f"row {i}, column {weight_column!r}: weight must be > 0, got {w!r}")
                weights.append(w)
    if not values:
        raise DataError(f"{path}: no data rows")
    if not weight_column:
        weights = [1.0] * len(values)
    return WeightedSample(np.array(values), np.array(weights))


def write_weighted_csv(path, data: WeightedSample):
    # repr() round-trips doubles exactly
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["value", "weight"])
        for v, w in zip(data.values, data.weights):
            out.writerow([repr(float(v)), repr(float(w))])


def read_table(path) -> list[dict[str, str]]:
    """All rows of a header-first CSV as dictionaries of raw strings."""
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None


def write_table(path, rows: list[dict[str, str]]):
    """Inverse of :func:`read_table`; columns follow the first row's keys."""
    if not rows:
        raise DataError("nothing to write")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        out.writeheader()
        out.writerows(rows)


@dataclass
class FilterReport:
    """Why vehicles were dropped by :func:`ciss_filter`.

    A vehicle is counted under the first criterion it fails, in field order.
    """

    n_vehicles: int = 0
    no_occupants: int = 0
    injured: int = 0
    injured_case: int = 0
    not_passenger: int = 0
    not_rear_end: int = 0
    dv_unavailable: int = 0
    kept: int = 0

    def lines(self) -> list[str]:
        return [f"{k}={v}" for k, v in self.__dict__.items()]


def _require(rows: Sequence[Mapping], columns, table):
    have = set(rows[0].keys()) if rows else set()
    missing = [c for c in columns if c not in have]
    if missing:
        raise DataError(f"{table} table is missing column(s): {', '.join(missing)}")


def _as_int(text, table, row, column):
    v = _parse_float(text, row, f"{table}.{column}")
    if not math.isfinite(v) or v != int(v):
        raise DataError(f"row {row}, column {table}.{column!r}: expected integer, got {text!r}")
    return int(v)


def ciss_filter(
    gv_rows: Iterable[Mapping[str, str]],
    occ_rows: Iterable[Mapping[str, str]],
    strict_case: bool = False,
) -> tuple[WeightedSample, FilterReport]:
    """Select uninjured, rear-end, passenger-vehicle records with known delta-v.

    Occupants are joined to vehicles on (CASEID, VEHNO). A vehicle is kept
    when it has at least one occupant, every occupant has MAIS 0, BODYCAT
    is 1..6, CRASHCONF is "D" and DVTOTAL is not the 999 sentinel. With
    ``strict_case`` an injured occupant anywhere in the case also drops the
    vehicle. Emits (DVTOTAL, CASEWGT) in input order.
    """
    gv_rows = list(gv_rows)
    occ_rows = list(occ_rows)
    _require(gv_rows, GV_COLUMNS, "GV")
    _require(occ_rows, OCC_COLUMNS, "OCC")

    max_mais = defaultdict(lambda: -1)
    case_injured = set()
    for i, r in enumerate(occ_rows, start=1):
        mais = _as_int(r["MAIS"], "OCC", i, "MAIS")
        if mais < 0:
            raise DataError(f"row {i}, column 'OCC.MAIS': negative MAIS {mais}")
        key = (r["CASEID"].strip(), r["VEHNO"].strip())
        max_mais[key] = max(max_mais[key], mais)
        if mais > 0:
            case_injured.add(key[0])

    report = FilterReport(n_vehicles=len(gv_rows))
    values, weights = [], []
    for i, r in enumerate(gv_rows, start=1):
        key = (r["CASEID"].strip(), r["VEHNO"].strip())
        if key not in max_mais:
            report.no_occupants += 1
            continue
        if max_mais[key] > 0:
            report.injured += 1
            continue
        if strict_case and key[0] in case_injured:
            report.injured_case += 1
            continue
        if _as_int(r["BODYCAT"], "GV", i, "BODYCAT") not in PASSENGER_BODYCAT:
            report.not_passenger += 1
            continue
        if r["CRASHCONF"].strip() != REAR_END:
            report.not_rear_end += 1
            continue
        dv = _parse_float(r["DVTOTAL"], i, "GV.DVTOTAL")
        if dv == DV_UNAVAILABLE:
            report.dv_unavailable += 1
            continue
        w = _parse_float(r["CASEWGT"], i, "GV.CASEWGT")
        if not (dv >= 0 and math.isfinite(dv)):
            raise DataError(f"row {i}, column 'GV.DVTOTAL': invalid delta-v {dv!r}")
        if not (w > 0 and math.isfinite(w)):
            raise DataError(f"row {i}, column 'GV.CASEWGT': weight must be > 0, got {w!r}")
        values.append(dv)
        weights.append(w)
        report.kept += 1
    if not values:
        raise DataError("no vehicles pass the filter")
    return WeightedSample(np.array(values), np.array(weights)), report


def synthetic_ciss_tables(
    rng: np.random.Generator,
    n_qualifying: int = 572,
    total_weight: float = 1.2e6,
    lam: float = 0.12,
    mu: float = 12.2,
    sigma: float = 1.30,
    n_decoys: int = 200,
):
    """GV/OCC tables shaped like a CISS extract, for tests and demos.

    ``n_qualifying`` vehicles pass every criterion; their delta-v values are
    a stratified draw from the exponential-logistic law with the given
    parameters (see :func:`stratified_reported_sample`), shuffled, and
    CASEWGT sums to ``total_weight``. Decoy vehicles each fail exactly one
    criterion. The first qualifying case also holds a second vehicle with
    an injured occupant, so ``strict_case`` drops exactly one more record.
    """
    from .distributions import ExpLogisticParams

    strat = stratified_reported_sample(ExpLogisticParams(lam, mu, sigma), n_qualifying, rng)
    dv = np.round(rng.permutation(strat.values), 1)
    raw = rng.gamma(4.0, 1.0, n_qualifying)
    wgt = raw / raw.sum() * total_weight

    gv, occ = [], []

    def add(case, veh, bodycat, conf, dvt, w, mais_list):
        gv.append({"CASEID": str(case), "VEHNO": str(veh), "BODYCAT": str(bodycat),
                   "CRASHCONF": conf, "DVTOTAL": repr(float(dvt)), "CASEWGT": repr(float(w))})
        for m in mais_list:
            occ.append({"CASEID": str(case), "VEHNO": str(veh), "MAIS": str(m)})

    for i in range(n_qualifying):
        add(100000 + i, 1, int(rng.integers(1, 7)), "D", dv[i], wgt[i],
            [0] * int(rng.integers(1, 4)))

    kinds = ("injured", "not_passenger", "not_rear_end", "dv_unavailable", "no_occupants")
    for j in range(n_decoys):
        case = 900000 + j
        kind = kinds[j % len(kinds)]
        v = float(rng.exponential(10.0)) + 1.0
        w = float(rng.gamma(4.0, 500.0))
        if kind == "injured":
            add(case, 1, 2, "D", v, w, [0, int(rng.integers(1, 6))])
        elif kind == "not_passenger":
            add(case, 1, int(rng.choice([7, 30, 50, 60])), "D", v, w, [0])
        elif kind == "not_rear_end":
            add(case, 1, 3, str(rng.choice(list("ABCEF"))), v, w, [0])
        elif kind == "dv_unavailable":
            add(case, 1, 3, "D", DV_UNAVAILABLE, w, [0])
        else:
            add(case, 1, 3, "D", v, w, [])
    # uninjured rear-ended car whose striking vehicle carried an injured occupant
    add(100000, 2, 3, "D", 20.0, 1.0, [2])
    return gv, occ
