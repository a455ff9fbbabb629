"""Completing a biased sample with draws from its unreported stratum.

A fitted reporting curve says which fraction ``k`` of the population is
reported. Treating the observed (weighted) count as ``k`` times the
population count, the number of missing records is

    n_new = n_obs * (1 - k) / k

and their values are drawn from the exponential population weighted by
the probability of *not* being reported, ``1 - F(x)``. Observed records
are passed through untouched; imputed records carry weight 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import WeightedSample
from .distributions import DEFAULT_TOL, ExpLogisticParams, normalizer_k, sample_missing
from .errors import DataError, DomainError
from .inference import PARAM_NAMES, PosteriorDraws

OBSERVED = "observed"
IMPUTED = "imputed"
AVERAGE_DRAW_ID = -1


@dataclass(frozen=True, eq=False)
class CompletedDataset:
    """Observed records followed by imputed ones.

    ``draw_id`` is the posterior draw index the parameters came from, or
    ``AVERAGE_DRAW_ID`` for the posterior-mean dataset.
    """

    observed: WeightedSample
    imputed: np.ndarray
    params_used: ExpLogisticParams
    k_used: float
    draw_id: int

    @property
    def n_new(self) -> int:
        return int(self.imputed.size)

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.observed.values, self.imputed])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.observed.weights, np.ones(self.n_new)])

    @property
    def origin(self) -> np.ndarray:
        return np.array([OBSERVED] * len(self.observed) + [IMPUTED] * self.n_new)

    def __len__(self):
        return len(self.observed) + self.n_new


def _check_k(k):
    if not (0.0 < k <= 1.0):
        raise DomainError(f"k must lie in (0, 1], got {k!r}")


def n_new(n_obs_effective: float, k: float) -> int:
    """Missing-record count, rounded to nearest with ties to even."""
    _check_k(k)
    if not n_obs_effective > 0:
        raise DomainError(f"n_obs_effective must be positive, got {n_obs_effective!r}")
    return int(round(n_obs_effective * (1.0 - k) / k))


def missingness_fraction(k: float) -> float:
    """Share of the population that goes unreported."""
    _check_k(k)
    return 1.0 - k


def impute_one(data: WeightedSample, p: ExpLogisticParams, rng: np.random.Generator,
               tol: float = DEFAULT_TOL, draw_id: int = AVERAGE_DRAW_ID) -> CompletedDataset:
    """Complete ``data`` under parameters ``p``.

    The observed count is the sum of weights, so survey-weighted data are
    completed to population scale.
    """
    if len(data) == 0:
        raise DataError("empty data")
    k = normalizer_k(p, tol)
    n = n_new(data.n_effective, k)
    return CompletedDataset(data, sample_missing(p, n, rng), p, k, int(draw_id))


def select_draws(n_draws: int, m: int) -> np.ndarray:
    """``m`` evenly spaced indices into ``n_draws`` stored draws."""
    if m < 1:
        raise DomainError("m must be at least 1")
    if n_draws < m:
        raise DomainError(f"asked for {m} replicas from {n_draws} draws")
    if m == 1:
        return np.array([(n_draws - 1) // 2])
    return np.floor(np.linspace(0, n_draws - 1, m) + 0.5).astype(int)


def impute_multiple(data: WeightedSample, draws: PosteriorDraws, m: int,
                    rng: np.random.Generator, tol: float = DEFAULT_TOL) -> list[CompletedDataset]:
    """One completed dataset per selected posterior draw.

    Replicas are generated in order from the one generator ``rng``.
    """
    idx = select_draws(len(draws), m)
    return [impute_one(data, draws.params(i), rng, tol, draw_id=int(i)) for i in idx]


def impute_average(data: WeightedSample, draws: PosteriorDraws, rng: np.random.Generator,
                   tol: float = DEFAULT_TOL) -> CompletedDataset:
    """Complete ``data`` at the posterior mean of (lam, mu_bias, sigma_bias)."""
    if draws is None or len(draws) == 0:
        raise DataError("no posterior draws")
    return impute_one(data, draws.mean_params(), rng, tol, draw_id=AVERAGE_DRAW_ID)


def write_completed_csv(path, ds: CompletedDataset):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["value", "weight", "origin", "draw_id"])
        for v, w in zip(ds.observed.values, ds.observed.weights):
            out.writerow([repr(float(v)), repr(float(w)), OBSERVED, ds.draw_id])
        for v in ds.imputed:
            out.writerow([repr(float(v)), "1.0", IMPUTED, ds.draw_id])


def manifest_lines(datasets: list[CompletedDataset], files: list[str]) -> list[str]:
    """Flat ``key=value`` lines describing each completed dataset."""
    lines = [f"n_datasets={len(datasets)}"]
    if datasets:
        lines.append(f"n_obs={len(datasets[0].observed)}")
        lines.append(f"n_obs_effective={datasets[0].observed.n_effective!r}")
    for i, (ds, f) in enumerate(zip(datasets, files)):
        pre = f"dataset.{i + 1}."
        lines += [
            f"{pre}file={f}",
            f"{pre}draw_id={ds.draw_id}",
            *(f"{pre}{name}={v!r}" for name, v in zip(PARAM_NAMES, ds.params_used.as_tuple())),
            f"{pre}k={ds.k_used!r}",
            f"{pre}missingness={missingness_fraction(ds.k_used)!r}",
            f"{pre}n_new={ds.n_new}",
        ]
    return lines


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    return out
