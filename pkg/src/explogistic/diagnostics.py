"""Posterior predictive curves, weighted histograms and the KS distance.

Outputs are plain row tables, ready for any plotting tool.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .data import WeightedSample
from .distributions import DEFAULT_TOL, explogistic_logpdf, exp_logpdf, logistic_logcdf
from .errors import DataError, DomainError
from .inference import PosteriorDraws
from .imputation import select_draws

DEFAULT_GRID_POINTS = 512


@dataclass(frozen=True)
class CurveRow:
    draw_id: int
    x: float
    explogistic_pdf: float
    exponential_pdf: float
    logistic_cdf: float


@dataclass(frozen=True)
class HistogramRow:
    bin_left: float
    bin_right: float
    weighted_density: float


def default_grid(draws: PosteriorDraws, n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Even grid from 0 to the 99.9% quantile of Exp(median lambda)."""
    lam = float(np.median(draws.draws[:, 0]))
    return np.linspace(0.0, -math.log(1e-3) / lam, n_points)


def ppc_curves(draws: PosteriorDraws, n_curves: int, x_grid=None,
               tol: float = DEFAULT_TOL) -> list[CurveRow]:
    """Model curves for ``n_curves`` evenly spaced posterior draws.

    Each row gives, at one grid point, the fitted exponential-logistic
    density, the population exponential density and the reporting curve.
    """
    if not 1 <= n_curves <= len(draws):
        raise DomainError(f"n_curves must lie in [1, {len(draws)}], got {n_curves}")
    grid = default_grid(draws) if x_grid is None else np.asarray(x_grid, dtype=float)
    rows = []
    for i in select_draws(len(draws), n_curves):
        p = draws.params(i)
        f = np.exp(explogistic_logpdf(grid, p, tol))
        g = np.exp(exp_logpdf(grid, p.lam))
        h = np.exp(logistic_logcdf(grid, p.mu_bias, p.sigma_bias))
        rows += [CurveRow(int(i), float(x), float(a), float(b), float(c))
                 for x, a, b, c in zip(grid, f, g, h)]
    return rows


def weighted_histogram(data: WeightedSample, bin_width: float) -> list[HistogramRow]:
    """Weighted density histogram on bins ``[j w, (j+1) w)`` anchored at 0.

    Covers every bin from the one holding the smallest value to the one
    holding the largest; the densities integrate to 1.
    """
    if not bin_width > 0:
        raise DomainError("bin_width must be positive")
    if len(data) == 0:
        raise DataError("empty data")
    idx = np.floor(data.values / bin_width).astype(np.int64)
    lo = int(idx.min())
    sums = np.bincount(idx - lo, weights=data.weights)
    dens = sums / (sums.sum() * bin_width)
    return [HistogramRow((lo + j) * bin_width, (lo + j + 1) * bin_width, float(d))
            for j, d in enumerate(dens)]


def ks_statistic(sample, lam: float) -> float:
    """Sup distance between the right-continuous empirical CDF and Exp(lam)."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise DataError("empty sample")
    cdf = -np.expm1(-lam * np.clip(x, 0.0, None))
    d_plus = np.max(np.arange(1, n + 1) / n - cdf)
    d_minus = np.max(cdf - np.arange(n) / n)
    return float(min(max(d_plus, d_minus), 1.0))


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value ``c(alpha) / sqrt(n)``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    return c / math.sqrt(n)


def write_rows_csv(path, rows, row_type):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([f.name for f in fields(row_type)])
        for r in rows:
            out.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in astuple(r)])
