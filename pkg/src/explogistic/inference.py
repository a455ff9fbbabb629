"""Bayesian fitting of the exponential-logistic selection model.

Sampling happens on the unconstrained scale

    alpha = log(1 / lam),  mu_bias,  log_sigma_bias

(so the exponential mean is ``exp(alpha)``), with independent normal
priors on those three coordinates. The posterior is located with a
Nelder-Mead search and then explored by adaptive random-walk Metropolis.
Everything is gradient-free: the normalising constant comes out of a
quadrature routine and is not differentiated.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import optimize

from .data import WeightedSample
from .distributions import (
    DEFAULT_TOL,
    ExpLogisticParams,
    explogistic_unnorm_logpdf,
    log_normalizer_k,
)
from .errors import ConvergenceError, DataError, DomainError

PARAM_NAMES = ("lambda", "mu_bias", "sigma_bias")
RHAT_MAX = 1.01
ESS_MIN = 100.0


class ConvergenceWarning(UserWarning):
    """MCMC diagnostics exceed their thresholds."""


@dataclass(frozen=True)
class UnconstrainedParams:
    alpha: float
    mu_bias: float
    log_sigma_bias: float

    def to_params(self) -> ExpLogisticParams:
        return ExpLogisticParams(
            math.exp(-self.alpha), self.mu_bias, math.exp(self.log_sigma_bias))

    @classmethod
    def from_params(cls, p: ExpLogisticParams) -> "UnconstrainedParams":
        return cls(-math.log(p.lam), p.mu_bias, math.log(p.sigma_bias))

    @property
    def mean(self) -> float:
        """Mean of the population exponential, ``1 / lam``."""
        return math.exp(self.alpha)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.mu_bias, self.log_sigma_bias])

    @classmethod
    def from_array(cls, a) -> "UnconstrainedParams":
        a = [float(v) for v in a]
        return cls(*a)


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal priors on (alpha, mu_bias, log_sigma_bias)."""

    loc: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: tuple[float, float, float] = (5.0, 5.0, 1.0)

    def __post_init__(self):
        if len(self.loc) != 3 or len(self.scale) != 3:
            raise DomainError("priors need exactly three locations and scales")
        if not all(s > 0 and math.isfinite(s) for s in self.scale):
            raise DomainError(f"prior scales must be positive, got {self.scale}")

    @classmethod
    def default(cls) -> "PriorSpec":
        """N(0, 5), N(0, 5), N(0, 1): weakly informative, the default."""
        return cls((0.0, 0.0, 0.0), (5.0, 5.0, 1.0))

    @classmethod
    def vague(cls, scale: float = 10.0) -> "PriorSpec":
        return cls((0.0, 0.0, 0.0), (scale, scale, scale))


def log_prior(u: UnconstrainedParams, prior: PriorSpec) -> float:
    x = u.as_array()
    loc = np.asarray(prior.loc, dtype=float)
    scale = np.asarray(prior.scale, dtype=float)
    z = (x - loc) / scale
    return float(np.sum(-0.5 * np.log(2 * np.pi * scale**2) - 0.5 * z**2))


@lru_cache(maxsize=8192)
def _log_k(lam: float, mu: float, sigma: float, tol: float) -> float:
    return log_normalizer_k(ExpLogisticParams(lam, mu, sigma), tol)


def log_likelihood(data: WeightedSample, u: UnconstrainedParams, tol: float = DEFAULT_TOL) -> float:
    """Survey-weighted log-likelihood ``sum_i w_i log p(x_i)``.

    Sums are exactly rounded (``math.fsum``) so that integer weights and
    physically repeated records give the same number.
    """
    if len(data) == 0:
        raise DataError("empty data")
    p = u.to_params()
    log_k = _log_k(p.lam, p.mu_bias, p.sigma_bias, tol)
    terms = data.weights * explogistic_unnorm_logpdf(data.values, p)
    return math.fsum(terms) - data.n_effective * log_k


def log_posterior(data: WeightedSample, u: UnconstrainedParams, prior: PriorSpec,
                  tol: float = DEFAULT_TOL) -> float:
    return log_prior(u, prior) + log_likelihood(data, u, tol)


def _free_mask(fixed_bias):
    return np.array([True, fixed_bias is None, fixed_bias is None])


def _make_target(data, prior, tol, fixed_bias, likelihood=True):
    """Log posterior over the free coordinates; -inf where parameters are
    not representable (e.g. ``exp(alpha)`` overflow)."""
    base = np.zeros(3)
    if fixed_bias is not None:
        base[1] = fixed_bias[0]
        base[2] = math.log(fixed_bias[1])
    free = _free_mask(fixed_bias)

    def target(x_free):
        x = base.copy()
        x[free] = x_free
        if not np.all(np.isfinite(x)):
            return -np.inf
        try:
            u = UnconstrainedParams.from_array(x)
            if not likelihood:
                return log_prior(u, prior)
            return log_posterior(data, u, prior, tol)
        except (DomainError, OverflowError):
            return -np.inf

    return target, base, free


def _default_init(data: WeightedSample) -> UnconstrainedParams:
    w = data.weights / data.weights.sum()
    mean = float(np.dot(w, data.values))
    sd = math.sqrt(max(float(np.dot(w, (data.values - mean) ** 2)), 1e-12))
    order = np.argsort(data.values)
    cw = np.cumsum(w[order])
    q10 = float(data.values[order][min(np.searchsorted(cw, 0.1), len(cw) - 1)])
    return UnconstrainedParams(math.log(max(mean, 1e-6)), q10, math.log(max(0.25 * sd, 1e-3)))


def map_estimate(
    data: WeightedSample,
    prior: PriorSpec,
    init: UnconstrainedParams | None = None,
    tol: float = DEFAULT_TOL,
    *,
    fixed_bias: tuple[float, float] | None = None,
    likelihood: bool = True,
    max_iter: int = 2000,
) -> UnconstrainedParams:
    """Posterior mode by Nelder-Mead on the unconstrained scale.

    Stops once every simplex vertex lies within 1e-7 of the best one (well
    inside the 1e-6 diameter requirement) or after ``max_iter`` iterations.
    ``fixed_bias=(mu_bias, sigma_bias)`` holds the reporting curve fixed and
    optimises alpha alone. ``likelihood=False`` optimises the prior only.

    Raises
    ------
    ConvergenceError
        With the best point so far in ``.best``.
    """
    if likelihood and len(data) == 0:
        raise DataError("empty data")
    if init is None:
        init = _default_init(data) if likelihood else UnconstrainedParams(0.0, 0.0, 0.0)
    target, base, free = _make_target(data, prior, tol, fixed_bias, likelihood)
    x0 = init.as_array()[free]
    if not np.isfinite(target(x0)):
        raise DomainError(f"initial point {init} has zero posterior density")

    res = optimize.minimize(
        lambda x: -target(x), x0, method="Nelder-Mead",
        options={"maxiter": max_iter, "maxfev": 50 * max_iter,
                 "xatol": 1e-7, "fatol": np.inf})
    x = base.copy()
    x[free] = res.x
    best = UnconstrainedParams.from_array(x)
    if not res.success:
        raise ConvergenceError(f"Nelder-Mead did not converge: {res.message}", best)
    return best


def _hessian(f, x, h):
    d = x.size
    f0 = f(x)
    H = np.empty((d, d))
    E = np.diag(h)
    for i in range(d):
        H[i, i] = (f(x + E[i]) - 2 * f0 + f(x - E[i])) / h[i] ** 2
        for j in range(i):
            H[i, j] = H[j, i] = (
                f(x + E[i] + E[j]) - f(x + E[i] - E[j])
                - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h[i] * h[j])
    return H


def laplace_covariance(target, x: np.ndarray) -> np.ndarray:
    """Inverse negative Hessian of ``target`` at ``x``, by central differences.

    The step per coordinate is tuned to roughly 0.2 posterior standard
    deviations. Falls back to a diagonal (or 0.01 I) when the estimate is
    not positive definite.
    """
    d = x.size
    curv = -np.diag(_hessian(target, x, np.full(d, 1e-2)))
    good = np.isfinite(curv) & (curv > 0)
    h = np.where(good, 0.2 / np.sqrt(np.where(good, curv, 1.0)), 1e-2)
    h = np.clip(h, 1e-7, 0.1)
    H = _hessian(target, x, h)
    try:
        cov = np.linalg.inv(-H)
        np.linalg.cholesky(cov)
        if np.all(np.isfinite(cov)):
            return cov
    except np.linalg.LinAlgError:
        pass
    diag = -np.diag(H)
    if np.all(np.isfinite(diag)) and np.all(diag > 0):
        return np.diag(1.0 / diag)
    return 0.01 * np.eye(d)


# ---------------------------------------------------------------------------
# convergence statistics


def _split_chains(x: np.ndarray) -> np.ndarray:
    """(n_chains, n) -> (2 n_chains, n // 2), dropping a middle draw if odd."""
    n = x.shape[1] // 2
    return np.concatenate([x[:, :n], x[:, -n:]], axis=0) if n else x[:, :0]


def split_rhat(x: np.ndarray) -> float:
    """Split potential scale reduction factor for chains of shape (m, n)."""
    s = _split_chains(np.atleast_2d(np.asarray(x, dtype=float)))
    m, n = s.shape
    if n < 2:
        return float("nan")
    W = s.var(axis=1, ddof=1).mean()
    B = n * s.mean(axis=1).var(ddof=1)
    if W <= 0:
        return float("nan")
    var_plus = (n - 1) / n * W + B / n
    return float(math.sqrt(var_plus / W))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.size
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def effective_sample_size(x: np.ndarray) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence (split chains)."""
    s = _split_chains(np.atleast_2d(np.asarray(x, dtype=float)))
    m, n = s.shape
    if n < 4:
        return float("nan")
    acov = np.array([_autocov(c) for c in s])
    W = acov[:, 0].mean() * n / (n - 1)
    var_plus = W * (n - 1) / n
    if m > 1:
        var_plus += s.mean(axis=1).var(ddof=1)
    if not var_plus > 0:
        return float("nan")
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    tau = -1.0
    prev = np.inf
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    return float(m * n / max(tau, 1.0 / math.log10(max(m * n, 10))))


# ---------------------------------------------------------------------------
# posterior draws


@dataclass(eq=False)
class PosteriorDraws:
    """Constrained-scale draws ``(lam, mu_bias, sigma_bias)`` with chain labels.

    ``rhat`` and ``ess`` are computed from the draws when not supplied;
    chains of unequal length are truncated to the shortest for that purpose.
    """

    draws: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray | None = None
    accept_rate: np.ndarray | None = None
    rhat: np.ndarray = field(default=None)
    ess: np.ndarray = field(default=None)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float).reshape(-1, 3)
        self.chain = np.asarray(self.chain, dtype=int).reshape(-1)
        n = self.draws.shape[0]
        if n < 1:
            raise DataError("posterior needs at least one draw")
        if self.chain.size != n:
            raise DataError("chain labels do not match the number of draws")
        if self.iteration is None:
            self.iteration = np.zeros(n, dtype=int)
            for c in np.unique(self.chain):
                sel = self.chain == c
                self.iteration[sel] = np.arange(sel.sum())
        self.iteration = np.asarray(self.iteration, dtype=int)
        d = self.draws
        if not (np.all(np.isfinite(d)) and np.all(d[:, 0] > 0) and np.all(d[:, 2] > 0)):
            raise DataError("draws must be finite with lambda > 0 and sigma_bias > 0")
        if self.rhat is None or self.ess is None:
            by_chain = self._by_chain()
            self.rhat = np.array([split_rhat(by_chain[:, :, j]) for j in range(3)])
            self.ess = np.array([effective_sample_size(by_chain[:, :, j]) for j in range(3)])

    def _by_chain(self) -> np.ndarray:
        ids = np.unique(self.chain)
        n = min(int((self.chain == c).sum()) for c in ids)
        return np.stack([self.draws[self.chain == c][:n] for c in ids])

    def __len__(self):
        return self.draws.shape[0]

    @property
    def n_chains(self) -> int:
        return int(np.unique(self.chain).size)

    @property
    def unconstrained(self) -> np.ndarray:
        """Draws as (alpha, mu_bias, log_sigma_bias)."""
        d = self.draws
        return np.column_stack([-np.log(d[:, 0]), d[:, 1], np.log(d[:, 2])])

    def params(self, i: int) -> ExpLogisticParams:
        return ExpLogisticParams(*(float(v) for v in self.draws[i]))

    def mean_params(self) -> ExpLogisticParams:
        return ExpLogisticParams(*(float(v) for v in self.draws.mean(axis=0)))


def write_draws_csv(path, draws: PosteriorDraws):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["chain", "iter", *PARAM_NAMES])
        for c, it, row in zip(draws.chain, draws.iteration, draws.draws):
            out.writerow([int(c), int(it), *(repr(float(v)) for v in row)])


def read_draws_csv(path) -> PosteriorDraws:
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        need = ["chain", "iter", *PARAM_NAMES]
        missing = [c for c in need if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: draws file lacks column(s) {', '.join(missing)}")
        chain, it, rows = [], [], []
        for i, rec in enumerate(reader, start=1):
            try:
                chain.append(int(rec["chain"]))
                it.append(int(rec["iter"]))
                rows.append([float(rec[c]) for c in PARAM_NAMES])
            except (TypeError, ValueError):
                raise DataError(f"{path}: row {i} is malformed") from None
    if not rows:
        raise DataError(f"{path}: no draws")
    return PosteriorDraws(np.array(rows), np.array(chain), np.array(it))


# ---------------------------------------------------------------------------
# MCMC


@dataclass(frozen=True)
class McmcConfig:
    n_chains: int = 4
    n_warmup: int = 1000
    n_draws: int = 1000
    seed: int = 23
    tol: float = DEFAULT_TOL
    target_accept: float = 0.3
    # Hold (mu_bias, sigma_bias) fixed and sample alpha only.
    fixed_bias: tuple[float, float] | None = None


def _run_chain(target, x_map, cov0, rng, cfg: McmcConfig):
    d = x_map.size
    L = np.linalg.cholesky(cov0)
    for _ in range(100):
        x = x_map + L @ rng.standard_normal(d)
        lp = target(x)
        if np.isfinite(lp):
            break
    else:
        x, lp = x_map.copy(), target(x_map)

    log_scale = math.log(2.38**2 / d)
    history = np.empty((cfg.n_warmup, d))
    for t in range(cfg.n_warmup):
        prop = x + math.exp(0.5 * log_scale) * (L @ rng.standard_normal(d))
        lp_prop = target(prop)
        log_a = min(0.0, lp_prop - lp) if np.isfinite(lp_prop) else -np.inf
        if math.log(rng.random()) < log_a:
            x, lp = prop, lp_prop
        log_scale += (math.exp(log_a) - cfg.target_accept) / (t + 1) ** 0.6
        history[t] = x
        n_seen = t + 1
        if n_seen >= 200 and n_seen % 50 == 0 and n_seen <= 0.9 * cfg.n_warmup:
            window = history[n_seen // 2:n_seen]
            emp = np.atleast_2d(np.cov(window, rowvar=False))
            emp += 1e-12 * max(np.trace(emp), 1e-300) * np.eye(d)
            try:
                L = np.linalg.cholesky(emp)
            except np.linalg.LinAlgError:
                pass

    out = np.empty((cfg.n_draws, d))
    accepted = 0
    step = math.exp(0.5 * log_scale)
    for t in range(cfg.n_draws):
        prop = x + step * (L @ rng.standard_normal(d))
        lp_prop = target(prop)
        log_a = min(0.0, lp_prop - lp) if np.isfinite(lp_prop) else -np.inf
        if math.log(rng.random()) < log_a:
            x, lp = prop, lp_prop
            accepted += 1
        out[t] = x
    return out, accepted / cfg.n_draws


def mcmc_fit(
    data: WeightedSample,
    prior: PriorSpec,
    config: McmcConfig = McmcConfig(),
    init: UnconstrainedParams | None = None,
) -> PosteriorDraws:
    """Adaptive random-walk Metropolis over the unconstrained parameters.

    Chains start from the posterior mode jittered by its Laplace covariance.
    During warmup the proposal scale follows a Robbins-Monro recursion
    toward ``config.target_accept`` and the proposal covariance is
    re-estimated every 50 iterations from the second half of the warmup
    history; both are frozen for the sampling phase. Chain ``c`` uses the
    generator ``default_rng([seed, c])``, so results depend only on
    (data, prior, config).

    Emits :class:`ConvergenceWarning` when any split R-hat exceeds 1.01 or
    any ESS falls below 100.
    """
    if config.n_chains < 2:
        raise DomainError("need at least two chains")
    if config.n_draws < 1 or config.n_warmup < 0:
        raise DomainError("need n_draws >= 1 and n_warmup >= 0")
    if len(data) == 0:
        raise DataError("empty data")

    try:
        mode = map_estimate(data, prior, init, config.tol, fixed_bias=config.fixed_bias)
    except ConvergenceError as exc:
        warnings.warn(f"starting chains from unconverged mode: {exc}", ConvergenceWarning)
        mode = exc.best
    target, base, free = _make_target(data, prior, config.tol, config.fixed_bias)
    x_map = mode.as_array()[free]
    cov0 = laplace_covariance(target, x_map)

    chains, chain_ids, iters, rates = [], [], [], []
    for c in range(config.n_chains):
        rng = np.random.default_rng([config.seed, c])
        out, rate = _run_chain(target, x_map, cov0, rng, config)
        full = np.tile(base, (out.shape[0], 1))
        full[:, free] = out
        chains.append(full)
        chain_ids.append(np.full(out.shape[0], c))
        iters.append(np.arange(out.shape[0]))
        rates.append(rate)

    u = np.concatenate(chains)
    constrained = np.column_stack([np.exp(-u[:, 0]), u[:, 1], np.exp(u[:, 2])])
    post = PosteriorDraws(constrained, np.concatenate(chain_ids),
                          np.concatenate(iters), np.array(rates))
    if config.fixed_bias is not None:
        checked = [0]
    else:
        checked = [0, 1, 2]
    bad = [PARAM_NAMES[j] for j in checked
           if not (post.rhat[j] <= RHAT_MAX and post.ess[j] >= ESS_MIN)]
    if bad:
        warnings.warn(
            "poor convergence for " + ", ".join(
                f"{PARAM_NAMES[j]} (R-hat {post.rhat[j]:.3f}, ESS {post.ess[j]:.0f})"
                for j in checked if PARAM_NAMES[j] in bad),
            ConvergenceWarning)
    return post


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class SummaryRow:
    parameter: str
    median: float
    q025: float
    q975: float
    mean: float
    rhat: float
    ess: float


SUMMARY_COLUMNS = ("parameter", "median", "q2.5", "q97.5", "mean", "rhat", "ess")


def summarize(draws: PosteriorDraws) -> list[SummaryRow]:
    """Median, 95% percentile interval and mean of each constrained parameter.

    Percentiles interpolate linearly between order statistics: the q-th
    percentile of n sorted values sits at position ``q/100 * (n - 1)``.
    """
    rows = []
    for j, name in enumerate(PARAM_NAMES):
        col = draws.draws[:, j]
        q025, med, q975 = np.percentile(col, [2.5, 50.0, 97.5], method="linear")
        rows.append(SummaryRow(name, float(med), float(q025), float(q975),
                               float(col.mean()), float(draws.rhat[j]), float(draws.ess[j])))
    return rows


def write_summary_csv(path, rows: list[SummaryRow]):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_COLUMNS)
        for r in rows:
            out.writerow([r.parameter, *(repr(v) for v in
                          (r.median, r.q025, r.q975, r.mean, r.rhat, r.ess))])
