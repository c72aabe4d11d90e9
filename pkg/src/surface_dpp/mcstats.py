"""Monte Carlo estimators for linear statistics: tails, CLT, MGF bridge.

The Toeplitz determinant is the ground truth for every moment quantity;
simulation results are compared against it within statistical error.  The
deterministic concentration bound used for tails is

    P(|sum phi / N - mean| > lam) <= 2 exp(-N^2 lam^2 (1 + (1-g)/N) / (2 ||d phi||^2)),

the Markov/Chernoff consequence of the quadratic log-MGF domination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .sampling import SampleBatch
from .toeplitz import TestFunction


def linear_statistic(config, phi: TestFunction) -> float:
    """sum_i phi(x_i) over the configuration."""
    vals = phi.values_chart(config.points, config.model.volume)
    return float(np.sum(np.real(vals)))


def batch_statistics(batch: SampleBatch, phi: TestFunction) -> np.ndarray:
    return batch.statistic(lambda c: linear_statistic(c, phi))


@dataclass
class TailEstimate:
    lam: float
    n_points: int
    n_replicas: int
    fraction: float
    ci99_low: float
    ci99_high: float


def empirical_tail(batch: SampleBatch, phi: TestFunction, lam: float,
                   mean: float = 0.0) -> TailEstimate:
    """Fraction of replicas with |sum phi / N - mean| > lam, with exact
    99% binomial confidence bounds."""
    vals = batch_statistics(batch, phi)
    N = batch.configurations[0].n
    hits = int(np.count_nonzero(np.abs(vals / N - mean) > lam))
    M = len(vals)
    ci = stats.binomtest(hits, M).proportion_ci(confidence_level=0.99, method="exact")
    return TailEstimate(lam, N, M, hits / M, float(ci.low), float(ci.high))


def concentration_bound(N: int, lam: float, dirichlet_sq: float, genus: int = 0) -> float:
    """Chernoff-side tail bound from the quadratic log-MGF domination."""
    if dirichlet_sq <= 0:
        return 0.0 if lam > 0 else 1.0
    expo = N * N * lam * lam * (1.0 + (1.0 - genus) / N) / (2.0 * dirichlet_sq)
    return 2.0 * math.exp(-expo)


def tail_not_exceeding(est: TailEstimate, bound: float) -> bool:
    """One-sided check at the 99% level: is the empirical fraction
    statistically compatible with being <= bound?"""
    if est.fraction <= bound:
        return True
    M, hits = est.n_replicas, round(est.fraction * est.n_replicas)
    p_above = stats.binom.sf(hits - 1, M, min(bound, 1.0))
    return p_above >= 0.01


@dataclass
class CltReport:
    n_points: int
    n_replicas: int
    empirical_mean: float
    empirical_variance: float
    variance_exact: float
    dirichlet_sq: float
    ks_statistic: float
    ks_pvalue: float
    skewness: float
    excess_kurtosis: float
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def clt_check(batch: SampleBatch, phi: TestFunction, variance_exact: float,
              dirichlet_sq: float, centering: float = 0.0) -> CltReport:
    """Fluctuation normality report against Normal(0, variance_exact).

    ``centering`` is the per-point process mean E phi(x_i); on the sphere
    it equals the area average of phi.
    """
    vals = batch_statistics(batch, phi)
    N = batch.configurations[0].n
    fluct = vals - N * centering
    if variance_exact <= 0:
        return CltReport(N, len(vals), float(fluct.mean()), float(fluct.var(ddof=1)),
                         variance_exact, dirichlet_sq, math.nan, math.nan,
                         math.nan, math.nan, degenerate=True)
    ks = stats.kstest(fluct, stats.norm(loc=0.0, scale=math.sqrt(variance_exact)).cdf)
    return CltReport(
        n_points=N,
        n_replicas=len(vals),
        empirical_mean=float(fluct.mean()),
        empirical_variance=float(fluct.var(ddof=1)),
        variance_exact=variance_exact,
        dirichlet_sq=dirichlet_sq,
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        skewness=float(stats.skew(fluct)),
        excess_kurtosis=float(stats.kurtosis(fluct)),
    )


@dataclass
class MgfRow:
    t: float
    empirical: float
    std_error: float
    determinant: float
    z_score: float


def mgf_cross_check(batch: SampleBatch, phi: TestFunction, t_grid,
                    logdet_fn) -> list[MgfRow]:
    """Empirical log E exp(-t sum phi) against the determinant oracle.

    ``logdet_fn(t)`` must return log det T[exp(-t phi)].  The standard
    error of the log-mean is the delta-method estimate; rows report the
    discrepancy in units of that error.
    """
    vals = batch_statistics(batch, phi)
    M = len(vals)
    rows = []
    for t in t_grid:
        x = -t * vals
        shift = x.max()
        mean = np.exp(x - shift).mean()
        emp = shift + math.log(mean)
        se = float(np.exp(x - shift).std(ddof=1) / (mean * math.sqrt(M)))
        oracle = float(logdet_fn(t))
        z = 0.0 if se == 0 else (emp - oracle) / se
        rows.append(MgfRow(float(t), float(emp), se, oracle, float(z)))
    return rows
