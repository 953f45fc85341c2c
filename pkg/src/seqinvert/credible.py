"""Credible balls centred at the posterior mean.

The ball ``{f : ||f - mean|| <= r}`` has posterior mass ``1 - gamma`` when
``r^2`` is the ``(1 - gamma)``-quantile of ``X = sum_k var_k Z_k^2`` with
``Z_k`` i.i.d. standard normal. The quantile is estimated by Monte Carlo,
which is dimension-robust; the error is reported alongside the radius.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .prior_posterior import Posterior, sample_normal_rows
from .svd_operators import DomainError, OperatorSpec, SignalCoefficients

#: Default Monte Carlo sample size for radii.
DEFAULT_MC_DRAWS = 100_000

# Each block of the radius Monte Carlo holds at most this many normals.
_BLOCK_ELEMENTS = 2_000_000


class QuantileMethod(str, enum.Enum):
    MONTE_CARLO = "MonteCarlo"
    SERIES_EXACT = "SeriesExact"


@dataclass(frozen=True)
class CredibleBall:
    gamma: float
    radius: float
    center: np.ndarray
    method: QuantileMethod = QuantileMethod.MONTE_CARLO
    mc_draws: int = 0
    # Standard error of the radius^2 estimate (0 for exact quantiles).
    quantile_se: float = 0.0

    def contains(self, coeffs) -> np.ndarray:
        """Membership of coefficient vectors (rows) of length ``n - 1``."""
        d = np.asarray(coeffs, dtype=float) - self.center
        return np.sum(d**2, axis=-1) <= self.radius**2


def weighted_chi2_draws(weights, mc_draws: int, seed: int, threads: int = 1) -> np.ndarray:
    """``mc_draws`` samples of ``sum_k weights_k Z_k^2``.

    Draws are generated in blocks; block ``b`` uses the substream
    ``default_rng([seed, b])`` so the result does not depend on ``threads``.
    """
    w = np.asarray(weights, dtype=float)
    w = w[w > 0]
    if w.size == 0:
        return np.zeros(mc_draws)
    rows = max(1, min(mc_draws, _BLOCK_ELEMENTS // w.size))
    starts = list(range(0, mc_draws, rows))

    def block(b: int) -> np.ndarray:
        m = min(rows, mc_draws - starts[b])
        z = np.random.default_rng([seed, b]).standard_normal((m, w.size))
        return (z * z) @ w

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(block, range(len(starts))))
    else:
        parts = [block(b) for b in range(len(starts))]
    return np.concatenate(parts)


def order_statistic_quantile(samples, level: float) -> tuple[float, float]:
    """Order statistic at ``ceil(level * m)`` and a binomial standard error for it."""
    x = np.sort(np.asarray(samples))
    m = x.size
    i = min(m, max(1, math.ceil(level * m))) - 1
    half = math.sqrt(m * level * (1.0 - level))
    lo = x[max(0, int(math.floor(i - half)))]
    hi = x[min(m - 1, int(math.ceil(i + half)))]
    return float(x[i]), float(hi - lo) / 2.0


def credible_radius(
    post: Posterior,
    gamma: float,
    mc_draws: int = DEFAULT_MC_DRAWS,
    seed: int = 0,
    method=QuantileMethod.MONTE_CARLO,
    threads: int = 1,
) -> CredibleBall:
    """Radius of the ``1 - gamma`` credible ball around the posterior mean.

    ``method="SeriesExact"`` is available when all nonzero posterior variances
    are equal, in which case ``X`` is a scaled chi-square variable.
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    method = QuantileMethod(method)
    var = post.variance
    if method is QuantileMethod.SERIES_EXACT:
        nz = var[var > 0]
        if nz.size and not np.allclose(nz, nz[0], rtol=1e-14, atol=0):
            raise ValueError("exact quantiles need equal nonzero posterior variances")
        r2 = float(nz[0] * stats.chi2.ppf(1.0 - gamma, nz.size)) if nz.size else 0.0
        return CredibleBall(gamma, math.sqrt(r2), post.mean, method)
    if mc_draws < 10_000:
        raise DomainError("mc_draws must be at least 10^4")
    x = weighted_chi2_draws(var, mc_draws, seed, threads)
    r2, se = order_statistic_quantile(x, 1.0 - gamma)
    return CredibleBall(gamma, math.sqrt(r2), post.mean, method, mc_draws, se)


def distance_to_truth(post: Posterior, truth: SignalCoefficients) -> float:
    """``||mean - f_0||`` with the truth's stored tail included."""
    m = post.mean.size
    head = truth.padded(m)
    return math.sqrt(float(np.sum((post.mean - head) ** 2) + np.sum(truth.coeffs[m:] ** 2)))


def covers(ball: CredibleBall, post: Posterior, truth: SignalCoefficients) -> bool:
    """Whether the closed ball contains the truth."""
    return distance_to_truth(post, truth) <= ball.radius


def _kept_indices(dist: np.ndarray, keep_fraction: float) -> np.ndarray:
    keep = math.floor(keep_fraction * dist.size + 1e-9)
    # Stable sort: equal distances keep draw order.
    return np.sort(np.argsort(dist, kind="stable")[:keep])


def band_draws(post: Posterior, count: int, keep_fraction: float, seed: int) -> np.ndarray:
    """The ``floor(keep_fraction * count)`` posterior draws closest to the mean.

    Draws come from :func:`~seqinvert.prior_posterior.posterior_sample` with
    the same seed; ties in distance are broken by draw index, and the kept
    draws are returned in draw order.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise DomainError("keep_fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    draws = sample_normal_rows(rng, post.mean, post.sd, count)
    dist = np.sum((draws - post.mean) ** 2, axis=1)
    return draws[_kept_indices(dist, keep_fraction)]


def evaluation_matrix(op: OperatorSpec, dim: int, x) -> np.ndarray:
    """``phi_k(x_j)`` as a ``(dim, len(x))`` matrix."""
    k = np.arange(1, dim + 1)
    return op.eigenbasis(k[:, None], np.asarray(x, dtype=float)[None, :])


def band_curves(
    post: Posterior,
    op: OperatorSpec,
    x,
    count: int,
    keep_fraction: float,
    seed: int,
    chunk: int = 50,
) -> np.ndarray:
    """Kept band draws evaluated in function space at ``x``.

    Equivalent to ``band_draws(...) @ evaluation_matrix(op, n - 1, x)`` but
    streams the draws so that memory stays bounded for large ``n``.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise DomainError("keep_fraction must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    basis = evaluation_matrix(op, post.mean.size, x)
    rng = np.random.default_rng(seed)
    dist = np.empty(count)
    curves = np.empty((count, x.size))
    for start in range(0, count, chunk):
        m = min(chunk, count - start)
        draws = sample_normal_rows(rng, post.mean, post.sd, m)
        dist[start : start + m] = np.sum((draws - post.mean) ** 2, axis=1)
        curves[start : start + m] = draws @ basis
    return curves[_kept_indices(dist, keep_fraction)]


def write_draws_csv(path, draws) -> None:
    """Coefficient matrix, one draw per row, columns ``f1..f{n-1}``."""
    draws = np.atleast_2d(draws)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{k}" for k in range(1, draws.shape[1] + 1)])
        for row in draws:
            w.writerow([repr(float(v)) for v in row])


def write_curves_csv(path, x, curves) -> None:
    """Long-format function values with header ``draw,x,value``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["draw", "x", "value"])
        for d, row in enumerate(np.atleast_2d(curves)):
            for xv, v in zip(x, row):
                w.writerow([d, repr(float(xv)), repr(float(v))])
