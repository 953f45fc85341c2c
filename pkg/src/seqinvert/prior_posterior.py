"""Truncated Gaussian series prior and its conjugate posterior.

The prior puts independent ``N(0, lambda_k)`` laws on the first
``truncation - 1`` eigenbasis coefficients and a point mass at zero on the
rest. Combined with sequence data ``U_k ~ N(a_k f_k, 1/n)`` the posterior is
again a product of normals with

    b_k       = n a_k lambda_k / (n a_k^2 lambda_k + 1)
    mean_k    = b_k U_k
    var_k     = lambda_k / (n a_k^2 lambda_k + 1)
    tau_k     = b_k / sqrt(n)      (sd of mean_k under the data law)
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .svd_operators import DomainError, OperatorSpec, SignalCoefficients
from .sequence_transform import SequenceData


class PriorDecay(str, enum.Enum):
    POLYNOMIAL = "Polynomial"
    EXPONENTIAL = "Exponential"


@dataclass(frozen=True)
class PriorSpec:
    """Prior variances ``rho^2 k^(-1-2 alpha)`` or ``exp(-alpha k^s)``, zero from ``truncation`` on."""

    decay: PriorDecay
    alpha: float
    rho: float = 1.0
    s: float = 1.0
    truncation: int = 2

    def __post_init__(self):
        object.__setattr__(self, "decay", PriorDecay(self.decay))
        if not self.alpha > 0:
            raise DomainError(f"prior regularity alpha must be positive, got {self.alpha}")
        if not self.rho > 0:
            raise DomainError(f"prior scaling rho must be positive, got {self.rho}")
        if self.s < 1:
            raise DomainError(f"prior shape s must be >= 1, got {self.s}")
        if int(self.truncation) != self.truncation or self.truncation < 2:
            raise DomainError(f"truncation must be an integer >= 2, got {self.truncation}")
        if self.decay is PriorDecay.EXPONENTIAL and self.rho != 1.0:
            raise DomainError("the exponential prior has no scaling; rho must be 1")

    def variances(self, k) -> np.ndarray:
        """``lambda_k`` for an integer array ``k >= 1``."""
        k = np.asarray(k)
        if np.any(k < 1):
            raise DomainError("prior index k must be >= 1")
        kf = k.astype(float)
        if self.decay is PriorDecay.POLYNOMIAL:
            lam = self.rho**2 * kf ** (-1.0 - 2.0 * self.alpha)
        else:
            lam = np.exp(-self.alpha * kf**self.s)
        return np.where(k < self.truncation, lam, 0.0)

    def variance(self, k: int) -> float:
        return float(self.variances(k))

    def with_truncation(self, truncation: int) -> "PriorSpec":
        return replace(self, truncation=truncation)

    def with_alpha(self, alpha: float) -> "PriorSpec":
        return replace(self, alpha=alpha)


def make_prior(decay, alpha: float, rho: float = 1.0, s: float = 1.0, truncation: int = 2) -> PriorSpec:
    return PriorSpec(PriorDecay(decay), alpha, rho, s, truncation)


@dataclass(frozen=True)
class Posterior:
    """Coordinatewise Gaussian posterior on ``f_1..f_{n-1}``; later coordinates are 0."""

    mean: np.ndarray
    variance: np.ndarray
    shrinkage: np.ndarray
    tau: np.ndarray

    @property
    def n(self) -> int:
        return self.mean.size + 1

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "mean", "variance"])
            for k, (m, v) in enumerate(zip(self.mean, self.variance), start=1):
                w.writerow([k, repr(float(m)), repr(float(v))])


def posterior_from_arrays(a, lam, u, n: int) -> Posterior:
    """Conjugate update from raw singular values, prior variances and data."""
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    u = np.asarray(u, dtype=float)
    denom = n * a**2 * lam + 1.0
    b = n * a * lam / denom
    return Posterior(
        mean=b * u,
        variance=lam / denom,
        shrinkage=b,
        tau=b / math.sqrt(n),
    )


def posterior_update(prior: PriorSpec, op: OperatorSpec, data: SequenceData) -> Posterior:
    """Exact posterior of the truncated series prior given ``U_1..U_{n-1}``."""
    if prior.truncation != data.n:
        raise ValueError(
            f"prior truncation {prior.truncation} must equal the sample size {data.n}"
        )
    k = np.arange(1, data.n)
    return posterior_from_arrays(op.singular_values(k), prior.variances(k), data.u, data.n)


def sample_normal_rows(rng: np.random.Generator, mean, sd, count: int) -> np.ndarray:
    return mean + sd * rng.standard_normal((count, mean.size))


def posterior_sample(post: Posterior, count: int, seed: int) -> np.ndarray:
    """``count`` independent posterior draws as rows of a ``(count, n-1)`` array.

    Draws use ``numpy.random.default_rng(seed)`` and are filled row by row,
    so the same ``(seed, count, n)`` always produces identical bytes, and the
    first ``m`` rows do not depend on ``count``.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return sample_normal_rows(rng, post.mean, post.sd, count)


def squared_error(post: Posterior, truth: SignalCoefficients) -> float:
    """``||mean - f_0||^2`` including the truth's stored tail beyond ``n - 1``."""
    m = post.mean.size
    head = truth.padded(m)
    tail = truth.coeffs[m:]
    return float(np.sum((post.mean - head) ** 2) + np.sum(tail**2))


def posterior_risk(post: Posterior, truth: SignalCoefficients) -> float:
    """Posterior second moment about the truth, ``||mean - f_0||^2 + sum var_k``."""
    return squared_error(post, truth) + float(np.sum(post.variance))
