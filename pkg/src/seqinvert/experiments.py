"""Synthetic-data drivers: contraction rates, coverage and credible bands.

Random streams
--------------
All randomness is derived from the run seed through
``numpy.random.default_rng([seed, stream, n, index])`` where ``stream`` is
one of the ``STREAM_*`` constants below, ``n`` the sample size and ``index``
the replicate (or prior) index. Replicates therefore never share a stream and
results do not depend on how many worker threads were used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .credible import (
    DEFAULT_MC_DRAWS,
    band_curves,
    covers,
    credible_radius,
)
from .prior_posterior import (
    Posterior,
    PriorDecay,
    PriorSpec,
    posterior_risk,
    posterior_update,
    sample_normal_rows,
)
from .sequence_transform import (
    ConstraintError,
    DesignGrid,
    Observations,
    grid_for,
    measured_remainder,
    noise_coordinates,
    project,
    signal_on_grid,
)
from .svd_operators import OperatorSpec, Regime, SignalCoefficients

STREAM_DATA = 0
STREAM_RADIUS = 1
STREAM_BANDS = 2
STREAM_MASS = 3


def substream_seed(seed: int, stream: int, n: int, index: int) -> list[int]:
    return [int(seed), int(stream), int(n), int(index)]


@dataclass(frozen=True)
class ExperimentConfig:
    operator: OperatorSpec
    prior: PriorSpec
    truth: SignalCoefficients
    n_list: tuple[int, ...]
    replicates: int = 1
    gamma: float = 0.05
    seed: int = 0
    mc_draws: int = DEFAULT_MC_DRAWS
    noise_sd: float = 1.0
    # Prior regularities to sweep; empty means just ``prior.alpha``.
    alphas: tuple[float, ...] = ()
    grid_family: str | None = None
    band_count: int = 1000
    keep_fraction: float = 0.95
    x_points: int = 201
    threads: int = 1

    def __post_init__(self):
        n_list = tuple(int(n) for n in self.n_list)
        if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ValueError("n_list must be nonempty and strictly increasing")
        if min(n_list) < 2:
            raise ValueError("sample sizes must be >= 2")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        object.__setattr__(self, "n_list", n_list)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    @property
    def alpha_list(self) -> tuple[float, ...]:
        return self.alphas or (self.prior.alpha,)

    def grid(self, n: int) -> DesignGrid:
        if self.grid_family is None:
            return grid_for(self.operator, n)
        return DesignGrid(n, self.grid_family)

    def prior_for(self, n: int, alpha: float | None = None) -> PriorSpec:
        p = self.prior.with_truncation(n)
        return p if alpha is None else p.with_alpha(alpha)


def default_truth_length(op: OperatorSpec, n_max: int) -> int:
    """Stored truth length: ``16 n`` for mild operators, ``n + 64`` for extreme ones."""
    return 16 * n_max if op.regime is Regime.MILD else n_max + 64


# -- data ---------------------------------------------------------------------


def generate_observations(
    op: OperatorSpec,
    truth: SignalCoefficients,
    grid: DesignGrid,
    noise_sd: float = 1.0,
    seed=0,
    method: str = "naive",
) -> Observations:
    """Draw ``Y_i = Af(x_i) + noise_sd * xi_i``; the standardised noise is kept."""
    a = op.singular_values(np.arange(1, truth.K + 1))
    signal = signal_on_grid(op, a * truth.coeffs, grid, method)
    xi = np.random.default_rng(seed).standard_normal(grid.n)
    return Observations(grid, signal + noise_sd * xi, noise_sd, xi)


@dataclass(frozen=True)
class Decomposition:
    """Sequence data split into signal, aliasing remainder and noise."""

    u: np.ndarray
    signal: np.ndarray
    remainder: np.ndarray
    zeta: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.signal + self.remainder + self.zeta / math.sqrt(self.u.size + 1)


def decompose(op: OperatorSpec, truth: SignalCoefficients, obs: Observations, method: str = "naive") -> Decomposition:
    """Split ``U_k`` into ``a_k f_k``, ``R_k`` and ``zeta_k``, each recomputed independently."""
    if obs.xi is None:
        raise ValueError("decomposition needs observations with stored noise")
    n = obs.grid.n
    k = np.arange(1, n)
    data = project(op, obs, method)
    return Decomposition(
        u=data.u,
        signal=op.singular_values(k) * truth.padded(n - 1),
        remainder=measured_remainder(op, truth, obs.grid, k, method),
        zeta=obs.noise_sd * noise_coordinates(op, obs.grid, obs.xi, method),
    )


def fit_posterior(cfg: ExperimentConfig, n: int, seed, alpha: float | None = None) -> tuple[Observations, Posterior]:
    obs = generate_observations(cfg.operator, cfg.truth, cfg.grid(n), cfg.noise_sd, seed, "fast")
    data = project(cfg.operator, obs, "fast")
    return obs, posterior_update(cfg.prior_for(n, alpha), cfg.operator, data)


def _map(fn, items, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# -- rates --------------------------------------------------------------------


@dataclass(frozen=True)
class RatePrediction:
    """Contraction rate ``eps_n = eps_{n,1} v eps_{n,2}`` for a given setting.

    ``epsilon_exponent`` is the exponent for a constant scaling ``rho = 1``:
    a power of ``n`` in the mild regime and a power of ``log n`` in the
    extreme regime.
    """

    regime: Regime
    epsilon_exponent: float
    alpha: float
    beta: float
    p: float
    s: float
    decay: PriorDecay = PriorDecay.POLYNOMIAL

    def eps1(self, n, rho=1.0):
        n = np.asarray(n, dtype=float)
        t = rho**2 * n
        if self.decay is PriorDecay.EXPONENTIAL:
            return np.log(n) ** (-self.beta / self.s)
        if self.regime is Regime.MILD:
            return t ** -min(self.beta / (2 * self.alpha + 2 * self.p + 1), 1.0)
        return np.log(t) ** (-self.beta / self.s)

    def eps2(self, n, rho=1.0):
        n = np.asarray(n, dtype=float)
        t = rho**2 * n
        if self.decay is PriorDecay.EXPONENTIAL:
            return np.zeros_like(n)
        if self.regime is Regime.MILD:
            return rho * t ** (-self.alpha / (2 * self.alpha + 2 * self.p + 1))
        return rho * np.log(t) ** (-self.alpha / self.s)

    def epsilon(self, n, rho=1.0):
        return np.maximum(self.eps1(n, rho), self.eps2(n, rho))

    @property
    def risk_exponent(self) -> float:
        """Predicted slope of log risk; the risk scales like ``eps_n^2``."""
        return 2.0 * self.epsilon_exponent


def rate_prediction(op: OperatorSpec, prior: PriorSpec, truth_beta: float) -> RatePrediction:
    if op.regime is Regime.MILD and truth_beta + op.p <= 0.5:
        raise ConstraintError(
            f"beta + p = {truth_beta + op.p:g} must exceed 1/2 in the mildly ill-posed case"
        )
    a, b = prior.alpha, truth_beta
    if prior.decay is PriorDecay.EXPONENTIAL:
        exponent = -b / op.s
    elif op.regime is Regime.MILD:
        exponent = -min(a, b) / (2 * a + 2 * op.p + 1)
    else:
        exponent = -min(a, b) / op.s
    return RatePrediction(op.regime, exponent, a, b, op.p, op.s, prior.decay)


def optimal_scaling_exponent(op: OperatorSpec, alpha: float, beta: float) -> float:
    """Exponent ``e`` such that ``rho_n = n^e`` gives the minimax rate (mild case)."""
    return (alpha - beta) / (2 * beta + 2 * op.p + 1)


def fit_slope(n_values, risks, regime: Regime, burn_in: int = 1) -> float:
    """Least-squares slope of log risk on log n (mild) or log log n (extreme)."""
    n_values = np.asarray(n_values, dtype=float)[burn_in:]
    risks = np.asarray(risks, dtype=float)[burn_in:]
    if n_values.size < 2:
        return float("nan")
    x = np.log(n_values) if regime is Regime.MILD else np.log(np.log(n_values))
    return float(np.polyfit(x, np.log(risks), 1)[0])


# -- studies --------------------------------------------------------------------


@dataclass
class ContractionResult:
    alpha: float
    n: list[int]
    risk_mean: list[float]
    risk_sd: list[float]
    slope: float
    predicted_slope: float
    risks: list[list[float]] = field(repr=False, default_factory=list)

    @property
    def spearman(self) -> float:
        return float(stats.spearmanr(self.n, self.risk_mean).statistic)

    def rows(self):
        for n, m, s in zip(self.n, self.risk_mean, self.risk_sd):
            yield {"n": n, "risk_mean": m, "risk_sd": s, "slope": self.slope}


def contraction_study(cfg: ExperimentConfig, alpha: float | None = None) -> ContractionResult:
    """Average posterior risk over replicate datasets for every ``n``."""
    alpha = cfg.prior.alpha if alpha is None else alpha
    pred = rate_prediction(cfg.operator, cfg.prior.with_alpha(alpha), cfg.truth.beta)
    means, sds, all_risks = [], [], []
    for n in cfg.n_list:
        def one(r, n=n):
            _, post = fit_posterior(cfg, n, substream_seed(cfg.seed, STREAM_DATA, n, r), alpha)
            return posterior_risk(post, cfg.truth)

        risks = np.array(_map(one, range(cfg.replicates), cfg.threads))
        all_risks.append(risks.tolist())
        means.append(float(risks.mean()))
        sds.append(float(risks.std(ddof=1)) if risks.size > 1 else 0.0)
    slope = fit_slope(cfg.n_list, means, cfg.operator.regime, burn_in=1 if len(cfg.n_list) > 2 else 0)
    return ContractionResult(alpha, list(cfg.n_list), means, sds, slope, pred.risk_exponent, all_risks)


def posterior_mass_outside(post: Posterior, truth: SignalCoefficients, radius: float, draws: int, seed) -> float:
    """Monte Carlo estimate of ``Pi_n(||f - f_0|| >= radius | U)``."""
    m = post.mean.size
    head = truth.padded(m)
    tail2 = float(np.sum(truth.coeffs[m:] ** 2))
    rng = np.random.default_rng(seed)
    outside = 0
    chunk = max(1, 2_000_000 // m)
    for start in range(0, draws, chunk):
        f = sample_normal_rows(rng, post.mean, post.sd, min(chunk, draws - start))
        outside += int(np.sum(np.sum((f - head) ** 2, axis=1) + tail2 >= radius**2))
    return outside / draws


@dataclass
class CoverageResult:
    alpha: float
    n: list[int]
    coverage: list[float]
    radius_mean: list[float]
    quantile_se: list[float]

    def rows(self):
        for n, c, r in zip(self.n, self.coverage, self.radius_mean):
            yield {"n": n, "coverage": c, "radius_mean": r}


def coverage_study(cfg: ExperimentConfig, alpha: float | None = None) -> CoverageResult:
    """Empirical frequentist coverage of the credible ball for every ``n``.

    The posterior variances do not depend on the data, so the radius is
    computed once per ``n`` and shared by all replicates.
    """
    alpha = cfg.prior.alpha if alpha is None else alpha
    if cfg.operator.regime is Regime.MILD:
        rate_prediction(cfg.operator, cfg.prior.with_alpha(alpha), cfg.truth.beta)
    coverage, radii, ses = [], [], []
    for n in cfg.n_list:
        def one(r, n=n):
            _, post = fit_posterior(cfg, n, substream_seed(cfg.seed, STREAM_DATA, n, r), alpha)
            return post

        # The radius needs any posterior of this (n, prior); replicate 0 serves.
        first = one(0)
        ball = credible_radius(
            first,
            cfg.gamma,
            cfg.mc_draws,
            substream_seed(cfg.seed, STREAM_RADIUS, n, 0),
            threads=cfg.threads,
        )

        def hit(r, n=n):
            post = first if r == 0 else one(r)
            return covers(ball, post, cfg.truth)

        hits = _map(hit, range(cfg.replicates), cfg.threads)
        coverage.append(sum(hits) / len(hits))
        radii.append(ball.radius)
        ses.append(ball.quantile_se)
    return CoverageResult(alpha, list(cfg.n_list), coverage, radii, ses)


@dataclass
class BandTable:
    n: int
    alpha: float
    x: np.ndarray
    truth: np.ndarray
    mean: np.ndarray
    draws: np.ndarray  # (kept, len(x))

    @property
    def lower(self) -> np.ndarray:
        return self.draws.min(axis=0)

    @property
    def upper(self) -> np.ndarray:
        return self.draws.max(axis=0)

    @property
    def mean_width(self) -> float:
        return float(np.mean(self.upper - self.lower))

    @property
    def excluded_fraction(self) -> float:
        """Fraction of grid points where the truth lies strictly outside the band."""
        out = (self.truth < self.lower) | (self.truth > self.upper)
        return float(np.mean(out))


def band_replication(cfg: ExperimentConfig) -> dict[int, list[BandTable]]:
    """Posterior mean and closest-draw band on an ``x_points`` grid, per ``n`` and alpha.

    One dataset is drawn per ``n`` and shared by all priors.
    """
    op = cfg.operator
    x = np.linspace(0.0, 1.0, cfg.x_points)
    truth_values = cfg.truth.evaluate(op, x)
    out: dict[int, list[BandTable]] = {}
    for n in cfg.n_list:
        obs = generate_observations(
            op, cfg.truth, cfg.grid(n), cfg.noise_sd, substream_seed(cfg.seed, STREAM_DATA, n, 0), "fast"
        )
        data = project(op, obs, "fast")

        def table(i, n=n, data=data):
            alpha = cfg.alpha_list[i]
            post = posterior_update(cfg.prior_for(n, alpha), op, data)
            curves = band_curves(
                post, op, x, cfg.band_count, cfg.keep_fraction, substream_seed(cfg.seed, STREAM_BANDS, n, i)
            )
            mean = SignalCoefficients(post.mean).evaluate(op, x)
            return BandTable(n, alpha, x, truth_values, mean, curves)

        out[n] = _map(table, range(len(cfg.alpha_list)), cfg.threads)
    return out

