"""End-to-end acceptance checks, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""

import csv
import time

import numpy as np
import pytest

from seqinvert.cli import EXIT_OK, main
from seqinvert.config import apply_overrides, build_config, load_preset
from seqinvert.credible import credible_radius
from seqinvert.experiments import (
    contraction_study,
    coverage_study,
    decompose,
    default_truth_length,
    fit_slope,
    generate_observations,
)
from seqinvert.prior_posterior import make_prior, posterior_from_arrays, posterior_sample, posterior_update
from seqinvert.sequence_transform import (
    Observations,
    discrete_gram,
    grid_for,
    measured_remainder,
    orthogonality_defect,
    project,
    remainder_bound,
)
from seqinvert.svd_operators import OperatorSpec, Regime, SignalCoefficients, catalog_signal, sobolev_norm

VOLTERRA = OperatorSpec.volterra()
HEAT = OperatorSpec.heat(0.02)
MIXED_OPERATORS = [
    VOLTERRA,
    HEAT,
    OperatorSpec.mild(0.7),
    OperatorSpec.mild(2.0),
    OperatorSpec.extreme(0.3, 1.0),
    OperatorSpec.extreme(0.05, 2.0),
]


def preset_config(name, *overrides, seed=0):
    return build_config(apply_overrides(load_preset(name), list(overrides)), seed=seed)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_discrete_orthogonality(acceptance_report):
    t0 = time.perf_counter()
    worst = 0.0
    for op in (HEAT, VOLTERRA):
        for n in (8, 64, 256, 1024):
            worst = max(worst, orthogonality_defect(op, grid_for(op, n)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5.0
    acceptance_report("1 discrete orthogonality", ok, f"max defect {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-12
    assert elapsed < 5.0


def test_aliasing(acceptance_report):
    n = 64
    grid = grid_for(HEAT, n)
    ks = np.arange(1, n)
    failures = 0
    for block in (1, 2, 3):
        js = np.arange(block * n, (block + 1) * n)
        g = np.abs(discrete_gram(HEAT, grid, js, ks))
        ones = np.abs(g - 1.0) <= 1e-12
        zeros = g <= 1e-12
        failures += int(np.sum(ones.sum(axis=0) != 1))
        failures += int(np.sum(~(ones | zeros)))
    acceptance_report("2 aliasing", failures == 0, f"n={n}, {failures} violating entries")
    assert failures == 0


def _brute_posterior(op, lam, y, grid):
    n = grid.n
    k = np.arange(1, n)
    phi = op.conjugate_basis(k[None, :], grid.points[:, None]) * op.singular_values(k)[None, :]
    Lam = np.diag(lam)
    gain = np.linalg.solve(phi @ Lam @ phi.T + np.eye(n), phi @ Lam).T
    return gain @ y, Lam - gain @ phi @ Lam


def test_conjugacy_oracle(acceptance_report):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = (4, 8)[seed % 2]
        op = MIXED_OPERATORS[seed % len(MIXED_OPERATORS)]
        if seed % 3 == 0:
            prior = make_prior("Exponential", rng.uniform(0.1, 2.0), s=rng.uniform(1.0, 2.0), truncation=n)
        else:
            prior = make_prior("Polynomial", rng.uniform(0.2, 4.0), rng.uniform(0.5, 3.0), truncation=n)
        grid = grid_for(op, n)
        y = rng.normal(size=n) * rng.uniform(0.1, 5.0)
        post = posterior_update(prior, op, project(op, Observations(grid, y)))
        k = np.arange(1, n)
        mean, cov = _brute_posterior(op, prior.variances(k), y, grid)
        worst = max(
            worst,
            np.max(np.abs(post.mean - mean)),
            np.max(np.abs(post.variance - np.diag(cov))),
            np.max(np.abs(cov - np.diag(np.diag(cov)))),
        )
    ok = worst <= 1e-10
    acceptance_report("3 conjugacy oracle", ok, f"max deviation {worst:.2e} over 100 seeds")
    assert ok


def test_remainder_control(acceptance_report):
    truth = catalog_signal("VolterraTruth", 16384)
    norm = sobolev_norm(truth, 1.0)
    scaled, ratios = [], []
    for n in (64, 256, 1024):
        r = measured_remainder(VOLTERRA, truth, grid_for(VOLTERRA, n), np.arange(1, n), "fast")
        sup = float(np.max(r**2))
        scaled.append(n * sup)
        ratios.append(sup / remainder_bound(VOLTERRA, 1.0, norm, n))
    mild_ok = all(a > b for a, b in zip(scaled, scaled[1:])) and max(ratios) <= 1.0

    heat_truth = catalog_signal("HeatTruth", 96)
    r = measured_remainder(HEAT, heat_truth, grid_for(HEAT, 32), np.arange(1, 32))
    heat_sup = float(np.max(r**2))
    heat_bound = remainder_bound(HEAT, heat_truth.beta, sobolev_norm(heat_truth, heat_truth.beta), 32)
    heat_ok = heat_sup <= heat_bound

    detail = (
        f"sup n*R^2 {', '.join(f'{v:.3e}' for v in scaled)}; max sup/bound {max(ratios):.2e}; "
        f"heat sup R^2 {heat_sup:.2e} <= {heat_bound:.2e}"
    )
    acceptance_report("4 remainder control", mild_ok and heat_ok, detail)
    assert mild_ok
    assert heat_ok


def test_contraction_slope_mild(acceptance_report):
    cfg = preset_config("thm1_rate")
    assert cfg.n_list == tuple(2**e for e in range(7, 15)) and cfg.replicates == 50
    t0 = time.perf_counter()
    res = contraction_study(cfg)
    elapsed = time.perf_counter() - t0
    ok = abs(res.slope - (-0.4)) <= 0.15
    acceptance_report(
        "5 contraction slope (mild)",
        ok,
        f"slope {res.slope:.3f} vs predicted {res.predicted_slope:.3f}, {elapsed:.1f}s (target < 300s)",
    )
    assert ok


def test_contraction_extreme(acceptance_report):
    cfg = preset_config("thm2_rate")
    assert cfg.n_list == tuple(2**e for e in range(7, 14))
    assert cfg.prior.alpha == 2.0
    res = contraction_study(cfg)
    slope = fit_slope(cfg.n_list, res.risk_mean, Regime.EXTREME, burn_in=0)
    ok = res.spearman <= -0.9 and slope < 0
    acceptance_report("6 contraction (extreme)", ok, f"spearman {res.spearman:.3f}, slope vs log log n {slope:.3f}")
    assert ok


def test_coverage_regimes(acceptance_report):
    cfg = preset_config("thm3_coverage")
    assert cfg.n_list == (5000,) and cfg.replicates == 200 and cfg.gamma == 0.05
    t0 = time.perf_counter()
    under = coverage_study(cfg, 0.4).coverage[0]
    over = coverage_study(cfg, 5.0).coverage[0]
    elapsed = time.perf_counter() - t0
    ok = under >= 0.95 and over <= 0.5
    acceptance_report(
        "7 coverage regimes",
        ok,
        f"alpha=0.4: {under:.3f} (>= 0.95), alpha=5: {over:.3f} (<= 0.5), {elapsed:.1f}s (target < 600s)",
    )
    assert ok


def test_radius_calibration(acceptance_report):
    fractions = []
    for i in range(20):
        rng = np.random.default_rng([77, i])
        n = int(rng.integers(16, 400))
        op = MIXED_OPERATORS[i % len(MIXED_OPERATORS)]
        k = np.arange(1, n)
        prior = make_prior("Polynomial", rng.uniform(0.3, 3.0), rng.uniform(0.5, 2.0), truncation=n)
        post = posterior_from_arrays(op.singular_values(k), prior.variances(k), rng.normal(size=n - 1), n)
        ball = credible_radius(post, 0.05, seed=[78, i])
        fresh = posterior_sample(post, 10_000, [79, i])
        fractions.append(float(np.mean(ball.contains(fresh))))
    worst = max(abs(f - 0.95) for f in fractions)
    ok = worst <= 0.01
    acceptance_report(
        "8 credible-radius calibration",
        ok,
        f"inside fractions {min(fractions):.4f}..{max(fractions):.4f} over 20 posteriors",
    )
    assert ok


def test_pipeline_identity(acceptance_report):
    n = 256
    worst_u = worst_mean = 0.0
    for run in range(50):
        op = MIXED_OPERATORS[run % len(MIXED_OPERATORS)]
        rng = np.random.default_rng([5, run])
        length = default_truth_length(op, n)
        truth = SignalCoefficients(rng.normal(size=length) / np.arange(1, length + 1) ** 1.5)
        obs = generate_observations(op, truth, grid_for(op, n), rng.uniform(0.2, 2.0), [6, run])
        d = decompose(op, truth, obs)
        worst_u = max(worst_u, float(np.max(np.abs(d.u - d.reconstruct()))))

        prior = make_prior("Polynomial", rng.uniform(0.5, 3.0), truncation=n)
        post = posterior_update(prior, op, project(op, obs, "fast"))
        expected_mean = post.shrinkage * (d.signal + d.remainder)
        worst_mean = max(worst_mean, float(np.max(np.abs(post.mean - expected_mean - post.tau * d.zeta))))
    ok = worst_u <= 1e-10 and worst_mean <= 1e-10
    acceptance_report("9 pipeline identity", ok, f"U residual {worst_u:.2e}, mean residual {worst_mean:.2e}")
    assert ok


DETERMINISM_RUNS = {
    "contraction": ("thm2_rate", ["n_list=[64,128,256]", "replicates=4"]),
    "coverage": ("thm4_coverage", ["n_list=[64,128]", "replicates=5", "mc_draws=10000"]),
    "bands": ("figure1", ["n_list=[100,400]", "bands.count=40", "bands.x_points=21"]),
    "validate": ("thm1_rate", ["experiment=\"validate\""]),
}


def _run_cli(preset, sets, out, threads):
    args = ["--preset", preset, "--out", str(out), "--seed", "13", "--threads", str(threads)]
    for item in sets:
        args += ["--set", item]
    assert main(args) == EXIT_OK
    return {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}


def test_determinism(acceptance_report, tmp_path):
    mismatched = []
    for name, (preset, sets) in DETERMINISM_RUNS.items():
        first = _run_cli(preset, sets, tmp_path / name / "a", 1)
        again = _run_cli(preset, sets, tmp_path / name / "b", 1)
        threaded = _run_cli(preset, sets, tmp_path / name / "c", 8)
        if not first or first != again or first != threaded:
            mismatched.append(name)
    ok = not mismatched
    acceptance_report(
        "10 determinism",
        ok,
        f"byte-identical CSVs for {', '.join(DETERMINISM_RUNS)} (rerun and threads 8 vs 1)"
        + (f"; mismatched: {mismatched}" if mismatched else ""),
    )
    assert ok


@pytest.mark.parametrize("preset", ["figure1", "figure2"])
def test_figure_replication(acceptance_report, tmp_path, preset):
    out = tmp_path / preset
    assert main(["--preset", preset, "--out", str(out)]) == EXIT_OK
    ns = [1000, 10_000, 100_000]
    band_files = [out / f"bands_n{n}.csv" for n in ns]
    files_ok = all(p.exists() for p in band_files)
    summary = read_csv(out / "bands_summary.csv")
    alphas = sorted({float(r["alpha"]) for r in summary})
    width = {(int(r["n"]), float(r["alpha"])): float(r["mean_width"]) for r in summary}
    excluded = {(int(r["n"]), float(r["alpha"])): float(r["excluded_fraction"]) for r in summary}
    decreasing = all(width[(ns[0], a)] > width[(ns[1], a)] > width[(ns[2], a)] for a in alphas)
    over = alphas[-1]
    over_excl = excluded[(ns[-1], over)]
    ok = files_ok and decreasing and over_excl >= 0.10
    widths = "; ".join(f"alpha={a:g}: " + ", ".join(f"{width[(n, a)]:.3f}" for n in ns) for a in alphas)
    acceptance_report(
        f"11 figure replication ({preset})",
        ok,
        f"widths {widths}; alpha={over:g} excludes truth at {over_excl:.1%} of points at n=1e5",
    )
    assert files_ok
    assert decreasing
    assert over_excl >= 0.10
