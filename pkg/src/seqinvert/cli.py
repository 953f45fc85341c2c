"""Command-line front end: ``seqinvert --preset NAME --out DIR``.

Exit codes: 0 success, 2 malformed config, 3 constraint violation, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import os
import subprocess
import sys
import time
from pathlib import Path

from . import __version__
from .config import (
    ConfigError,
    apply_overrides,
    build_config,
    load_document,
    load_preset,
    preset_names,
)
from .experiments import (
    ExperimentConfig,
    band_replication,
    contraction_study,
    coverage_study,
    rate_prediction,
)
from .sequence_transform import check_pairing, remainder_bound
from .svd_operators import Regime, tail_negligible

log = logging.getLogger("seqinvert")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONSTRAINT = 3
EXIT_IO = 4

SEED_ENV = "SEQINVERT_SEED"


class ConstraintViolation(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            values = [row[h] for h in header] if isinstance(row, dict) else row
            w.writerow([_fmt(v) for v in values])
    return path


def _alpha_tag(alpha: float) -> str:
    return f"alpha-{alpha:g}"


def validation_checks(cfg: ExperimentConfig) -> list[tuple[str, str, str]]:
    """Run the admissibility checks; returns ``(check, status, detail)`` rows."""
    out = []
    op = cfg.operator
    try:
        check_pairing(op, cfg.grid(cfg.n_list[0]))
        out.append(("grid_pairing", "ok", cfg.grid(cfg.n_list[0]).family.value))
    except ValueError as exc:
        out.append(("grid_pairing", "fail", str(exc)))
    for alpha in cfg.alpha_list:
        try:
            prior = cfg.prior_for(cfg.n_list[0], alpha)
            pred = rate_prediction(op, prior, cfg.truth.beta)
            out.append((f"rate[{_alpha_tag(alpha)}]", "ok", repr(pred.epsilon_exponent)))
        except ValueError as exc:
            out.append((f"rate[{_alpha_tag(alpha)}]", "fail", str(exc)))
    if op.regime is Regime.MILD:
        try:
            remainder_bound(op, cfg.truth.beta, 1.0, cfg.n_list[0])
            out.append(("remainder_control", "ok", f"beta + p = {cfg.truth.beta + op.p:g} > 1/2"))
        except ValueError as exc:
            out.append(("remainder_control", "fail", str(exc)))
    tail = tail_negligible(op, cfg.truth)
    out.append(("truth_tail", "ok" if tail else "warn", f"stored length {cfg.truth.K}"))
    return out


def run_config(cfg: ExperimentConfig, experiment: str, out_dir: Path) -> tuple[list[Path], dict]:
    """Run one experiment and write its CSV files; returns paths and manifest extras."""
    extras: dict = {}
    checks = validation_checks(cfg)
    failed = [c for c in checks if c[1] == "fail"]
    if experiment == "validate":
        path = write_rows(out_dir / "validation.csv", ["check", "status", "detail"], checks)
        if failed:
            raise ConstraintViolation("; ".join(c[2] for c in failed))
        return [path], extras
    if failed:
        raise ConstraintViolation("; ".join(c[2] for c in failed))

    multi = len(cfg.alpha_list) > 1
    paths = []
    if experiment == "contraction":
        for alpha in cfg.alpha_list:
            res = contraction_study(cfg, alpha)
            name = f"contraction_{_alpha_tag(alpha)}.csv" if multi else "contraction.csv"
            paths.append(write_rows(out_dir / name, ["n", "risk_mean", "risk_sd", "slope"], res.rows()))
            extras[name] = {"predicted_slope": res.predicted_slope, "spearman": res.spearman}
    elif experiment == "coverage":
        for alpha in cfg.alpha_list:
            res = coverage_study(cfg, alpha)
            name = f"coverage_{_alpha_tag(alpha)}.csv" if multi else "coverage.csv"
            paths.append(write_rows(out_dir / name, ["n", "coverage", "radius_mean"], res.rows()))
            extras[name] = {"radius_squared_quantile_se": res.quantile_se}
    elif experiment == "bands":
        tables = band_replication(cfg)
        summary = []
        for n, per_alpha in tables.items():
            kept = per_alpha[0].draws.shape[0]
            header = ["alpha", "x", "truth", "mean"] + [f"draw_{i:03d}" for i in range(kept)]
            rows = []
            for t in per_alpha:
                for j, x in enumerate(t.x):
                    rows.append([t.alpha, float(x), float(t.truth[j]), float(t.mean[j]), *map(float, t.draws[:, j])])
                summary.append([n, t.alpha, t.mean_width, t.excluded_fraction])
            paths.append(write_rows(out_dir / f"bands_n{n}.csv", header, rows))
        paths.append(
            write_rows(out_dir / "bands_summary.csv", ["n", "alpha", "mean_width", "excluded_fraction"], summary)
        )
    else:
        raise ConfigError(f"unknown experiment {experiment!r}")
    return paths, extras


def git_describe() -> str:
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() if res.returncode == 0 else "unknown"


def resolve_seed(cli_seed: int | None, doc: dict) -> int:
    """``--seed`` first, then the config's ``seed``, then ``$SEQINVERT_SEED``, then 0."""
    if cli_seed is not None:
        return cli_seed
    if "seed" in doc:
        return doc["seed"]
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def run(doc: dict, out_dir, seed: int | None = None, threads: int = 1) -> list[Path]:
    """Library entry point behind the CLI; raises instead of returning exit codes."""
    out_dir = Path(out_dir)
    seed = resolve_seed(seed, doc)
    started = dt.datetime.now(dt.timezone.utc)
    t0 = time.perf_counter()
    try:
        cfg = build_config(doc, seed=seed, threads=threads)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConstraintViolation(str(exc)) from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        paths, extras = run_config(cfg, doc["experiment"], out_dir)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConstraintViolation(str(exc)) from exc
    finished = dt.datetime.now(dt.timezone.utc)
    for p in paths:
        if not p.exists() or p.stat().st_size == 0:
            raise OSError(f"output {p} is missing or empty")
    manifest = {
        "tool": "seqinvert",
        "version": __version__,
        "git_describe": git_describe(),
        "config": {**doc, "seed": seed},
        "seed": seed,
        "threads": threads,
        "started": started.isoformat(),
        "finished": finished.isoformat(),
        "wall_time_s": time.perf_counter() - t0,
        "outputs": [p.name for p in paths],
        "diagnostics": extras,
    }
    mpath = out_dir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths + [mpath]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqinvert",
        description="Bayesian inverse problems with point observations: simulation experiments.",
    )
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="JSON experiment config")
    src.add_argument("--preset", help="name of a shipped preset config")
    src.add_argument("--list-presets", action="store_true", help="list preset names and exit")
    parser.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    parser.add_argument("--seed", type=int, help=f"run seed (fallback: config, then ${SEED_ENV})")
    parser.add_argument("--threads", type=int, default=1, help="worker thread cap")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key; VALUE is parsed as JSON (repeatable)",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.list_presets:
        for name in preset_names():
            print(name)
        return EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_PARSE
    try:
        if args.preset:
            doc = load_preset(args.preset)
        elif args.config:
            doc = load_document(args.config)
        else:
            print("error: one of --config or --preset is required", file=sys.stderr)
            return EXIT_PARSE
        doc = apply_overrides(doc, args.overrides)
        paths = run(doc, args.out, args.seed, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConstraintViolation as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
