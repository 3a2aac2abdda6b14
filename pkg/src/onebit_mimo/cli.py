"""Experiment runner.

Parses a YAML config (or a previously written run manifest), executes the
listed experiments, and writes one CSV per experiment plus a
``manifest.json`` and a plot companion script into the output directory.
CSV files are written atomically (temp file, then rename) and their
content depends only on the configuration, never on the parallelism
degree.

Exit codes: 0 success; 1 validation error (bad flags, bad config, missing
config file); 2 at least one experiment failed at runtime, or the
``--verify`` suite found a mismatch; 3 output I/O error.  I/O takes
precedence over partial failure when both occur.
"""

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .analysis import (
    CollisionSpec,
    collision_probability_closed_form,
    collision_probability_monte_carlo,
    sign_agreement_monte_carlo,
    sign_agreement_probability,
)
from .config import (
    ChanestExperiment,
    CollisionExperiment,
    ConfigError,
    MulticellExperiment,
    ParsedConfig,
    SerExperiment,
    config_hash,
    config_to_dict,
    parse_config,
)
from .detectors import (
    NmlConfig,
    detect_ml_exhaustive,
    detect_nml_two_stage,
)
from .model import (
    draw_rayleigh_channel,
    draw_symbols,
    expand_real,
    indices_to_symbols,
    make_constellation,
    sign_refine,
    transmit,
)
from .numerics import RngStream, log_norm_cdf, norm_hazard
from .sim import run_chanest_sweep, run_multicell_sweep, run_ser_sweep

__all__ = ["main"]

SER_COLUMNS = (
    "config_hash", "seed", "snr_db", "detector", "trials", "symbol_errors",
    "symbols", "ser", "mean_iterations", "mean_candidates",
)
CHANEST_COLUMNS = (
    "config_hash", "seed", "T", "snr_db", "estimator", "draws", "mse", "nmse",
)
COLLISION_COLUMNS = (
    "config_hash", "seed", "K", "N_r", "P", "sigma2", "closed_form",
    "mc_estimate", "mc_stderr", "trials",
)
MULTICELL_COLUMNS = (
    "config_hash", "seed", "scenario", "d_m", "detector", "trials",
    "error_rate",
)

PLOT_SCRIPT_NAME = "plot_results.py"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        raise TypeError("no boolean CSV fields exist")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_atomic(path: str, write_body):
    """Write a text file so no partially-written version is ever visible."""
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            write_body(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, columns, rows):
    def body(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

    _write_atomic(path, body)


def _run_experiment(exp, out_dir: str, parallelism: int) -> str:
    """Execute one experiment and write its CSV; returns the CSV path."""
    chash = config_hash(exp)
    path = os.path.join(out_dir, "%s.csv" % exp.name)
    if isinstance(exp, SerExperiment):
        result = run_ser_sweep(exp.config, parallelism=parallelism)
        rows = [
            (chash, exp.config.master_seed, p.snr_db, p.detector, p.trials,
             p.symbol_errors, p.symbols, p.ser, p.mean_iterations,
             p.mean_candidates)
            for p in result.points
        ]
        _write_csv(path, SER_COLUMNS, rows)
    elif isinstance(exp, ChanestExperiment):
        result = run_chanest_sweep(exp.config, parallelism=parallelism)
        rows = [
            (chash, exp.config.master_seed, p.t, p.snr_db, p.estimator,
             p.draws, p.mse, p.nmse)
            for p in result.points
        ]
        _write_csv(path, CHANEST_COLUMNS, rows)
    elif isinstance(exp, CollisionExperiment):
        closed = collision_probability_closed_form(exp.spec)
        estimate, stderr = collision_probability_monte_carlo(
            exp.spec, exp.trials, RngStream(exp.seed, 0)
        )
        rows = [
            (chash, exp.seed, exp.spec.k, exp.spec.n_r, exp.spec.p,
             exp.spec.sigma2, closed, estimate, stderr, exp.trials)
        ]
        _write_csv(path, COLLISION_COLUMNS, rows)
    elif isinstance(exp, MulticellExperiment):
        result = run_multicell_sweep(
            exp.config, exp.d_grid_m, exp.detectors, exp.trials, exp.seed,
            parallelism=parallelism,
        )
        rows = [
            (chash, exp.seed, p.scenario, p.d_m, p.detector, p.trials,
             p.error_rate)
            for p in result.points
        ]
        _write_csv(path, MULTICELL_COLUMNS, rows)
    else:
        raise TypeError("unknown experiment type %r" % type(exp).__name__)
    return path


_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Render figures from the experiment CSVs next to this script.

Generated by onebit-mimo; needs only matplotlib.  Each SER sweep becomes
a log-scale SER vs SNR figure, each channel-estimation sweep an MSE vs
SNR figure, each multicell sweep an error-rate vs distance figure; the
collision checks are printed as a table.
"""
import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
RESULTS = %(results)r


def load(name):
    with open(os.path.join(HERE, name + ".csv"), newline="") as fh:
        return list(csv.DictReader(fh))


def series(rows, x_key, y_key, group_keys):
    out = {}
    for row in rows:
        label = " ".join(row[k] for k in group_keys)
        out.setdefault(label, []).append(
            (float(row[x_key]), float(row[y_key]))
        )
    return {k: sorted(v) for k, v in out.items()}


for name, kind in RESULTS:
    rows = load(name)
    if kind == "collision_check":
        for row in rows:
            print(
                "%%s: closed form %%s, simulated %%s +- %%s"
                %% (name, row["closed_form"], row["mc_estimate"],
                   row["mc_stderr"])
            )
        continue
    fig, ax = plt.subplots()
    if kind == "ser_sweep":
        groups = series(rows, "snr_db", "ser", ("detector",))
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("SER")
        ax.set_yscale("log")
    elif kind == "chanest_sweep":
        groups = series(rows, "snr_db", "mse", ("estimator",))
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("MSE")
        ax.set_yscale("log")
    else:
        groups = series(rows, "d_m", "error_rate", ("scenario", "detector"))
        ax.set_xlabel("d (m)")
        ax.set_ylabel("error rate")
        ax.set_yscale("log")
    for label in sorted(groups):
        xs = [p[0] for p in groups[label]]
        ys = [p[1] for p in groups[label]]
        ax.plot(xs, ys, marker="o", label=label)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    ax.set_title(name)
    fig.savefig(os.path.join(HERE, name + ".png"), dpi=150)
    plt.close(fig)
    print("wrote", name + ".png")
'''


def _write_plot_script(out_dir: str, completed):
    results = [(exp.name, exp.kind) for exp in completed]
    body = _PLOT_TEMPLATE % {"results": results}
    _write_atomic(os.path.join(out_dir, PLOT_SCRIPT_NAME),
                  lambda fh: fh.write(body))


_VERIFY_ANCHORS_LOG_CDF = {
    -10.0: -53.231285150512470578,
    -8.0: -35.013437159914549896,
    1.0: -0.17275377902344988953,
    -30.0: -454.32124395634319711,
}
_VERIFY_ANCHORS_HAZARD = {
    0.0: 0.79788456080286535588,
    -8.0: 8.1213681122361127,
    -30.0: 30.033259667433677037,
}
_VERIFY_COLLISION = {
    (2, 2, 1.0, 1.0): 0.13680747332238446,
    (2, 4, 1.0, 1.0): 0.018716284756854937,
    (4, 2, 1.0, 0.5): 0.22339662726579332,
}


def _verify() -> int:
    """Fast self-checks of the analytic layer against frozen oracles."""
    failures = []

    def check(name, ok, detail=""):
        if ok:
            print("ok   %s" % name)
        else:
            print("FAIL %s%s" % (name, (": " + detail) if detail else ""))
            failures.append(name)

    for t, want in sorted(_VERIFY_ANCHORS_LOG_CDF.items()):
        got = log_norm_cdf(t)
        check(
            "log_norm_cdf(%g)" % t,
            math.isclose(got, want, rel_tol=1e-13),
            "got %r want %r" % (got, want),
        )
    for t, want in sorted(_VERIFY_ANCHORS_HAZARD.items()):
        got = norm_hazard(t)
        check(
            "norm_hazard(%g)" % t,
            math.isclose(got, want, rel_tol=1e-12),
            "got %r want %r" % (got, want),
        )
    grid = np.linspace(-6.0, 6.0, 25)
    total = np.exp(log_norm_cdf(grid)) + np.exp(log_norm_cdf(-grid))
    check(
        "reflection identity",
        bool(np.all(np.abs(total - 1.0) < 1e-12)),
        "max deviation %g" % float(np.max(np.abs(total - 1.0))),
    )
    trivial = collision_probability_closed_form(CollisionSpec(1, 1, 1.0, 1.0))
    check("collision(1,1,1,1) == 0.25", abs(trivial - 0.25) < 1e-15)
    for (k, n_r, p, s2), want in sorted(_VERIFY_COLLISION.items()):
        got = collision_probability_closed_form(CollisionSpec(k, n_r, p, s2))
        check(
            "collision closed form K=%d N_r=%d" % (k, n_r),
            math.isclose(got, want, rel_tol=1e-14),
            "got %r want %r" % (got, want),
        )
    check(
        "sign agreement ratio 1",
        abs(sign_agreement_probability(1.0, 1.0) - 0.5) < 1e-15,
    )
    check(
        "sign agreement ratio sqrt(3)",
        abs(sign_agreement_probability(math.sqrt(3.0), 1.0) - 2.0 / 3.0)
        < 1e-15,
    )
    spec = CollisionSpec(2, 2, 1.0, 1.0)
    closed = collision_probability_closed_form(spec)
    mc, se = collision_probability_monte_carlo(
        spec, 200000, RngStream(20260823, 0)
    )
    check(
        "collision Monte Carlo K=2 N_r=2",
        abs(mc - closed) <= 5.0 * se,
        "closed %r simulated %r stderr %r" % (closed, mc, se),
    )
    want = sign_agreement_probability(2.0, 1.0)
    mc, se = sign_agreement_monte_carlo(2.0, 1.0, 200000,
                                        RngStream(20260823, 1))
    check(
        "sign agreement Monte Carlo ratio 2",
        abs(mc - want) <= 5.0 * se,
        "closed %r simulated %r stderr %r" % (want, mc, se),
    )
    const = make_constellation("psk", 4)
    cfg = NmlConfig(candidate_ratio=1e9)
    rho = 10.0
    mismatches = 0
    for t in range(50):
        sub = RngStream(314159, t)
        h = draw_rayleigh_channel(sub, 8, 2)
        idx = draw_symbols(sub, const, 2)
        x = indices_to_symbols(const, idx)
        _, q = transmit(h, x, rho, rng=sub)
        rows = sign_refine(expand_real(h), q)
        wide = detect_nml_two_stage(rows, h, const, 2, rho, cfg)
        exact = detect_ml_exhaustive(rows, const, 2, rho)
        if wide.symbols != exact.symbols:
            mismatches += 1
    check(
        "two-stage at huge ratio matches exhaustive ML",
        mismatches == 0,
        "%d/50 trials differ" % mismatches,
    )
    if failures:
        print("%d check(s) failed" % len(failures))
        return 2
    print("all %s checks passed" % "verify")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onebit-mimo",
        description="Run one-bit MIMO detection and estimation experiments "
        "from a YAML config and write CSV results.",
    )
    parser.add_argument("--config", help="config file or run manifest")
    parser.add_argument(
        "--out-dir", default="results",
        help="output directory (default: results)",
    )
    parser.add_argument(
        "--parallelism", type=int, default=1,
        help="worker processes per experiment (results do not depend on it)",
    )
    parser.add_argument(
        "--seed", type=int, default=None,
        help="override the config's master seed",
    )
    parser.add_argument(
        "--list-experiments", action="store_true",
        help="print the validated experiment list and exit",
    )
    parser.add_argument(
        "--verify", action="store_true",
        help="run the built-in analytic self-checks and exit",
    )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.verify:
        return _verify()
    if args.config is None:
        print("error: --config is required (or use --verify)",
              file=sys.stderr)
        return 1
    if args.parallelism < 1:
        print("error: --parallelism must be >= 1", file=sys.stderr)
        return 1
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in an unsigned 64-bit int",
              file=sys.stderr)
        return 1
    try:
        parsed = parse_config(args.config, override_seed=args.seed)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    except FileNotFoundError:
        print("config error: no such file: %s" % args.config,
              file=sys.stderr)
        return 1
    except OSError as exc:
        print("config error: cannot read %s (%s)" % (args.config, exc),
              file=sys.stderr)
        return 1

    if args.list_experiments:
        for exp in parsed.experiments:
            print("%s  %s  seed=%d  hash=%s"
                  % (exp.name, exp.kind, _exp_seed(exp), config_hash(exp)))
        return 0

    if not parsed.experiments:
        print("warning: empty experiment list, nothing to do",
              file=sys.stderr)
        return 0

    try:
        os.makedirs(args.out_dir, exist_ok=True)
    except OSError as exc:
        print("I/O error: cannot create %s (%s)" % (args.out_dir, exc),
              file=sys.stderr)
        return 3

    io_error = False
    entries = []
    completed = []
    for exp in parsed.experiments:
        entry = {
            "name": exp.name,
            "type": exp.kind,
            "seed": _exp_seed(exp),
            "config_hash": config_hash(exp),
        }
        start = time.perf_counter()
        try:
            path = _run_experiment(exp, args.out_dir, args.parallelism)
        except OSError as exc:
            io_error = True
            entry["status"] = "error"
            entry["error"] = "I/O: %s" % exc
            print("experiment %s: I/O error: %s" % (exp.name, exc),
                  file=sys.stderr)
        except Exception as exc:
            entry["status"] = "error"
            entry["error"] = str(exc)
            print("experiment %s failed: %s" % (exp.name, exc),
                  file=sys.stderr)
        else:
            entry["status"] = "ok"
            entry["output_csv"] = os.path.basename(path)
            completed.append(exp)
            print("experiment %s: wrote %s (%.1f s)"
                  % (exp.name, path, time.perf_counter() - start))
        entry["wall_time_s"] = round(time.perf_counter() - start, 3)
        entries.append(entry)

    manifest = {
        "artifact_version": __version__,
        "master_seed": parsed.master_seed,
        "config": config_to_dict(parsed),
        "experiments": entries,
    }
    try:
        _write_atomic(
            os.path.join(args.out_dir, "manifest.json"),
            lambda fh: fh.write(json.dumps(manifest, indent=2) + "\n"),
        )
        if completed:
            _write_plot_script(args.out_dir, completed)
    except OSError as exc:
        print("I/O error: %s" % exc, file=sys.stderr)
        return 3

    if io_error:
        return 3
    failed = [e["name"] for e in entries if e["status"] != "ok"]
    if failed:
        print("failed experiments: %s" % ", ".join(failed), file=sys.stderr)
        return 2
    return 0


def _exp_seed(exp) -> int:
    if isinstance(exp, (SerExperiment,)):
        return exp.config.master_seed
    if isinstance(exp, (ChanestExperiment,)):
        return exp.config.master_seed
    return exp.seed


def run(parsed: ParsedConfig, out_dir: str, parallelism: int = 1):
    """Programmatic counterpart of ``main`` for already-parsed configs.

    Returns (exit_code, list of written CSV paths).  Used by tests; the
    console entry point goes through ``main``.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    code = 0
    for exp in parsed.experiments:
        try:
            paths.append(_run_experiment(exp, out_dir, parallelism))
        except OSError:
            return 3, paths
        except Exception:
            code = 2
    return code, paths


if __name__ == "__main__":
    sys.exit(main())
