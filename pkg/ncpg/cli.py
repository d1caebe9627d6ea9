"""
Command-line entry point for ncpg.

Subcommands:
    verify    run the invariant suites and write verify_report.json
    norms     twisted L^p norm profiles over the τ-grid
    ito       Itô-formula refinement tables
    girsanov  stochastic-exponential refinement table and shifted moments
    sde       strong, closed-form and weak SDE comparisons on refining grids
    phi4      lattice scans of the Φ⁴ diagnostics

Exit codes: 0 success, 1 a failed check, 2 a configuration error or an
unwritable output path.
"""

import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

# Add the project root to the Python path
project_root = os.path.abspath(os.path.dirname(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.settings import RunConfig, load_config
from kernel.operator_kernel import random_operator
from lattice.phi4_diagnostics import LatticeSpec, growth_table, phi4_scan
from spaces.lp_spaces import twisted_norm_profile
from stochastic.gbm import GBMSpec, build_gbm
from stochastic.girsanov import exponential_refinement_table, girsanov_moment_residual, girsanov_shift, reserved_integrand
from stochastic.ito import SCENARIOS, refinement_table
from stochastic.sde import linear_drift, ou_closed_form, ou_continuous_form, path_difference, sde_strong_solve, sde_weak_represent
from suites.algebra_suites import suite_model
from suites.verify_orchestrator import VerifyOrchestrator, report_passed
from utils.error_handlers import ConfigError, NcpgError
from utils.logging_config import setup_logging

logger = logging.getLogger("ncpg.cli")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

CSV_FLOAT_FORMAT = "%.12e"


def prepare_out_dir(path: str) -> str:
    """Creates the output directory; raises OSError if it cannot be written."""
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")
    return path


def write_table(table: pd.DataFrame, path: str) -> str:
    table.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"Wrote {len(table)} rows to {path}")
    return path


def run_verify(config: RunConfig) -> int:
    """
    Runs the selected suites and writes verify_report.json.

    Returns:
        EXIT_OK when every check passes (or reports), EXIT_FAILED otherwise.
    """
    final_state = VerifyOrchestrator().invoke(config)
    records = final_state["records"]
    path = os.path.join(config.out_dir, "verify_report.json")
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(records, handle, indent=2, sort_keys=True)
        handle.write("\n")
    passed = final_state["valid"] and report_passed(records)
    counts = pd.Series([record["status"] for record in records], dtype=object).value_counts().to_dict()
    logger.info(f"Verify report written to {path}: {counts or 'no checks'}")
    return EXIT_OK if passed else EXIT_FAILED


def norms_table(config: RunConfig) -> pd.DataFrame:
    """τ ↦ ‖T_τ^{(p)}(x)‖_p for one seeded random element, per p of scan.p."""
    model = suite_model(config)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    x = random_operator(rng, model.dim)
    rows = []
    for p in config.scan_values("p", [1.0, 2.0, 4.0, np.inf]):
        profile = twisted_norm_profile(model, x, p)
        rows.extend({"p": p, "tau": tau, "value": value} for tau, value in profile.values)
    return pd.DataFrame(rows, columns=["p", "tau", "value"])


def _grids(config: RunConfig, default: List[float]) -> List[int]:
    return [int(n) for n in config.scan_values("n_t", default)]


def ito_table(config: RunConfig) -> pd.DataFrame:
    frames = []
    for scenario in SCENARIOS:
        table = refinement_table(scenario, _grids(config, [1, 2, 4]), config.mu, config.T)
        table.insert(0, "scenario", scenario)
        frames.append(table)
    return pd.concat(frames, ignore_index=True)


def girsanov_tables(config: RunConfig) -> Dict[str, pd.DataFrame]:
    lam = config.scan_values("lambda", [0.3])[0]
    equation = exponential_refinement_table(_grids(config, [1, 2, 4]), config.mu, config.T, lam)
    rows = []
    eye = np.eye(2)
    for n_t in _grids(config, [1, 2]):
        gbm = build_gbm(GBMSpec(mu=config.mu, n_t=n_t, T=config.T, h_dim=2, n_reserved=2), config.max_modes)
        shift, se = girsanov_shift(gbm, reserved_integrand(gbm, [(0, eye[0]), (1, eye[1])], lam))
        residual = max(girsanov_moment_residual(shift, se, [(n_t, eye[a]), (n_t, eye[b])])
                       for a in range(2) for b in range(2))
        rows.append({"n_t": n_t, "delta": config.T / n_t, "moment_residual": residual})
    return {"girsanov_equation": equation,
            "girsanov_moments": pd.DataFrame(rows, columns=["n_t", "delta", "moment_residual"])}


def sde_table(config: RunConfig) -> pd.DataFrame:
    """Linear-drift comparisons with a fixed A on refining grids."""
    A = np.array([[-0.5, 0.2], [0.1, -0.3]])
    rows = []
    for n_t in _grids(config, [1, 2]):
        gbm = build_gbm(GBMSpec(mu=config.mu, n_t=n_t, T=config.T, h_dim=2, n_reserved=2), config.max_modes)
        closed = ou_closed_form(gbm, A)
        strong = sde_strong_solve(gbm, linear_drift(A))
        weak = sde_weak_represent(gbm, linear_drift(A, A + 0.25 * np.eye(2)))
        rows.append({"n_t": n_t, "delta": config.T / n_t,
                     "strong_vs_closed": path_difference(strong.path, closed),
                     "discrete_vs_continuous": path_difference(closed, ou_continuous_form(gbm, A)),
                     "weak_residual": weak.max_residual})
    return pd.DataFrame(rows, columns=["n_t", "delta", "strong_vs_closed", "discrete_vs_continuous", "weak_residual"])


def phi4_tables(config: RunConfig) -> Dict[str, pd.DataFrame]:
    thetas = config.scan_values("theta", [0.1, 0.25])
    spec = LatticeSpec(theta=thetas[0], cutoffs=tuple(config.scan_values("cutoffs", [8, 16, 32, 64, 128])))
    scan = phi4_scan(spec, thetas, config.scan_values("tau", [0.0]))
    growth = []
    for theta in thetas:
        table, _ = growth_table(LatticeSpec(theta=theta, cutoffs=spec.cutoffs))
        table.insert(0, "theta", theta)
        growth.append(table)
    return {"phi4_scan": scan, "phi4_growth": pd.concat(growth, ignore_index=True)}


def run_scan(command: str, config: RunConfig) -> int:
    """Builds the tables of one scan subcommand and writes them as CSV."""
    if command == "norms":
        tables = {"norms": norms_table(config)}
    elif command == "ito":
        tables = {"ito_refinement": ito_table(config)}
    elif command == "girsanov":
        tables = girsanov_tables(config)
    elif command == "sde":
        tables = {"sde_refinement": sde_table(config)}
    else:
        tables = phi4_tables(config)
    for name, table in tables.items():
        write_table(table, os.path.join(config.out_dir, f"{name}.csv"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncpg", description="Finite-dimensional non-commutative probability toolkit.")
    parser.add_argument('command', choices=['verify', 'norms', 'ito', 'girsanov', 'sde', 'phi4'],
                        help="Verify the invariant suites or run one of the scans.")
    parser.add_argument('--config', type=str, default=None, help="Run file; the packaged default when omitted.")
    parser.add_argument('--seed', type=int, default=None, help="Override run.seed.")
    parser.add_argument('--out', type=str, default=None, help="Override run.out_dir.")
    parser.add_argument('--suite', action='append', default=None,
                        help="Suite to run (repeatable); all configured suites when omitted.")
    parser.add_argument('--log-file', type=str, default=None, help="Also write logs to this file.")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(log_file=args.log_file)

    try:
        config = load_config(args.config, seed=args.seed, out_dir=args.out, suites=args.suite)
    except ConfigError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_USAGE

    try:
        prepare_out_dir(config.out_dir)
    except OSError as exc:
        logger.error(f"Cannot write to {config.out_dir}: {exc}")
        return EXIT_USAGE

    try:
        if args.command == "verify":
            return run_verify(config)
        return run_scan(args.command, config)
    except ConfigError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        logger.error(f"Cannot write output: {exc}")
        return EXIT_USAGE
    except NcpgError as exc:
        logger.error(f"{args.command} failed: {type(exc).__name__}: {exc}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
