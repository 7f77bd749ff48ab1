# Copyright The Caikit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Command line frontend.

    python -m caikit_harmonic lie-check 3
    python -m caikit_harmonic solve torus_n2_q2 --output-dir runs/q2
    python -m caikit_harmonic report runs/q2 --kappa 2
    python -m caikit_harmonic sweep patch_n3_sweep
    python -m caikit_harmonic oracle --n 3 --c 1.0

Exit codes: 0 success, 2 usage or config errors, 3 solver non-convergence,
4 analysis rejected (the outcome and snapshots are still written).
"""
# Standard
from typing import List, Optional
import argparse
import json
import os
import sys

# Third Party
import numpy as np

# First Party
import alog
import caikit

# Local
from .toolkit.lie_core import construct_principal_sl2, invariant_residuals
from .toolkit.pipeline import AnalysisError, report_run, run_sweep, solve_run, write_run
from .toolkit.run_config import RunConfig, bundled_config_path

log = alog.use_channel("CLI")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_ANALYSIS = 4
LIE_CHECK_TOL = 1e-12
CONFIG_ERRORS = (ValueError, TypeError, OSError)


def _add_solver_overrides(parser: argparse.ArgumentParser):
    parser.add_argument("--output-dir", help="Override output.dir")
    parser.add_argument("--tol", type=float, help="Override solver.tol")
    parser.add_argument("--max-iter", type=int, help="Override solver.max_iter")
    parser.add_argument("--dt", type=float, help="Override solver.dt")
    parser.add_argument("--method", choices=("relax", "newton", "auto"), help="Override solver.method")
    parser.add_argument("--path", choices=("auto", "diagonal", "full"), help="Override solver.path")
    parser.add_argument("--kappa", type=float, help="Override metric.kappa")
    parser.add_argument("--form", choices=("trace", "killing"), help="Override metric.form")


def _parse_args(argv: Optional[List[str]]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="caikit_harmonic",
        description="Harmonic metrics, harmonic-map geometry and entropy bounds for Hitchin-section Higgs fields",
    )
    parser.add_argument(
        "--log-level", default="info", help="alog default level (debug, info, warning, error)"
    )
    parser.add_argument(
        "--fft-workers", type=int, help="Override harmonic.parallelism.fft_workers"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    lie_check = subparsers.add_parser("lie-check", help="Print the principal sl(2) invariant residuals")
    lie_check.add_argument("n", type=int, nargs="?", help="Matrix size n of sl(n)")
    lie_check.add_argument("--n", dest="n_option", type=int, help="Same as the positional n")

    solve = subparsers.add_parser("solve", help="Build, solve, analyse and write a run")
    solve.add_argument("config", help="Run config path or bundled config name")
    _add_solver_overrides(solve)
    solve.add_argument("--save-module", help="Also save the run as a caikit HarmonicMap module")

    report = subparsers.add_parser("report", help="Recompute reports from stored snapshots")
    report.add_argument("run_dir", help="Output directory of a previous solve")
    report.add_argument("--kappa", type=float, help="Metric normalization")
    report.add_argument("--form", choices=("trace", "killing"), help="Metric form")
    report.add_argument("--output-dir", help="Write the reports here instead of run_dir")

    sweep = subparsers.add_parser("sweep", help="Scale the top differential over sweep.t_values")
    sweep.add_argument("config", help="Run config path or bundled config name")
    _add_solver_overrides(sweep)
    sweep.add_argument("--workers", type=int, help="Override harmonic.parallelism.sweep_workers")
    sweep.add_argument("--window-fraction", type=float, help="Window half-width as a fraction of L")

    oracle = subparsers.add_parser("oracle", help="Closed-form metric for constant cyclic torus data")
    oracle.add_argument("--n", type=int, required=True, help="Matrix size n of sl(n)")
    oracle.add_argument("--c", type=float, required=True, help="Real part of alpha_{n-1}")
    oracle.add_argument("--c-imag", type=float, default=0.0, help="Imaginary part of alpha_{n-1}")

    args = parser.parse_args(argv)
    if args.command == "lie-check":
        if args.n is None:
            args.n = args.n_option
        if args.n is None:
            lie_check.error("the matrix size n is required")
    return args


def _load_config(reference: str, args: argparse.Namespace) -> RunConfig:
    path = reference
    if not os.path.exists(path) and os.path.exists(bundled_config_path(reference)):
        path = bundled_config_path(reference)
    config = RunConfig.load(path)
    return config.with_overrides(
        tol=args.tol,
        max_iter=args.max_iter,
        dt=args.dt,
        method=args.method,
        path=args.path,
        kappa=args.kappa,
        form=args.form,
        output_dir=args.output_dir,
    ).resolved()


def cmd_lie_check(args: argparse.Namespace) -> int:
    try:
        basis = construct_principal_sl2(args.n)
    except CONFIG_ERRORS as err:
        print(f"lie-check: {err}", file=sys.stderr)
        return EXIT_USAGE
    residuals = invariant_residuals(basis)
    width = max(len(name) for name in residuals)
    for name, value in residuals.items():
        print(f"{name:<{width}}  {value:.3e}")
    worst = max(residuals.values())
    print(f"n={args.n} max residual {worst:.3e}")
    return EXIT_OK if worst < LIE_CHECK_TOL else EXIT_NOT_CONVERGED


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config, args)
        phi, metric, outcome = solve_run(config)
    except CONFIG_ERRORS as err:
        print(f"solve: {err}", file=sys.stderr)
        return EXIT_USAGE
    run_name = os.path.splitext(os.path.basename(args.config))[0]
    directory = config.output_dir or os.path.join("runs", run_name)
    print(f"status {outcome.status} iterations {outcome.iterations} residual_sup {outcome.residual_sup:.3e}")
    code = EXIT_OK if outcome.converged else EXIT_NOT_CONVERGED
    try:
        analysis = write_run(directory, config, phi, metric, outcome)
        if analysis is not None:
            print(f"bound {analysis.entropy.bound!r} min_detg {analysis.geometry.summary().min_detg!r}")
    except AnalysisError as err:
        print(f"solve: analysis rejected: {err}", file=sys.stderr)
        code = EXIT_ANALYSIS
    except OSError as err:
        print(f"solve: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.save_module:
        # Local
        from .modules.harmonic_map import HarmonicMap

        HarmonicMap(config, phi, metric, outcome).save(args.save_module)
    return code


def cmd_report(args: argparse.Namespace) -> int:
    try:
        analysis = report_run(args.run_dir, args.kappa, args.form, args.output_dir)
    except AnalysisError as err:
        print(f"report: analysis rejected: {err}", file=sys.stderr)
        return EXIT_ANALYSIS
    except CONFIG_ERRORS as err:
        print(f"report: {err}", file=sys.stderr)
        return EXIT_USAGE
    print(f"bound {analysis.entropy.bound!r} degenerate {analysis.entropy.degenerate}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config, args)
        table = run_sweep(config, args.window_fraction, args.workers)
    except CONFIG_ERRORS as err:
        print(f"sweep: {err}", file=sys.stderr)
        return EXIT_USAGE
    for row in table.rows:
        print(f"t={row.t:g} {row.status} k_abs_mean={row.k_abs_mean}")
    return EXIT_OK if all(row.status == "Converged" for row in table.rows) else EXIT_NOT_CONVERGED


def cmd_oracle(args: argparse.Namespace) -> int:
    """Constant cyclic data on the torus: H = diag(w^(i - (n-1)/2)), w = |beta|^(2/n)"""
    try:
        basis = construct_principal_sl2(args.n)
    except CONFIG_ERRORS as err:
        print(f"oracle: {err}", file=sys.stderr)
        return EXIT_USAGE
    c = complex(args.c, args.c_imag)
    beta = c * basis.hw[-1][0, args.n - 1]
    if beta == 0:
        print("oracle: alpha_{n-1} must be nonzero", file=sys.stderr)
        return EXIT_USAGE
    w = abs(beta) ** (2.0 / args.n)
    offsets = np.arange(args.n) - (args.n - 1) / 2.0
    record = {
        "n": args.n,
        "c": [c.real, c.imag],
        "beta": [float(beta.real), float(beta.imag)],
        "w": float(w),
        "u": [float(o * np.log(w) / 2.0) for o in offsets],
        "metric_diagonal": [float(w**o) for o in offsets],
    }
    print(json.dumps(record, sort_keys=True, indent=2))
    return EXIT_OK


COMMANDS = {
    "lie-check": cmd_lie_check,
    "solve": cmd_solve,
    "report": cmd_report,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = _parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_USAGE
    alog.configure(default_level=args.log_level)
    if args.fft_workers is not None:
        caikit.configure(config_dict={"harmonic": {"parallelism": {"fft_workers": args.fft_workers}}})
    log.debug(f"Running {args.command}")
    return COMMANDS[args.command](args)
