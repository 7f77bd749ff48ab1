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
"""Run pipeline: build the Higgs field, solve, analyse and write reports.

Output directory layout:

    config.yml            resolved run config
    outcome.json          SolveOutcome (wall time excluded)
    geometry.json         GeometrySummary
    entropy.json          EntropyReport
    geometry.csv          per-node table
    fields/*.fld          phi, H and the geometry fields
"""
# Standard
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple
import json
import os

# Third Party
import numpy as np

# First Party
from caikit.core.exceptions import error_handler
import alog

# Local
from ..data_model import EntropyReport, SolveOutcome, SweepTable
from .domain import GridField
from .entropy import flatness_sweep, manning_bound, write_sweep_csv
from .fld_io import FLD_EXTENSION, read_field, write_field, write_fields
from .geometry import GeometryReport, build_geometry_report, export_csv
from .hermitian_solver import (
    FLAT_CONNECTION_PRECONDITION,
    SolverParams,
    flat_connection_defect,
    solve_harmonic_metric,
)
from .higgs import HiggsField, build_hitchin_higgs, fiducial_metric
from .lie_core import construct_principal_sl2
from .metric import HermitianMetricField
from .run_config import RunConfig

log = alog.use_channel("PIPLN")
error = error_handler.get(log)

REPORT_VERSION = 1
OUTCOME_FILE = "outcome.json"
GEOMETRY_FILE = "geometry.json"
ENTROPY_FILE = "entropy.json"
GEOMETRY_CSV_FILE = "geometry.csv"
SWEEP_CSV_FILE = "sweep.csv"
CONFIG_ECHO_FILE = "config.yml"
FIELDS_DIR = "fields"
PHI_FIELD = "phi"
METRIC_FIELD = "metric"
METRIC_LOG_FIELD = "metric_log"


class AnalysisError(ValueError):
    """A solved run whose geometry cannot be analysed (e.g. K_g > 0 for the entropy bound)"""


@dataclass(frozen=True, eq=False)
class RunAnalysis:
    geometry: GeometryReport
    entropy: EntropyReport
    flat_connection_defect: Optional[float]


def build_higgs(config: RunConfig) -> HiggsField:
    basis = construct_principal_sl2(config.n)
    return build_hitchin_higgs(basis, config.build_differentials(), config.domain())


def initial_metric(config: RunConfig, phi: HiggsField) -> HermitianMetricField:
    """Fiducial or identity start, optionally with a single-mode perturbation"""
    if config.init.kind == "identity":
        metric = HermitianMetricField.identity(phi.domain, phi.n)
    else:
        metric = fiducial_metric(phi)
    if config.init.perturbation_amplitude:
        log.info(
            f"Perturbing the initial metric by {config.init.perturbation_amplitude:g} "
            f"in mode {config.init.perturbation_mode}"
        )
        metric = metric.perturbed(config.init.perturbation_amplitude, config.init.perturbation_mode)
    return metric


def solver_params(config: RunConfig) -> SolverParams:
    solver = config.solver
    return SolverParams.from_config(
        tol=solver.tol,
        max_iter=solver.max_iter,
        dt=solver.dt,
        method=solver.method,
        path=solver.path,
    )


def solve_run(config: RunConfig) -> Tuple[HiggsField, HermitianMetricField, SolveOutcome]:
    """Build and solve one configured run"""
    phi = build_higgs(config)
    metric, outcome = solve_harmonic_metric(phi, initial_metric(config, phi), solver_params(config))
    log.info(
        f"Solve finished: {outcome.status} after {outcome.iterations} iterations "
        f"(residual sup {outcome.residual_sup:.3e})"
    )
    return phi, metric, outcome


def analyze(
    phi: HiggsField,
    metric: HermitianMetricField,
    kappa: Optional[float] = None,
    form: Optional[str] = None,
    residual_sup: Optional[float] = None,
) -> RunAnalysis:
    """Geometry, entropy and (for solved metrics) the flat connection check"""
    geometry = build_geometry_report(phi, metric, kappa, form)
    domain = geometry.domain
    try:
        entropy = manning_bound(
            GridField(domain, geometry.K_induced),
            GridField(domain, geometry.pullback.area_element()),
            mask=geometry.valid,
            sec=GridField(domain, geometry.sec_ambient),
            b_norm_sq=GridField(domain, geometry.b_norm_sq),
            kappa=geometry.kappa,
        )
    except ValueError as err:
        raise AnalysisError(str(err)) from err
    flat_defect = None
    if residual_sup is not None and residual_sup < FLAT_CONNECTION_PRECONDITION:
        flat_defect = flat_connection_defect(metric, phi)
    return RunAnalysis(geometry=geometry, entropy=entropy, flat_connection_defect=flat_defect)


## Report files ################################################################


def write_report(path: str, format_name: str, record: Dict[str, Any]):
    """Versioned JSON wrapper, sorted keys, deterministic float text"""
    document = {
        "format": f"caikit-harmonic/{format_name}",
        "version": REPORT_VERSION,
        "report": record,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, sort_keys=True, indent=2)
        handle.write("\n")


def read_report(path: str, format_name: str) -> Dict[str, Any]:
    error.file_check("<HRM20731101E>", path)
    with open(path, encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as err:
            error("<HRM20731102E>", ValueError(f"Malformed report {path}: {err}"))
    error.value_check(
        "<HRM20731103E>",
        document.get("format") == f"caikit-harmonic/{format_name}"
        and document.get("version") == REPORT_VERSION,
        f"{path} is not a version {REPORT_VERSION} {format_name} report",
    )
    return document["report"]


def write_snapshots(directory: str, phi: HiggsField, metric: HermitianMetricField):
    fields_dir = os.path.join(directory, FIELDS_DIR)
    os.makedirs(fields_dir, exist_ok=True)
    write_field(os.path.join(fields_dir, PHI_FIELD + FLD_EXTENSION), phi.phi)
    write_field(os.path.join(fields_dir, METRIC_FIELD + FLD_EXTENSION), metric.as_field())
    write_field(os.path.join(fields_dir, METRIC_LOG_FIELD + FLD_EXTENSION), metric.log_field())


def read_snapshots(
    directory: str, config: RunConfig
) -> Tuple[HiggsField, HermitianMetricField]:
    """Stored (phi, H), with phi checked against the configured Higgs field.

    The metric is restored from its logarithm, so every reader of the same
    snapshot directory sees bit-identical parameters.
    """
    fields_dir = os.path.join(directory, FIELDS_DIR)
    error.dir_check("<HRM20731104E>", fields_dir)
    phi = build_higgs(config)
    stored_phi = read_field(os.path.join(fields_dir, PHI_FIELD + FLD_EXTENSION), phi.domain)
    error.value_check(
        "<HRM20731105E>",
        stored_phi.is_matrix and np.array_equal(stored_phi.values, phi.phi.values),
        "Stored phi does not match the Higgs field of the run config",
    )
    stored_log = read_field(os.path.join(fields_dir, METRIC_LOG_FIELD + FLD_EXTENSION), phi.domain)
    error.value_check(
        "<HRM20731106E>",
        stored_log.is_matrix and stored_log.dim == phi.n,
        f"Stored metric is not an {phi.n}x{phi.n} matrix field",
    )
    return phi, HermitianMetricField.from_log_field(stored_log)


def write_analysis(directory: str, analysis: RunAnalysis):
    """geometry.json, entropy.json, geometry.csv and the geometry field snapshots"""
    os.makedirs(directory, exist_ok=True)
    geometry_record = analysis.geometry.summary().to_dict()
    geometry_record["flat_connection_defect"] = analysis.flat_connection_defect
    write_report(os.path.join(directory, GEOMETRY_FILE), "geometry", geometry_record)
    write_report(os.path.join(directory, ENTROPY_FILE), "entropy", analysis.entropy.to_dict())
    export_csv(analysis.geometry, os.path.join(directory, GEOMETRY_CSV_FILE))
    write_fields(os.path.join(directory, FIELDS_DIR), analysis.geometry.fields())


def write_run(
    directory: str,
    config: RunConfig,
    phi: HiggsField,
    metric: HermitianMetricField,
    outcome: SolveOutcome,
) -> Optional[RunAnalysis]:
    """Write a solve; converged runs are analysed from the stored snapshots.

    Analysing the re-read snapshots makes a later report on the same
    directory reproduce these files byte for byte.
    """
    os.makedirs(directory, exist_ok=True)
    config.resolved().save(os.path.join(directory, CONFIG_ECHO_FILE))
    write_report(os.path.join(directory, OUTCOME_FILE), "solve-outcome", outcome.to_report_dict())
    write_snapshots(directory, phi, metric)
    analysis = None
    if outcome.converged:
        analysis = report_run(directory)
    log.info(f"Wrote run output to {directory}")
    return analysis


def report_run(
    directory: str,
    kappa: Optional[float] = None,
    form: Optional[str] = None,
    output_dir: Optional[str] = None,
) -> RunAnalysis:
    """Recompute geometry and entropy from a run directory without solving"""
    error.dir_check("<HRM20731108E>", directory)
    config = RunConfig.load(os.path.join(directory, CONFIG_ECHO_FILE))
    config = config.with_overrides(kappa=kappa, form=form).resolved()
    outcome = read_report(os.path.join(directory, OUTCOME_FILE), "solve-outcome")
    phi, metric = read_snapshots(directory, config)
    analysis = analyze(
        phi, metric, config.metric.kappa, config.metric.form, outcome.get("residual_sup")
    )
    write_analysis(output_dir or directory, analysis)
    return analysis


## Sweeps ######################################################################


def run_sweep(
    config: RunConfig, fraction: Optional[float] = None, workers: Optional[int] = None
) -> SweepTable:
    """Solve and analyse config with the top differential scaled by each t"""
    error.value_check(
        "<HRM20731107E>", bool(config.t_values), "Sweep needs sweep.t_values in the run config"
    )
    params = solver_params(config)

    def run_member(t: float) -> Tuple[str, Optional[GeometryReport]]:
        member = config.with_top_scaled(t)
        phi = build_higgs(member)
        metric, outcome = solve_harmonic_metric(phi, initial_metric(member, phi), params)
        if not outcome.converged:
            return outcome.status, None
        return outcome.status, build_geometry_report(phi, metric, member.metric.kappa, member.metric.form)

    table = flatness_sweep(config.t_values, run_member, fraction, workers)
    if config.output_dir is not None:
        os.makedirs(config.output_dir, exist_ok=True)
        config.resolved().save(os.path.join(config.output_dir, CONFIG_ECHO_FILE))
        write_sweep_csv(table, os.path.join(config.output_dir, SWEEP_CSV_FILE))
    return table
