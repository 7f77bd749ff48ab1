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
"""Volume-entropy lower bound (1/Vol) int sqrt(-K) dV and its consistency
checks, for solved runs and for synthetic compact-surface data.
"""
# Standard
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Tuple
import csv
import json
import os

# Third Party
import numpy as np

# First Party
from caikit import get_config
from caikit.core.exceptions import error_handler
import alog

# Local
from ..data_model import EntropyReport, SweepRow, SweepTable
from .domain import GridField
from .fld_io import read_field
from .geometry import GeometryReport

log = alog.use_channel("ENTRP")
error = error_handler.get(log)

SYNTHETIC_FORMAT = "caikit-harmonic/synthetic-metric"
SYNTHETIC_VERSION = 1
SYNTHETIC_MANIFEST = "manifest.json"
SWEEP_CSV_FORMAT = "caikit-harmonic/sweep-csv"
SWEEP_CSV_VERSION = 1


class EntropySource(str, Enum):
    SOLVED_RUN = "SolvedRun"
    SYNTHETIC = "SyntheticMetric"


@dataclass(frozen=True, eq=False)
class SyntheticMetric:
    K: GridField
    dV: GridField
    chi: int


def _scalar(field: GridField, name: str) -> np.ndarray:
    error.value_check("<HRM97350101E>", not field.is_matrix, f"{name} must be a scalar field")
    return np.real(field.values)


def manning_bound(
    K_field: GridField,
    dV: GridField,
    chi: Optional[int] = None,
    source: EntropySource = EntropySource.SOLVED_RUN,
    mask: Optional[np.ndarray] = None,
    sec: Optional[GridField] = None,
    b_norm_sq: Optional[GridField] = None,
    kappa: Optional[float] = None,
) -> EntropyReport:
    """Lower bound (1/Vol) int sqrt(max(0, -K)) dV for the volume entropy.

    Args:
        K_field: GridField
            Induced curvature; NaN marks nodes without a valid value.
        dV: GridField
            Area density of the induced metric.
        chi: Optional[int]
            Euler characteristic, enables the Gauss-Bonnet defect on compact data.
        source: EntropySource
        mask: Optional[np.ndarray]
            Nodes to include (all by default).
        sec, b_norm_sq: Optional[GridField]
            Ambient curvature and |B|^2; when both are given the bound is
            recomputed from sqrt(-Sec + |B|^2 / 2) as a cross-check.
        kappa: Optional[float]
            Metric normalization recorded in the report.
    Returns:
        EntropyReport
    """
    config = get_config().harmonic.entropy
    source = EntropySource(source)
    domain = K_field.domain
    error.value_check(
        "<HRM97350102E>", dV.domain == domain, "curvature and area density live on different domains"
    )
    K = _scalar(K_field, "K")
    density = _scalar(dV, "dV")
    valid = np.isfinite(K)
    if mask is not None:
        valid &= mask
    error.value_check(
        "<HRM97350103E>",
        bool(np.all(density[valid] >= 0.0)),
        "Area density must be non-negative",
    )
    if np.any(valid):
        K_max = float(np.max(K[valid]))
        error.value_check(
            "<HRM97350104E>",
            K_max <= config.positivity_tol,
            f"Curvature must be non-positive, found K = {K_max:.3e}",
        )

    compact = domain.is_torus or source == EntropySource.SYNTHETIC
    kind = "bound" if compact else "local_statistic"
    volume = domain.integrate(density, mask=valid) if np.any(valid) else 0.0
    if volume <= 0.0:
        log.warning("Induced metric has no area; entropy report is degenerate")
        return EntropyReport(
            volume=0.0,
            bound=0.0,
            kind=kind,
            source=source.value,
            chi=chi,
            gauss_bonnet_defect=None,
            integrand_min=0.0,
            integrand_mean=0.0,
            integrand_max=0.0,
            cross_check_bound=None,
            cross_check_defect=None,
            degenerate=True,
            kappa=kappa,
        )

    integrand = np.sqrt(np.maximum(-K, 0.0))
    bound = domain.integrate(integrand, density, mask=valid) / volume

    cross_bound, cross_defect = None, None
    if sec is not None and b_norm_sq is not None:
        radicand = -_scalar(sec, "Sec") + 0.5 * _scalar(b_norm_sq, "B_norm_sq")
        cross_valid = valid & np.isfinite(radicand)
        if np.any(cross_valid):
            cross_volume = domain.integrate(density, mask=cross_valid)
            cross_bound = (
                domain.integrate(np.sqrt(np.maximum(radicand, 0.0)), density, mask=cross_valid)
                / cross_volume
            )
            cross_defect = abs(cross_bound - bound)

    defect = None
    if chi is not None and compact:
        defect = gauss_bonnet_check(K_field, dV, chi, valid)

    values = integrand[valid]
    return EntropyReport(
        volume=float(volume),
        bound=float(bound),
        kind=kind,
        source=source.value,
        chi=chi,
        gauss_bonnet_defect=defect,
        integrand_min=float(np.min(values)),
        integrand_mean=float(np.mean(values)),
        integrand_max=float(np.max(values)),
        cross_check_bound=cross_bound,
        cross_check_defect=cross_defect,
        degenerate=False,
        kappa=kappa,
    )


def gauss_bonnet_check(
    K_field: GridField, dV: GridField, chi: int, mask: Optional[np.ndarray] = None
) -> float:
    """|int K dV - 2 pi chi| on compact data"""
    domain = K_field.domain
    error.value_check(
        "<HRM97350105E>",
        domain.is_torus,
        "Gauss-Bonnet needs compact data; patch fields have a boundary",
    )
    error.type_check("<HRM97350106E>", int, chi=chi)
    K = _scalar(K_field, "K")
    valid = np.isfinite(K) if mask is None else (mask & np.isfinite(K))
    total = domain.integrate(K, _scalar(dV, "dV"), mask=valid)
    return float(abs(total - 2.0 * np.pi * chi))


def rescale_metric(K_field: GridField, dV: GridField, factor: float) -> Tuple[GridField, GridField]:
    """Curvature and area density of factor^2 g"""
    error.value_check("<HRM97350107E>", factor > 0, f"Scale factor must be positive, got {factor}")
    return (
        K_field.with_values(K_field.values / factor**2),
        dV.with_values(dV.values * factor**2),
    )


## Synthetic metrics ###########################################################


def load_synthetic_metric(path: str) -> SyntheticMetric:
    """Load a synthetic compact metric (curvature, area density, Euler characteristic).

    Args:
        path: str
            Directory holding manifest.json, or the manifest itself. The
            manifest names the two .fld files relative to its own directory.
    Returns:
        SyntheticMetric
    """
    manifest_path = os.path.join(path, SYNTHETIC_MANIFEST) if os.path.isdir(path) else path
    error.file_check("<HRM97350108E>", manifest_path)
    with open(manifest_path, encoding="utf-8") as handle:
        try:
            manifest = json.load(handle)
        except json.JSONDecodeError as err:
            error("<HRM97350109E>", ValueError(f"Malformed manifest {manifest_path}: {err}"))
    error.value_check(
        "<HRM97350110E>",
        manifest.get("format") == SYNTHETIC_FORMAT
        and manifest.get("version") == SYNTHETIC_VERSION,
        f"Unsupported synthetic metric manifest {manifest.get('format')} "
        f"version {manifest.get('version')}",
    )
    for key in ("chi", "curvature", "area_density"):
        error.value_check("<HRM97350111E>", key in manifest, f"Manifest is missing '{key}'")
    chi = manifest["chi"]
    error.type_check("<HRM97350112E>", int, chi=chi)

    base = os.path.dirname(os.path.abspath(manifest_path))
    K_field = read_field(os.path.join(base, manifest["curvature"]))
    dV = read_field(os.path.join(base, manifest["area_density"]), expected_domain=K_field.domain)
    for name, field in (("curvature", K_field), ("area_density", dV)):
        error.value_check("<HRM97350113E>", not field.is_matrix, f"{name} must be scalar")
        error.value_check(
            "<HRM97350114E>",
            bool(np.all(np.isfinite(field.values))),
            f"{name} contains non-finite values",
        )
        error.value_check(
            "<HRM97350115E>",
            float(np.max(np.abs(field.values.imag))) == 0.0,
            f"{name} must be real",
        )
    error.value_check(
        "<HRM97350116E>",
        bool(np.all(dV.values.real > 0.0)),
        "area_density must be positive at every node",
    )
    log.info(f"Loaded synthetic metric {manifest_path} (chi={chi}, N={K_field.domain.N})")
    return SyntheticMetric(
        K=K_field.with_values(K_field.values.real),
        dV=dV.with_values(dV.values.real),
        chi=chi,
    )


## Flatness sweep ##############################################################


def window_mask(report: GeometryReport, fraction: Optional[float] = None) -> np.ndarray:
    """Valid nodes inside the centered window of half-width fraction * L"""
    fraction = get_config().harmonic.entropy.window_fraction if fraction is None else fraction
    domain = report.domain
    if domain.is_torus:
        return report.valid
    x, y = domain.coordinates
    half_width = fraction * domain.L
    return report.valid & (np.abs(x) <= half_width) & (np.abs(y) <= half_width)


def window_statistics(
    t: float, status: str, report: Optional[GeometryReport], fraction: Optional[float] = None
) -> SweepRow:
    """dV-weighted window means and sups of |K|, |B|^2 and sqrt(-K)"""
    if report is None:
        return SweepRow(
            t=float(t),
            status=status,
            k_abs_mean=None,
            k_abs_sup=None,
            b_norm_sq_mean=None,
            b_norm_sq_sup=None,
            integrand_mean=None,
        )
    domain = report.domain
    mask = window_mask(report, fraction)
    density = report.pullback.area_element()
    area = domain.integrate(density, mask=mask)

    def mean(values: np.ndarray) -> Optional[float]:
        selected = mask & np.isfinite(values)
        if area <= 0.0 or not np.any(selected):
            return None
        return float(domain.integrate(values, density, mask=selected) / area)

    def sup(values: np.ndarray) -> Optional[float]:
        selected = mask & np.isfinite(values)
        return float(np.max(values[selected])) if np.any(selected) else None

    K_abs = np.abs(report.K_induced)
    return SweepRow(
        t=float(t),
        status=status,
        k_abs_mean=mean(K_abs),
        k_abs_sup=sup(K_abs),
        b_norm_sq_mean=mean(report.b_norm_sq),
        b_norm_sq_sup=sup(report.b_norm_sq),
        integrand_mean=mean(np.sqrt(np.maximum(-report.K_induced, 0.0))),
    )


def flatness_sweep(
    t_values: Iterable[float],
    run_member: Callable[[float], Tuple[str, Optional[GeometryReport]]],
    fraction: Optional[float] = None,
    workers: Optional[int] = None,
) -> SweepTable:
    """Tabulate window curvature statistics over a family of runs.

    Args:
        t_values: Iterable[float]
            Multipliers of the top differential.
        run_member: Callable[[float], (status, GeometryReport or None)]
            Solves and analyses one member; a failed member returns a
            status with no report.
        fraction: Optional[float]
            Window half-width as a fraction of L.
        workers: Optional[int]
            Thread count; rows are always ordered by the input t order.
    Returns:
        SweepTable
    """
    workers = get_config().harmonic.parallelism.sweep_workers if workers is None else workers
    t_values = [float(t) for t in t_values]

    def member(t: float) -> SweepRow:
        try:
            status, report = run_member(t)
        except (ValueError, np.linalg.LinAlgError) as err:
            log.warning(f"Sweep member t={t:g} failed: {err}")
            return window_statistics(t, "Error", None)
        log.info(f"Sweep member t={t:g}: {status}")
        return window_statistics(t, status, report, fraction)

    with ThreadPoolExecutor(max_workers=max(int(workers), 1)) as pool:
        rows = list(pool.map(member, t_values))
    return SweepTable(rows=rows)


def write_sweep_csv(table: SweepTable, path: str):
    columns = ["t", "status", "k_abs_mean", "k_abs_sup", "b_norm_sq_mean", "b_norm_sq_sup", "integrand_mean"]
    with open(path, "w", newline="") as handle:
        handle.write(f"# format={SWEEP_CSV_FORMAT} version={SWEEP_CSV_VERSION}\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in table.rows:
            writer.writerow(
                ["" if getattr(row, name) is None else _cell(getattr(row, name)) for name in columns]
            )
    log.info(f"Wrote sweep table {path}")


def _cell(value):
    return repr(float(value)) if isinstance(value, float) else str(value)
