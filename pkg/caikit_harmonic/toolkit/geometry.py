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
"""Harmonic-map geometry of a solved (phi, H) pair.

The differential of the equivariant map at a node is modelled in the unitary
gauge phi_hat = H^1/2 phi H^-1/2: the coordinate tangent vectors are
xi_1 = phi_hat + phi_hat^dagger and xi_2 = i (phi_hat - phi_hat^dagger), both
Hermitian, and the pullback metric is g_ab = kappa Re tr(xi_a xi_b^dagger).
"""
# Standard
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple
import csv

# Third Party
import numpy as np

# First Party
from caikit import get_config
from caikit.core.exceptions import error_handler
import alog

# Local
from ..data_model import BranchPoint, GeometrySummary
from .domain import GridField, SurfaceDomain
from .higgs import HiggsField, hopf_differential
from .lie_core import bracket, hermitian_pairing, hopf_constant, metric_scale
from .metric import HermitianMetricField

log = alog.use_channel("GEOMT")
error = error_handler.get(log)

GEOMETRY_CSV_FORMAT = "caikit-harmonic/geometry-csv"
GEOMETRY_CSV_VERSION = 1
# Branch points listed individually in summaries; the count is always exact
MAX_LISTED_BRANCH_POINTS = 64


@dataclass(frozen=True, eq=False)
class PullbackMetric:
    domain: SurfaceDomain
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    scale: float

    @property
    def detg(self) -> np.ndarray:
        return self.g11 * self.g22 - self.g12**2

    def area_element(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.detg, 0.0))


def gauge_normalize(phi: HiggsField, metric: HermitianMetricField) -> GridField:
    """phi_hat = H^1/2 phi H^-1/2 per node (principal square root)"""
    metric.check_positive_definite()
    error.value_check(
        "<HRM86410101E>",
        metric.domain == phi.domain and metric.n == phi.n,
        "Metric and Higgs field live on different domains or have different ranks",
    )
    return GridField(phi.domain, metric.sqrt() @ phi.phi.values @ metric.inv_sqrt())


def tangent_vectors(phi_hat: GridField) -> Tuple[np.ndarray, np.ndarray]:
    values = phi_hat.values
    dagger = np.conj(np.swapaxes(values, -1, -2))
    return values + dagger, 1j * (values - dagger)


def pullback_metric(
    phi_hat: GridField, kappa: Optional[float] = None, form: Optional[str] = None
) -> PullbackMetric:
    """g_ab = kappa Re tr(xi_a xi_b^dagger) in the (x, y) coordinate frame"""
    scale = metric_scale(phi_hat.dim, kappa, form)
    xi_1, xi_2 = tangent_vectors(phi_hat)
    return PullbackMetric(
        domain=phi_hat.domain,
        g11=hermitian_pairing(xi_1, xi_1, kappa=scale).real,
        g12=hermitian_pairing(xi_1, xi_2, kappa=scale).real,
        g22=hermitian_pairing(xi_2, xi_2, kappa=scale).real,
        scale=scale,
    )


def evaluation_mask(domain: SurfaceDomain, ring: Optional[int] = None) -> np.ndarray:
    """Nodes where curvature and certificate statistics are evaluated"""
    ring = get_config().harmonic.geometry.boundary_ring if ring is None else ring
    return domain.interior_mask(ring)


def degenerate_mask(pullback: PullbackMetric, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """detg <= max(rel * max detg, abs * scale^2)"""
    config = get_config().harmonic.geometry
    detg = pullback.detg
    mask = evaluation_mask(pullback.domain) if mask is None else mask
    peak = float(np.max(detg[mask])) if np.any(mask) else 0.0
    threshold = max(config.branch_rel_eps * peak, config.branch_abs_eps * pullback.scale**2)
    return detg <= threshold


def immersion_certificate(
    pullback: PullbackMetric, mask: Optional[np.ndarray] = None
) -> Tuple[List[BranchPoint], np.ndarray]:
    """Nodes where the pullback metric degenerates (branch points).

    Returns:
        (branch points in row-major node order, boolean flag mask)
    """
    mask = evaluation_mask(pullback.domain) if mask is None else mask
    flags = degenerate_mask(pullback, mask) & mask
    x, y = pullback.domain.coordinates
    detg = pullback.detg
    points = [
        BranchPoint(
            i=int(i), j=int(j), x=float(x[i, j]), y=float(y[i, j]), detg=float(detg[i, j])
        )
        for i, j in np.argwhere(flags)
    ]
    if points:
        log.warning(f"Immersion certificate flagged {len(points)} degenerate nodes")
    return points, flags


def energy_density(
    phi_hat: GridField, kappa: Optional[float] = None, form: Optional[str] = None
) -> Tuple[GridField, float]:
    """Dirichlet energy density (g11 + g22)/2 and its integral"""
    pullback = pullback_metric(phi_hat, kappa, form)
    density = 0.5 * (pullback.g11 + pullback.g22)
    return GridField(phi_hat.domain, density), phi_hat.domain.integrate(density)


def is_conformal(pullback: PullbackMetric, mask: Optional[np.ndarray] = None) -> Tuple[bool, float]:
    """(|g11 - g22| + |g12| < tol * max g11 at every node, relative defect)"""
    mask = evaluation_mask(pullback.domain) if mask is None else mask
    tol = get_config().harmonic.geometry.conformal_tol
    peak = float(np.max(pullback.g11[mask])) if np.any(mask) else 0.0
    if peak <= 0.0:
        return False, float("inf")
    defect = np.abs(pullback.g11 - pullback.g22) + np.abs(pullback.g12)
    relative = float(np.max(defect[mask])) / peak
    return relative < tol, relative


GENERAL_CURVATURE_METHODS = ("gauss", "brioschi")


def map_hessian(phi: HiggsField, metric: HermitianMetricField) -> GridField:
    """psi = H^1/2 (d phi + [H^-1 dH, phi]) H^-1/2 per node.

    This is the (2,0) part of the Hessian of the harmonic map in the unitary
    gauge. The mixed part vanishes for holomorphic phi, so in the (x, y) frame
    h_xx = -h_yy = psi + psi^dagger and h_xy = i (psi - psi^dagger).
    """
    domain = phi.domain
    values = phi.phi.values
    connection = metric.inverse() @ domain.dz(metric.matrices())
    covariant = domain.dz(values) + bracket(connection, values)
    return GridField(domain, metric.sqrt() @ covariant @ metric.inv_sqrt())


def induced_curvature(
    pullback: PullbackMetric,
    valid: np.ndarray,
    conformal: Optional[bool] = None,
    phi_hat: Optional[GridField] = None,
    hessian: Optional[GridField] = None,
    method: Optional[str] = None,
) -> np.ndarray:
    """Gaussian curvature K_g of the pullback metric, NaN off the valid nodes.

    Conformal metrics use K = -laplacian(psi) / exp(2 psi) with
    exp(2 psi) = g11. Otherwise harmonic.geometry.general_curvature selects
    the Gauss equation with the map Hessian (needs phi_hat and hessian) or
    the Brioschi formula evaluated with the domain's difference operators.
    """
    domain = pullback.domain
    if not np.any(valid):
        return np.full(domain.shape, np.nan)
    if conformal is None:
        conformal = is_conformal(pullback, valid)[0]
    if not conformal:
        config = get_config().harmonic.geometry
        method = config.general_curvature if method is None else method
        error.value_check(
            "<HRM86410102E>",
            method in GENERAL_CURVATURE_METHODS,
            f"Unknown curvature method '{method}'",
        )
        if method == "gauss":
            error.value_check(
                "<HRM86410103E>",
                phi_hat is not None and hessian is not None,
                "The Gauss-equation curvature needs phi_hat and the map Hessian",
            )
            return gauss_equation_curvature(phi_hat, hessian, pullback, valid)

    # Only nodes without a positive-definite metric get placeholder entries
    detg = pullback.detg
    defined = np.isfinite(detg) & (detg > 0.0)
    E = np.where(defined, pullback.g11, 1.0)
    F = np.where(defined, pullback.g12, 0.0)
    G = np.where(defined, pullback.g22, 1.0)

    if conformal:
        psi = 0.5 * np.log(E)
        curvature = -domain.laplacian(psi) / E
        return np.where(valid, curvature, np.nan)

    curvature = _brioschi(domain, E, F, G)
    floor = get_config().harmonic.geometry.brioschi_detg_floor * float(np.median(detg[valid]))
    conditioned = valid & (detg >= floor)
    if np.any(valid & ~conditioned):
        log.warning(
            f"Brioschi curvature skipped at {int((valid & ~conditioned).sum())} "
            f"nearly degenerate nodes (detg < {floor:.3e})"
        )
    return np.where(conditioned, curvature, np.nan)


def _brioschi(domain: SurfaceDomain, E: np.ndarray, F: np.ndarray, G: np.ndarray) -> np.ndarray:
    dx, dy = domain.dx, domain.dy
    E_x, E_y = dx(E), dy(E)
    F_x, F_y = dx(F), dy(F)
    G_x, G_y = dx(G), dy(G)
    E_yy = dy(E_y)
    G_xx = dx(G_x)
    F_xy = dx(F_y)

    first = np.stack(
        [
            np.stack([-0.5 * E_yy + F_xy - 0.5 * G_xx, 0.5 * E_x, F_x - 0.5 * E_y], axis=-1),
            np.stack([F_y - 0.5 * G_x, E, F], axis=-1),
            np.stack([0.5 * G_y, F, G], axis=-1),
        ],
        axis=-2,
    )
    second = np.stack(
        [
            np.stack([np.zeros_like(E), 0.5 * E_y, 0.5 * G_x], axis=-1),
            np.stack([0.5 * E_y, E, F], axis=-1),
            np.stack([0.5 * G_x, F, G], axis=-1),
        ],
        axis=-2,
    )
    return (np.linalg.det(first) - np.linalg.det(second)) / (E * G - F**2) ** 2


def ambient_sectional(
    phi_hat: GridField, pullback: PullbackMetric, valid: np.ndarray
) -> np.ndarray:
    """Sec = -kappa tr([xi_1, xi_2][xi_1, xi_2]^dagger) / detg, NaN off the valid nodes"""
    xi_1, xi_2 = tangent_vectors(phi_hat)
    commutator = bracket(xi_1, xi_2)
    norm = hermitian_pairing(commutator, commutator, kappa=pullback.scale).real
    detg = np.where(valid, pullback.detg, 1.0)
    return np.where(valid, -norm / detg, np.nan)


def gauss_equation_curvature(
    phi_hat: GridField, hessian: GridField, pullback: PullbackMetric, valid: np.ndarray
) -> np.ndarray:
    """K = Sec - (|B_xx|^2 + |B_xy|^2) / detg, NaN off the valid nodes.

    B is the part of the map Hessian normal to span{xi_1, xi_2} in the
    pairing kappa Re tr(A B^dagger), so K <= Sec holds node by node. Only
    first derivatives of the map enter, which keeps nearly degenerate nodes
    well conditioned.
    """
    scale = pullback.scale
    xi_1, xi_2 = tangent_vectors(phi_hat)
    psi = hessian.values
    psi_dagger = np.conj(np.swapaxes(psi, -1, -2))

    def coefficient(v: np.ndarray, e: np.ndarray) -> np.ndarray:
        return hermitian_pairing(v, e, kappa=scale).real[..., None, None]

    def unit(v: np.ndarray) -> np.ndarray:
        norm = np.sqrt(np.maximum(hermitian_pairing(v, v, kappa=scale).real, 0.0))
        return v / np.where(norm > 0.0, norm, 1.0)[..., None, None]

    e_1 = unit(xi_1)
    e_2 = unit(xi_2 - coefficient(xi_2, e_1) * e_1)

    def normal_sq(v: np.ndarray) -> np.ndarray:
        normal = v - coefficient(v, e_1) * e_1 - coefficient(v, e_2) * e_2
        return hermitian_pairing(normal, normal, kappa=scale).real

    shape = normal_sq(psi + psi_dagger) + normal_sq(1j * (psi - psi_dagger))
    sec = ambient_sectional(phi_hat, pullback, valid)
    detg = np.where(valid, pullback.detg, 1.0)
    return np.where(valid, sec - shape / detg, np.nan)


def second_fundamental_norm(
    K_induced: np.ndarray, sec_ambient: np.ndarray, conformal: bool
) -> Tuple[np.ndarray, np.ndarray]:
    """|B|^2 = 2 (Sec - K) from the Gauss equation of a minimal surface.

    Returns (|B|^2, inconsistent-node mask). Values within -clip_tol of zero
    are clipped; values below -inconsistency_tol are flagged. Non-conformal
    surfaces are not minimal, so the field is NaN there.
    """
    config = get_config().harmonic.geometry
    if not conformal:
        nan = np.full(K_induced.shape, np.nan)
        return nan, np.zeros(K_induced.shape, dtype=bool)
    norm = 2.0 * (sec_ambient - K_induced)
    with np.errstate(invalid="ignore"):
        clipped = np.where((norm < 0.0) & (norm >= -config.clip_tol), 0.0, norm)
        inconsistent = clipped < -config.inconsistency_tol
    if np.any(inconsistent):
        log.warning(
            f"Gauss equation inconsistent at {int(inconsistent.sum())} nodes "
            f"(min |B|^2 = {float(np.nanmin(clipped)):.3e})"
        )
    return clipped, inconsistent


@dataclass(frozen=True, eq=False)
class GeometryReport:
    """Per-node geometry fields of one (phi, H) pair"""

    domain: SurfaceDomain
    kappa: float
    pullback: PullbackMetric
    hopf: np.ndarray
    hopf_constant: float
    energy_density: np.ndarray
    energy_total: float
    K_induced: np.ndarray
    sec_ambient: np.ndarray
    b_norm_sq: np.ndarray
    gauss_inconsistent: np.ndarray
    conformal: bool
    conformality_defect: float
    branch_points: List[BranchPoint]
    branch_flags: np.ndarray
    evaluation: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.evaluation & ~self.branch_flags

    @property
    def degenerate(self) -> bool:
        return not np.any(self.valid)

    @property
    def conformal_factor(self) -> np.ndarray:
        """g11 where the run is conformal, NaN otherwise"""
        if self.conformal:
            return self.pullback.g11
        return np.full(self.domain.shape, np.nan)

    def summary(self) -> GeometrySummary:
        evaluation = self.evaluation
        detg = self.pullback.detg[evaluation]
        x, y = self.domain.coordinates
        b_max, b_x, b_y = None, None, None
        if self.conformal and np.any(np.isfinite(self.b_norm_sq)):
            index = np.unravel_index(np.nanargmax(self.b_norm_sq), self.domain.shape)
            b_max = float(self.b_norm_sq[index])
            b_x, b_y = float(x[index]), float(y[index])
        return GeometrySummary(
            kappa=float(self.kappa),
            metric_scale=float(self.pullback.scale),
            min_detg=float(np.min(detg)),
            max_detg=float(np.max(detg)),
            branch_point_count=len(self.branch_points),
            branch_points=self.branch_points[:MAX_LISTED_BRANCH_POINTS],
            degenerate=self.degenerate,
            conformal=bool(self.conformal),
            conformality_defect=_finite_or(self.conformality_defect, -1.0),
            hopf_constant=float(self.hopf_constant),
            hopf_sup=float(np.max(np.abs(self.hopf))),
            energy_total=float(self.energy_total),
            k_min=_nan_stat(np.nanmin, self.K_induced),
            k_max=_nan_stat(np.nanmax, self.K_induced),
            sec_min=_nan_stat(np.nanmin, self.sec_ambient),
            sec_max=_nan_stat(np.nanmax, self.sec_ambient),
            b_norm_sq_max=b_max,
            b_norm_sq_argmax_x=b_x,
            b_norm_sq_argmax_y=b_y,
            gauss_inconsistent_nodes=int(self.gauss_inconsistent.sum()),
        )

    def fields(self) -> Dict[str, GridField]:
        """Named scalar fields for snapshot output"""
        named = {
            "g11": self.pullback.g11,
            "g12": self.pullback.g12,
            "g22": self.pullback.g22,
            "detg": self.pullback.detg,
            "conformal_factor": self.conformal_factor,
            "K_induced": self.K_induced,
            "Sec_ambient": self.sec_ambient,
            "B_norm_sq": self.b_norm_sq,
            "energy_density": self.energy_density,
            "hopf": self.hopf,
        }
        return {name: GridField(self.domain, values) for name, values in named.items()}


def build_geometry_report(
    phi: HiggsField,
    metric: HermitianMetricField,
    kappa: Optional[float] = None,
    form: Optional[str] = None,
) -> GeometryReport:
    """Run every geometry operation on a (phi, H) pair"""
    kappa = get_config().harmonic.metric.kappa if kappa is None else kappa
    domain = phi.domain
    phi_hat = gauge_normalize(phi, metric)
    pullback = pullback_metric(phi_hat, kappa, form)
    evaluation = evaluation_mask(domain)
    branch_points, flags = immersion_certificate(pullback, evaluation)
    valid = evaluation & ~flags
    conformal, defect = is_conformal(pullback, valid) if np.any(valid) else (False, float("inf"))

    K_induced = induced_curvature(
        pullback, valid, conformal, phi_hat=phi_hat, hessian=map_hessian(phi, metric)
    )
    sec_ambient = ambient_sectional(phi_hat, pullback, valid)
    b_norm_sq, inconsistent = second_fundamental_norm(K_induced, sec_ambient, conformal)
    density, total = energy_density(phi_hat, kappa, form)
    if not np.any(valid):
        log.warning("Pullback metric is degenerate at every node; curvatures are undefined")

    return GeometryReport(
        domain=domain,
        kappa=float(kappa),
        pullback=pullback,
        hopf=hopf_differential(phi_hat).values,
        hopf_constant=hopf_constant(phi.basis).real,
        energy_density=density.values,
        energy_total=total,
        K_induced=K_induced,
        sec_ambient=sec_ambient,
        b_norm_sq=b_norm_sq,
        gauss_inconsistent=inconsistent,
        conformal=conformal,
        conformality_defect=defect,
        branch_points=branch_points,
        branch_flags=flags,
        evaluation=evaluation,
    )


def export_csv(report: GeometryReport, path: str):
    """Write x, y, K, Sec, Bnormsq, detg per evaluation node"""
    x, y = report.domain.coordinates
    columns = (x, y, report.K_induced, report.sec_ambient, report.b_norm_sq, report.pullback.detg)
    with open(path, "w", newline="") as handle:
        handle.write(f"# format={GEOMETRY_CSV_FORMAT} version={GEOMETRY_CSV_VERSION}\n")
        writer = csv.writer(handle)
        writer.writerow(["x", "y", "K", "Sec", "Bnormsq", "detg"])
        for i, j in np.argwhere(report.evaluation):
            writer.writerow([repr(float(column[i, j])) for column in columns])
    log.info(f"Wrote geometry table {path}")


def _nan_stat(reducer, values: np.ndarray) -> Optional[float]:
    if not np.any(np.isfinite(values)):
        return None
    return float(reducer(values))


def _finite_or(value: float, fallback: float) -> float:
    return float(value) if np.isfinite(value) else fallback
