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
# Standard
import csv

# Third Party
import numpy as np
import pytest

# Local
from caikit_harmonic.toolkit.domain import SurfaceDomain
from caikit_harmonic.toolkit.geometry import (
    MAX_LISTED_BRANCH_POINTS,
    PullbackMetric,
    ambient_sectional,
    build_geometry_report,
    energy_density,
    evaluation_mask,
    export_csv,
    gauge_normalize,
    gauss_equation_curvature,
    immersion_certificate,
    induced_curvature,
    is_conformal,
    map_hessian,
    pullback_metric,
)
from caikit_harmonic.toolkit.higgs import circle_action, fiducial_metric
from caikit_harmonic.toolkit.metric import HermitianMetricField
from tests.conftest import hitchin_field


def _linear_patch_pair():
    domain = SurfaceDomain.patch(32, 1.0)
    phi = hitchin_field(2, domain, alpha_1=[0.5, 1.0])
    return phi, HermitianMetricField.identity(domain, 2)


## Pullback metric #############################################################


def test_identity_metric_leaves_phi_unchanged(n2_torus_phi):
    metric = HermitianMetricField.identity(n2_torus_phi.domain, 2)
    phi_hat = gauge_normalize(n2_torus_phi, metric)
    np.testing.assert_allclose(phi_hat.values, n2_torus_phi.phi.values, atol=1e-15)


def test_pullback_is_symmetric_positive_semidefinite():
    phi, metric = _linear_patch_pair()
    pullback = pullback_metric(gauge_normalize(phi, metric))
    assert np.all(pullback.g11 >= 0.0)
    assert np.all(pullback.g22 >= 0.0)
    assert np.all(pullback.detg >= -1e-12 * np.max(pullback.g11) ** 2)


def test_identity_metric_pullback_determinant():
    # Off-diagonal entries a (upper) and 1 (lower): det g = 4 (|a|^2 - 1)^2
    phi, metric = _linear_patch_pair()
    pullback = pullback_metric(gauge_normalize(phi, metric))
    a = phi.phi.values[..., 0, 1]
    np.testing.assert_allclose(pullback.detg, 4.0 * (np.abs(a) ** 2 - 1.0) ** 2, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(pullback.g11 - pullback.g22, 8.0 * a.real, atol=1e-12)


def test_killing_form_is_2n_times_trace_form(n3_cyclic_phi):
    phi_hat = gauge_normalize(n3_cyclic_phi, fiducial_metric(n3_cyclic_phi))
    trace = pullback_metric(phi_hat, 1.0, "trace")
    killing = pullback_metric(phi_hat, 1.0, "killing")
    assert killing.scale == pytest.approx(6.0 * trace.scale)
    np.testing.assert_allclose(killing.g11, 6.0 * trace.g11, rtol=1e-13)
    np.testing.assert_allclose(killing.g12, 6.0 * trace.g12, atol=1e-13)


def test_circle_action_preserves_energy_and_area():
    phi, metric = _linear_patch_pair()
    phi_hat = gauge_normalize(phi, metric)
    rotated = circle_action(phi_hat, np.pi / 5)
    density, total = energy_density(phi_hat)
    rotated_density, rotated_total = energy_density(rotated)
    np.testing.assert_allclose(rotated_density.values, density.values, rtol=1e-12)
    assert rotated_total == pytest.approx(total, rel=1e-12)
    np.testing.assert_allclose(
        pullback_metric(rotated).detg, pullback_metric(phi_hat).detg, rtol=1e-9, atol=1e-12
    )


## Certificate and conformality ################################################


def test_evaluation_mask_drops_patch_rings(patch32, torus16):
    mask = evaluation_mask(patch32, 2)
    assert not mask[1, 10] and mask[2, 10]
    assert mask.sum() == 29 * 29
    assert evaluation_mask(torus16).all()


def test_constant_n2_oracle_is_degenerate_everywhere(n2_torus_phi):
    metric = HermitianMetricField.identity(n2_torus_phi.domain, 2)
    pullback = pullback_metric(gauge_normalize(n2_torus_phi, metric))
    points, flags = immersion_certificate(pullback)
    assert flags.all()
    assert len(points) == 256
    assert (points[0].i, points[0].j) == (0, 0)
    assert (points[1].i, points[1].j) == (0, 1)


def test_degenerate_report_summary(n2_torus_phi):
    report = build_geometry_report(n2_torus_phi, HermitianMetricField.identity(n2_torus_phi.domain, 2))
    assert report.degenerate
    summary = report.summary()
    assert summary.degenerate
    assert summary.branch_point_count == 256
    assert len(summary.branch_points) == MAX_LISTED_BRANCH_POINTS
    assert summary.k_min is None and summary.sec_max is None
    assert summary.conformality_defect == -1.0
    assert np.isnan(report.K_induced).all()


def test_hopf_differential_matches_the_constant(n2_torus_phi):
    summary = build_geometry_report(
        n2_torus_phi, HermitianMetricField.identity(n2_torus_phi.domain, 2)
    ).summary()
    assert summary.hopf_sup == pytest.approx(2.0 * abs(summary.hopf_constant), rel=1e-12)


def test_nonzero_hopf_is_not_conformal():
    phi, metric = _linear_patch_pair()
    pullback = pullback_metric(gauge_normalize(phi, metric))
    conformal, defect = is_conformal(pullback)
    assert not conformal
    assert defect > 1e-3


## Curvatures ##################################################################


def test_cyclic_torus_is_a_flat_immersion(n3_cyclic_phi):
    report = build_geometry_report(n3_cyclic_phi, fiducial_metric(n3_cyclic_phi))
    summary = report.summary()
    assert report.conformal
    assert summary.branch_point_count == 0
    assert summary.min_detg > 0.0
    assert summary.hopf_sup < 1e-12
    np.testing.assert_allclose(report.K_induced, 0.0, atol=1e-9)
    np.testing.assert_allclose(report.sec_ambient, 0.0, atol=1e-9)
    assert summary.b_norm_sq_max == pytest.approx(0.0, abs=1e-8)
    assert summary.gauss_inconsistent_nodes == 0


def test_fuchsian_patch_is_totally_geodesic(fuchsian_patch_solution):
    phi, metric = fuchsian_patch_solution
    report = build_geometry_report(phi, metric)
    valid = report.valid
    assert report.conformal
    assert valid.sum() == 13 * 13
    np.testing.assert_allclose(report.sec_ambient[valid], -2.0, atol=1e-10)
    np.testing.assert_allclose(report.K_induced[valid], -2.0, atol=1e-3)
    assert float(np.nanmax(np.abs(report.b_norm_sq))) < 5e-3


def test_ambient_sectional_is_nan_off_the_valid_nodes(fuchsian_patch_solution):
    phi, metric = fuchsian_patch_solution
    phi_hat = gauge_normalize(phi, metric)
    pullback = pullback_metric(phi_hat)
    valid = evaluation_mask(phi.domain)
    sec = ambient_sectional(phi_hat, pullback, valid)
    assert np.isnan(sec[0, 0])
    assert np.isfinite(sec[valid]).all()


@pytest.mark.parametrize("kappa", [2.0, 0.25])
def test_curvatures_scale_inversely_with_kappa(kappa):
    phi, metric = _linear_patch_pair()
    base = build_geometry_report(phi, metric, 1.0)
    scaled = build_geometry_report(phi, metric, kappa)
    np.testing.assert_array_equal(base.valid, scaled.valid)
    valid = base.valid
    np.testing.assert_allclose(scaled.pullback.g11, kappa * base.pullback.g11, rtol=1e-13)
    np.testing.assert_allclose(scaled.K_induced[valid], base.K_induced[valid] / kappa, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(scaled.sec_ambient[valid], base.sec_ambient[valid] / kappa, rtol=1e-10)
    assert scaled.summary().kappa == kappa


def test_non_conformal_report_has_no_second_fundamental_form():
    phi, metric = _linear_patch_pair()
    report = build_geometry_report(phi, metric)
    assert not report.conformal
    assert np.isnan(report.b_norm_sq).all()
    assert np.isnan(report.conformal_factor).all()
    assert report.summary().b_norm_sq_max is None


def test_fuchsian_identity_energy_density_is_two_kappa(torus16):
    phi = hitchin_field(2, torus16)
    phi_hat = gauge_normalize(phi, HermitianMetricField.identity(torus16, 2))
    density, total = energy_density(phi_hat, kappa=1.5)
    np.testing.assert_allclose(density.values, 3.0, rtol=1e-14)
    assert total == pytest.approx(3.0 * torus16.area, rel=1e-14)


def test_round_conformal_factor_has_constant_curvature():
    # exp(2 psi) with psi = -log(1 + r^2) is the sphere of curvature 4
    domain = SurfaceDomain.patch(64, 1.0)
    x, y = domain.coordinates
    factor = (1.0 + x**2 + y**2) ** -2
    pullback = PullbackMetric(domain, factor, np.zeros_like(factor), factor, 1.0)
    valid = evaluation_mask(domain)
    curvature = induced_curvature(pullback, valid, conformal=True)
    np.testing.assert_allclose(curvature[valid], 4.0, atol=1e-3)
    assert np.isnan(curvature[0, 0])
    brioschi = induced_curvature(pullback, valid, conformal=False, method="brioschi")
    np.testing.assert_allclose(brioschi[valid], 4.0, atol=2e-2)


def test_conformal_curvature_next_to_the_excluded_ring():
    domain = SurfaceDomain.patch(32, 1.0)
    x, y = domain.coordinates
    factor = (1.0 + x**2 + y**2) ** -2
    pullback = PullbackMetric(domain, factor, np.zeros_like(factor), factor, 1.0)
    valid = evaluation_mask(domain)
    next_to_ring = valid & ~evaluation_mask(domain, 3)
    curvature = induced_curvature(pullback, valid, conformal=True)
    np.testing.assert_allclose(curvature[next_to_ring], 4.0, atol=1e-2)


def test_brioschi_skips_nearly_degenerate_nodes():
    domain = SurfaceDomain.patch(32, 1.0)
    x, y = domain.coordinates
    shear = 0.9999 * np.exp(-(x**2 + y**2) / 0.01)
    ones = np.ones_like(x)
    pullback = PullbackMetric(domain, ones, shear, ones, 1.0)
    valid = evaluation_mask(domain)
    curvature = induced_curvature(pullback, valid, conformal=False, method="brioschi")
    centre = domain.N // 2
    assert np.isnan(curvature[centre, centre])
    assert np.isfinite(curvature[2, 2])
    assert np.isnan(curvature[0, 0])


def test_unknown_curvature_method_is_rejected():
    phi, metric = _linear_patch_pair()
    pullback = pullback_metric(gauge_normalize(phi, metric))
    valid = evaluation_mask(phi.domain)
    with pytest.raises(ValueError):
        induced_curvature(pullback, valid, conformal=False, method="spline")
    with pytest.raises(ValueError):
        induced_curvature(pullback, valid, conformal=False, method="gauss")


def test_gauss_route_on_a_linear_n2_patch_matches_the_ambient_plane():
    # With a diagonal metric every n = 2 tangent plane lies in one totally
    # geodesic H^2, so B = 0 and K = Sec = -2
    phi, metric = _linear_patch_pair()
    report = build_geometry_report(phi, metric)
    valid = report.valid
    assert not report.conformal
    assert valid.any()
    conditioned = valid & (report.pullback.detg > 1e-3 * np.max(report.pullback.detg[valid]))
    np.testing.assert_allclose(report.K_induced[conditioned], -2.0, atol=1e-8)
    assert np.all(report.K_induced[valid] <= report.sec_ambient[valid] + 1e-8)
    assert report.summary().k_max <= 0.0


def test_gauss_route_agrees_with_the_conformal_factor(fuchsian_patch_solution):
    phi, metric = fuchsian_patch_solution
    report = build_geometry_report(phi, metric)
    valid = report.valid
    phi_hat = gauge_normalize(phi, metric)
    gauss = gauss_equation_curvature(phi_hat, map_hessian(phi, metric), report.pullback, valid)
    np.testing.assert_allclose(gauss[valid], -2.0, atol=1e-9)
    np.testing.assert_allclose(gauss[valid], report.K_induced[valid], atol=1e-3)
    assert np.isnan(gauss[0, 0])


def test_gauss_route_stays_below_the_ambient_curvature(patch32):
    phi = hitchin_field(3, patch32, alpha_1=[0.3, 0.2], alpha_2=[1.0, 0.5])
    report = build_geometry_report(phi, HermitianMetricField.identity(patch32, 3))
    valid = report.valid
    assert not report.conformal
    assert np.isfinite(report.K_induced[valid]).all()
    assert np.all(report.K_induced[valid] <= report.sec_ambient[valid] + 1e-10)


## Output ######################################################################


def test_fields_are_named_scalar_snapshots(n3_cyclic_phi):
    fields = build_geometry_report(n3_cyclic_phi, fiducial_metric(n3_cyclic_phi)).fields()
    assert set(fields) == {
        "g11",
        "g12",
        "g22",
        "detg",
        "conformal_factor",
        "K_induced",
        "Sec_ambient",
        "B_norm_sq",
        "energy_density",
        "hopf",
    }
    assert all(not field.is_matrix for field in fields.values())


def test_export_csv_lists_evaluation_nodes(fuchsian_patch_solution, tmp_path):
    phi, metric = fuchsian_patch_solution
    report = build_geometry_report(phi, metric)
    path = tmp_path / "geometry.csv"
    export_csv(report, str(path))
    with open(path, newline="") as handle:
        header = handle.readline()
        rows = list(csv.reader(handle))
    assert header == "# format=caikit-harmonic/geometry-csv version=1\n"
    assert rows[0] == ["x", "y", "K", "Sec", "Bnormsq", "detg"]
    assert len(rows) - 1 == int(report.evaluation.sum())
    first = [float(value) for value in rows[1]]
    x, y = phi.domain.coordinates
    assert first[0] == x[2, 2] and first[1] == y[2, 2]
    assert first[3] == pytest.approx(-2.0, abs=1e-10)
