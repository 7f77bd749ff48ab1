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
import json
import os
import shutil

# Third Party
import numpy as np
import pytest

# Local
from caikit_harmonic.data_model import SweepRow, SweepTable
from caikit_harmonic.toolkit.domain import GridField
from caikit_harmonic.toolkit.entropy import (
    EntropySource,
    flatness_sweep,
    gauss_bonnet_check,
    load_synthetic_metric,
    manning_bound,
    rescale_metric,
    window_mask,
    window_statistics,
    write_sweep_csv,
)
from caikit_harmonic.toolkit.fld_io import write_field
from caikit_harmonic.toolkit.geometry import build_geometry_report
from caikit_harmonic.toolkit.higgs import fiducial_metric
import caikit_harmonic

GENUS2 = os.path.join(
    os.path.dirname(caikit_harmonic.__file__), "resources", "synthetic", "hyperbolic_genus2"
)


def _scalar(domain, values):
    return GridField(domain, np.broadcast_to(np.asarray(values, dtype=float), domain.shape).copy())


## Manning bound ###############################################################


def test_hyperbolic_genus2_bound_is_one():
    synthetic = load_synthetic_metric(GENUS2)
    assert synthetic.chi == -2
    report = manning_bound(
        synthetic.K, synthetic.dV, chi=synthetic.chi, source=EntropySource.SYNTHETIC
    )
    assert report.bound == pytest.approx(1.0, abs=1e-12)
    assert report.volume == pytest.approx(4.0 * np.pi, rel=1e-12)
    assert report.gauss_bonnet_defect < 1e-12
    assert report.kind == "bound"
    assert report.source == "SyntheticMetric"
    assert not report.degenerate


def test_manifest_file_path_is_accepted():
    synthetic = load_synthetic_metric(os.path.join(GENUS2, "manifest.json"))
    assert synthetic.K.domain.N == 16


def test_piecewise_curvature_bound(torus16):
    x, _ = torus16.coordinates
    K = _scalar(torus16, np.where(x < 0.5, -1.0, -4.0))
    report = manning_bound(K, _scalar(torus16, 1.0))
    assert report.bound == pytest.approx(1.5, abs=1e-12)
    assert report.integrand_min == pytest.approx(1.0)
    assert report.integrand_max == pytest.approx(2.0)
    assert report.gauss_bonnet_defect is None


def test_inconsistent_pair_reports_a_defect(torus16):
    defect = gauss_bonnet_check(_scalar(torus16, -1.0), _scalar(torus16, 1.0), -2)
    assert defect == pytest.approx(4.0 * np.pi - 1.0, rel=1e-12)


def test_positive_curvature_is_rejected(torus16):
    with pytest.raises(ValueError, match="non-positive"):
        manning_bound(_scalar(torus16, 0.5), _scalar(torus16, 1.0))


def test_negative_area_density_is_rejected(torus16):
    with pytest.raises(ValueError, match="non-negative"):
        manning_bound(_scalar(torus16, -1.0), _scalar(torus16, -1.0))


def test_nan_nodes_are_left_out(torus16):
    values = np.full(torus16.shape, -4.0)
    values[:8] = np.nan
    values[8:] = -1.0
    report = manning_bound(GridField(torus16, values), _scalar(torus16, 1.0))
    assert report.bound == pytest.approx(1.0, abs=1e-12)
    assert report.volume == pytest.approx(0.5, rel=1e-12)


def test_zero_area_is_degenerate(torus16):
    report = manning_bound(_scalar(torus16, -1.0), _scalar(torus16, 0.0))
    assert report.degenerate
    assert report.bound == 0.0


@pytest.mark.parametrize("factor", [2.0, 0.5, 3.0])
def test_rescaling_divides_the_bound(factor):
    synthetic = load_synthetic_metric(GENUS2)
    base = manning_bound(synthetic.K, synthetic.dV, source=EntropySource.SYNTHETIC)
    K, dV = rescale_metric(synthetic.K, synthetic.dV, factor)
    scaled = manning_bound(K, dV, chi=synthetic.chi, source=EntropySource.SYNTHETIC)
    assert scaled.bound == pytest.approx(base.bound / factor, rel=1e-12)
    assert scaled.gauss_bonnet_defect < 1e-10


def test_rescale_factor_must_be_positive(torus16):
    with pytest.raises(ValueError):
        rescale_metric(_scalar(torus16, -1.0), _scalar(torus16, 1.0), 0.0)


def test_cross_check_agrees_on_a_totally_geodesic_patch(fuchsian_patch_solution):
    phi, metric = fuchsian_patch_solution
    report = build_geometry_report(phi, metric)
    domain = phi.domain
    entropy = manning_bound(
        GridField(domain, report.K_induced),
        GridField(domain, report.pullback.area_element()),
        chi=1,
        mask=report.valid,
        sec=GridField(domain, report.sec_ambient),
        b_norm_sq=GridField(domain, report.b_norm_sq),
    )
    assert entropy.kind == "local_statistic"
    assert entropy.gauss_bonnet_defect is None
    assert entropy.bound == pytest.approx(np.sqrt(2.0), abs=1e-3)
    assert entropy.cross_check_defect < 1e-3


def test_gauss_bonnet_needs_compact_data(patch32):
    with pytest.raises(ValueError, match="compact"):
        gauss_bonnet_check(_scalar(patch32, -1.0), _scalar(patch32, 1.0), 1)


## Synthetic metric files ######################################################


@pytest.fixture
def genus2_copy(tmp_path):
    target = tmp_path / "genus2"
    shutil.copytree(GENUS2, target)
    return target


def _edit_manifest(directory, **changes):
    path = directory / "manifest.json"
    manifest = json.loads(path.read_text())
    manifest.update(changes)
    for key, value in changes.items():
        if value is None:
            del manifest[key]
    path.write_text(json.dumps(manifest))


def test_unsupported_manifest_version(genus2_copy):
    _edit_manifest(genus2_copy, version=2)
    with pytest.raises(ValueError, match="version 2"):
        load_synthetic_metric(str(genus2_copy))


def test_manifest_missing_chi(genus2_copy):
    _edit_manifest(genus2_copy, chi=None)
    with pytest.raises(ValueError, match="chi"):
        load_synthetic_metric(str(genus2_copy))


def test_non_positive_area_density(genus2_copy):
    synthetic = load_synthetic_metric(str(genus2_copy))
    write_field(str(genus2_copy / "dV.fld"), synthetic.dV.with_values(np.zeros(synthetic.dV.values.shape)))
    with pytest.raises(ValueError, match="positive"):
        load_synthetic_metric(str(genus2_copy))


def test_missing_manifest(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_synthetic_metric(str(tmp_path))


## Flatness sweep ##############################################################


def test_window_statistics_on_a_flat_torus(n3_cyclic_phi):
    report = build_geometry_report(n3_cyclic_phi, fiducial_metric(n3_cyclic_phi))
    row = window_statistics(1.0, "Converged", report)
    assert row.k_abs_mean == pytest.approx(0.0, abs=1e-9)
    assert row.b_norm_sq_sup == pytest.approx(0.0, abs=1e-8)
    assert row.integrand_mean < 1e-4
    assert window_mask(report).all()


def test_window_statistics_on_a_patch(fuchsian_patch_solution):
    phi, metric = fuchsian_patch_solution
    report = build_geometry_report(phi, metric)
    narrow = window_mask(report, 0.25)
    wide = window_mask(report, 0.5)
    assert narrow.sum() < wide.sum() <= report.valid.sum()
    assert not np.any(narrow & ~wide)
    row = window_statistics(1.0, "Converged", report, 0.5)
    assert row.k_abs_mean == pytest.approx(2.0, abs=1e-3)
    assert row.integrand_mean == pytest.approx(np.sqrt(2.0), abs=1e-3)


def test_failed_member_has_empty_statistics():
    row = window_statistics(4.0, "MaxIter", None)
    assert row.status == "MaxIter"
    assert row.k_abs_mean is None and row.integrand_mean is None


def test_flatness_sweep_keeps_input_order(n3_cyclic_phi):
    report = build_geometry_report(n3_cyclic_phi, fiducial_metric(n3_cyclic_phi))

    def run_member(t):
        if t == 2.0:
            raise ValueError("diverged")
        if t == 8.0:
            return "MaxIter", None
        return "Converged", report

    table = flatness_sweep([4, 1, 2, 8], run_member, workers=3)
    assert [row.t for row in table.rows] == [4.0, 1.0, 2.0, 8.0]
    assert [row.status for row in table.rows] == ["Converged", "Converged", "Error", "MaxIter"]
    assert table.rows[0].k_abs_mean is not None
    assert table.rows[2].k_abs_mean is None


def test_write_sweep_csv(tmp_path):
    table = SweepTable(
        rows=[
            SweepRow(
                t=1.0,
                status="Converged",
                k_abs_mean=0.25,
                k_abs_sup=0.5,
                b_norm_sq_mean=0.0,
                b_norm_sq_sup=0.125,
                integrand_mean=0.5,
            ),
            SweepRow(
                t=4.0,
                status="Diverged",
                k_abs_mean=None,
                k_abs_sup=None,
                b_norm_sq_mean=None,
                b_norm_sq_sup=None,
                integrand_mean=None,
            ),
        ]
    )
    path = tmp_path / "sweep.csv"
    write_sweep_csv(table, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "# format=caikit-harmonic/sweep-csv version=1"
    assert lines[1] == "t,status,k_abs_mean,k_abs_sup,b_norm_sq_mean,b_norm_sq_sup,integrand_mean"
    assert lines[2] == "1.0,Converged,0.25,0.5,0.0,0.125,0.5"
    assert lines[3] == "4.0,Diverged,,,,,"
