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
import shutil

# Third Party
import numpy as np
import pytest

# Local
from caikit_harmonic.data_model import EntropyReport, GeometrySummary
from caikit_harmonic.modules.harmonic_map import HarmonicMap
from caikit_harmonic.toolkit.run_config import RunConfig

CYCLIC_TORUS = {
    "group": {"n": 3},
    "surface": {"kind": "torus", "N": 16, "tau": [0.0, 1.0]},
    "differentials": [{"k": 2, "constant": [1.0, 0.0]}],
    "solver": {"tol": 1e-10},
}


@pytest.fixture
def cyclic_map():
    return HarmonicMap.bootstrap(RunConfig.from_dict(CYCLIC_TORUS))


def test_bootstrap_solves_the_run(cyclic_map):
    assert cyclic_map.outcome.converged
    assert cyclic_map.outcome.iterations == 0
    assert cyclic_map.metric.is_diagonal
    assert cyclic_map.run_config.solver.max_iter is not None


def test_bootstrap_from_a_yaml_path(tmp_path):
    path = tmp_path / "run.yml"
    RunConfig.from_dict(CYCLIC_TORUS).save(str(path))
    model = HarmonicMap.bootstrap(str(path))
    assert model.outcome.converged
    assert model.run_config == RunConfig.from_dict(CYCLIC_TORUS).resolved()


def test_bootstrap_rejects_other_types():
    with pytest.raises(TypeError):
        HarmonicMap.bootstrap(CYCLIC_TORUS)


def test_save_and_load_are_bit_exact(cyclic_map, tmp_path):
    model_path = str(tmp_path / "model")
    cyclic_map.save(model_path)
    loaded = HarmonicMap.load(model_path)
    assert loaded.run_config == cyclic_map.run_config
    assert loaded.metric.representation == cyclic_map.metric.representation
    np.testing.assert_array_equal(loaded.metric.params, cyclic_map.metric.params)
    np.testing.assert_array_equal(loaded.phi.phi.values, cyclic_map.phi.phi.values)
    assert loaded.outcome.status == cyclic_map.outcome.status
    assert loaded.outcome.residual_sup == cyclic_map.outcome.residual_sup
    assert loaded.run_geometry(1.0).to_dict() == cyclic_map.run_geometry(1.0).to_dict()


def test_save_refuses_an_existing_directory(cyclic_map, tmp_path):
    with pytest.raises(FileExistsError):
        cyclic_map.save(str(tmp_path))


def test_load_without_artifacts_fails(cyclic_map, tmp_path):
    model_path = tmp_path / "model"
    cyclic_map.save(str(model_path))
    shutil.rmtree(model_path / "artifacts")
    with pytest.raises((FileNotFoundError, ValueError)):
        HarmonicMap.load(str(model_path))


def test_geometry_task(cyclic_map):
    summary = cyclic_map.run_geometry(2.0)
    assert isinstance(summary, GeometrySummary)
    assert summary.kappa == 2.0
    assert summary.conformal
    assert summary.branch_point_count == 0
    assert abs(summary.k_max) < 1e-9


def test_entropy_task(cyclic_map):
    report = cyclic_map.run_entropy(1.0)
    assert isinstance(report, EntropyReport)
    assert report.kind == "bound"
    assert report.kappa == 1.0
    assert report.bound < 1e-4


@pytest.mark.parametrize(["kappa", "exc"], [(0.0, ValueError), (-1.0, ValueError), ("1", TypeError)])
def test_tasks_validate_kappa(cyclic_map, kappa, exc):
    with pytest.raises(exc):
        cyclic_map.run_geometry(kappa)
