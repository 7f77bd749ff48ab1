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
"""Shared fixtures for the caikit_harmonic test suite"""
# Third Party
from hypothesis import HealthCheck, settings
import numpy as np
import pytest

# Local
import caikit_harmonic  # noqa: F401  (configures the library)
from caikit_harmonic.toolkit.domain import SurfaceDomain
from caikit_harmonic.toolkit.hermitian_solver import SolverParams, solve_harmonic_metric
from caikit_harmonic.toolkit.higgs import Differential, build_hitchin_higgs
from caikit_harmonic.toolkit.lie_core import construct_principal_sl2

settings.register_profile(
    "ci",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    print_blob=True,
)
settings.load_profile("ci")


@pytest.fixture
def torus16():
    return SurfaceDomain.torus(16)


@pytest.fixture
def torus32():
    return SurfaceDomain.torus(32)


@pytest.fixture
def patch32():
    return SurfaceDomain.patch(32, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def hitchin_field(n, domain, **alphas):
    """phi for sl(n) with alphas given as alpha_<k>=<constant or coefficient list>"""
    differentials = []
    for name, value in alphas.items():
        k = int(name.split("_")[1])
        if isinstance(value, (list, tuple)):
            differentials.append(Differential(k, coefficients=tuple(value)))
        else:
            differentials.append(Differential(k, constant=value))
    return build_hitchin_higgs(construct_principal_sl2(n), differentials, domain)


@pytest.fixture
def n2_torus_phi(torus16):
    return hitchin_field(2, torus16, alpha_1=2.0)


@pytest.fixture
def n3_cyclic_phi(torus16):
    return hitchin_field(3, torus16, alpha_2=1.0)


@pytest.fixture(scope="session")
def fuchsian_patch_solution():
    """phi = em1 on a small patch with its solved metric (a totally geodesic disk)"""
    domain = SurfaceDomain.patch(16, 0.5)
    phi = hitchin_field(2, domain)
    metric, outcome = solve_harmonic_metric(phi, params=SolverParams.from_config(tol=1e-10))
    assert outcome.converged
    return phi, metric
