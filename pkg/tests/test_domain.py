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
# Third Party
from hypothesis import given
from hypothesis import strategies as st
import numpy as np
import pytest

# Local
from caikit_harmonic.toolkit.domain import (
    GridField,
    SurfaceDomain,
    SurfaceKind,
    d_dx,
    d_dz,
    d_dzbar,
    integrate,
    laplacian,
)


def test_torus_shape_and_area():
    domain = SurfaceDomain.torus(16, 0.5 + 2j)
    assert domain.kind == SurfaceKind.TORUS
    assert domain.shape == (16, 16)
    assert domain.area == pytest.approx(2.0)
    assert not domain.boundary_mask(2).any()


def test_patch_shape_and_masks(patch32):
    assert patch32.shape == (33, 33)
    assert patch32.area == pytest.approx(4.0)
    assert patch32.boundary_mask(1).sum() == 4 * 32
    assert patch32.interior_mask(2).sum() == 29 * 29


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "torus", "N": 15},
        {"kind": "torus", "N": 8},
        {"kind": "torus", "N": 16, "tau": 1.0 + 0j},
        {"kind": "patch", "N": 16, "L": 0.0},
        {"kind": "sphere", "N": 16},
    ],
)
def test_invalid_domains_are_rejected(kwargs):
    with pytest.raises(ValueError):
        SurfaceDomain(**kwargs)


def test_torus_derivatives_are_spectrally_exact(torus16):
    x, y = torus16.coordinates
    values = np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y)
    np.testing.assert_allclose(
        torus16.dx(values), 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(4 * np.pi * y), atol=1e-10
    )
    np.testing.assert_allclose(
        torus16.laplacian(values), -(4 + 16) * np.pi**2 * values, atol=1e-9
    )
    assert np.isrealobj(torus16.laplacian(values))


def test_dz_and_dzbar_split_a_plane_wave(torus16):
    x, _ = torus16.coordinates
    wave = np.exp(2j * np.pi * x)
    np.testing.assert_allclose(torus16.dz(wave), 1j * np.pi * wave, atol=1e-10)
    np.testing.assert_allclose(torus16.dzbar(wave), 1j * np.pi * wave, atol=1e-10)


def test_skewed_torus_derivative_follows_lattice():
    tau = 0.5 + 1j
    domain = SurfaceDomain.torus(16, tau)
    s, _ = domain.lattice_coordinates
    wave = np.exp(2j * np.pi * s)
    np.testing.assert_allclose(domain.dx(wave), 2j * np.pi * wave, atol=1e-10)
    np.testing.assert_allclose(domain.dy(wave), -2j * np.pi * tau.real / tau.imag * wave, atol=1e-10)


def test_patch_stencils_are_exact_on_low_degree_polynomials(patch32):
    x, y = patch32.coordinates
    np.testing.assert_allclose(patch32.dx(x**3 * y), 3 * x**2 * y, atol=1e-10)
    np.testing.assert_allclose(patch32.dy(x * y**4), 4 * x * y**3, atol=1e-9)
    np.testing.assert_allclose(
        patch32.laplacian(x**2 * y**2), 2 * x**2 + 2 * y**2, atol=1e-9
    )


def test_patch_holomorphic_polynomial_has_zero_dzbar(patch32):
    z = patch32.z
    field = GridField(patch32, z**3)
    np.testing.assert_allclose(d_dzbar(field).values, 0.0, atol=1e-9)
    np.testing.assert_allclose(d_dz(field).values, 3 * z**2, atol=1e-9)


def test_matrix_fields_differentiate_entrywise(torus16):
    x, _ = torus16.coordinates
    values = np.zeros(torus16.shape + (2, 2))
    values[..., 0, 1] = np.sin(2 * np.pi * x)
    result = d_dx(GridField(torus16, values)).values
    np.testing.assert_allclose(result[..., 0, 1], 2 * np.pi * np.cos(2 * np.pi * x), atol=1e-10)
    np.testing.assert_allclose(result[..., 1, 0], 0.0, atol=1e-12)


def test_integration_rules(torus16, patch32):
    assert integrate(GridField(torus16, np.ones(torus16.shape))) == pytest.approx(1.0)
    x, _ = torus16.coordinates
    assert integrate(GridField(torus16, np.cos(2 * np.pi * x))) == pytest.approx(0.0, abs=1e-14)
    assert integrate(GridField(patch32, np.ones(patch32.shape))) == pytest.approx(4.0)
    px, _ = patch32.coordinates
    assert integrate(GridField(patch32, px**2)) == pytest.approx(4.0 / 3.0, rel=1e-2)


def test_integration_with_weight_and_mask(torus16):
    ones = GridField(torus16, np.ones(torus16.shape))
    weight = GridField(torus16, np.full(torus16.shape, 3.0))
    mask = np.zeros(torus16.shape, dtype=bool)
    mask[:8] = True
    assert integrate(ones, weight, mask) == pytest.approx(1.5)


def test_grid_field_shape_is_validated(torus16):
    with pytest.raises(ValueError):
        GridField(torus16, np.zeros((8, 8)))
    with pytest.raises(ValueError):
        GridField(torus16, np.zeros((16, 16, 2, 3)))
    with pytest.raises(ValueError):
        laplacian(GridField(SurfaceDomain.torus(32), np.zeros((16, 16))))


_modes = st.lists(
    st.tuples(
        st.integers(-3, 3),
        st.integers(-3, 3),
        st.floats(-1.0, 1.0, allow_nan=False),
    ),
    min_size=1,
    max_size=4,
)


def _trigonometric(domain, modes):
    s, t = domain.lattice_coordinates
    values = np.zeros(domain.shape, dtype=complex)
    for p, q, amplitude in modes:
        values += amplitude * np.exp(2j * np.pi * (p * s + q * t))
    return values


@given(_modes, _modes)
def test_leibniz_rule_on_band_limited_fields(first, second):
    domain = SurfaceDomain.torus(16)
    f = _trigonometric(domain, first)
    g = _trigonometric(domain, second)
    lhs = domain.dz(f * g)
    rhs = domain.dz(f) * g + f * domain.dz(g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)
