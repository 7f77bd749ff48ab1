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
"""Discretized coordinate domains and their differential operators.

Two backends are provided:

  1. Torus: the flat torus C / (Z + tau Z) sampled on an N x N lattice grid,
     with spectral (FFT) differentiation.
  2. Patch: the square [-L, L]^2 sampled on (N+1) x (N+1) nodes including the
     boundary ring, with 4th-order finite differences (one-sided at the edge).

All operators act on raw arrays whose first two axes are the grid axes
(axis 0 follows x, axis 1 follows the second lattice direction); trailing axes
(e.g. matrix indices) are carried along untouched.
"""
# Standard
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Tuple

# Third Party
from scipy import fft, integrate as sp_integrate, sparse
import numpy as np

# First Party
from caikit import get_config
from caikit.core.exceptions import error_handler
import alog

log = alog.use_channel("DOMAN")
error = error_handler.get(log)

MIN_RESOLUTION = 16
# Widest one-sided stencil (second derivative) touches six nodes
_MIN_STENCIL_NODES = 6


class SurfaceKind(str, Enum):
    TORUS = "torus"
    PATCH = "patch"


@dataclass(frozen=True)
class SurfaceDomain:
    """A discretized coordinate domain (periodic torus or square patch)"""

    kind: SurfaceKind
    N: int
    tau: complex = 1j
    L: float = 1.0

    def __post_init__(self):
        error.value_check(
            "<HRM20117401E>",
            self.kind in {k.value for k in SurfaceKind},
            f"Unknown surface kind '{self.kind}'",
        )
        object.__setattr__(self, "kind", SurfaceKind(self.kind))
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "L", float(self.L))
        error.type_check("<HRM20117402E>", int, N=self.N)
        error.value_check(
            "<HRM20117403E>",
            self.N >= MIN_RESOLUTION,
            f"Grid resolution N must be at least {MIN_RESOLUTION}, got {self.N}",
        )
        if self.kind == SurfaceKind.TORUS:
            error.value_check(
                "<HRM20117404E>",
                self.N & (self.N - 1) == 0,
                f"Torus resolution must be a power of two, got {self.N}",
            )
            error.value_check(
                "<HRM20117405E>",
                self.tau.imag > 0,
                f"Torus modulus must have positive imaginary part, got {self.tau}",
            )
        else:
            error.value_check(
                "<HRM20117406E>", self.L > 0, f"Patch half-width must be positive, got {self.L}"
            )

    @classmethod
    def torus(cls, N: int, tau: complex = 1j) -> "SurfaceDomain":
        return cls(kind=SurfaceKind.TORUS, N=N, tau=tau)

    @classmethod
    def patch(cls, N: int, L: float = 1.0) -> "SurfaceDomain":
        return cls(kind=SurfaceKind.PATCH, N=N, L=L)

    @property
    def is_torus(self) -> bool:
        return self.kind == SurfaceKind.TORUS

    @property
    def shape(self) -> Tuple[int, int]:
        nodes = self.N if self.is_torus else self.N + 1
        return (nodes, nodes)

    @property
    def node_count(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def area(self) -> float:
        return self.tau.imag if self.is_torus else (2.0 * self.L) ** 2

    @property
    def spacing(self) -> Tuple[float, float]:
        """Step lengths along the two grid directions"""
        if self.is_torus:
            return (1.0 / self.N, abs(self.tau) / self.N)
        step = 2.0 * self.L / self.N
        return (step, step)

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Real coordinates (x, y) of every node"""
        if self.is_torus:
            grid = np.arange(self.N) / self.N
            s, t = np.meshgrid(grid, grid, indexing="ij")
            return (s + t * self.tau.real, t * self.tau.imag)
        grid = np.linspace(-self.L, self.L, self.N + 1)
        return tuple(np.meshgrid(grid, grid, indexing="ij"))

    @cached_property
    def lattice_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinates (s, t) normalized to [0, 1) on the torus, [0, 1] on the patch"""
        if self.is_torus:
            grid = np.arange(self.N) / self.N
        else:
            grid = np.linspace(0.0, 1.0, self.N + 1)
        return tuple(np.meshgrid(grid, grid, indexing="ij"))

    @cached_property
    def z(self) -> np.ndarray:
        x, y = self.coordinates
        return x + 1j * y

    def boundary_mask(self, ring: int = 1) -> np.ndarray:
        """True on the outer `ring` node rings of a patch (never on a torus)"""
        mask = np.zeros(self.shape, dtype=bool)
        if not self.is_torus and ring > 0:
            mask[:ring, :] = True
            mask[-ring:, :] = True
            mask[:, :ring] = True
            mask[:, -ring:] = True
        return mask

    def interior_mask(self, ring: int = 1) -> np.ndarray:
        return ~self.boundary_mask(ring)

    ## Spectral backend ########################################################

    @cached_property
    def _wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        modes = fft.fftfreq(self.N, d=1.0 / self.N)
        p, q = np.meshgrid(modes, modes, indexing="ij")
        return p, q

    @cached_property
    def _derivative_symbols(self) -> Tuple[np.ndarray, np.ndarray]:
        """i*k symbols of d/dx and d/dy with the Nyquist modes removed"""
        p, q = self._wavenumbers
        nyquist = (np.abs(p) == self.N // 2) | (np.abs(q) == self.N // 2)
        kx = 2.0 * np.pi * p
        ky = 2.0 * np.pi * (q - self.tau.real * p) / self.tau.imag
        return (
            np.where(nyquist, 0.0, 1j * kx),
            np.where(nyquist, 0.0, 1j * ky),
        )

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """Symbol of the flat Laplacian on the torus (non-positive)"""
        error.value_check(
            "<HRM20117407E>", self.is_torus, "laplacian_symbol is defined on the torus only"
        )
        p, q = self._wavenumbers
        kx = 2.0 * np.pi * p
        ky = 2.0 * np.pi * (q - self.tau.real * p) / self.tau.imag
        return -(kx**2 + ky**2)

    def fft(self, values: np.ndarray) -> np.ndarray:
        return fft.fftn(values, axes=(0, 1), workers=_fft_workers())

    def ifft(self, values: np.ndarray) -> np.ndarray:
        return fft.ifftn(values, axes=(0, 1), workers=_fft_workers())

    def _spectral(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        symbol = symbol.reshape(symbol.shape + (1,) * (values.ndim - 2))
        return self.ifft(self.fft(values) * symbol)

    ## Finite-difference backend ###############################################

    @cached_property
    def _first_derivative_matrix(self) -> sparse.csr_matrix:
        return _first_derivative_1d(self.N + 1, self.spacing[0])

    @cached_property
    def _second_derivative_matrix(self) -> sparse.csr_matrix:
        return _second_derivative_1d(self.N + 1, self.spacing[0])

    @cached_property
    def laplacian_matrix(self) -> sparse.csr_matrix:
        """Sparse 4th-order Laplacian on the flattened (row-major) patch grid"""
        error.value_check(
            "<HRM20117408E>", not self.is_torus, "laplacian_matrix is defined on the patch only"
        )
        second = self._second_derivative_matrix
        identity = sparse.identity(self.N + 1, format="csr")
        return (sparse.kron(second, identity) + sparse.kron(identity, second)).tocsr()

    ## Operators ###############################################################

    def _check_values(self, values: np.ndarray):
        error.value_check(
            "<HRM20117409E>",
            values.shape[:2] == self.shape,
            f"Field grid shape {values.shape[:2]} does not match domain shape {self.shape}",
        )
        error.value_check(
            "<HRM20117410E>",
            self.shape[0] >= _MIN_STENCIL_NODES,
            f"Resolution {self.N} is too small for the difference stencils",
        )

    def dx(self, values: np.ndarray) -> np.ndarray:
        self._check_values(values)
        if self.is_torus:
            return _keep_real(values, self._spectral(values, self._derivative_symbols[0]))
        return _apply_along(self._first_derivative_matrix, values, axis=0)

    def dy(self, values: np.ndarray) -> np.ndarray:
        self._check_values(values)
        if self.is_torus:
            return _keep_real(values, self._spectral(values, self._derivative_symbols[1]))
        return _apply_along(self._first_derivative_matrix, values, axis=1)

    def dz(self, values: np.ndarray) -> np.ndarray:
        self._check_values(values)
        if self.is_torus:
            kx, ky = self._derivative_symbols
            return self._spectral(values, 0.5 * (kx - 1j * ky))
        return 0.5 * (self.dx(values) - 1j * self.dy(values))

    def dzbar(self, values: np.ndarray) -> np.ndarray:
        self._check_values(values)
        if self.is_torus:
            kx, ky = self._derivative_symbols
            return self._spectral(values, 0.5 * (kx + 1j * ky))
        return 0.5 * (self.dx(values) + 1j * self.dy(values))

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        self._check_values(values)
        if self.is_torus:
            return _keep_real(values, self._spectral(values, self.laplacian_symbol))
        second = self._second_derivative_matrix
        return _apply_along(second, values, axis=0) + _apply_along(second, values, axis=1)

    def integrate(
        self,
        values: np.ndarray,
        weight: Optional[np.ndarray] = None,
        mask: Optional[np.ndarray] = None,
    ) -> float:
        """Quadrature of values * weight over the domain, restricted to mask"""
        self._check_values(values)
        integrand = np.asarray(values, dtype=float)
        if weight is not None:
            self._check_values(weight)
            integrand = integrand * weight
        if mask is not None:
            integrand = np.where(mask, integrand, 0.0)
        if self.is_torus:
            return float(np.mean(integrand) * self.area)
        step = self.spacing[0]
        inner = sp_integrate.trapezoid(integrand, dx=step, axis=1)
        return float(sp_integrate.trapezoid(inner, dx=step, axis=0))


@dataclass(frozen=True, eq=False)
class GridField:
    """Complex scalar or d x d matrix samples, one per grid node"""

    domain: SurfaceDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        object.__setattr__(self, "values", values)
        error.value_check(
            "<HRM20117411E>",
            values.shape[:2] == self.domain.shape,
            f"Field grid shape {values.shape[:2]} does not match domain shape {self.domain.shape}",
        )
        error.value_check(
            "<HRM20117412E>",
            values.ndim == 2 or (values.ndim == 4 and values.shape[2] == values.shape[3]),
            f"Field values must be scalar or square-matrix valued, got shape {values.shape}",
        )

    @property
    def is_matrix(self) -> bool:
        return self.values.ndim == 4

    @property
    def dim(self) -> int:
        return self.values.shape[-1] if self.is_matrix else 1

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.domain, values)


def d_dz(field: GridField) -> GridField:
    return field.with_values(field.domain.dz(field.values))


def d_dzbar(field: GridField) -> GridField:
    return field.with_values(field.domain.dzbar(field.values))


def d_dx(field: GridField) -> GridField:
    return field.with_values(field.domain.dx(field.values))


def d_dy(field: GridField) -> GridField:
    return field.with_values(field.domain.dy(field.values))


def laplacian(field: GridField) -> GridField:
    return field.with_values(field.domain.laplacian(field.values))


def integrate(
    field: GridField, weight: Optional[GridField] = None, mask: Optional[np.ndarray] = None
) -> float:
    """Integrate a real scalar field against an area-element weight"""
    error.value_check(
        "<HRM20117413E>",
        weight is None or weight.domain == field.domain,
        "integrand and weight live on different domains",
    )
    error.value_check(
        "<HRM20117414E>", not field.is_matrix, "integrate expects a scalar field"
    )
    return field.domain.integrate(
        np.real(field.values), None if weight is None else np.real(weight.values), mask
    )


## Helpers #####################################################################


def _fft_workers() -> int:
    return int(get_config().harmonic.parallelism.fft_workers)


def _keep_real(source: np.ndarray, result: np.ndarray) -> np.ndarray:
    return result.real if np.isrealobj(source) else result


def _apply_along(matrix: sparse.csr_matrix, values: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(values, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    result = (matrix @ flat).reshape(moved.shape)
    return np.moveaxis(result, 0, axis)


def _stencil_matrix(size: int, interior, edge_rows, parity: int) -> sparse.csr_matrix:
    """Assemble a 1D difference matrix from an interior stencil and edge rows.

    edge_rows[r] is (offsets, coefficients) for row r; the far edge mirrors
    them with the given parity (-1 for odd derivatives).
    """
    matrix = sparse.lil_matrix((size, size))
    offsets, coefficients = interior
    reach = max(abs(o) for o in offsets)
    for row in range(reach, size - reach):
        for offset, coefficient in zip(offsets, coefficients):
            matrix[row, row + offset] = coefficient
    for row, (row_offsets, row_coefficients) in enumerate(edge_rows):
        mirrored = size - 1 - row
        for offset, coefficient in zip(row_offsets, row_coefficients):
            matrix[row, row + offset] = coefficient
            matrix[mirrored, mirrored - offset] = parity * coefficient
    return matrix.tocsr()


def _first_derivative_1d(size: int, step: float) -> sparse.csr_matrix:
    interior = ((-2, -1, 1, 2), (1.0, -8.0, 8.0, -1.0))
    edge_rows = (
        ((0, 1, 2, 3, 4), (-25.0, 48.0, -36.0, 16.0, -3.0)),
        ((-1, 0, 1, 2, 3), (-3.0, -10.0, 18.0, -6.0, 1.0)),
    )
    return _stencil_matrix(size, interior, edge_rows, parity=-1) / (12.0 * step)


def _second_derivative_1d(size: int, step: float) -> sparse.csr_matrix:
    interior = ((-2, -1, 0, 1, 2), (-1.0, 16.0, -30.0, 16.0, -1.0))
    edge_rows = (
        ((0, 1, 2, 3, 4, 5), (45.0, -154.0, 214.0, -156.0, 61.0, -10.0)),
        ((-1, 0, 1, 2, 3, 4), (10.0, -15.0, -4.0, 14.0, -6.0, 1.0)),
    )
    return _stencil_matrix(size, interior, edge_rows, parity=1) / (12.0 * step**2)
