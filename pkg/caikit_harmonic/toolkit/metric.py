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
"""Positive-definite Hermitian metric fields with unit determinant.

A metric is stored by its logarithm: either the diagonal exponents u (with
H = diag(exp(2u)), sum_j u_j = 0) or a Hermitian traceless matrix field S
(with H = exp(S)). Matrix functions of H are evaluated by batched eigh.
"""
# Standard
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Tuple

# Third Party
import numpy as np

# First Party
from caikit.core.exceptions import error_handler
import alog

# Local
from .domain import GridField, SurfaceDomain

log = alog.use_channel("METRC")
error = error_handler.get(log)


class MetricRepresentation(str, Enum):
    DIAGONAL = "diagonal"
    FULL = "full"


def hermitian_part(matrices: np.ndarray) -> np.ndarray:
    return 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))


def traceless_part(matrices: np.ndarray) -> np.ndarray:
    n = matrices.shape[-1]
    trace = np.trace(matrices, axis1=-2, axis2=-1)
    return matrices - (trace / n)[..., None, None] * np.eye(n)


def eigh_function(matrices: np.ndarray, func) -> np.ndarray:
    """Apply a scalar function to Hermitian matrices through their eigenbasis"""
    values, vectors = np.linalg.eigh(matrices)
    return (vectors * func(values)[..., None, :]) @ np.conj(np.swapaxes(vectors, -1, -2))


@dataclass(frozen=True, eq=False)
class HermitianMetricField:
    """Hermitian metric field H with det H = 1 at every node"""

    domain: SurfaceDomain
    representation: MetricRepresentation
    params: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "representation", MetricRepresentation(self.representation))
        params = np.asarray(self.params)
        error.value_check(
            "<HRM42556101E>",
            params.shape[:2] == self.domain.shape,
            f"Metric grid shape {params.shape[:2]} does not match domain {self.domain.shape}",
        )
        error.value_check(
            "<HRM42556102E>",
            bool(np.all(np.isfinite(params))),
            "Metric parameters contain non-finite values",
        )
        if self.representation == MetricRepresentation.DIAGONAL:
            error.value_check(
                "<HRM42556103E>",
                params.ndim == 3,
                f"Diagonal metric exponents must have shape (Nx, Ny, n), got {params.shape}",
            )
            params = params.real.astype(float)
            params = params - params.mean(axis=-1, keepdims=True)
        else:
            error.value_check(
                "<HRM42556104E>",
                params.ndim == 4 and params.shape[-1] == params.shape[-2],
                f"Full metric logarithm must have shape (Nx, Ny, n, n), got {params.shape}",
            )
            params = traceless_part(hermitian_part(params.astype(complex)))
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    ## Constructors ############################################################

    @classmethod
    def diagonal(cls, domain: SurfaceDomain, u: np.ndarray) -> "HermitianMetricField":
        """H = diag(exp(2 u_j)), u projected to sum zero"""
        return cls(domain, MetricRepresentation.DIAGONAL, u)

    @classmethod
    def full(cls, domain: SurfaceDomain, log_metric: np.ndarray) -> "HermitianMetricField":
        """H = exp(S), S projected to Hermitian traceless"""
        return cls(domain, MetricRepresentation.FULL, log_metric)

    @classmethod
    def identity(cls, domain: SurfaceDomain, n: int, diagonal: bool = True):
        if diagonal:
            return cls.diagonal(domain, np.zeros(domain.shape + (n,)))
        return cls.full(domain, np.zeros(domain.shape + (n, n), dtype=complex))

    @classmethod
    def from_matrices(cls, domain: SurfaceDomain, matrices: np.ndarray) -> "HermitianMetricField":
        """Build a metric from sampled matrices (Hermitian positive definite).

        The determinant is normalized to one; a non positive-definite node is
        rejected with its grid index.
        """
        matrices = np.asarray(matrices, dtype=complex)
        error.value_check(
            "<HRM42556105E>",
            matrices.ndim == 4 and matrices.shape[:2] == domain.shape,
            f"Metric matrices must have shape {domain.shape} + (n, n), got {matrices.shape}",
        )
        skew = np.abs(matrices - np.conj(np.swapaxes(matrices, -1, -2)))
        scale = np.max(np.abs(matrices)) or 1.0
        error.value_check(
            "<HRM42556106E>",
            float(np.max(skew)) <= 1e-10 * scale,
            "Metric matrices are not Hermitian",
        )
        eigenvalues, vectors = np.linalg.eigh(hermitian_part(matrices))
        _check_positive(eigenvalues)
        log_values = np.log(eigenvalues)
        log_metric = (vectors * log_values[..., None, :]) @ np.conj(np.swapaxes(vectors, -1, -2))
        diag = np.diagonal(log_metric, axis1=-2, axis2=-1)
        if float(np.max(np.abs(log_metric - _diag_embed(diag)))) == 0.0:
            return cls.diagonal(domain, 0.5 * diag.real)
        return cls.full(domain, log_metric)

    @classmethod
    def from_log_field(cls, field: GridField) -> "HermitianMetricField":
        """Inverse of log_field; a diagonal S restores the diagonal representation"""
        error.value_check(
            "<HRM42556109E>", field.is_matrix, "Metric logarithm must be a matrix field"
        )
        S = field.values
        diag = np.diagonal(S, axis1=-2, axis2=-1)
        if not np.any(S - _diag_embed(diag)):
            return cls.diagonal(field.domain, 0.5 * diag.real)
        return cls.full(field.domain, S)

    ## Accessors ###############################################################

    @property
    def n(self) -> int:
        return self.params.shape[-1]

    @property
    def is_diagonal(self) -> bool:
        return self.representation == MetricRepresentation.DIAGONAL

    @property
    def log_metric(self) -> np.ndarray:
        """S with H = exp(S)"""
        if self.is_diagonal:
            return _diag_embed(2.0 * self.params).astype(complex)
        return self.params

    @cached_property
    def _eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.is_diagonal:
            n = self.n
            vectors = np.broadcast_to(np.eye(n, dtype=complex), self.domain.shape + (n, n))
            return 2.0 * self.params, vectors
        return np.linalg.eigh(self.params)

    def _function(self, func) -> np.ndarray:
        if self.is_diagonal:
            return _diag_embed(func(2.0 * self.params)).astype(complex)
        values, vectors = self._eigh
        return (vectors * func(values)[..., None, :]) @ np.conj(np.swapaxes(vectors, -1, -2))

    def matrices(self) -> np.ndarray:
        return self._function(np.exp)

    def inverse(self) -> np.ndarray:
        return self._function(lambda s: np.exp(-s))

    def sqrt(self) -> np.ndarray:
        return self._function(lambda s: np.exp(0.5 * s))

    def inv_sqrt(self) -> np.ndarray:
        return self._function(lambda s: np.exp(-0.5 * s))

    def as_field(self) -> GridField:
        return GridField(self.domain, self.matrices())

    def log_field(self) -> GridField:
        """S = log H as a matrix field (snapshot form)"""
        return GridField(self.domain, self.log_metric)

    def eigenvalues(self) -> np.ndarray:
        return np.exp(self._eigh[0])

    def check_positive_definite(self):
        """Reject nodes where H is not numerically positive definite"""
        _check_positive(self.eigenvalues())

    def to_full(self) -> "HermitianMetricField":
        if not self.is_diagonal:
            return self
        return HermitianMetricField.full(self.domain, self.log_metric)

    def to_diagonal(self, atol: float = 1e-12) -> "HermitianMetricField":
        if self.is_diagonal:
            return self
        diag = np.diagonal(self.params, axis1=-2, axis2=-1)
        residue = float(np.max(np.abs(self.params - _diag_embed(diag))))
        error.value_check(
            "<HRM42556107E>",
            residue <= atol,
            f"Metric is not diagonal (off-diagonal log entries up to {residue:.3e})",
        )
        return HermitianMetricField.diagonal(self.domain, 0.5 * diag.real)

    def with_params(self, params: np.ndarray) -> "HermitianMetricField":
        return HermitianMetricField(self.domain, self.representation, params)

    def offdiagonal_sup(self) -> float:
        """Largest off-diagonal entry of H"""
        matrices = self.matrices()
        return float(np.max(np.abs(matrices - _diag_embed(np.diagonal(matrices, axis1=-2, axis2=-1)))))

    def determinant_defect(self) -> float:
        return float(np.max(np.abs(np.sum(self._eigh[0], axis=-1))))

    def perturbed(self, amplitude: float, mode: Tuple[int, int] = (1, 0)) -> "HermitianMetricField":
        """Add a single Fourier mode a*cos(2 pi (p s + q t)) to the first exponent
        and subtract it from the last one"""
        s, t = self.domain.lattice_coordinates
        bump = amplitude * np.cos(2.0 * np.pi * (mode[0] * s + mode[1] * t))
        if self.is_diagonal:
            u = np.array(self.params)
            u[..., 0] += bump
            u[..., -1] -= bump
            return self.with_params(u)
        log_metric = np.array(self.params)
        log_metric[..., 0, 0] += 2.0 * bump
        log_metric[..., -1, -1] -= 2.0 * bump
        return self.with_params(log_metric)


def _diag_embed(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    return values[..., None, :] * np.eye(n)


def _check_positive(eigenvalues: np.ndarray):
    smallest = np.min(eigenvalues, axis=-1)
    bad = ~(np.isfinite(smallest) & (smallest > 0.0))
    if np.any(bad):
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        error(
            "<HRM42556108E>",
            ValueError(f"Metric is not positive definite at node {node}"),
        )
