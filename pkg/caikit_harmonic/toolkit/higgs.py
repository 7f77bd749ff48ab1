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
"""Hitchin-section Higgs fields phi = em1 + sum_k alpha_k e_k, their Hopf
differential, adjoints, the circle action and the pointwise fiducial metric.
"""
# Standard
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

# Third Party
from scipy.interpolate import griddata
import numpy as np

# First Party
from caikit.core.exceptions import error_handler
import alog

# Local
from .domain import GridField, SurfaceDomain
from .lie_core import LieBasis, bracket
from .metric import HermitianMetricField

log = alog.use_channel("HIGGS")
error = error_handler.get(log)

MAX_POLYNOMIAL_DEGREE = 8
# |top corner| below this is treated as a zero of the top differential
FIDUCIAL_HOLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Differential:
    """alpha_k in one of three representations.

    constant: complex value (holomorphic on both backends)
    coefficients: polynomial in z, lowest degree first (patch only)
    samples: arbitrary node values (synthetic, not holomorphic in general)
    """

    k: int
    constant: Optional[complex] = None
    coefficients: Optional[Tuple[complex, ...]] = None
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        error.type_check("<HRM53901101E>", int, k=self.k)
        given = [
            r for r in (self.constant, self.coefficients, self.samples) if r is not None
        ]
        error.value_check(
            "<HRM53901102E>",
            len(given) == 1,
            f"Differential alpha_{self.k} needs exactly one of constant, coefficients or samples",
        )
        if self.constant is not None:
            object.__setattr__(self, "constant", complex(self.constant))
        if self.coefficients is not None:
            coefficients = tuple(complex(c) for c in self.coefficients)
            error.value_check(
                "<HRM53901103E>",
                0 < len(coefficients) <= MAX_POLYNOMIAL_DEGREE + 1,
                f"Polynomial differentials have degree at most {MAX_POLYNOMIAL_DEGREE}",
            )
            object.__setattr__(self, "coefficients", coefficients)

    @property
    def is_synthetic(self) -> bool:
        return self.samples is not None

    def evaluate(self, domain: SurfaceDomain) -> np.ndarray:
        if self.constant is not None:
            return np.full(domain.shape, self.constant, dtype=complex)
        if self.coefficients is not None:
            error.value_check(
                "<HRM53901104E>",
                not domain.is_torus,
                f"Polynomial differential alpha_{self.k} is not periodic on the torus",
            )
            return np.polynomial.polynomial.polyval(domain.z, np.array(self.coefficients))
        samples = np.asarray(self.samples, dtype=complex)
        error.value_check(
            "<HRM53901105E>",
            samples.shape == domain.shape,
            f"Sampled differential alpha_{self.k} has shape {samples.shape}, "
            f"domain has {domain.shape}",
        )
        return samples

    def scaled(self, factor: complex) -> "Differential":
        if self.constant is not None:
            return Differential(self.k, constant=factor * self.constant)
        if self.coefficients is not None:
            return Differential(self.k, coefficients=tuple(factor * c for c in self.coefficients))
        return Differential(self.k, samples=factor * np.asarray(self.samples))

    def is_zero(self) -> bool:
        if self.constant is not None:
            return self.constant == 0
        if self.coefficients is not None:
            return all(c == 0 for c in self.coefficients)
        return not np.any(np.asarray(self.samples))


@dataclass(frozen=True, eq=False)
class HiggsField:
    basis: LieBasis
    alphas: Tuple[Differential, ...]
    phi: GridField

    @property
    def domain(self) -> SurfaceDomain:
        return self.phi.domain

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def is_synthetic(self) -> bool:
        return any(alpha.is_synthetic for alpha in self.alphas)

    def alpha(self, k: int) -> Optional[Differential]:
        for alpha in self.alphas:
            if alpha.k == k:
                return alpha
        return None

    def alpha_values(self, k: int) -> np.ndarray:
        alpha = self.alpha(k)
        if alpha is None:
            return np.zeros(self.domain.shape, dtype=complex)
        return alpha.evaluate(self.domain)

    def top_corner(self) -> np.ndarray:
        """phi[0, n-1] per node (the alpha_{n-1} e_{n-1} entry)"""
        return self.phi.values[..., 0, self.n - 1]


PhiLike = Union[HiggsField, GridField]


def _phi_values(phi: PhiLike) -> np.ndarray:
    field_ = phi.phi if isinstance(phi, HiggsField) else phi
    error.value_check(
        "<HRM53901106E>", field_.is_matrix, "Higgs field values must be matrix valued"
    )
    return field_.values


def _phi_field(phi: PhiLike) -> GridField:
    return phi.phi if isinstance(phi, HiggsField) else phi


def build_hitchin_higgs(
    basis: LieBasis, alphas: Iterable[Differential], domain: SurfaceDomain
) -> HiggsField:
    """Assemble phi = em1 + sum_k alpha_k e_k on the domain.

    Args:
        basis: LieBasis
            Principal sl(2) data for sl(n).
        alphas: Iterable[Differential]
            Differentials with distinct indices in 1..n-1; missing indices are zero.
        domain: SurfaceDomain
    Returns:
        HiggsField
    """
    alphas = tuple(sorted(alphas, key=lambda a: a.k))
    indices = [alpha.k for alpha in alphas]
    error.value_check(
        "<HRM53901107E>",
        len(set(indices)) == len(indices),
        f"Duplicate differential indices in {indices}",
    )
    for k in indices:
        error.value_check(
            "<HRM53901108E>",
            1 <= k <= basis.n - 1,
            f"Differential index {k} outside 1..{basis.n - 1}",
        )

    values = np.broadcast_to(basis.em1, domain.shape + basis.em1.shape).astype(complex)
    for alpha in alphas:
        samples = alpha.evaluate(domain)
        values = values + samples[..., None, None] * basis.hw[alpha.k - 1]
        if alpha.is_synthetic:
            log.warning(f"alpha_{alpha.k} is synthetic sample data (not holomorphic)")
    return HiggsField(basis=basis, alphas=alphas, phi=GridField(domain, values))


def hopf_differential(phi: PhiLike) -> GridField:
    """tr(phi phi) per node"""
    values = _phi_values(phi)
    return GridField(_phi_field(phi).domain, np.einsum("...ij,...ji->...", values, values))


def adjoint_star(phi: PhiLike, metric: HermitianMetricField) -> GridField:
    """H^-1 phi^dagger H per node"""
    values = _phi_values(phi)
    error.value_check(
        "<HRM53901109E>",
        metric.domain == _phi_field(phi).domain and metric.n == values.shape[-1],
        "Higgs field and metric have different domains or dimensions",
    )
    metric.check_positive_definite()
    dagger = np.conj(np.swapaxes(values, -1, -2))
    if metric.is_diagonal:
        weights = np.exp(2.0 * metric.params)
        return GridField(metric.domain, dagger * weights[..., None, :] / weights[..., :, None])
    return GridField(metric.domain, metric.inverse() @ dagger @ metric.matrices())


def higgs_commutator(phi: PhiLike, metric: HermitianMetricField) -> GridField:
    """[phi, phi^{*H}] per node"""
    values = _phi_values(phi)
    return GridField(metric.domain, bracket(values, adjoint_star(phi, metric).values))


def circle_action(phi: PhiLike, theta: float) -> GridField:
    """e^{i theta} phi as a raw matrix field"""
    field_ = _phi_field(phi)
    return field_.with_values(np.exp(1j * theta) * field_.values)


def circle_action_normal_form(phi: HiggsField, theta: float) -> HiggsField:
    """Hitchin-section normal form of the circle action: alpha_k -> e^{i(k+1)theta} alpha_k"""
    alphas = [alpha.scaled(np.exp(1j * (alpha.k + 1) * theta)) for alpha in phi.alphas]
    return build_hitchin_higgs(phi.basis, alphas, phi.domain)


def is_cyclic(phi: HiggsField) -> bool:
    """Only the top differential alpha_{n-1} may be nonzero"""
    return all(alpha.is_zero() for alpha in phi.alphas if alpha.k != phi.n - 1)


def has_cyclic_pattern(values: np.ndarray, em1: np.ndarray) -> bool:
    """phi - em1 is supported on the top-right corner at every node"""
    n = em1.shape[-1]
    rest = np.array(values - em1)
    rest[..., 0, n - 1] = 0.0
    return not np.any(rest)


def fiducial_exponents(phi: HiggsField) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal exponents solving [phi, phi^{*H}] = 0 for the cyclic part of phi.

    For phi = em1 + beta E_{0,n-1} the pointwise solution is
    u_i = (i - (n-1)/2) log(w) / 2 with w = |beta|^{2/n}. Nodes where beta
    vanishes have no positive solution; they are filled by interpolation from
    valid nodes and returned as a hole mask.
    """
    n = phi.n
    beta = np.abs(phi.top_corner())
    holes = beta <= FIDUCIAL_HOLE_TOL
    domain = phi.domain
    offsets = np.arange(n) - 0.5 * (n - 1)
    if np.all(holes):
        return np.zeros(domain.shape + (n,)), holes

    log_w = np.zeros(domain.shape)
    log_w[~holes] = (2.0 / n) * np.log(beta[~holes])
    if np.any(holes):
        log_w = _fill_holes(domain, log_w, holes)
        log.warning(
            f"Fiducial metric undefined at {int(holes.sum())} nodes "
            "(zeros of the top differential); interpolated from neighbours"
        )
    u = 0.5 * log_w[..., None] * offsets
    return u, holes


def fiducial_metric(phi: HiggsField) -> HermitianMetricField:
    """Diagonal pointwise solution of the commutator equation (see fiducial_exponents)"""
    u, _ = fiducial_exponents(phi)
    return HermitianMetricField.diagonal(phi.domain, u)


def fiducial_holes(phi: HiggsField) -> np.ndarray:
    return fiducial_exponents(phi)[1]


def harmonicity_defect(phi: HiggsField, differentials: Optional[Sequence[int]] = None) -> float:
    """Sup norm of d/dzbar over the sampled differentials"""
    domain = phi.domain
    defect = 0.0
    for alpha in phi.alphas:
        if differentials is not None and alpha.k not in differentials:
            continue
        if alpha.constant is not None:
            continue
        samples = alpha.evaluate(domain)
        defect = max(defect, float(np.max(np.abs(domain.dzbar(samples)))))
    return defect


def _fill_holes(domain: SurfaceDomain, values: np.ndarray, holes: np.ndarray) -> np.ndarray:
    x, y = domain.coordinates
    points = np.column_stack([x[~holes], y[~holes]])
    targets = np.column_stack([x[holes], y[holes]])
    filled = griddata(points, values[~holes], targets, method="linear")
    missing = ~np.isfinite(filled)
    if np.any(missing):
        filled[missing] = griddata(points, values[~holes], targets[missing], method="nearest")
    result = np.array(values)
    result[holes] = filled
    return result
