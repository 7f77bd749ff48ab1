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
"""Lie-theoretic data for sl(n, C) in the vector representation: the principal
sl(2) triple, highest-weight vectors, exponents, weight decomposition and the
trace form.
"""
# Standard
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

# Third Party
from scipy.linalg import null_space
import numpy as np

# First Party
from caikit import get_config
from caikit.core.exceptions import error_handler
import alog

log = alog.use_channel("LIECR")
error = error_handler.get(log)

MIN_RANK_PARAMETER = 2
MAX_RANK_PARAMETER = 8

METRIC_FORMS = ("trace", "killing")


@dataclass(frozen=True, eq=False)
class LieBasis:
    """Principal sl(2) data of sl(n, C).

    x is the semisimple element, e1 / em1 the raising / lowering elements with
    [x, em1] = -em1, [x, e1] = e1 and [em1, e1] = x. hw holds e_k = e1^k for
    k = 1..n-1 and weight_spaces maps each ad(x)-weight to a basis of g_i.
    """

    n: int
    x: np.ndarray
    e1: np.ndarray
    em1: np.ndarray
    hw: Tuple[np.ndarray, ...]
    exponents: Tuple[int, ...]
    weight_spaces: Dict[int, Tuple[np.ndarray, ...]]

    @property
    def max_weight(self) -> int:
        return self.n - 1


def bracket(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Commutator [a, b], batched over leading axes"""
    return a @ b - b @ a


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=None)
def construct_principal_sl2(n: int) -> LieBasis:
    """Build the principal sl(2) triple of sl(n, C) in the bracket convention
    [em1, e1] = x.

    Args:
        n: int
            Size of the vector representation, 2 <= n <= 8.
    Returns:
        LieBasis
    """
    error.type_check("<HRM10250311E>", int, n=n)
    error.value_check(
        "<HRM10250312E>",
        MIN_RANK_PARAMETER <= n <= MAX_RANK_PARAMETER,
        f"n must satisfy {MIN_RANK_PARAMETER} <= n <= {MAX_RANK_PARAMETER}, got {n}",
    )

    weights = (n - 1) / 2.0 - np.arange(n)
    x = np.diag(weights).astype(complex)
    em1 = np.diag(np.ones(n - 1), k=-1).astype(complex)
    # [em1, e1]_ii = c_{i-1} - c_i = x_i fixes the superdiagonal of e1
    e1 = np.diag(-np.cumsum(weights)[:-1], k=1).astype(complex)

    hw = [np.linalg.matrix_power(e1, k) for k in range(1, n)]
    basis = LieBasis(
        n=n,
        x=_frozen(x),
        e1=_frozen(e1),
        em1=_frozen(em1),
        hw=tuple(_frozen(e) for e in hw),
        exponents=tuple(range(1, n)),
        weight_spaces={},
    )
    basis.weight_spaces.update(weight_decomposition(basis))
    log.debug(f"Constructed principal sl(2) triple for n={n}")
    return basis


def highest_weight_vectors(basis: LieBasis) -> List[np.ndarray]:
    """Return e_k = e1^k for k = 1..n-1 (they span the centralizer of e1)"""
    return [np.array(e) for e in basis.hw]


def weight_decomposition(basis: LieBasis) -> Dict[int, Tuple[np.ndarray, ...]]:
    """Partition the standard basis of sl(n) by ad(x)-eigenvalue.

    E_ij has weight x_i - x_j = j - i; the diagonal part is spanned by
    E_ii - E_{i+1,i+1} at weight 0.
    """
    n = basis.n
    spaces: Dict[int, List[np.ndarray]] = {w: [] for w in range(-(n - 1), n)}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            unit = np.zeros((n, n), dtype=complex)
            unit[i, j] = 1.0
            spaces[j - i].append(_frozen(unit))
    for i in range(n - 1):
        cartan = np.zeros((n, n), dtype=complex)
        cartan[i, i] = 1.0
        cartan[i + 1, i + 1] = -1.0
        spaces[0].append(_frozen(cartan))
    return {w: tuple(vectors) for w, vectors in spaces.items()}


def weight_of(basis: LieBasis, matrix: np.ndarray) -> Optional[int]:
    """Return the ad(x)-weight of a weight vector, or None if it is not one"""
    image = bracket(basis.x, matrix)
    scale = np.max(np.abs(matrix))
    if scale == 0.0:
        return None
    flat = matrix.ravel()
    pivot = np.argmax(np.abs(flat))
    weight = (image.ravel()[pivot] / flat[pivot]).real
    rounded = int(round(weight))
    if np.max(np.abs(image - rounded * matrix)) > 1e-12 * scale:
        return None
    return rounded


def centralizer_dimension(basis: LieBasis) -> int:
    """Dimension of {Y strictly upper triangular : [e1, Y] = 0}"""
    n = basis.n
    columns = []
    for i in range(n):
        for j in range(i + 1, n):
            unit = np.zeros((n, n), dtype=complex)
            unit[i, j] = 1.0
            columns.append(bracket(basis.e1, unit).ravel())
    system = np.array(columns).T
    # Real form of the complex system keeps null_space on real arithmetic
    real_system = np.vstack([system.real, system.imag])
    return null_space(real_system).shape[1]


def metric_scale(n: int, kappa: Optional[float] = None, form: Optional[str] = None) -> float:
    """Effective scalar multiplying tr(A B) for the configured metric form"""
    metric_config = get_config().harmonic.metric
    kappa = metric_config.kappa if kappa is None else kappa
    form = metric_config.form if form is None else form
    error.value_check("<HRM10250313E>", kappa > 0, f"kappa must be positive, got {kappa}")
    error.value_check(
        "<HRM10250314E>", form in METRIC_FORMS, f"Unknown metric form '{form}'"
    )
    return float(kappa) * (2.0 * n if form == "killing" else 1.0)


def _default_kappa(kappa: Optional[float]) -> float:
    return get_config().harmonic.metric.kappa if kappa is None else kappa


def _check_pair(a: np.ndarray, b: np.ndarray):
    error.value_check(
        "<HRM10250315E>",
        a.shape[-2:] == b.shape[-2:] and a.shape[-1] == a.shape[-2],
        f"trace form needs square matrices of equal size, got {a.shape} and {b.shape}",
    )


def trace_form(a: np.ndarray, b: np.ndarray, kappa: Optional[float] = None):
    """Bilinear form kappa * tr(A B), batched over leading axes"""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_pair(a, b)
    kappa = _default_kappa(kappa)
    return kappa * np.einsum("...ij,...ji->...", a, b)


def hermitian_pairing(a: np.ndarray, b: np.ndarray, kappa: Optional[float] = None):
    """Hermitian pairing kappa * tr(A B^dagger), batched over leading axes"""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_pair(a, b)
    kappa = _default_kappa(kappa)
    return kappa * np.einsum("...ij,...ij->...", a, np.conj(b))


def hopf_constant(basis: LieBasis) -> complex:
    """c_n with tr(phi^2) = c_n * alpha_1 on the Hitchin section"""
    return complex(2.0 * np.trace(basis.em1 @ basis.e1))


def invariant_residuals(basis: LieBasis) -> Dict[str, float]:
    """All LieBasis invariants as absolute residuals (zero when exact)"""
    x, e1, em1 = basis.x, basis.e1, basis.em1
    residuals = {
        "[x,em1]+em1": np.max(np.abs(bracket(x, em1) + em1)),
        "[x,e1]-e1": np.max(np.abs(bracket(x, e1) - e1)),
        "[em1,e1]-x": np.max(np.abs(bracket(em1, e1) - x)),
        "traces": max(abs(np.trace(m)) for m in (x, e1, em1, *basis.hw)),
        "centralizer_dim": abs(centralizer_dimension(basis) - (basis.n - 1)),
        "weight_dim_total": abs(
            sum(len(v) for v in basis.weight_spaces.values()) - (basis.n**2 - 1)
        ),
    }
    for k, e_k in zip(basis.exponents, basis.hw):
        residuals[f"[e1,e_{k}]"] = np.max(np.abs(bracket(e1, e_k)))
        residuals[f"[x,e_{k}]-{k}e_{k}"] = np.max(np.abs(bracket(x, e_k) - k * e_k))
    hw_rank = np.linalg.matrix_rank(np.array([e.ravel() for e in basis.hw]))
    residuals["hw_span_dim"] = abs(hw_rank - (basis.n - 1))
    return {name: float(value) for name, value in residuals.items()}
