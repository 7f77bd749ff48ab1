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
"""Scalar summary of the harmonic-map geometry of a solved run
"""
# Standard
from typing import List, Optional

# First Party
from caikit.core import DataObjectBase, dataobject


@dataobject(package="caikit_data_model.caikit_harmonic")
class BranchPoint(DataObjectBase):
    """A node where the pullback metric degenerates"""

    i: int
    j: int
    x: float
    y: float
    detg: float


@dataobject(package="caikit_data_model.caikit_harmonic")
class GeometrySummary(DataObjectBase):
    """Extremes and integrals of the per-node geometry fields.

    Curvature entries are None when no node carries a valid value (fully
    degenerate surfaces) or, for b_norm_sq, on non-conformal runs.
    """

    kappa: float
    metric_scale: float
    min_detg: float
    max_detg: float
    branch_point_count: int
    branch_points: List[BranchPoint]
    degenerate: bool
    conformal: bool
    conformality_defect: float
    hopf_constant: float
    hopf_sup: float
    energy_total: float
    k_min: Optional[float]
    k_max: Optional[float]
    sec_min: Optional[float]
    sec_max: Optional[float]
    b_norm_sq_max: Optional[float]
    b_norm_sq_argmax_x: Optional[float]
    b_norm_sq_argmax_y: Optional[float]
    gauss_inconsistent_nodes: int
