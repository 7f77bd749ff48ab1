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
"""Data structures for volume-entropy bounds and flatness sweeps
"""
# Standard
from typing import List, Optional

# First Party
from caikit.core import DataObjectBase, dataobject
from caikit.core.exceptions import error_handler
import alog

log = alog.use_channel("DATAM")
error = error_handler.get(log)

ENTROPY_SOURCES = ("SolvedRun", "SyntheticMetric")
# "bound" for compact sources, "local_statistic" for patch runs
ENTROPY_KINDS = ("bound", "local_statistic")


@dataobject(package="caikit_data_model.caikit_harmonic")
class EntropyReport(DataObjectBase):
    """Lower bound (1/Vol) int sqrt(-K) dV for the volume entropy"""

    volume: float
    bound: float
    kind: str
    source: str
    chi: Optional[int]
    gauss_bonnet_defect: Optional[float]
    integrand_min: float
    integrand_mean: float
    integrand_max: float
    cross_check_bound: Optional[float]
    cross_check_defect: Optional[float]
    degenerate: bool
    kappa: Optional[float]

    def __post_init__(self):
        error.value_check(
            "<HRM75230201E>", self.source in ENTROPY_SOURCES, f"Unknown source '{self.source}'"
        )
        error.value_check(
            "<HRM75230202E>", self.kind in ENTROPY_KINDS, f"Unknown report kind '{self.kind}'"
        )


@dataobject(package="caikit_data_model.caikit_harmonic")
class SweepRow(DataObjectBase):
    """Window statistics of one member of a flatness sweep"""

    t: float
    status: str
    k_abs_mean: Optional[float]
    k_abs_sup: Optional[float]
    b_norm_sq_mean: Optional[float]
    b_norm_sq_sup: Optional[float]
    integrand_mean: Optional[float]


@dataobject(package="caikit_data_model.caikit_harmonic")
class SweepTable(DataObjectBase):
    rows: List[SweepRow]
