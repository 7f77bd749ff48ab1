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
"""Data structure for the outcome of a harmonic metric solve
"""
# Standard
from typing import List, Optional

# First Party
from caikit.core import DataObjectBase, dataobject
from caikit.core.exceptions import error_handler
import alog

log = alog.use_channel("DATAM")
error = error_handler.get(log)

SOLVE_STATUSES = ("Converged", "Diverged", "Obstructed", "MaxIter")


@dataobject(package="caikit_data_model.caikit_harmonic")
class SolveOutcome(DataObjectBase):
    """Status, iteration count and residual norms of one solve"""

    status: str
    iterations: int
    residual_sup: float
    residual_l2: float
    wall_time: float
    path: str
    method: str
    obstruction_integral: Optional[float]
    residual_history: List[float]

    def __post_init__(self):
        error.value_check(
            "<HRM75230101E>",
            self.status in SOLVE_STATUSES,
            f"Unknown solve status '{self.status}'",
        )

    @property
    def converged(self) -> bool:
        return self.status == "Converged"

    def to_report_dict(self) -> dict:
        """Deterministic part of the record (wall time excluded)"""
        record = self.to_dict()
        record.pop("wall_time", None)
        return record
