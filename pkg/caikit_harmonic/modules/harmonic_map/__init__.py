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
"""
Harmonic Map Module
===================

Implements the following tasks:

  1. GeometryTask: Geometry summary of a solved harmonic map for a metric normalization kappa
  2. EntropyTask: Volume-entropy lower bound of a solved harmonic map for kappa

"""

from .entropy_task import EntropyTask
from .geometry_task import GeometryTask
from .harmonic_map import HarmonicMap
