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

# Standard
from typing import Union
import os

# First Party
from caikit.core import ModuleBase, ModuleConfig, ModuleSaver, module
from caikit.core.exceptions import error_handler
import alog

# Local
from ...data_model import EntropyReport, GeometrySummary, SolveOutcome
from ...toolkit.higgs import HiggsField
from ...toolkit.metric import HermitianMetricField
from ...toolkit.pipeline import analyze, read_snapshots, solve_run, write_snapshots
from ...toolkit.run_config import RunConfig
from .entropy_task import EntropyTask
from .geometry_task import GeometryTask

logger = alog.use_channel("HMMAP")
error = error_handler.get(logger)


@module(
    "6D0F1B7E-3C2A-4E59-9B8D-2A7C41E5F903",
    "Harmonic Map",
    "0.0.1",
    tasks=[
        GeometryTask,
        EntropyTask,
    ],
)
class HarmonicMap(ModuleBase):
    """A solved (phi, H) pair together with the run config that produced it"""

    _ARTIFACTS_PATH_KEY = "artifacts_path"
    _ARTIFACTS_PATH_DEFAULT = "artifacts"
    _RUN_CONFIG_KEY = "run_config"
    _OUTCOME_KEY = "outcome"

    def __init__(
        self,
        run_config: RunConfig,
        phi: HiggsField,
        metric: HermitianMetricField,
        outcome: SolveOutcome,
    ):
        super().__init__()
        self.run_config = run_config
        self.phi = phi
        self.metric = metric
        self.outcome = outcome

    @classmethod
    def bootstrap(cls, run_config: Union[str, RunConfig]) -> "HarmonicMap":
        """Build the Higgs field and solve for its harmonic metric

        Args:
            run_config: Union[str, RunConfig]
                Run config or the path of a YAML run config file.
        """
        if isinstance(run_config, str):
            run_config = RunConfig.load(run_config)
        error.type_check("<HRM31570201E>", RunConfig, run_config=run_config)
        run_config = run_config.resolved()
        phi, metric, outcome = solve_run(run_config)
        if not outcome.converged:
            logger.warning(f"Bootstrapped harmonic map did not converge: {outcome.status}")
        return cls(run_config, phi, metric, outcome)

    @classmethod
    def load(cls, model_path: str, *args, **kwargs) -> "HarmonicMap":
        """Load a saved harmonic map

        Args:
            model_path: str
                Path to the ModuleConfig or config dir (where the config.yml lives)

        Returns:
            HarmonicMap
                Instance rebuilt from the stored snapshots; phi is checked
                against the Higgs field of the stored run config.
        """
        config = ModuleConfig.load(model_path)
        artifacts_path = config.get(cls._ARTIFACTS_PATH_KEY)

        error.value_check(
            "<HRM31570202E>",
            artifacts_path,
            ValueError(f"Model config missing '{cls._ARTIFACTS_PATH_KEY}'"),
        )

        artifacts_path = os.path.join(config.model_path, artifacts_path)
        error.dir_check("<HRM31570203E>", artifacts_path)

        run_config = RunConfig.from_dict(config[cls._RUN_CONFIG_KEY])
        outcome = SolveOutcome(**dict(config[cls._OUTCOME_KEY]))
        phi, metric = read_snapshots(artifacts_path, run_config)
        return cls(run_config, phi, metric, outcome)

    def save(self, model_path: str, *args, **kwargs):
        """Save the run config, outcome and field snapshots

        Args:
            model_path: str
                Path to model config
        """
        model_config_path = model_path

        error.type_check("<HRM31570204E>", str, model_path=model_config_path)
        error.value_check(
            "<HRM31570205E>",
            model_config_path is not None and model_config_path.strip(),
            f"model_path '{model_config_path}' is invalid",
        )

        model_config_path = os.path.abspath(model_config_path.strip())

        os.makedirs(model_config_path, exist_ok=False)
        saver = ModuleSaver(
            module=self,
            model_path=model_config_path,
        )

        artifacts_path = saver.config.get(self._ARTIFACTS_PATH_KEY)
        if not artifacts_path:
            artifacts_path = self._ARTIFACTS_PATH_DEFAULT
            saver.update_config({self._ARTIFACTS_PATH_KEY: artifacts_path})
        saver.update_config(
            {
                self._RUN_CONFIG_KEY: self.run_config.to_dict(),
                self._OUTCOME_KEY: self.outcome.to_dict(),
            }
        )

        artifacts_path = os.path.abspath(os.path.join(model_config_path, artifacts_path))
        write_snapshots(artifacts_path, self.phi, self.metric)

        ModuleConfig(saver.config).save(model_config_path)

    def _kappa(self, kappa: float) -> float:
        error.type_check("<HRM31570206E>", float, int, kappa=kappa)
        error.value_check("<HRM31570207E>", kappa > 0, f"kappa must be positive, got {kappa}")
        return float(kappa)

    @GeometryTask.taskmethod()
    def run_geometry(self, kappa: float) -> GeometrySummary:
        """Geometry summary of the harmonic map.
        Args:
            kappa: float
                Metric normalization (1.0 is the trace form)
        Returns:
            GeometrySummary
        """
        kappa = self._kappa(kappa)
        return analyze(self.phi, self.metric, kappa, self.run_config.metric.form).geometry.summary()

    @EntropyTask.taskmethod()
    def run_entropy(self, kappa: float) -> EntropyReport:
        """Manning lower bound for the volume entropy.
        Args:
            kappa: float
                Metric normalization (1.0 is the trace form)
        Returns:
            EntropyReport
        """
        kappa = self._kappa(kappa)
        return analyze(self.phi, self.metric, kappa, self.run_config.metric.form).entropy
