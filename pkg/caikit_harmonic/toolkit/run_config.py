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
"""Run configuration files.

A run config is a YAML document with the sections group, surface,
differentials, init, solver, metric, output and sweep. Unknown keys are
rejected; solver and metric keys left out fall back to the library config
(harmonic.solver / harmonic.metric).
"""
# Standard
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple
import os

# Third Party
import numpy as np
import yaml

# First Party
from caikit import get_config
from caikit.core.exceptions import error_handler
import alog

# Local
from .domain import SurfaceDomain, SurfaceKind
from .higgs import Differential

log = alog.use_channel("RNCFG")
error = error_handler.get(log)

INIT_KINDS = ("fiducial", "identity")


def _complex(value: Any, path: str) -> complex:
    if isinstance(value, (list, tuple)):
        error.value_check(
            "<HRM18640101E>",
            len(value) == 2 and all(isinstance(v, (int, float)) for v in value),
            f"{path} must be a number or [re, im], got {value}",
        )
        return complex(float(value[0]), float(value[1]))
    error.value_check(
        "<HRM18640102E>",
        isinstance(value, (int, float)) and not isinstance(value, bool),
        f"{path} must be a number or [re, im], got {value}",
    )
    return complex(float(value), 0.0)


def _pair(value: complex) -> List[float]:
    return [float(value.real), float(value.imag)]


def _check_keys(section: Any, allowed: Tuple[str, ...], path: str) -> Mapping:
    error.type_check("<HRM18640103E>", dict, **{path or "config": section})
    unknown = sorted(str(key) for key in set(section) - set(allowed))
    if unknown:
        prefix = f"{path}." if path else ""
        error("<HRM18640104E>", ValueError(f"Unknown config key '{prefix}{unknown[0]}'"))
    return section


@dataclass(frozen=True)
class SurfaceConfig:
    kind: str = SurfaceKind.TORUS.value
    N: int = 64
    tau: complex = 1j
    L: float = 1.0

    def domain(self) -> SurfaceDomain:
        if self.kind == SurfaceKind.TORUS.value:
            return SurfaceDomain.torus(self.N, self.tau)
        return SurfaceDomain.patch(self.N, self.L)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == SurfaceKind.TORUS.value:
            return {"kind": self.kind, "N": self.N, "tau": _pair(self.tau)}
        return {"kind": self.kind, "N": self.N, "L": self.L}


@dataclass(frozen=True)
class DifferentialConfig:
    """One alpha_k entry: constant, polynomial coefficients, or a synthetic cosine"""

    k: int
    constant: Optional[complex] = None
    coefficients: Optional[Tuple[complex, ...]] = None
    cosine_amplitude: Optional[float] = None
    cosine_mode: Tuple[int, int] = (1, 0)

    def to_differential(self, domain: SurfaceDomain) -> Differential:
        if self.cosine_amplitude is not None:
            s, t = domain.lattice_coordinates
            p, q = self.cosine_mode
            samples = self.cosine_amplitude * np.cos(2.0 * np.pi * (p * s + q * t))
            return Differential(self.k, samples=samples.astype(complex))
        return Differential(self.k, constant=self.constant, coefficients=self.coefficients)

    def scaled(self, factor: float) -> "DifferentialConfig":
        return replace(
            self,
            constant=None if self.constant is None else factor * self.constant,
            coefficients=None
            if self.coefficients is None
            else tuple(factor * c for c in self.coefficients),
            cosine_amplitude=None
            if self.cosine_amplitude is None
            else factor * self.cosine_amplitude,
        )

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"k": self.k}
        if self.constant is not None:
            record["constant"] = _pair(self.constant)
        if self.coefficients is not None:
            record["coefficients"] = [_pair(c) for c in self.coefficients]
        if self.cosine_amplitude is not None:
            record["cosine"] = {
                "amplitude": float(self.cosine_amplitude),
                "mode": list(self.cosine_mode),
            }
        return record


@dataclass(frozen=True)
class InitConfig:
    kind: str = "fiducial"
    perturbation_amplitude: float = 0.0
    perturbation_mode: Tuple[int, int] = (1, 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "perturbation_amplitude": float(self.perturbation_amplitude),
            "perturbation_mode": list(self.perturbation_mode),
        }


@dataclass(frozen=True)
class SolverConfig:
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    dt: Optional[float] = None
    method: Optional[str] = None
    path: Optional[str] = None


@dataclass(frozen=True)
class MetricConfig:
    kappa: Optional[float] = None
    form: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    n: int
    surface: SurfaceConfig
    differentials: Tuple[DifferentialConfig, ...] = ()
    init: InitConfig = field(default_factory=InitConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)
    output_dir: Optional[str] = None
    t_values: Optional[Tuple[float, ...]] = None

    ## Parsing #################################################################

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        """Parse a YAML run config file"""
        error.file_check("<HRM18640105E>", path)
        with open(path, encoding="utf-8") as handle:
            try:
                document = yaml.safe_load(handle)
            except yaml.YAMLError as err:
                error("<HRM18640106E>", ValueError(f"Malformed run config {path}: {err}"))
        log.debug(f"Loaded run config {path}")
        return cls.from_dict(document or {})

    @classmethod
    def from_dict(cls, document: Mapping) -> "RunConfig":
        document = _check_keys(
            dict(document),
            ("group", "surface", "differentials", "init", "solver", "metric", "output", "sweep"),
            "",
        )
        error.value_check(
            "<HRM18640107E>", "group" in document, "Run config needs a 'group' section"
        )
        group = _check_keys(dict(document["group"]), ("n",), "group")
        error.type_check("<HRM18640108E>", int, **{"group.n": group.get("n")})

        surface_section = _check_keys(
            dict(document.get("surface", {})), ("kind", "N", "tau", "L"), "surface"
        )
        kind = surface_section.get("kind", SurfaceKind.TORUS.value)
        error.value_check(
            "<HRM18640109E>",
            kind in {k.value for k in SurfaceKind},
            f"surface.kind must be torus or patch, got '{kind}'",
        )
        error.value_check(
            "<HRM18640110E>",
            not (kind == SurfaceKind.TORUS.value and "L" in surface_section)
            and not (kind == SurfaceKind.PATCH.value and "tau" in surface_section),
            f"surface.{'L' if kind == SurfaceKind.TORUS.value else 'tau'} does not apply to a {kind}",
        )
        surface = SurfaceConfig(
            kind=kind,
            N=int(surface_section.get("N", SurfaceConfig.N)),
            tau=_complex(surface_section.get("tau", [0.0, 1.0]), "surface.tau"),
            L=float(surface_section.get("L", SurfaceConfig.L)),
        )

        differentials = tuple(
            _parse_differential(entry, f"differentials[{index}]")
            for index, entry in enumerate(document.get("differentials") or [])
        )

        init_section = _check_keys(
            dict(document.get("init", {})),
            ("kind", "perturbation_amplitude", "perturbation_mode"),
            "init",
        )
        init = InitConfig(
            kind=init_section.get("kind", "fiducial"),
            perturbation_amplitude=float(init_section.get("perturbation_amplitude", 0.0)),
            perturbation_mode=tuple(int(m) for m in init_section.get("perturbation_mode", (1, 0))),
        )
        error.value_check(
            "<HRM18640111E>", init.kind in INIT_KINDS, f"init.kind must be one of {INIT_KINDS}"
        )

        solver_section = _check_keys(
            dict(document.get("solver", {})), tuple(f.name for f in fields(SolverConfig)), "solver"
        )
        metric_section = _check_keys(
            dict(document.get("metric", {})), tuple(f.name for f in fields(MetricConfig)), "metric"
        )
        output = _check_keys(dict(document.get("output", {})), ("dir",), "output")
        sweep = _check_keys(dict(document.get("sweep", {})), ("t_values",), "sweep")
        t_values = sweep.get("t_values")

        return cls(
            n=group["n"],
            surface=surface,
            differentials=differentials,
            init=init,
            solver=SolverConfig(**solver_section),
            metric=MetricConfig(**metric_section),
            output_dir=output.get("dir"),
            t_values=None if t_values is None else tuple(float(t) for t in t_values),
        )

    ## Resolution ##############################################################

    def resolved(self) -> "RunConfig":
        """Fill solver and metric keys from the library config"""
        library = get_config().harmonic
        solver = SolverConfig(
            **{
                f.name: library.solver[f.name]
                if getattr(self.solver, f.name) is None
                else getattr(self.solver, f.name)
                for f in fields(SolverConfig)
            }
        )
        metric = MetricConfig(
            kappa=library.metric.kappa if self.metric.kappa is None else self.metric.kappa,
            form=library.metric.form if self.metric.form is None else self.metric.form,
        )
        return replace(self, solver=solver, metric=metric)

    def with_overrides(self, **overrides) -> "RunConfig":
        """Apply command-line overrides (None values are ignored).

        Accepted keys: tol, max_iter, dt, method, path, kappa, form, output_dir.
        """
        solver = {k: overrides.get(k) for k in ("tol", "max_iter", "dt", "method", "path")}
        metric = {k: overrides.get(k) for k in ("kappa", "form")}
        config = replace(
            self,
            solver=replace(self.solver, **{k: v for k, v in solver.items() if v is not None}),
            metric=replace(self.metric, **{k: v for k, v in metric.items() if v is not None}),
        )
        if overrides.get("output_dir") is not None:
            config = replace(config, output_dir=overrides["output_dir"])
        return config

    def with_top_scaled(self, factor: float) -> "RunConfig":
        """Scale the top differential alpha_{n-1} (sweep members)"""
        top = self.n - 1
        error.value_check(
            "<HRM18640112E>",
            any(d.k == top for d in self.differentials),
            f"Config has no top differential alpha_{top} to scale",
        )
        differentials = tuple(d.scaled(factor) if d.k == top else d for d in self.differentials)
        return replace(self, differentials=differentials)

    ## Output ##################################################################

    def domain(self) -> SurfaceDomain:
        return self.surface.domain()

    def build_differentials(self) -> List[Differential]:
        domain = self.domain()
        return [d.to_differential(domain) for d in self.differentials]

    def to_dict(self) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            "group": {"n": self.n},
            "surface": self.surface.to_dict(),
            "differentials": [d.to_dict() for d in self.differentials],
            "init": self.init.to_dict(),
            "solver": {
                f.name: getattr(self.solver, f.name)
                for f in fields(SolverConfig)
                if getattr(self.solver, f.name) is not None
            },
            "metric": {
                f.name: getattr(self.metric, f.name)
                for f in fields(MetricConfig)
                if getattr(self.metric, f.name) is not None
            },
        }
        if self.output_dir is not None:
            document["output"] = {"dir": self.output_dir}
        if self.t_values is not None:
            document["sweep"] = {"t_values": list(self.t_values)}
        return document

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(self.to_dict(), handle, sort_keys=True)


def _parse_differential(entry: Any, path: str) -> DifferentialConfig:
    entry = _check_keys(dict(entry), ("k", "constant", "coefficients", "cosine"), path)
    error.type_check("<HRM18640113E>", int, **{f"{path}.k": entry.get("k")})
    given = [key for key in ("constant", "coefficients", "cosine") if key in entry]
    error.value_check(
        "<HRM18640114E>",
        len(given) == 1,
        f"{path} needs exactly one of constant, coefficients or cosine",
    )
    if "constant" in entry:
        return DifferentialConfig(k=entry["k"], constant=_complex(entry["constant"], f"{path}.constant"))
    if "coefficients" in entry:
        coefficients = entry["coefficients"]
        error.type_check("<HRM18640115E>", list, **{f"{path}.coefficients": coefficients})
        return DifferentialConfig(
            k=entry["k"],
            coefficients=tuple(
                _complex(c, f"{path}.coefficients[{i}]") for i, c in enumerate(coefficients)
            ),
        )
    cosine = _check_keys(dict(entry["cosine"]), ("amplitude", "mode"), f"{path}.cosine")
    return DifferentialConfig(
        k=entry["k"],
        cosine_amplitude=float(cosine.get("amplitude", 1.0)),
        cosine_mode=tuple(int(m) for m in cosine.get("mode", (1, 0))),
    )


def bundled_config_path(name: str) -> str:
    """Path of a run config shipped in resources/configs"""
    base = os.path.join(os.path.dirname(os.path.dirname(__file__)), "resources", "configs")
    return os.path.join(base, name if name.endswith(".yml") else name + ".yml")
