"""Experiment configuration: a JSON document naming cells, backend, and costs.

A config is the single input to the CLI.  It defines the cells, the task
battery (a JSONL path, or the bundled synthetic battery when omitted), which
backend to run against, mock model profiles, temperatures, the per-call price
table, and the independent panel used for decoupled evaluation.  The bundled
``data/mock_config.json`` encodes the desk-scale experiment: five cells over
the synthetic battery with a low-noise judge panel.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from .backends import LiveBackend, LiveEndpoint, MockBackend, MockModelProfile
from .errors import ConfigError, GenselectError
from .harness import CellSpec, TaskSpec, load_tasks, synthetic_battery
from .quality import QualityDistribution

BACKEND_KINDS = ("mock", "live")


def _quality_law_from_dict(d: Mapping) -> QualityDistribution:
    kind = d.get("kind")
    if kind == "point":
        return QualityDistribution.point(d["mean"])
    if kind == "gaussian":
        return QualityDistribution.gaussian(d["mean"], d["sd"])
    if kind == "empirical":
        return QualityDistribution.empirical(d["samples"])
    raise ConfigError(f"unknown quality law kind {kind!r}")


def _profile_from_dict(d: Mapping) -> MockModelProfile:
    return MockModelProfile(
        model_id=d["model_id"],
        quality_law=_quality_law_from_dict(d["law"]),
        category_offsets=dict(d.get("category_offsets", {})),
        judge_noise_tau=float(d.get("judge_noise_tau", 0.5)),
        tie_band_epsilon=float(d.get("tie_band_epsilon", 0.0)),
        synthesis_penalty=float(d.get("synthesis_penalty", 0.0)),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully-typed view of a config document."""

    seed: int
    backend: str
    baseline_model: str
    cells: tuple[CellSpec, ...]
    independent_judges: tuple[str, ...] = ()
    cost_table: Mapping[str, float] = field(default_factory=dict)
    baseline_pool: int = 3
    gen_temperature: float = 0.7
    judge_temperature: float = 0.1
    task_battery: Optional[str] = None
    mock_profiles: tuple[MockModelProfile, ...] = ()
    mock_seed: int = 0
    live: Optional[LiveEndpoint] = None

    def __post_init__(self):
        if self.backend not in BACKEND_KINDS:
            raise ConfigError(
                f"backend must be one of {BACKEND_KINDS}, got {self.backend!r}")
        if not self.cells:
            raise ConfigError("config defines no cells")
        if self.backend == "mock" and not self.mock_profiles:
            raise ConfigError("mock backend requires mock_profiles")
        if self.backend == "live" and self.live is None:
            raise ConfigError("live backend requires a live endpoint block")

    def tasks(self, base_dir: Optional[Path] = None) -> tuple[TaskSpec, ...]:
        if self.task_battery is None:
            return synthetic_battery()
        path = Path(self.task_battery)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            raise ConfigError(f"task battery not found: {path}")
        return load_tasks(path)

    def build_backend(self, kind: Optional[str] = None):
        kind = kind or self.backend
        if kind == "mock":
            if not self.mock_profiles:
                raise ConfigError("mock backend requires mock_profiles")
            return MockBackend(self.mock_profiles, seed=self.mock_seed)
        if kind == "live":
            if self.live is None:
                raise ConfigError("live backend requires a live endpoint block")
            return LiveBackend(self.live)
        raise ConfigError(f"unknown backend kind {kind!r}")


def config_from_dict(doc: Mapping) -> ExperimentConfig:
    try:
        temps = doc.get("temperatures", {})
        live = None
        if "live" in doc and doc["live"] is not None:
            live = LiveEndpoint(base_url=doc["live"]["base_url"],
                                api_key_env=doc["live"]["api_key_env"],
                                timeout=float(doc["live"].get("timeout", 60.0)))
        return ExperimentConfig(
            seed=int(doc["seed"]),
            backend=doc.get("backend", "mock"),
            baseline_model=doc["baseline_model"],
            cells=tuple(CellSpec.from_dict(d) for d in doc["cells"]),
            independent_judges=tuple(doc.get("independent_judges", ())),
            cost_table={k: float(v) for k, v in doc.get("cost_table", {}).items()},
            baseline_pool=int(doc.get("baseline_pool", 3)),
            gen_temperature=float(temps.get("generation", 0.7)),
            judge_temperature=float(temps.get("judging", 0.1)),
            task_battery=doc.get("task_battery"),
            mock_profiles=tuple(_profile_from_dict(d)
                                for d in doc.get("mock_profiles", ())),
            mock_seed=int(doc.get("mock_seed", 0)),
            live=live,
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        if isinstance(e, GenselectError):
            raise ConfigError(str(e)) from e
        raise ConfigError(f"malformed config: {e!r}") from e


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(doc)


def bundled_mock_config_path() -> Path:
    """Path of the packaged desk-scale mock experiment config."""
    return Path(resources.files("genselect").joinpath("data/mock_config.json"))


def load_bundled_mock_config() -> ExperimentConfig:
    return load_config(bundled_mock_config_path())
