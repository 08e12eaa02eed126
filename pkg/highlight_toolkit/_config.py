"""Run configuration for the highlight toolkit.

Values come from the packaged ``data/default.ini``, then an optional user INI
file (argument or ``HLD_CONFIG``), then command-line flags. A ``.env`` file in
the working directory may set the ``HLD_*`` variables.
"""

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from dotenv import find_dotenv, load_dotenv

from ._errors import ConfigurationError
from .audio_dsp import MelConfig
from .inference_pipeline import DetectionConfig
from .nn_core import TrainConfig, batch_size_for
from .video_prep import VideoConfig

DEFAULT_INI = Path(__file__).parent / "data" / "default.ini"


@dataclass(frozen=True)
class TrainSettings:
    """Training options from the [train] section; batch_size None means derive it per modality."""
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: Optional[int] = None
    max_epochs: int = 200
    patience: int = 10

    def to_train_config(self, train_size: int, batch_fraction: float, seed: int) -> TrainConfig:
        batch_size = self.batch_size or batch_size_for(train_size, batch_fraction)
        return TrainConfig(self.learning_rate, self.momentum, batch_size, self.max_epochs, self.patience, seed)


@dataclass(frozen=True)
class PathsConfig:
    corpus: str = "corpus"
    datasets: str = "datasets"
    models: str = "models"
    reports: str = "reports"

    def dataset_file(self, modality: str) -> Path:
        return Path(self.datasets) / f"{modality}.npz"

    def model_file(self, modality: str) -> Path:
        return Path(self.models) / f"{modality}.fta"


@dataclass(frozen=True)
class RunConfig:
    audio: MelConfig = field(default_factory=MelConfig)
    video: VideoConfig = field(default_factory=VideoConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    detect: DetectionConfig = field(default_factory=DetectionConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def with_overrides(self, section: str, **values) -> "RunConfig":
        """Copy with the non-None values replaced in one section."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        current = getattr(self, section)
        unknown = set(values) - {f.name for f in dataclasses.fields(current)}
        if unknown:
            raise ConfigurationError(f"Unknown [{section}] keys: {sorted(unknown)}")
        return dataclasses.replace(self, **{section: dataclasses.replace(current, **values)})


def _coerce(section: str, key: str, raw: str, annotation) -> object:
    text = raw.strip()
    try:
        if "Optional[int]" in str(annotation):
            return None if text.lower() in ("", "auto", "none") else int(text)
        if annotation in (int, "int"):
            return int(text)
        if annotation in (float, "float"):
            return float(text)
        return text
    except ValueError as e:
        raise ConfigurationError(f"[{section}] {key} = {raw!r} is not a valid {annotation}") from e


def _apply_ini(config: RunConfig, path: Path) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigurationError(f"Cannot parse {path}: {e}") from e

    sections = {f.name for f in dataclasses.fields(config)}
    for section in parser.sections():
        if section not in sections:
            raise ConfigurationError(f"{path}: unknown section [{section}]")
        types = {f.name: f.type for f in dataclasses.fields(getattr(config, section))}
        values = {}
        for key, raw in parser.items(section):
            if key not in types:
                raise ConfigurationError(f"{path}: unknown key {key!r} in [{section}]")
            values[key] = _coerce(section, key, raw, types[key])
        config = dataclasses.replace(config, **{section: dataclasses.replace(getattr(config, section), **values)})
    return config


def load_run_config(path: Union[str, Path, None] = None) -> RunConfig:
    """Packaged defaults overlaid with a user INI file (``path`` or ``HLD_CONFIG``)."""
    load_dotenv(find_dotenv(usecwd=True))
    config = _apply_ini(RunConfig(), DEFAULT_INI)
    user = path or os.getenv("HLD_CONFIG")
    if user:
        user = Path(user)
        if not user.exists():
            raise FileNotFoundError(f"Config file not found: {user}")
        config = _apply_ini(config, user)
    return config


def env_int(name: str, default: int) -> int:
    """Integer from the environment (after .env loading), or ``default``."""
    load_dotenv(find_dotenv(usecwd=True))
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigurationError(f"{name}={raw!r} is not an integer") from e
