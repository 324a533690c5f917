#
# Copyright 2025 coreseek.com
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
#
"""
Run configuration.

Settings shared by the CLI commands are read from a YAML file, by default
`.avrkit.yml` in the working directory::

    settings:
      topk: 10
      threshold: 0.6
      num_paths: 100
      seed: 0
"""

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from .draq import RandomPathConfig, SamplerMode
from .errors import ConfigError
from .evalbench import ApaMode, CpeMode
from .pipeline import DEFAULT_THRESHOLD, DEFAULT_TOPK, RerankMode

__all__ = ['CONFIG_FILENAME', 'AvrConfig']

CONFIG_FILENAME = '.avrkit.yml'


@dataclass
class AvrConfig:
    """YAML-backed settings with the defaults of every command."""
    topk: int = DEFAULT_TOPK
    threshold: float = DEFAULT_THRESHOLD
    num_paths: int = 100
    seed: int = 0
    context: bool = True
    sampler_mode: str = SamplerMode.STEP.value
    cache_size: int = 64
    workers: int = 1
    cpe_mode: str = CpeMode.ABSOLUTE.value
    apa_mode: str = ApaMode.TUPLES.value
    rerank: str = RerankMode.DRAQ.value

    path: Optional[Path] = None
    """Where the settings were loaded from, if anywhere."""

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check ranges and enum values.

        Raises:
            ConfigError: On the first invalid setting.
        """
        for name in ('topk', 'num_paths', 'workers'):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"Setting '{name}' must be an integer >= 1, got {value!r}")
        if not isinstance(self.cache_size, int) or self.cache_size < 0:
            raise ConfigError(f"Setting 'cache_size' must be an integer >= 0, got {self.cache_size!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"Setting 'seed' must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.threshold, (int, float)) or isinstance(self.threshold, bool):
            raise ConfigError(f"Setting 'threshold' must be a number, got {self.threshold!r}")
        if not isinstance(self.context, bool):
            raise ConfigError(f"Setting 'context' must be true or false, got {self.context!r}")
        for name, enum in (('sampler_mode', SamplerMode), ('cpe_mode', CpeMode),
                           ('apa_mode', ApaMode), ('rerank', RerankMode)):
            value = getattr(self, name)
            allowed = [member.value for member in enum]
            if value not in allowed:
                raise ConfigError(f"Setting '{name}' must be one of {allowed}, got {value!r}")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], path: Optional[Path] = None) -> 'AvrConfig':
        known = {f.name for f in fields(cls)} - {'path'}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown setting '{unknown[0]}'")
        return cls(path=path, **dict(data))

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> 'AvrConfig':
        """Load settings from a YAML file.

        Args:
            path: The configuration file. Defaults to `.avrkit.yml` in the
                working directory; a missing default file yields defaults.

        Raises:
            ConfigError: If an explicit file is missing or any setting is invalid.
        """
        explicit = path is not None
        path = Path(path) if explicit else Path.cwd() / CONFIG_FILENAME
        if not path.exists():
            if explicit:
                raise ConfigError(f"Configuration file {path} does not exist")
            return cls()

        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse {path}: {e}") from e
        if not isinstance(data, dict) or not isinstance(data.get('settings', {}), dict):
            raise ConfigError(f"{path} must contain a 'settings' mapping")
        return cls.from_mapping(data.get('settings', {}), path=path)

    def save(self, path: Optional[Union[str, Path]] = None) -> None:
        """Write settings to a YAML file.

        Raises:
            OSError: If the configuration file cannot be written.
        """
        config_path = Path(path) if path is not None else (self.path or Path.cwd() / CONFIG_FILENAME)
        config_path.parent.mkdir(parents=True, exist_ok=True)
        data = {'settings': self.settings()}

        # Temporary file plus rename keeps the old file intact on failure
        temp_path = config_path.with_suffix('.tmp')
        try:
            with open(temp_path, 'w', encoding='utf-8') as f:
                yaml.safe_dump(data, f, default_flow_style=False)
            temp_path.replace(config_path)
        except Exception:
            if temp_path.exists():
                temp_path.unlink()
            raise
        self.path = config_path

    def settings(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop('path')
        return data

    def update(self, **overrides: Any) -> 'AvrConfig':
        """A copy with every non-None override applied."""
        data = self.settings()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return AvrConfig.from_mapping(data, path=self.path)

    def path_config(self) -> RandomPathConfig:
        return RandomPathConfig(num_paths=self.num_paths, seed=self.seed, mode=SamplerMode(self.sampler_mode))
