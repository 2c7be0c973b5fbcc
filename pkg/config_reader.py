"""Analysis configuration files (YAML, JSON, INI, TOML) and the settings they produce."""

import json
import os
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import tomli
import yaml

from errors import ValidationError

WORKERS_ENV = "CYCRIR_WORKERS"


class ConfigReader:
    """Reads configuration data from various file formats."""

    def __init__(self, config_path: Union[str, Path]):
        """Initialize with config file path."""
        self.config_path = Path(config_path)
        if not self.config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")

    def read(self) -> Dict[str, str]:
        """Read configuration and return it flattened to dotted string keys."""
        file_extension = self.config_path.suffix.lower()

        if file_extension in ('.yaml', '.yml'):
            return self._read_yaml()
        elif file_extension == '.json':
            return self._read_json()
        elif file_extension == '.ini':
            return self._read_ini()
        elif file_extension == '.toml':
            return self._read_toml()
        else:
            raise ValueError(f"Unsupported file format: {file_extension}")

    def _read_yaml(self) -> Dict[str, str]:
        with open(self.config_path, 'r', encoding='utf-8') as file:
            data = yaml.safe_load(file) or {}
        return self._flatten_dict(data)

    def _read_json(self) -> Dict[str, str]:
        with open(self.config_path, 'r', encoding='utf-8') as file:
            data = json.load(file)
        return self._flatten_dict(data)

    def _read_ini(self) -> Dict[str, str]:
        config = ConfigParser()
        config.read(self.config_path, encoding='utf-8')

        result = {}
        for section in config.sections():
            for key, value in config[section].items():
                # INI sections become the first component of the key
                result[f"{section}.{key}"] = value

        return result

    def _read_toml(self) -> Dict[str, str]:
        with open(self.config_path, 'rb') as file:
            data = tomli.load(file)
        return self._flatten_dict(data)

    def _flatten_dict(self, data: Dict[str, Any], parent_key: str = '', separator: str = '.') -> Dict[str, str]:
        """Flatten nested dictionary to string values."""
        if not isinstance(data, dict):
            raise ValidationError(f"Config file {self.config_path} must contain a mapping at top level")
        items = []
        for key, value in data.items():
            new_key = f"{parent_key}{separator}{key}" if parent_key else key

            if isinstance(value, dict):
                items.extend(self._flatten_dict(value, new_key, separator).items())
            else:
                items.append((new_key, str(value)))

        return dict(items)


@dataclass(frozen=True)
class AnalysisSettings:
    """Tolerances and search knobs shared by every computation of one run."""

    tol_axis: float = 1e-9
    margin_req: float = 1e-6
    rho_bisect_tol: float = 1e-4
    a_grid_size: int = 200
    a_grid_low: float = 1e-3
    a_grid_high: float = 1e3
    arg_grid_size: int = 720
    workers: int = 1

    def __post_init__(self):
        for name in ("tol_axis", "margin_req", "rho_bisect_tol", "a_grid_low", "a_grid_high"):
            value = getattr(self, name)
            if not value > 0:
                raise ValidationError(f"{name} must be positive, got {value}")
        if self.a_grid_low >= self.a_grid_high:
            raise ValidationError("a_grid_low must be below a_grid_high")
        for name in ("a_grid_size", "arg_grid_size", "workers"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be a positive integer")

    @classmethod
    def from_mapping(cls, data: Mapping[str, str]) -> "AnalysisSettings":
        """Build settings from flattened config keys.

        Keys may be bare (``tol_axis``) or nested under ``tolerances.`` or
        ``search.``; unknown keys are rejected.
        """
        known = {f.name: f.type for f in fields(cls)}
        values: Dict[str, Any] = {}
        for key, raw in data.items():
            name = key.split('.')[-1].replace('-', '_')
            prefix = key.rsplit('.', 1)[0] if '.' in key else ''
            if name not in known or prefix not in ('', 'tolerances', 'search'):
                raise ValidationError(f"Unknown configuration key: {key}")
            converter = int if known[name] in (int, 'int') else float
            try:
                values[name] = converter(raw)
            except ValueError:
                raise ValidationError(f"Configuration key {key} expects {converter.__name__}, got {raw!r}")
        return cls(**values)

    def with_overrides(self, **overrides: Optional[Any]) -> "AnalysisSettings":
        """Copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_settings(config_path: Optional[Union[str, Path]] = None,
                  environ: Optional[Mapping[str, str]] = None) -> AnalysisSettings:
    """Defaults, then the config file, then the worker count from the environment."""
    settings = AnalysisSettings()
    if config_path is not None:
        try:
            data = ConfigReader(config_path).read()
        except ValidationError:
            raise
        except (OSError, ValueError, ConfigParserError, yaml.YAMLError) as exc:
            raise ValidationError(f"Cannot read config file {config_path}: {exc}")
        settings = AnalysisSettings.from_mapping(data)
    environ = os.environ if environ is None else environ
    workers = environ.get(WORKERS_ENV)
    if workers:
        try:
            settings = settings.with_overrides(workers=int(workers))
        except ValueError:
            raise ValidationError(f"{WORKERS_ENV} must be a positive integer, got {workers!r}")
    return settings
