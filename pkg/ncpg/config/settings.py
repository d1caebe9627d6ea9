"""
Run configuration for ncpg.

Configuration files are flat `key = value` lines with dotted section prefixes
(see docs/config_format.md). Environment variables, loaded through python-dotenv,
supply process-level knobs that do not belong in a reproducible run file.
"""

import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from dotenv import load_dotenv

# Add the project root to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from utils.error_handlers import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), 'default_run.conf')

DEFAULT_TOLERANCES: Dict[str, float] = {
    "exact": 1e-12,
    "identity": 1e-10,
    "moment": 1e-9,
    "refinement_ratio": 0.75,
    "slope": 0.1,
}

ALL_SUITES: List[str] = [
    "kernel", "car", "quasi_free", "wick_modular", "hyper", "lp", "spectral",
    "filtration", "gbm", "ito", "girsanov", "sde", "phi4",
]


@dataclass
class RunConfig:
    """Everything a verify or scan run depends on."""
    seed: int = 20240607
    mu: float = 0.5
    d: int = 2
    n_t: int = 4
    T: float = 1.0
    h_dim: int = 2
    n_reserved: int = 2
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    suites: List[str] = field(default_factory=lambda: list(ALL_SUITES))
    out_dir: str = "ncpg_out"
    threads: int = 1
    max_modes: int = 12
    scan: Dict[str, str] = field(default_factory=dict)

    def tolerance(self, name: str) -> float:
        return self.tolerances.get(name, DEFAULT_TOLERANCES.get(name, 1e-10))

    def scan_values(self, name: str, default: List[float]) -> List[float]:
        """Comma-separated floats of scan.<name>, or the default."""
        raw = self.scan.get(name)
        if raw is None:
            return list(default)
        try:
            return [float(item) for item in raw.split(',') if item.strip()]
        except ValueError as exc:
            raise ConfigError(f"scan.{name} must be a comma-separated list of numbers, got '{raw}'") from exc

    def validate(self) -> "RunConfig":
        """
        Checks ranges that would make every later computation meaningless.

        Returns:
            self, so calls can be chained.
        """
        if not 0.0 < self.mu < 1.0:
            raise ConfigError(f"model.mu must lie in (0, 1), got {self.mu}")
        if self.d < 1 or self.n_t < 1 or self.T <= 0:
            raise ConfigError("model.d, model.n_t and model.T must be positive")
        if self.h_dim < 2 or self.h_dim % 2:
            raise ConfigError(f"model.h_dim must be even and >= 2, got {self.h_dim}")
        if self.n_reserved < 0:
            raise ConfigError("model.n_reserved must be non-negative")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("run.seed must be an unsigned 64-bit integer")
        for name, value in self.tolerances.items():
            if not value >= 0.0:
                raise ConfigError(f"tolerance.{name} must be non-negative, got {value}")
        unknown = [name for name in self.suites if name not in ALL_SUITES]
        if unknown:
            raise ConfigError(f"unknown suites: {', '.join(unknown)}")
        if self.threads < 1:
            raise ConfigError("run.threads must be at least 1")
        return self


def _parse_value(raw: str, key: str, kind):
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse '{key} = {raw}'") from exc


def parse_flat_config(text: str) -> Dict[str, str]:
    """
    Parses flat `section.key = value` text into a dictionary of raw strings.

    Args:
        text: The file contents. Blank lines and `#` comments are ignored.

    Returns:
        Mapping from dotted key to the raw value string.
    """
    entries: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split('=', 1))
        if not key or '.' not in key:
            raise ConfigError(f"line {lineno}: key '{key}' needs a section prefix")
        entries[key] = value
    return entries


_MODEL_KEYS = {
    "model.mu": ("mu", float),
    "model.d": ("d", int),
    "model.n_t": ("n_t", int),
    "model.T": ("T", float),
    "model.h_dim": ("h_dim", int),
    "model.n_reserved": ("n_reserved", int),
    "run.seed": ("seed", int),
    "run.out_dir": ("out_dir", str),
    "run.threads": ("threads", int),
    "run.max_modes": ("max_modes", int),
}


def config_from_entries(entries: Dict[str, str]) -> RunConfig:
    """Builds a RunConfig from parsed flat entries."""
    config = RunConfig()
    for key, raw in entries.items():
        if key in _MODEL_KEYS:
            attr, kind = _MODEL_KEYS[key]
            setattr(config, attr, _parse_value(raw, key, kind))
        elif key.startswith("tolerance."):
            config.tolerances[key.split('.', 1)[1]] = _parse_value(raw, key, float)
        elif key == "run.suites":
            config.suites = [name.strip() for name in raw.split(',') if name.strip()]
        elif key.startswith("scan."):
            config.scan[key.split('.', 1)[1]] = raw
        else:
            raise ConfigError(f"unknown configuration key '{key}'")
    return config


def load_config(path: Optional[str] = None, seed: Optional[int] = None,
                out_dir: Optional[str] = None, suites: Optional[List[str]] = None) -> RunConfig:
    """
    Loads environment variables and a run file, then applies CLI overrides.

    Args:
        path: Run file to read; the packaged default when omitted.
        seed: Optional override of run.seed.
        out_dir: Optional override of run.out_dir.
        suites: Optional override of run.suites.

    Returns:
        A validated RunConfig.
    """
    load_dotenv()
    path = path or DEFAULT_CONFIG_PATH
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            entries = parse_flat_config(handle.read())
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc}") from exc

    config = config_from_entries(entries)
    config.threads = _parse_value(os.getenv("NCPG_THREADS", str(config.threads)), "NCPG_THREADS", int)
    config.max_modes = _parse_value(os.getenv("NCPG_MAX_MODES", str(config.max_modes)), "NCPG_MAX_MODES", int)
    if seed is not None:
        config.seed = seed
    if out_dir is not None:
        config.out_dir = out_dir
    if suites:
        config.suites = list(suites)

    logger.debug(f"Loaded configuration from {path}: {config}")
    return config.validate()


def max_modes() -> int:
    """Dense Fock-space cap on the number of one-particle modes."""
    return int(os.getenv("NCPG_MAX_MODES", "12"))
