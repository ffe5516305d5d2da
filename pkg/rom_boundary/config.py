import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from .errors import ConfigError

# Load environment variables
load_dotenv()


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}")
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class RomSettings:
    """Process-wide settings read from the environment (.env supported)"""

    log_dir: Path
    log_level: str
    workers: int
    qp_tolerance: float
    max_iterations: int
    kernel_cache_rows: int
    keys_dir: Path
    sign_manifests: bool

    @classmethod
    def from_env(cls) -> "RomSettings":
        log_dir = os.getenv("ROM_LOG_DIR") or str(Path(__file__).parent / "logs")
        log_level = os.getenv("ROM_LOG_LEVEL", "INFO").upper()
        if log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"ROM_LOG_LEVEL is not a logging level: {log_level!r}")

        return cls(
            log_dir=Path(log_dir),
            log_level=log_level,
            workers=_env_int("ROM_WORKERS", os.cpu_count() or 1),
            qp_tolerance=_env_float("ROM_QP_TOLERANCE", 1e-6),
            max_iterations=_env_int("ROM_MAX_ITERATIONS", 10_000_000),
            kernel_cache_rows=_env_int("ROM_KERNEL_CACHE_ROWS", 256, minimum=2),
            keys_dir=Path(os.getenv("ROM_KEYS_DIR", "keys")),
            sign_manifests=_env_flag("ROM_SIGN_MANIFESTS"),
        )


_settings: Optional[RomSettings] = None


def get_settings() -> RomSettings:
    """Return the cached settings, reading the environment on first use"""
    global _settings
    if _settings is None:
        _settings = RomSettings.from_env()
    return _settings


def reload_settings() -> RomSettings:
    global _settings
    _settings = RomSettings.from_env()
    return _settings
