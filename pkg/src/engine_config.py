"""
Engine settings.

Defaults live here, `config/settings.json` overrides them and `INVAR_*`
environment variables (usually from a `.env` file) override both.
"""

import json
import logging
import os
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_SETTINGS_FILE = os.path.join(PROJECT_ROOT, "config", "settings.json")


@dataclass
class EngineSettings:
    db_path: str = "db"
    max_slots: int = 24
    dimension: int = 4
    signature: int = -1
    mode: str = "nonexpanded"
    workers: int = 1
    max_memory_mb: int = 0
    log_level: str = "INFO"
    log_file: Optional[str] = None
    canon_cache: int = 200000
    simplify_max_iter: int = 16
    oracle_seeds: List[int] = field(default_factory=lambda: [11, 23, 37])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# env var -> (attribute, parser)
_ENV_OVERRIDES = {
    "INVAR_DB_PATH": ("db_path", str),
    "INVAR_MAX_SLOTS": ("max_slots", int),
    "INVAR_DIMENSION": ("dimension", int),
    "INVAR_SIGNATURE": ("signature", int),
    "INVAR_MODE": ("mode", str),
    "INVAR_WORKERS": ("workers", int),
    "INVAR_MAX_MEMORY_MB": ("max_memory_mb", int),
    "INVAR_LOG_LEVEL": ("log_level", str),
    "INVAR_LOG_FILE": ("log_file", str),
    "INVAR_CANON_CACHE": ("canon_cache", int),
    "INVAR_SIMPLIFY_MAX_ITER": ("simplify_max_iter", int),
    "INVAR_ORACLE_SEEDS": ("oracle_seeds", lambda text: [int(s) for s in text.split(",") if s.strip()]),
}


def _load_json(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.warning(f"Ignoring unreadable settings file {path}: {e}")
        return {}
    return data.get("engine", {})


def load_settings(settings_file: Optional[str] = None, use_dotenv: bool = True) -> EngineSettings:
    """Resolve settings from defaults, the JSON file and the environment"""
    if use_dotenv:
        load_dotenv()

    settings = EngineSettings()
    for key, value in _load_json(settings_file or DEFAULT_SETTINGS_FILE).items():
        if hasattr(settings, key):
            setattr(settings, key, value)
        else:
            logger.warning(f"Unknown setting '{key}' in settings file")

    for env_name, (attr, parse) in _ENV_OVERRIDES.items():
        raw = os.getenv(env_name)
        if raw is None or raw == "":
            continue
        try:
            setattr(settings, attr, parse(raw))
        except ValueError:
            logger.warning(f"Invalid value for {env_name}: {raw!r}, keeping {getattr(settings, attr)!r}")

    if settings.mode not in ("expanded", "nonexpanded"):
        logger.warning(f"Unknown rule mode {settings.mode!r}, using nonexpanded")
        settings.mode = "nonexpanded"
    if settings.signature not in (-1, 1):
        logger.warning(f"Signature must be -1 or +1, got {settings.signature}; using -1")
        settings.signature = -1
    return settings
