# resolab/config.py
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

from resolab.errors import ConfigError
from resolab.schemas import ExperimentConfig

# Load .env from project root (or current working directory)
env_path = Path(__file__).resolve().parents[1] / ".env"
if env_path.exists():
    load_dotenv(env_path)
else:
    # fallback to any .env in cwd
    load_dotenv()


def get_env(key: str, default=None):
    val = os.environ.get(key, default)
    if val is None:
        return default
    return val


class Settings:
    """Runtime knobs only; nothing here may change a number in an output."""

    LOG_LEVEL: str = get_env("RESOLAB_LOG_LEVEL", "INFO")
    LOG_FORMAT: str = get_env("RESOLAB_LOG_FORMAT", "%(asctime)s [%(levelname)s] %(message)s")
    THREADS: int = int(get_env("RESOLAB_THREADS", 1))


def get_settings() -> Settings:
    return Settings()


def load_experiment_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file; any failure is a ConfigError."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: invalid experiment config\n{exc}") from exc
