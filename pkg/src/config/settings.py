"""
Variables de entorno del proyecto (prefijo VMI_), con soporte para .env
"""

from pathlib import Path

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parents[2]
load_dotenv(dotenv_path=PROJECT_ROOT / ".env")


class RuntimeSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="VMI_", extra="ignore")

    output_dir: Path = Path("data/runs")
    threads: int = Field(1, ge=1)
    log_level: str = "INFO"
    # en verdadero loss.csv lleva el tiempo real y deja de ser reproducible byte a byte
    record_wall_time: bool = False


def get_settings() -> RuntimeSettings:
    return RuntimeSettings()
