"""Configuration management for ovmf."""
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings, read from OVMF_* environment variables or .env."""

    model_config = SettingsConfigDict(
        env_prefix="OVMF_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    version: str = "0.1.0"

    # Logging settings
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "WARNING"
    log_format: Literal["json", "console"] = "console"

    # Performance settings
    threads: int = Field(default=1, ge=1, description="Worker threads for columns and checks")

    # Precision management
    precision_buffer: int = Field(default=6, ge=0)
    buffer_step: int = Field(default=6, ge=1)
    max_escalations: int = Field(default=2, ge=0)
    hecke_slack: int = Field(default=10, ge=1)

    # Stability certificate
    certify: bool = True
    stability_extra_levels: int = Field(default=2, ge=1)
    stability_extra_precision: int = Field(default=2, ge=1)

    # Observability
    metrics_file: Path | None = None

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v: Any) -> Any:
        """Normalize log level to uppercase for Literal validation."""
        if isinstance(v, str):
            return v.upper()
        return v


@lru_cache
def get_settings() -> Settings:
    """Get cached application settings."""
    return Settings()
