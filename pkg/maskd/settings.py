"""Configuration management for maskd using pydantic-settings."""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class MaskdSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="MASKD_",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = Field(default="INFO", description="Level for the maskd logger")
    progress: bool = Field(default=True, description="Show tqdm progress bars during training")

    # [Observability] Logfire
    logfire_token: str = Field(
        default="",
        description="Logfire write token; spans stay local when empty",
    )


def get_settings() -> MaskdSettings:
    """Read settings fresh so env changes (tests, subprocesses) are honored."""
    return MaskdSettings()
