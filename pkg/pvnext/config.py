from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    SEED: int = 0
    LOG_LEVEL: str = "INFO"
    BENCH_WARMUP: int = Field(default=3, ge=3)
    BENCH_ITERATIONS: int = Field(default=10, ge=10)
    DEFAULT_PRESET: str = "micro"
    CHECKPOINT_PATH: Optional[str] = None
    PARALLEL: bool = False

    model_config = SettingsConfigDict(env_prefix="PVNEXT_", env_file=".env", extra="ignore")


settings = Settings()
