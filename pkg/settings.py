"""Application settings loaded from environment or .env."""

from __future__ import annotations

import os
from typing import Literal, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class AppSettings(BaseSettings):
    threads: Optional[int] = None
    output_dir: str = "outputs"
    log_level: str = "INFO"
    seed: int = 7
    level: Literal["quick", "full"] = "quick"

    model_config = SettingsConfigDict(env_file=".env", env_prefix="UICT_", extra="ignore")

    def pool_size(self) -> int:
        if self.threads is not None and self.threads > 0:
            return self.threads
        return os.cpu_count() or 1
