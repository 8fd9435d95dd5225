import os

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="GEODRAT_", extra="ignore"
    )

    app_name: str = "geodrat"
    port: int = 8000
    log_level: str = "INFO"
    output_dir: str = "out"

    threads: int = os.cpu_count() or 1

    grid_nx: int = 21
    grid_ny: int = 21

    phi_accept: float = 1e-6
    phi_accept_p95: float = 1e-4
    phi_reject: float = 1e-3
    residual_tol: float = 1e-6
    energy_tol: float = 1e-9
    q_min: float = 1e-6
    u_min: float = 1e-3
    march_steps: int = 400


settings = Settings()
