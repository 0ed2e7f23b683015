"""
Configuration settings for GSA Audit
"""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # App settings
    APP_NAME: str = "gsaudit"
    APP_VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # Worker pool (fallback for --threads)
    AUDIT_THREADS: int = Field(default=1, ge=1)

    # Permutation / resampling budgets
    GSEA_PERMUTATIONS: int = Field(default=1000, ge=1)
    PADOG_PERMUTATIONS: int = Field(default=1000, ge=1)
    GOSEQ_RESAMPLES: int = Field(default=2000, ge=1)

    # Gene set size filter for FCS engines
    MIN_SET_SIZE: int = Field(default=5, ge=1)
    MAX_SET_SIZE: int = Field(default=500, ge=1)

    # Significance thresholds
    DE_ALPHA: float = 0.05
    BH_THRESHOLD: float = 0.05
    GSEA_Q_THRESHOLD: float = 0.25

    # Desk-scale DE constants
    MODERATION_PRIOR_DF: float = 4.0
    DISPERSION_FLOOR: float = 1e-8
    PVALUE_FLOOR: float = 1e-300

    # Exhaustive search guard
    SEARCH_SPACE_CAP: int = Field(default=10_000, ge=1)


settings = Settings()
