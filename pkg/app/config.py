from pydantic import AliasChoices, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Environment ----------------
    ENV: str = Field(default="development")

    # Similarity ----------------------------
    SIM_ALPHA: float = Field(default=0.5, description="pair score when one side is *")
    SIM_BETA: float = Field(default=0.1, description="pair score for two different literals")

    # Runtime --------------------
    SEED: int = Field(default=0)
    DETERMINISTIC: bool = Field(default=True)
    CFP_TIMEOUT: float = Field(default=5.0, gt=0)
    STRICT_CFP: bool = Field(default=False)
    STRICT_SKILL_MATCH: bool = Field(default=False)
    MAX_WORKERS: int = Field(default=4, ge=1)

    # Training ----------------------------
    TRAIN_SPLIT: float = Field(default=0.6, gt=0, le=1)

    # Output ----------------------------
    OUT_DIR: str = Field(
        default="out", validation_alias=AliasChoices("HAMLET_OUT", "OUT_DIR")
    )
    TRACE_FILE: str = Field(default="")

    # Logging ------------------------
    LOG_LEVEL: str = Field(default="INFO")
    LOG_FILE_PATH: str = Field(default="")

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        populate_by_name=True,
        extra="ignore",
    )

    @model_validator(mode="after")
    def _check_similarity(self) -> "Settings":
        if not 0 < self.SIM_BETA < self.SIM_ALPHA < 1:
            raise ValueError(
                f"similarity factors must satisfy 0 < beta < alpha < 1 "
                f"(got alpha={self.SIM_ALPHA}, beta={self.SIM_BETA})"
            )
        return self


settings = Settings()
