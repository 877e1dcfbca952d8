try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

AdapterMode = Literal["remote", "offline"]


class StoreConfig(BaseModel):
    """
    Per-store tuning knobs. Validated on construction; every index and the
    query engine read their parameters from here.
    """

    d: int = Field(default=384, ge=1)
    k: int = Field(default=5, ge=1)
    d_max: int = Field(default=2, ge=0)
    top_k_results: int = Field(default=10, ge=1)
    consolidation_cohesion_min: float = Field(default=0.3, ge=0.0, le=1.0)
    consolidation_fragmentation_min: float = Field(default=0.25, ge=0.0, le=1.0)
    expand_parents: bool = False
    cooccur_min: Optional[int] = Field(default=None, ge=1)
    temporal_slack_ms: int = Field(default=0, ge=0)

    model_config = {"frozen": True}


class Settings(BaseSettings):
    PROJECT_NAME: str = "swiftmem"
    VERSION: str = "0.1.0"

    # Store
    D: int = 384
    K: int = 5
    D_MAX: int = 2
    TOP_K_RESULTS: int = 10
    CONSOLIDATION_COHESION_MIN: float = 0.3
    CONSOLIDATION_FRAGMENTATION_MIN: float = 0.25
    EXPAND_PARENTS: bool = False
    COOCCUR_MIN: Optional[int] = None
    TEMPORAL_SLACK_MS: int = 0
    DEFAULT_USER: str = "default"
    STORE_PATH: str = "swiftmem-store.jsonl"

    # Adapters
    TAGGER_MODE: AdapterMode = "offline"
    EMBEDDER_MODE: AdapterMode = "offline"
    LLM_ENDPOINT: Optional[str] = None
    EMBED_ENDPOINT: Optional[str] = None
    API_KEY: Optional[str] = None
    LLM_MODEL: str = "gpt-4o-mini"
    EMBED_MODEL: str = "all-MiniLM-L6-v2"
    TIMEOUT_MS: int = 10_000
    FALLBACK_SIMILARITY_MIN: float = 0.5

    # Bench
    BENCH_WORKERS: int = 1

    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="SWIFTMEM_", env_file=".env", env_ignore_empty=True
    )

    def store_config(self) -> StoreConfig:
        return StoreConfig(
            d=self.D,
            k=self.K,
            d_max=self.D_MAX,
            top_k_results=self.TOP_K_RESULTS,
            consolidation_cohesion_min=self.CONSOLIDATION_COHESION_MIN,
            consolidation_fragmentation_min=self.CONSOLIDATION_FRAGMENTATION_MIN,
            expand_parents=self.EXPAND_PARENTS,
            cooccur_min=self.COOCCUR_MIN,
            temporal_slack_ms=self.TEMPORAL_SLACK_MS,
        )


def read_config_file(path: str) -> dict[str, Any]:
    """
    Reads a `swiftmem.toml`-style key=value file. Keys are matched to
    Settings fields case-insensitively; unknown keys raise ValueError.
    """
    with open(Path(path), "rb") as f:
        raw = tomllib.load(f)

    known = set(Settings.model_fields)
    values: dict[str, Any] = {}
    for key, value in raw.items():
        name = key.upper().replace("-", "_")
        if name not in known:
            raise ValueError(f"Unknown config key '{key}' in {path}")
        values[name] = value
    return values


def load_settings(
    config_path: Optional[str] = None, **overrides: Any
) -> Settings:
    # init kwargs beat env vars in pydantic-settings, so file values land there
    # and flag overrides are layered on top of them.
    values = read_config_file(config_path) if config_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**values)


settings = Settings()
