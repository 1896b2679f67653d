import logging
import os
from dataclasses import asdict, dataclass

from dotenv import load_dotenv

# .env next to the repo root wins over nothing, never over real env vars
load_dotenv(override=False)


@dataclass
class AppConfig:
    app_name: str = os.getenv("APP_NAME", "RoundTable")
    app_version: str = os.getenv("APP_VERSION", "0.1.0")

    api_key: str | None = os.getenv("ROUNDTABLE_API_KEY")
    base_url: str = os.getenv("ROUNDTABLE_BASE_URL", "https://api.openai.com")
    model: str = os.getenv("ROUNDTABLE_MODEL", "gpt-4o-mini-2024-07-18")
    embedding_model: str = os.getenv("ROUNDTABLE_EMBEDDING_MODEL", "paraphrase-MiniLM-L6-v2")
    timeout_s: float = float(os.getenv("ROUNDTABLE_TIMEOUT_S", "60"))
    max_retries: int = int(os.getenv("ROUNDTABLE_MAX_RETRIES", "3"))

    duckdb_path: str = os.getenv("ROUNDTABLE_DUCKDB_PATH", "./data/roundtable.duckdb")
    log_level: str = os.getenv("ROUNDTABLE_LOG_LEVEL", "INFO")

    def public_dict(self) -> dict:
        """
        Only expose safe fields (logs, run summaries).
        Never include the API key here.
        """
        base = asdict(self)
        return {
            "app_name": base["app_name"],
            "version": base["app_version"],
            "provider": {
                "base_url": base["base_url"],
                "model": base["model"],
                "embedding_model": base["embedding_model"],
                "has_api_key": bool(base["api_key"]),
                "timeout_s": base["timeout_s"],
                "max_retries": base["max_retries"],
            },
            "duckdb_path": base["duckdb_path"],
        }


CONFIG = AppConfig()


def configure_logging(level: str | None = None) -> None:
    """
    One-time logging setup for scripts. Every line carries the module tag,
    e.g. `[app.engine.rounds] WARNING ...`.
    """
    logging.basicConfig(
        level=(level or CONFIG.log_level).upper(),
        format="[%(name)s] %(levelname)s %(message)s",
    )
