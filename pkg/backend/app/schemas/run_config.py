# backend/app/schemas/run_config.py
from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.social_choice import Mechanism

PolicyKind = Literal["selfish", "even_split", "concessive", "random", "llm"]


class RunConfigError(Exception):
    """Run configuration file is missing, unreadable or invalid."""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = errors or []


def parse_mechanism(value: Any) -> Mechanism:
    if isinstance(value, Mechanism):
        return value
    return Mechanism.parse(str(value))


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------


class RosterEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    policy: PolicyKind = "llm"
    rate: Optional[float] = Field(default=None, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _rate_for_concessive(self) -> "RosterEntry":
        if self.policy == "concessive" and self.rate is None:
            raise ValueError("concessive agents need a rate in (0, 1]")
        return self


class EconomySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    utility_set: Literal["asymmetric_literal", "asymmetric_normalized", "symmetric", "uniform"] = (
        "asymmetric_literal"
    )
    endowment: Union[Literal["even"], List[List[float]]] = "even"


class RecommendationSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    basic_info: Path
    user_history: Path
    movie_history: Path


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mechanism: Mechanism
    environment: Literal["economy", "recommendation"] = "economy"
    rounds: int = Field(default=10, ge=1)
    seed: int = 0
    agents: List[RosterEntry] = Field(min_length=2)
    share_reasoning: bool = False
    strict_integer_cumulative: bool = False
    economy: Optional[EconomySection] = None
    recommendation: Optional[RecommendationSection] = None

    @field_validator("mechanism", mode="before")
    @classmethod
    def _mechanism(cls, v: Any) -> Mechanism:
        return parse_mechanism(v)

    @model_validator(mode="after")
    def _environment_section(self) -> "RunConfig":
        if self.environment == "economy":
            if self.economy is None:
                self.economy = EconomySection()
            endowment = self.economy.endowment
            k = len(self.agents)
            if endowment != "even":
                if len(endowment) != k or any(len(row) != k for row in endowment):
                    raise ValueError(f"economy.endowment must be a {k}x{k} matrix (one row per agent)")
        else:
            if self.recommendation is None:
                raise ValueError("environment 'recommendation' needs a [recommendation] table")
            if len(self.agents) != 3:
                raise ValueError("the recommendation roster is fixed at 3 agents")
        return self

    @property
    def agent_count(self) -> int:
        return len(self.agents)

    @property
    def uses_llm(self) -> bool:
        return any(a.policy == "llm" for a in self.agents)

    def with_overrides(
        self, *, mechanism: Optional[str] = None, scripted_only: bool = False
    ) -> "RunConfig":
        """Apply command-line overrides; --no-llm turns llm agents into even_split scripted ones."""
        update: Dict[str, Any] = {}
        if mechanism is not None:
            update["mechanism"] = parse_mechanism(mechanism)
        if scripted_only:
            update["agents"] = [
                a.model_copy(update={"policy": "even_split"}) if a.policy == "llm" else a
                for a in self.agents
            ]
        return self.model_copy(update=update)


def _format_errors(e: ValidationError) -> List[str]:
    out = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append(f"{loc}: {err['msg']}")
    return out


def load_run_config(path: Path | str) -> RunConfig:
    """Read and validate a TOML run configuration. All problems are reported together."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise RunConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise RunConfigError(f"{path}: invalid TOML: {e}") from None

    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as e:
        errors = _format_errors(e)
        raise RunConfigError(
            f"{path}: {len(errors)} invalid setting(s):\n  " + "\n  ".join(errors), errors
        ) from None

    # relative table paths are relative to the config file
    if cfg.recommendation is not None:
        base = path.parent
        rec = cfg.recommendation
        cfg = cfg.model_copy(
            update={
                "recommendation": RecommendationSection(
                    basic_info=base / rec.basic_info,
                    user_history=base / rec.user_history,
                    movie_history=base / rec.movie_history,
                )
            }
        )
    return cfg


def config_text(path: Path | str) -> str:
    return Path(path).read_text(encoding="utf-8")
