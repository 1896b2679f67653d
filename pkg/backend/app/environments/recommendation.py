# backend/app/environments/recommendation.py

"""
Distributed-table rating prediction.

Three agents each see one slice of a MovieLens-style example (basic info,
the user's rating history, the movie's rating history) and jointly propose
the rating the target user gives the target movie. Quality is MAE / RMSE
against the gold rating.
"""

from __future__ import annotations

import ast
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from app.engine.types import AgentId, ProposalBody, Transcript
from app.environments.base import ProposalRejected

logger = logging.getLogger(__name__)

RATING_MIN = 1.0
RATING_MAX = 5.0
RATING_DECIMALS = 2
# median of the 1..5 scale; also the value imputed for rounds with no accepted rating
ALWAYS_GUESS = 4.0

AGENT_NAMES = ("BasicInfo Agent", "MovieHistory Agent", "UserHistory Agent")
BASIC_INFO, MOVIE_HISTORY, USER_HISTORY = range(3)

BASIC_INFO_COLUMNS = (
    "example_id",
    "movie_id",
    "movie_title",
    "release_date",
    "genre",
    "user_id",
    "age",
    "gender",
    "occupation",
    "state",
    "gold_rating",
)
USER_HISTORY_COLUMNS = (
    "example_id",
    "movie_id",
    "movie_title",
    "genre",
    "release_date",
    "rating",
    "rated_date",
)
MOVIE_HISTORY_COLUMNS = (
    "example_id",
    "user_id",
    "user_pref_similarity",
    "personal_average_score",
    "age",
    "gender",
    "occupation",
    "state",
    "rated_date",
    "rating",
)

MOVIE_INFO_SCHEMA = "movie_id, movie_title, release_date, genre"
USER_INFO_SCHEMA = "user_id, age, gender, occupation, state"
USER_HISTORY_SCHEMA = ", ".join(USER_HISTORY_COLUMNS[1:])
MOVIE_HISTORY_SCHEMA = ", ".join(MOVIE_HISTORY_COLUMNS[1:])

TASK_TEMPLATE = (
    "You will collaborate with other agents in a movie recommendation game.\n"
    "In this game, you will collaboratively predict the rating of a target movie "
    "({target_movie_title}) for a target user.\n"
    "There are 3 agents in this game: BasicInfo Agent, MovieHistory Agent, UserHistory Agent.\n"
    "1. BasicInfo Agent has access to the basic information of the target movie and target "
    "user. It has access to the data with the following schema:\n"
    "{movie_info_schema}\n"
    "{user_info_schema}\n"
    "2. MovieHistory Agent has access to the rating history of the target movie from other "
    "people. It has access to the data with the following schema:\n"
    "{movie_rating_history_schema}\n"
    "3. UserHistory Agent has access to the rating history of the target user to other "
    "movies. It has access to the data with the following schema:\n"
    "{user_rating_history_schema}\n"
    "\n"
    "You can't see other agents' information directly, but you can get information from "
    "other agents through communication.\n"
    "Your goal is to predict the rating a target user would give to {target_movie_title}. "
    "Utilize all available information about both the user and the movie to make the most "
    "accurate prediction possible. You only have access to partial information, but you can "
    "communicate with other agents to get more information."
)

GOAL_TEMPLATE = (
    "Your goal is to predict the rating the target user would give to the target movie. "
    "Utilize all available information about both the user and the movie to make the most "
    "accurate prediction possible. You only have access to {data_access}, but you can "
    "communicate with other agents to get more information.\n"
    "\n"
    "# Your Data:\n"
    "{agent_dataset}"
)

DATA_ACCESS = {
    BASIC_INFO: "the basic information of the target movie and target user",
    MOVIE_HISTORY: "the rating history of the target movie from other people",
    USER_HISTORY: "the rating history of the target user to other movies",
}


class TableSchemaError(Exception):
    """A table file does not match its documented schema."""

    def __init__(self, file: str, line: int, column: str, message: str):
        super().__init__(f"{file}:{line}: column '{column}': {message}")
        self.file = file
        self.line = line
        self.column = column


# ----------------------------------------------------------------------
# Records
# ----------------------------------------------------------------------


class _Row(BaseModel):
    model_config = ConfigDict(frozen=True)


class MovieInfo(_Row):
    movie_id: int
    movie_title: str
    release_date: int
    genre: List[str]


class UserInfo(_Row):
    user_id: int
    age: int
    gender: str
    occupation: str
    state: str


class UserHistoryRow(_Row):
    movie_id: int
    movie_title: str
    genre: List[str]
    release_date: int
    rating: int = Field(ge=1, le=5)
    rated_date: int


class MovieHistoryRow(_Row):
    user_id: int
    user_pref_similarity: float
    personal_average_score: float
    age: int
    gender: str
    occupation: str
    state: str
    rated_date: int
    rating: int = Field(ge=1, le=5)


class RatingTask(_Row):
    example_id: str
    movie: MovieInfo
    user: UserInfo
    user_history: List[UserHistoryRow]
    movie_history: List[MovieHistoryRow]
    gold_rating: int = Field(ge=1, le=5)


# ----------------------------------------------------------------------
# Ingestion
# ----------------------------------------------------------------------


def _as_int(raw: str) -> int:
    return int(raw.strip())


def _as_float(raw: str) -> float:
    value = float(raw.strip())
    if not math.isfinite(value):
        raise ValueError("not a finite number")
    return value


def _as_text(raw: str) -> str:
    text = raw.strip()
    if not text:
        raise ValueError("empty value")
    return text


def _as_date(raw: str) -> int:
    text = raw.strip()
    if len(text) != 8 or not text.isdigit():
        raise ValueError(f"expected an 8-digit YYYYMMDD date, got '{raw}'")
    return int(text)


def _as_rating(raw: str) -> int:
    value = _as_int(raw)
    if not 1 <= value <= 5:
        raise ValueError(f"rating {value} outside 1..5")
    return value


def _as_genres(raw: str) -> List[str]:
    parsed = ast.literal_eval(raw.strip())
    if not isinstance(parsed, (list, tuple)) or not all(isinstance(g, str) for g in parsed):
        raise ValueError(f"expected a bracketed list of genres, got '{raw}'")
    return list(parsed)


Parser = Callable[[str], Any]

BASIC_INFO_PARSERS: Dict[str, Parser] = {
    "example_id": _as_text,
    "movie_id": _as_int,
    "movie_title": _as_text,
    "release_date": _as_date,
    "genre": _as_genres,
    "user_id": _as_int,
    "age": _as_int,
    "gender": _as_text,
    "occupation": _as_text,
    "state": _as_text,
    "gold_rating": _as_rating,
}
USER_HISTORY_PARSERS: Dict[str, Parser] = {
    "example_id": _as_text,
    "movie_id": _as_int,
    "movie_title": _as_text,
    "genre": _as_genres,
    "release_date": _as_date,
    "rating": _as_rating,
    "rated_date": _as_date,
}
MOVIE_HISTORY_PARSERS: Dict[str, Parser] = {
    "example_id": _as_text,
    "user_id": _as_int,
    "user_pref_similarity": _as_float,
    "personal_average_score": _as_float,
    "age": _as_int,
    "gender": _as_text,
    "occupation": _as_text,
    "state": _as_text,
    "rated_date": _as_date,
    "rating": _as_rating,
}


def read_table(path: Path | str, parsers: Mapping[str, Parser]) -> List[Dict[str, Any]]:
    """
    Read one comma-separated table and parse every cell. Line numbers in errors
    are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    name = str(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise TableSchemaError(name, 0, "-", "file not found") from None
    except pd.errors.EmptyDataError:
        raise TableSchemaError(name, 1, "-", "missing header row") from None

    for column in parsers:
        if column not in frame.columns:
            raise TableSchemaError(name, 1, column, "missing from header")

    rows: List[Dict[str, Any]] = []
    for offset, record in enumerate(frame.to_dict(orient="records")):
        line = offset + 2
        row: Dict[str, Any] = {}
        for column, parse in parsers.items():
            value = record[column]
            if not isinstance(value, str):
                value = ""  # short row
            try:
                row[column] = parse(value)
            except (ValueError, SyntaxError, TypeError) as exc:
                raise TableSchemaError(name, line, column, str(exc)) from None
        rows.append(row)
    return rows


def ingest_tables(
    basic_info: Path | str,
    user_history: Path | str,
    movie_history: Path | str,
) -> List[RatingTask]:
    """Join the three tables on example_id into one RatingTask per basic_info row."""
    basics = read_table(basic_info, BASIC_INFO_PARSERS)
    users = read_table(user_history, USER_HISTORY_PARSERS)
    movies = read_table(movie_history, MOVIE_HISTORY_PARSERS)

    user_rows: Dict[str, List[UserHistoryRow]] = {}
    for row in users:
        ex = row.pop("example_id")
        user_rows.setdefault(ex, []).append(UserHistoryRow(**row))

    movie_rows: Dict[str, List[MovieHistoryRow]] = {}
    for row in movies:
        ex = row.pop("example_id")
        movie_rows.setdefault(ex, []).append(MovieHistoryRow(**row))

    tasks: List[RatingTask] = []
    seen = set()
    for offset, row in enumerate(basics):
        ex = row["example_id"]
        if ex in seen:
            raise TableSchemaError(str(basic_info), offset + 2, "example_id", f"duplicate '{ex}'")
        seen.add(ex)
        tasks.append(
            RatingTask(
                example_id=ex,
                movie=MovieInfo(**{c: row[c] for c in MovieInfo.model_fields}),
                user=UserInfo(**{c: row[c] for c in UserInfo.model_fields}),
                user_history=user_rows.get(ex, []),
                movie_history=movie_rows.get(ex, []),
                gold_rating=row["gold_rating"],
            )
        )

    orphans = (set(user_rows) | set(movie_rows)) - seen
    if orphans:
        logger.warning("history rows reference unknown examples: %s", sorted(orphans))
    logger.info("ingested %s rating tasks", len(tasks))
    return tasks


# ----------------------------------------------------------------------
# Scripted estimators
# ----------------------------------------------------------------------


def user_history_estimate(task: RatingTask) -> float:
    if not task.user_history:
        return ALWAYS_GUESS
    return float(np.mean([r.rating for r in task.user_history]))


def movie_history_estimate(task: RatingTask) -> float:
    if not task.movie_history:
        return ALWAYS_GUESS
    weights = np.asarray([max(r.user_pref_similarity, 0.0) for r in task.movie_history])
    ratings = np.asarray([r.rating for r in task.movie_history], dtype=float)
    if weights.sum() <= 0:
        return float(ratings.mean())
    return float(np.average(ratings, weights=weights))


def agent_estimate(task: RatingTask, agent: int) -> float:
    if agent == USER_HISTORY:
        return user_history_estimate(task)
    if agent == MOVIE_HISTORY:
        return movie_history_estimate(task)
    return ALWAYS_GUESS


# ----------------------------------------------------------------------
# Environment
# ----------------------------------------------------------------------


def _rating_body(value: float) -> ProposalBody:
    clipped = min(max(float(value), RATING_MIN), RATING_MAX)
    return ProposalBody.from_payload({"rating": round(clipped, RATING_DECIMALS)})


class RecommendationEnvironment:
    env_id = "recommendation"

    def __init__(self, task: RatingTask) -> None:
        self.task = task
        self.agent_names = list(AGENT_NAMES)
        self.estimates = [agent_estimate(task, i) for i in range(len(AGENT_NAMES))]

    @property
    def agent_count(self) -> int:
        return len(self.agent_names)

    def agent_ids(self) -> List[AgentId]:
        return [AgentId(index=i, display_name=n) for i, n in enumerate(self.agent_names)]

    def task_description(self) -> str:
        return TASK_TEMPLATE.format(
            target_movie_title=self.task.movie.movie_title,
            movie_info_schema=MOVIE_INFO_SCHEMA,
            user_info_schema=USER_INFO_SCHEMA,
            movie_rating_history_schema=MOVIE_HISTORY_SCHEMA,
            user_rating_history_schema=USER_HISTORY_SCHEMA,
        )

    def agent_dataset(self, agent: int) -> str:
        if agent == BASIC_INFO:
            movie = pd.DataFrame([self.task.movie.model_dump()])
            user = pd.DataFrame([self.task.user.model_dump()])
            return movie.to_csv(index=False) + "\n" + user.to_csv(index=False)
        if agent == MOVIE_HISTORY:
            rows = [r.model_dump() for r in self.task.movie_history]
            return pd.DataFrame(rows, columns=list(MOVIE_HISTORY_COLUMNS[1:])).to_csv(index=False)
        rows = [r.model_dump() for r in self.task.user_history]
        return pd.DataFrame(rows, columns=list(USER_HISTORY_COLUMNS[1:])).to_csv(index=False)

    def background(self, agent: int) -> str:
        return GOAL_TEMPLATE.format(
            data_access=DATA_ACCESS[agent],
            agent_dataset=self.agent_dataset(agent).strip(),
        )

    def utility_spec(self, agent: int) -> Optional[str]:
        return None

    def proposal_format_text(self) -> str:
        return '{"rating": <float, your predicted rating from 1 to 5>}'

    def parse_body(self, payload: Any) -> ProposalBody:
        if isinstance(payload, ProposalBody):
            payload = payload.payload
        if isinstance(payload, dict):
            if "rating" not in payload:
                raise ProposalRejected("Rating proposal must carry a 'rating' field")
            payload = payload["rating"]
        if isinstance(payload, bool):
            raise ProposalRejected("Rating must be a number")
        try:
            value = float(payload)
        except (TypeError, ValueError):
            raise ProposalRejected(f"Rating must be a number, got {payload!r}") from None
        if not math.isfinite(value) or not RATING_MIN <= value <= RATING_MAX:
            raise ProposalRejected(f"Rating must be within 1..5, got {payload!r}")
        return _rating_body(value)

    def rating(self, body: ProposalBody) -> float:
        return float(body.payload["rating"])

    def describe_body(self, body: ProposalBody) -> str:
        return f"Predicted rating: {self.rating(body):g}"

    def utility(self, agent: int, body: ProposalBody) -> float:
        # closeness to the agent's own estimate; nonnegative on the 1..5 scale
        return (RATING_MAX - RATING_MIN) - abs(self.rating(body) - self.estimates[agent])

    def selfish_body(self, agent: int) -> ProposalBody:
        return _rating_body(self.estimates[agent])

    def even_body(self, agent: int, others: Sequence[ProposalBody]) -> ProposalBody:
        values = [self.estimates[agent]] + [self.rating(b) for b in others]
        return _rating_body(float(np.mean(values)))

    def blend(
        self, base: ProposalBody, toward: Sequence[ProposalBody], rate: float
    ) -> ProposalBody:
        if not toward:
            return base
        start = self.rating(base)
        target = float(np.mean([self.rating(b) for b in toward]))
        return _rating_body(start + rate * (target - start))

    def random_body(self, rng: np.random.Generator, agent: int) -> ProposalBody:
        return _rating_body(rng.uniform(RATING_MIN, RATING_MAX))


# ----------------------------------------------------------------------
# Metrics
# ----------------------------------------------------------------------


class RatingMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    mae: List[float]  # MAE@r, r = 1..R
    rmse: List[float]
    imputed: List[int]  # examples falling back to Always-Guess-4 at round r
    examples: int


def standing_ratings(transcript: Transcript) -> List[Optional[float]]:
    """Accepted rating standing at the end of each round (None before any)."""
    out: List[Optional[float]] = []
    for r in range(1, transcript.config.rounds + 1):
        p = transcript.standing_after(r)
        out.append(None if p is None else float(p.body.payload["rating"]))
    return out


def rating_metrics(
    predictions: Sequence[Sequence[Optional[float]]],
    gold: Sequence[float],
) -> RatingMetrics:
    """
    `predictions[e][r]` is example e's standing prediction after round r + 1;
    None marks a round with nothing accepted yet and is scored as 4.
    """
    if not gold:
        raise ValueError("rating_metrics needs at least one example")
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} prediction rows for {len(gold)} gold ratings")
    lengths = {len(p) for p in predictions}
    if len(lengths) != 1:
        raise ValueError(f"Prediction rows differ in length: {sorted(lengths)}")

    raw = np.asarray(
        [[np.nan if v is None else float(v) for v in row] for row in predictions], dtype=float
    )
    missing = np.isnan(raw)
    filled = np.where(missing, ALWAYS_GUESS, raw)
    err = filled - np.asarray(gold, dtype=float)[:, None]

    mae = np.abs(err).mean(axis=0)
    rmse = np.sqrt((err**2).mean(axis=0))
    return RatingMetrics(
        mae=mae.tolist(),
        rmse=rmse.tolist(),
        imputed=missing.sum(axis=0).astype(int).tolist(),
        examples=len(gold),
    )


def always_guess_four(tasks: Sequence[RatingTask], rounds: int = 1) -> RatingMetrics:
    """Baseline predicting the scale median for every example."""
    return rating_metrics([[ALWAYS_GUESS] * rounds for _ in tasks], [t.gold_rating for t in tasks])
