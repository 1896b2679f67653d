# backend/tests/test_recommendation.py

import math
import shutil
from pathlib import Path

import pytest

from app.environments.base import ProposalRejected
from app.environments.recommendation import (
    ALWAYS_GUESS,
    RecommendationEnvironment,
    TableSchemaError,
    always_guess_four,
    ingest_tables,
    movie_history_estimate,
    rating_metrics,
    standing_ratings,
    user_history_estimate,
)

from builders import build_transcript

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def tasks():
    return ingest_tables(
        FIXTURES / "basic_info.csv",
        FIXTURES / "user_history.csv",
        FIXTURES / "movie_history.csv",
    )


@pytest.fixture
def table_copies(tmp_path):
    for name in ("basic_info.csv", "user_history.csv", "movie_history.csv"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    return tmp_path


def test_ingest_parses_user_and_movie(tasks):
    assert [t.example_id for t in tasks] == ["ex-1", "ex-2", "ex-3"]
    first = tasks[0]
    assert first.user.model_dump() == {
        "user_id": 7,
        "age": 29,
        "gender": "F",
        "occupation": "artist",
        "state": "NY",
    }
    assert first.movie.movie_id == 231
    assert first.movie.movie_title == "Batman Returns"
    assert first.movie.release_date == 19920101
    assert first.movie.genre == ["Action", "Adventure", "Comedy", "Crime"]
    assert first.gold_rating == 3


def test_ingest_joins_histories_by_example(tasks):
    first = tasks[0]
    assert [r.movie_title for r in first.user_history] == ["Toy Story", "GoldenEye"]
    assert [r.user_id for r in first.movie_history] == [3, 4]
    assert len(tasks[1].user_history) == 1


def test_rating_out_of_range_names_file_line_and_column(table_copies):
    path = table_copies / "user_history.csv"
    lines = path.read_text().splitlines()
    lines[2] = lines[2].replace(",2,19971002", ",6,19971002")
    path.write_text("\n".join(lines) + "\n")

    with pytest.raises(TableSchemaError) as exc:
        ingest_tables(
            table_copies / "basic_info.csv", path, table_copies / "movie_history.csv"
        )
    assert exc.value.line == 3
    assert exc.value.column == "rating"
    assert "user_history.csv" in exc.value.file


def test_bad_date_is_a_schema_error(table_copies):
    path = table_copies / "basic_info.csv"
    path.write_text(path.read_text().replace("19920101", "1992-01-01"))
    with pytest.raises(TableSchemaError) as exc:
        ingest_tables(path, table_copies / "user_history.csv", table_copies / "movie_history.csv")
    assert exc.value.column == "release_date"
    assert exc.value.line == 2


def test_missing_column_is_reported_on_the_header(table_copies):
    path = table_copies / "movie_history.csv"
    path.write_text(path.read_text().replace("user_pref_similarity", "similarity"))
    with pytest.raises(TableSchemaError) as exc:
        ingest_tables(table_copies / "basic_info.csv", table_copies / "user_history.csv", path)
    assert exc.value.line == 1
    assert exc.value.column == "user_pref_similarity"


def test_history_estimates(tasks):
    first = tasks[0]
    assert user_history_estimate(first) == pytest.approx(3.0)
    # similarity-weighted: (0.5 * 3 + 0.25 * 4) / 0.75
    assert movie_history_estimate(first) == pytest.approx(10 / 3)


def test_each_agent_sees_its_own_slice(tasks):
    env = RecommendationEnvironment(tasks[0])
    assert env.agent_count == 3
    assert "Batman Returns" in env.background(0)
    assert "GoldenEye" in env.background(2)
    assert "GoldenEye" not in env.background(1)
    assert "writer" in env.background(1)


def test_rating_bodies(tasks):
    env = RecommendationEnvironment(tasks[0])
    assert env.rating(env.parse_body({"rating": 3.456})) == pytest.approx(3.46)
    assert env.rating(env.parse_body("4")) == 4.0
    with pytest.raises(ProposalRejected):
        env.parse_body({"rating": 6})
    with pytest.raises(ProposalRejected):
        env.parse_body({"score": 3})


def test_rating_metrics_two_point():
    m = rating_metrics([[4.0], [4.0]], [4.0, 2.0])
    assert m.mae == pytest.approx([1.0])
    assert m.rmse == pytest.approx([math.sqrt(2)])
    perfect = rating_metrics([[4.0], [2.0]], [4.0, 2.0])
    assert perfect.mae == [0.0] and perfect.rmse == [0.0]


def test_rating_metrics_score_missing_predictions_as_four():
    m = rating_metrics([[None, 5.0]], [5.0])
    assert m.mae == pytest.approx([1.0, 0.0])
    assert m.imputed == [1, 0]


def test_rating_metrics_need_examples():
    with pytest.raises(ValueError):
        rating_metrics([], [])


def test_always_guess_four_matches_one_pass(tasks):
    baseline = always_guess_four(tasks)
    errors = [ALWAYS_GUESS - t.gold_rating for t in tasks]
    assert baseline.mae[0] == pytest.approx(sum(abs(e) for e in errors) / len(errors))
    assert baseline.rmse[0] == pytest.approx(math.sqrt(sum(e * e for e in errors) / len(errors)))


def test_standing_ratings_follow_acceptances():
    t = build_transcript(
        rounds=4,
        proposals={2: {0: {"rating": 3.5}}, 3: {1: {"rating": 4.0}}},
        selected={2: 0},
        environment="recommendation",
        task="ex-1",
    )
    assert standing_ratings(t) == [None, 3.5, 3.5, 3.5]
