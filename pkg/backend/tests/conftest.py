# backend/tests/conftest.py

import pytest


@pytest.fixture
def db_path(tmp_path) -> str:
    return str(tmp_path / "roundtable.duckdb")
