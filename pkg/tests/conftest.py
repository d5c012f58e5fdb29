import os

import pytest
from dotenv import load_dotenv

load_dotenv()


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch):
    # a developer's UICT_* overrides must not leak into unit runs
    for key in list(os.environ):
        if key.startswith("UICT_"):
            monkeypatch.delenv(key, raising=False)
