import textwrap

import pytest

from lab.foundations import RandomStream
from lab.settings import DEFAULT_SEED


@pytest.fixture
def stream():
    return RandomStream(DEFAULT_SEED)


@pytest.fixture
def write_config(tmp_path):
    """Write an INI file under tmp_path and return its path."""

    def write(text, name="experiment.ini"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
        return str(path)

    return write
