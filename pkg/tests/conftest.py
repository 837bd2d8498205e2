import pytest

from support import FIXTURES, sentence_document


@pytest.fixture
def figure_doc():
    """The worked-example document with all eight annotations."""
    return sentence_document()


@pytest.fixture
def fixtures_dir():
    return FIXTURES
