import pathlib

import pytest

from idiomdetect.corpus import (
    AnnotatorLabel,
    TokenLabel,
    make_sentence,
)

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


def build_sentence(sid, tokens, mask, expression="kick the bucket", ann="YES", language="sl"):
    """Tiny helper: mask is a string like 'OIIL', one char per token."""
    labels = [TokenLabel(c) for c in mask]
    annotator = AnnotatorLabel(ann)
    return make_sentence(
        id=sid,
        language=language,
        tokens=tokens,
        expression=expression,
        token_labels=labels,
        annotator_a=annotator,
        annotator_b=annotator,
    )
