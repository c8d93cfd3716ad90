import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from deixis.corpus import (
    ANAPHOR,
    UTTERANCE,
    Clustering,
    Document,
    Mention,
    SpanRef,
    Token,
    Utterance,
    load_filter_lexicon,
)


def make_doc(doc_id, utts):
    """Build a Document from [(speaker, [(text, pos) | text, ...]), ...]."""
    utterances = []
    for i, (speaker, tokens) in enumerate(utts):
        toks = []
        for t in tokens:
            if isinstance(t, tuple):
                toks.append(Token(text=t[0], pos=t[1]))
            else:
                toks.append(Token(text=t))
        utterances.append(
            Utterance(index=i, speaker=speaker, tokens=tuple(toks))
        )
    return Document(doc_id=doc_id, utterances=tuple(utterances))


def anaphor(utt, start, end=None):
    return Mention(
        span=SpanRef(utt=utt, start=start, end=start if end is None else end),
        kind=ANAPHOR,
    )


def utterance_mention(doc, utt):
    return Mention(
        span=SpanRef(utt=utt, start=0, end=len(doc.utterances[utt]) - 1),
        kind=UTTERANCE,
    )


def clustering(doc_id, *clusters):
    return Clustering(doc_id=doc_id, clusters=[frozenset(c) for c in clusters])


@pytest.fixture(scope="session")
def filter_lexicon():
    return load_filter_lexicon()
