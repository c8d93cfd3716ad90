"""Pair features for anaphor/candidate scoring: speaker match, segment and
utterance distances (raw and with unimportant utterances skipped), and the
seven candidate-antecedent features."""

from __future__ import annotations

from dataclasses import dataclass

from .candidates import CandidateSet
from .corpus import (
    PRONOUNS,
    Document,
    FilterLexicon,
    SpanRef,
    Utterance,
    is_unimportant,
)

SEGMENT_SIZE = 128

# Small closed class used only when pos tags are absent; anything else
# alphabetic and outside the filter lexicon counts as content.
_FUNCTION_WORDS = frozenset(
    """a an the to of in on at by for with from is are was were be been being
    am do does did will would can could shall should may might must have has
    had not n't 's or if as than then there here""".split()
)


def count_bucket(n: int) -> int:
    """Bucket a small count into {0,1,2,3,4,5+} -> 0..5."""
    return min(n, 5)


def segment_bucket(distance: int) -> int:
    """Bucket a segment distance into {0,1,2,3,4,5-7,8-15,16+} -> 0..7."""
    if distance <= 4:
        return distance
    if distance <= 7:
        return 5
    if distance <= 15:
        return 6
    return 7


N_SEGMENT_BUCKETS = 8
N_COUNT_BUCKETS = 6


@dataclass(frozen=True)
class AntecedentFeatures:
    n_words: int
    n_nouns: int
    n_verbs: int
    n_adjs: int
    n_content_overlap: int
    is_longest: bool
    is_max_overlap: bool


@dataclass(frozen=True)
class PairFeatures:
    same_speaker: bool
    segment_distance_bucket: int
    utterance_distance: int
    filtered_utterance_distance: int
    antecedent_features: AntecedentFeatures


EMPTY_ANTECEDENT_FEATURES = AntecedentFeatures(0, 0, 0, 0, 0, False, False)

# Sentinel bundle for the dummy antecedent: distances 0, booleans false.
DUMMY_PAIR_FEATURES = PairFeatures(
    same_speaker=False,
    segment_distance_bucket=0,
    utterance_distance=0,
    filtered_utterance_distance=0,
    antecedent_features=EMPTY_ANTECEDENT_FEATURES,
)


def utterance_distance(x: SpanRef, y: int) -> int:
    if y > x.utt:
        raise ValueError(
            f"candidate utterance {y} follows the anaphor's utterance {x.utt}"
        )
    return x.utt - y


def filtered_utterance_distance(
    x: SpanRef, y: int, doc: Document, lex: FilterLexicon
) -> int:
    """Utterance distance minus unimportant utterances strictly between."""
    raw = utterance_distance(x, y)
    skipped = sum(
        1
        for i in range(y + 1, x.utt)
        if is_unimportant(doc.utterances[i], lex)
    )
    return raw - skipped


def is_content_word(token, lex: FilterLexicon) -> bool:
    """Content word: NOUN/VERB/ADJ outside the filter lexicon.

    Without pos tags, falls back to: has a letter, and is not a filter
    word, pronoun, or common function word.
    """
    word = token.text.lower()
    if lex.covers(word):
        return False
    if token.pos is not None:
        return token.pos in ("NOUN", "VERB", "ADJ")
    if not any(ch.isalpha() for ch in token.text):
        return False
    return word not in PRONOUNS and word not in _FUNCTION_WORDS


def _content_types(tokens, lex: FilterLexicon) -> set[str]:
    return {t.text.lower() for t in tokens if is_content_word(t, lex)}


def _pos_counts(utt: Utterance) -> tuple[int, int, int]:
    nouns = sum(1 for t in utt.tokens if t.pos == "NOUN")
    verbs = sum(1 for t in utt.tokens if t.pos == "VERB")
    adjs = sum(1 for t in utt.tokens if t.pos == "ADJ")
    return nouns, verbs, adjs


def content_overlap(y: int, x: SpanRef, doc: Document, lex: FilterLexicon) -> int:
    """Distinct content words shared by candidate utterance ``y`` and the
    part of the anaphor's utterance that precedes the anaphor."""
    prefix = doc.utterances[x.utt].tokens[: x.start]
    return len(
        _content_types(doc.utterances[y].tokens, lex) & _content_types(prefix, lex)
    )


def _relative_winner(values: list[tuple[int, int]]) -> int | None:
    """Index of the winning (value, utt) pair; ties go to the later
    (nearer) utterance.  None when the list is empty."""
    best = None
    for i, (value, utt) in enumerate(values):
        if best is None or value > values[best][0] or (
            value == values[best][0] and utt > values[best][1]
        ):
            best = i
    return best


def antecedent_features(
    y: int,
    x: SpanRef,
    candidate_set: CandidateSet,
    doc: Document,
    lex: FilterLexicon,
) -> AntecedentFeatures:
    """The seven candidate-antecedent features for utterance ``y``.

    The two relative flags (longest / max content overlap) are computed
    against all candidates in the set, exactly one winner each.
    """
    utt = doc.utterances[y]
    nouns, verbs, adjs = _pos_counts(utt)
    overlap = content_overlap(y, x, doc, lex)

    lengths = [(len(doc.utterances[c]), c) for c in candidate_set.antecedents]
    overlaps = [
        (content_overlap(c, x, doc, lex), c) for c in candidate_set.antecedents
    ]
    longest = candidate_set.antecedents[_relative_winner(lengths)]
    max_overlap = candidate_set.antecedents[_relative_winner(overlaps)]

    return AntecedentFeatures(
        n_words=len(utt),
        n_nouns=nouns,
        n_verbs=verbs,
        n_adjs=adjs,
        n_content_overlap=overlap,
        is_longest=(y == longest),
        is_max_overlap=(y == max_overlap),
    )


def segment_distance(x: SpanRef, y: int, doc: Document,
                     segment_size: int = SEGMENT_SIZE) -> int:
    """Distance in fixed-size blocks over the flattened token stream
    between the anaphor's first token and the candidate utterance's start."""
    x_seg = doc.flat_index(x.utt, x.start) // segment_size
    y_seg = doc.flat_start(y) // segment_size
    return abs(x_seg - y_seg)


def pair_features(
    x: SpanRef,
    y: int | None,
    doc: Document,
    candidate_set: CandidateSet,
    lex: FilterLexicon,
    segment_size: int = SEGMENT_SIZE,
) -> PairFeatures:
    """Assemble the feature bundle for one (anaphor, candidate) pair;
    ``y=None`` is the dummy antecedent and gets the sentinel bundle."""
    if y is None:
        return DUMMY_PAIR_FEATURES
    return PairFeatures(
        same_speaker=(
            doc.utterances[x.utt].speaker == doc.utterances[y].speaker
        ),
        segment_distance_bucket=segment_bucket(
            segment_distance(x, y, doc, segment_size)
        ),
        utterance_distance=utterance_distance(x, y),
        filtered_utterance_distance=filtered_utterance_distance(x, y, doc, lex),
        antecedent_features=antecedent_features(y, x, candidate_set, doc, lex),
    )
