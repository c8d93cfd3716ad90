"""Candidate extraction: anaphor surface lexicon and recency-windowed
candidate antecedent utterances (with the implicit dummy antecedent)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .corpus import ANAPHOR, DocEntry, Document, SpanRef

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnaphorLexicon:
    """Lowercase token sequences seen as gold anaphors in training."""

    forms: frozenset[tuple[str, ...]]
    max_form_len: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "max_form_len", max((len(f) for f in self.forms), default=0)
        )

    def __contains__(self, form: tuple[str, ...]) -> bool:
        return form in self.forms

    def __len__(self) -> int:
        return len(self.forms)


def build_anaphor_lexicon(
    entries: list[DocEntry], max_width: int = 15
) -> AnaphorLexicon:
    """Collect every gold anaphor's lowercase token sequence.

    Forms longer than ``max_width`` tokens are dropped with a warning.
    """
    forms: set[tuple[str, ...]] = set()
    for entry in entries:
        if entry.gold is None:
            continue
        doc = entry.document
        for mention in entry.gold.mentions():
            if mention.kind != ANAPHOR:
                continue
            span = mention.span
            utt = doc.utterances[span.utt]
            form = tuple(
                t.text.lower() for t in utt.tokens[span.start : span.end + 1]
            )
            if len(form) > max_width:
                logger.warning(
                    "%s: gold anaphor %r has %d tokens, over the width "
                    "limit %d; excluded from lexicon",
                    doc.doc_id, " ".join(form), len(form), max_width,
                )
                continue
            forms.add(form)
    if not forms:
        raise ValueError(
            "training corpus produced an empty anaphor lexicon "
            "(no gold anaphors found)"
        )
    return AnaphorLexicon(forms=frozenset(forms))


def extract_candidate_anaphors(
    doc: Document, lexicon: AnaphorLexicon
) -> list[SpanRef]:
    """All intra-utterance spans whose lowercase text is a lexicon form.

    Overlapping matches are all kept; output is sorted by (utt, start, end).
    """
    out: list[SpanRef] = []
    max_len = lexicon.max_form_len
    for utt in doc.utterances:
        lowered = [t.text.lower() for t in utt.tokens]
        n = len(lowered)
        for start in range(n):
            for width in range(1, min(max_len, n - start) + 1):
                if tuple(lowered[start : start + width]) in lexicon:
                    out.append(
                        SpanRef(utt=utt.index, start=start, end=start + width - 1)
                    )
    out.sort()
    return out


@dataclass(frozen=True)
class CandidateSet:
    """Candidate antecedent utterances for one anaphor.

    ``antecedents`` holds utterance indices in ascending order; the dummy
    antecedent is always implicitly present.
    """

    anaphor: SpanRef
    antecedents: tuple[int, ...]

    def __post_init__(self):
        if list(self.antecedents) != sorted(self.antecedents):
            raise ValueError("candidate utterances must be sorted ascending")

    def __len__(self) -> int:
        # Dummy included.
        return len(self.antecedents) + 1


def candidate_antecedents(
    anaphor: SpanRef, doc: Document, window: int = 10
) -> CandidateSet:
    """Utterances from max(0, anaphor_utt - window) through the anaphor's
    own utterance, plus the implicit dummy."""
    if anaphor.utt < 0 or anaphor.utt >= len(doc.utterances):
        raise ValueError(f"anaphor {anaphor} outside document {doc.doc_id}")
    lo = max(0, anaphor.utt - window)
    return CandidateSet(
        anaphor=anaphor, antecedents=tuple(range(lo, anaphor.utt + 1))
    )
