"""Dialogue data model, JSONL corpus parsing, and corpus statistics.

A corpus is a UTF-8 JSON-lines file, one document per line:

    {"doc_id": str,
     "utterances": [{"speaker": str, "tokens": [str], "pos": [str] | null}],
     "clusters": [[{"utt": int, "start": int, "end": int,
                    "kind": "anaphor" | "utterance"}]]}

``clusters`` may be absent for unannotated input.  Spans are token-indexed
with inclusive 0-based ``start``/``end``; ``kind="utterance"`` mentions must
span the whole utterance.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

logger = logging.getLogger(__name__)

POS_TAGS = frozenset({"NOUN", "VERB", "ADJ", "PRON", "PUNCT", "INTJ", "OTHER"})

# Closed pronoun list used when pos tags are missing, and for the
# pronoun-subject rule in is_unimportant ("I agree" counts as unimportant).
PRONOUNS = frozenset(
    """i you he she it we they me him her us them my your his its our their
    mine yours hers ours theirs myself yourself himself herself itself
    ourselves yourselves themselves this that these those what who whom
    which""".split()
)

ANAPHOR = "anaphor"
UTTERANCE = "utterance"


class CorpusError(Exception):
    """Base class for corpus loading problems."""


class CorpusFormatError(CorpusError):
    """Malformed JSON or a record that does not match the schema."""


class CorpusValidationError(CorpusError):
    """Schema-valid record that violates a data-model invariant."""


@dataclass(frozen=True)
class Token:
    text: str
    pos: str | None = None

    def __post_init__(self):
        if not self.text:
            raise CorpusValidationError("token text must be non-empty")
        if self.pos is not None and self.pos not in POS_TAGS:
            raise CorpusValidationError(f"unknown pos tag {self.pos!r}")


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if not self.tokens:
            raise CorpusValidationError(
                f"utterance {self.index} has no tokens"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)


@dataclass(frozen=True)
class Document:
    doc_id: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        for pos, utt in enumerate(self.utterances):
            if utt.index != pos:
                raise CorpusValidationError(
                    f"{self.doc_id}: utterance index {utt.index} at "
                    f"position {pos}; indices must be contiguous from 0"
                )

    def __len__(self) -> int:
        return len(self.utterances)

    @property
    def token_count(self) -> int:
        return sum(len(u) for u in self.utterances)

    def flat_start(self, utt_index: int) -> int:
        """Offset of an utterance's first token in the flattened document."""
        return sum(len(u) for u in self.utterances[:utt_index])

    def flat_index(self, utt_index: int, offset: int) -> int:
        return self.flat_start(utt_index) + offset


@dataclass(frozen=True, order=True)
class SpanRef:
    """A token span inside one utterance (inclusive bounds)."""

    utt: int
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start <= self.end):
            raise CorpusValidationError(f"bad span bounds {self}")

    def width(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True, order=True)
class Mention:
    span: SpanRef
    kind: str  # ANAPHOR or UTTERANCE

    def __post_init__(self):
        if self.kind not in (ANAPHOR, UTTERANCE):
            raise CorpusValidationError(f"unknown mention kind {self.kind!r}")


@dataclass
class Clustering:
    """A partition of mentions; used for both gold and system output."""

    doc_id: str
    clusters: list[frozenset[Mention]]

    def mentions(self) -> set[Mention]:
        out: set[Mention] = set()
        for c in self.clusters:
            out |= c
        return out

    def anaphors(self) -> list[Mention]:
        return sorted(m for m in self.mentions() if m.kind == ANAPHOR)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Clustering):
            return NotImplemented
        return self.doc_id == other.doc_id and set(self.clusters) == set(
            other.clusters
        )


@dataclass
class DocEntry:
    document: Document
    gold: Clustering | None = None


@dataclass(frozen=True)
class FilterLexicon:
    """The filled-pause words and reporting verbs filtered as unimportant."""

    filling_words: frozenset[str]
    reporting_verbs: frozenset[str]
    # Individual words of multi-word entries, so a two-word list entry
    # still matches at the token level.
    _parts: frozenset[str] = field(default=frozenset(), repr=False)

    def __post_init__(self):
        if not self.filling_words or not self.reporting_verbs:
            raise CorpusFormatError("filter lexicon sections must be non-empty")
        overlap = self.filling_words & self.reporting_verbs
        if overlap:
            raise CorpusFormatError(
                f"filter lexicon sections overlap: {sorted(overlap)}"
            )

    def covers(self, token_text: str) -> bool:
        w = token_text.lower()
        return (
            w in self.filling_words
            or w in self.reporting_verbs
            or w in self._parts
        )


def _span_from_json(obj, doc_id: str) -> Mention:
    try:
        span = SpanRef(utt=int(obj["utt"]), start=int(obj["start"]),
                       end=int(obj["end"]))
        kind = obj["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"{doc_id}: bad mention record {obj!r}") from exc
    return Mention(span=span, kind=kind)


def _validate_mention(m: Mention, doc: Document) -> None:
    if m.span.utt < 0 or m.span.utt >= len(doc.utterances):
        raise CorpusValidationError(
            f"{doc.doc_id}: span {m.span} references missing utterance"
        )
    utt = doc.utterances[m.span.utt]
    if m.span.end >= len(utt):
        raise CorpusValidationError(
            f"{doc.doc_id}: span {m.span} out of bounds for utterance of "
            f"length {len(utt)}"
        )
    if m.kind == UTTERANCE and (m.span.start != 0 or m.span.end != len(utt) - 1):
        raise CorpusValidationError(
            f"{doc.doc_id}: utterance mention {m.span} must span the whole "
            f"utterance (0..{len(utt) - 1})"
        )


def _validate_gold(clustering: Clustering, doc: Document) -> None:
    for cluster in clustering.clusters:
        if len(cluster) < 2:
            raise CorpusValidationError(
                f"{doc.doc_id}: gold cluster {sorted(cluster)} is a singleton"
            )
        kinds = {m.kind for m in cluster}
        if kinds != {ANAPHOR, UTTERANCE}:
            raise CorpusValidationError(
                f"{doc.doc_id}: gold cluster must contain at least one "
                f"anaphor and one utterance mention, got kinds {sorted(kinds)}"
            )


def parse_document(
    record: str, *, line: int | None = None, gold: bool = True
) -> tuple[Document, Clustering | None]:
    """Parse one JSONL record into a Document plus its clustering.

    ``gold=True`` additionally enforces gold-annotation invariants (clusters
    of size >= 2 mixing both mention kinds).  System output files are parsed
    with ``gold=False``.
    """
    where = f"line {line}" if line is not None else "record"
    try:
        obj = json.loads(record)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{where}: malformed JSON: {exc}") from exc
    if not isinstance(obj, dict) or "doc_id" not in obj or "utterances" not in obj:
        raise CorpusFormatError(f"{where}: record must have doc_id and utterances")

    doc_id = str(obj["doc_id"])
    utterances = []
    for i, u in enumerate(obj["utterances"]):
        try:
            texts = u["tokens"]
            speaker = str(u["speaker"])
            pos = u.get("pos")
        except (KeyError, TypeError) as exc:
            raise CorpusFormatError(f"{doc_id}: bad utterance {i}") from exc
        if pos is not None and len(pos) != len(texts):
            raise CorpusFormatError(
                f"{doc_id}: utterance {i} has {len(texts)} tokens but "
                f"{len(pos)} pos tags"
            )
        tokens = tuple(
            Token(text=str(t), pos=(pos[j] if pos is not None else None))
            for j, t in enumerate(texts)
        )
        utterances.append(Utterance(index=i, speaker=speaker, tokens=tokens))
    doc = Document(doc_id=doc_id, utterances=tuple(utterances))

    if "clusters" not in obj:
        return doc, None
    clusters = []
    seen: set[Mention] = set()
    for raw in obj["clusters"]:
        cluster = frozenset(_span_from_json(m, doc_id) for m in raw)
        for m in cluster:
            _validate_mention(m, doc)
            if m in seen:
                raise CorpusValidationError(
                    f"{doc_id}: mention {m.span} appears in two clusters"
                )
            seen.add(m)
        clusters.append(cluster)
    clustering = Clustering(doc_id=doc_id, clusters=clusters)
    if gold:
        _validate_gold(clustering, doc)
    return doc, clustering


def serialize_document(doc: Document, clustering: Clustering | None) -> str:
    """Inverse of parse_document; emits one canonical JSON line."""
    utterances = []
    for u in doc.utterances:
        rec = {"speaker": u.speaker, "tokens": list(u.texts)}
        rec["pos"] = (
            [t.pos for t in u.tokens] if any(t.pos for t in u.tokens) else None
        )
        utterances.append(rec)
    obj: dict = {"doc_id": doc.doc_id, "utterances": utterances}
    if clustering is not None:
        obj["clusters"] = [
            [
                {"utt": m.span.utt, "start": m.span.start, "end": m.span.end,
                 "kind": m.kind}
                for m in sorted(c)
            ]
            for c in sorted(clustering.clusters, key=lambda c: sorted(c))
        ]
    return json.dumps(obj, ensure_ascii=False)


def load_corpus(path: str | Path, *, gold: bool = True) -> list[DocEntry]:
    path = Path(path)
    entries: list[DocEntry] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            doc, clustering = parse_document(raw, line=lineno, gold=gold)
            if doc.doc_id in seen_ids:
                raise CorpusValidationError(
                    f"duplicate doc_id {doc.doc_id!r} at line {lineno}"
                )
            seen_ids.add(doc.doc_id)
            entries.append(DocEntry(document=doc, gold=clustering))
    return entries


def write_corpus(entries: list[DocEntry], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(serialize_document(e.document, e.gold) + "\n")


def load_filter_lexicon(path: str | Path | None = None) -> FilterLexicon:
    """Load the filtered-word lists; ``None`` loads the shipped default.

    The file has two sections opened by ``[filling]`` and ``[reporting]``
    headers, one lowercase entry per line; ``#`` starts a comment line.
    """
    if path is None:
        text = (
            resources.files("deixis") / "data" / "filter_words.txt"
        ).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")

    sections: dict[str, set[str]] = {"filling": set(), "reporting": set()}
    current: str | None = None
    for raw in text.splitlines():
        word = raw.strip()
        if not word or word.startswith("#"):
            continue
        if word in ("[filling]", "[reporting]"):
            current = word[1:-1]
            continue
        if current is None:
            raise CorpusFormatError(
                "filter lexicon: entry before any section header"
            )
        sections[current].add(word.lower())
    if not sections["filling"] or not sections["reporting"]:
        raise CorpusFormatError(
            "filter lexicon must define non-empty [filling] and [reporting] "
            "sections"
        )
    parts = {
        w
        for entry in sections["filling"] | sections["reporting"]
        for w in entry.split()
        if " " in entry
    }
    return FilterLexicon(
        filling_words=frozenset(sections["filling"]),
        reporting_verbs=frozenset(sections["reporting"]),
        _parts=frozenset(parts),
    )


def _is_punct(token: Token) -> bool:
    if token.pos is not None:
        return token.pos == "PUNCT"
    return not any(ch.isalnum() for ch in token.text)


def is_unimportant(utterance: Utterance, lex: FilterLexicon) -> bool:
    """True when an utterance carries no resolvable content.

    Every token must be a filtered word, a pronoun, an interjection, or
    punctuation.  Pronouns are included so utterances like "I agree" count;
    without pos tags, interjection detection falls back to the filling-word
    list and punctuation is detected lexically.
    """
    for token in utterance.tokens:
        word = token.text.lower()
        if lex.covers(word):
            continue
        if token.pos == "INTJ" or token.pos == "PRON":
            continue
        if word in PRONOUNS:
            continue
        if _is_punct(token):
            continue
        return False
    return True


def count_turns(doc: Document) -> int:
    """Number of maximal runs of consecutive utterances by one speaker."""
    turns = 0
    prev: str | None = None
    for u in doc.utterances:
        if u.speaker != prev:
            turns += 1
            prev = u.speaker
    return turns


@dataclass
class StatsReport:
    n_docs: int
    n_utterances: int
    n_turns: int
    n_tokens: int
    n_anaphors: int
    n_antecedents: int
    avg_utterances_per_doc: float
    avg_tokens_per_utterance: float
    avg_turns_per_doc: float
    avg_anaphors_per_doc: float
    avg_antecedents_per_doc: float
    avg_speakers_per_doc: float


def corpus_stats(entries: list[DocEntry]) -> StatsReport:
    """Corpus-level counts and per-document averages.

    Antecedent counts are utterance mentions in gold clusters; unannotated
    documents contribute zero anaphors/antecedents.
    """
    n_docs = len(entries)
    n_utts = sum(len(e.document) for e in entries)
    n_turns = sum(count_turns(e.document) for e in entries)
    n_tokens = sum(e.document.token_count for e in entries)
    n_speakers = sum(
        len({u.speaker for u in e.document.utterances}) for e in entries
    )
    n_ana = 0
    n_ante = 0
    for e in entries:
        if e.gold is None:
            continue
        for m in e.gold.mentions():
            if m.kind == ANAPHOR:
                n_ana += 1
            else:
                n_ante += 1
    return StatsReport(
        n_docs=n_docs,
        n_utterances=n_utts,
        n_turns=n_turns,
        n_tokens=n_tokens,
        n_anaphors=n_ana,
        n_antecedents=n_ante,
        avg_utterances_per_doc=n_utts / n_docs if n_docs else 0.0,
        avg_tokens_per_utterance=n_tokens / n_utts if n_utts else 0.0,
        avg_turns_per_doc=n_turns / n_docs if n_docs else 0.0,
        avg_anaphors_per_doc=n_ana / n_docs if n_docs else 0.0,
        avg_antecedents_per_doc=n_ante / n_docs if n_docs else 0.0,
        avg_speakers_per_doc=n_speakers / n_docs if n_docs else 0.0,
    )


def span_texts(doc: Document, span: SpanRef) -> tuple[str, ...]:
    utt = doc.utterances[span.utt]
    return tuple(t.text for t in utt.tokens[span.start : span.end + 1])


def surface_form(doc: Document, span: SpanRef) -> str:
    """Lowercased space-joined text of a span, e.g. "that", "the move"."""
    return " ".join(span_texts(doc, span)).lower()
