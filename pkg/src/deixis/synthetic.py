"""Deterministic synthetic corpora for tests and demos.

Three families:

* a separable resolution corpus where redundant cues (shared content word,
  unique longest candidate, bounded distance) deterministically identify
  each anaphor's antecedent among five candidate utterances;
* a corpus shaped to a target statistics table (documents / utterances /
  turns / tokens / mention counts), returning its own bookkeeping so the
  stats report can be checked exactly;
* corpora realizing prescribed anaphor-surface counts and gold link
  distance distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import (
    ANAPHOR,
    UTTERANCE,
    Clustering,
    DocEntry,
    Document,
    Mention,
    SpanRef,
    Token,
    Utterance,
)

_KEY_WORDS = [
    "harbor", "ledger", "violin", "meadow", "copper", "lantern", "orchid",
    "tunnel", "saddle", "marble", "ribbon", "anchor", "beacon", "canyon",
    "dagger", "ember", "falcon", "glacier", "hammock", "island",
]

_VERBS = ["shifted", "settled", "wavered", "landed", "drifted", "turned"]
_OBJECTS = ["slowly", "early", "nearby", "twice", "badly", "together"]


def _tok(text: str, pos: str) -> Token:
    return Token(text=text, pos=pos)


def _utt(index: int, speaker: str, tokens: list[Token]) -> Utterance:
    return Utterance(index=index, speaker=speaker, tokens=tuple(tokens))


def _whole(doc_utts, index: int) -> Mention:
    return Mention(
        span=SpanRef(utt=index, start=0, end=len(doc_utts[index].tokens) - 1),
        kind=UTTERANCE,
    )


def toy_resolution_corpus(
    n_docs: int, seed: int, anaphors_per_doc: int = 3
) -> list[DocEntry]:
    """Dialogues where each anaphor "that" resolves to the one candidate
    utterance that shares its key content word; the gold utterance is also
    the unique longest in the five-utterance candidate window and sits one
    to four utterances back, never at distance zero."""
    rng = np.random.default_rng(seed)
    entries = []
    for d in range(n_docs):
        utts: list[Utterance] = []
        clusters = []
        speakers = ["A", "B"]
        index = 0

        def filler_utterance(key: str, n_extra: int) -> list[Token]:
            verb = _VERBS[rng.integers(len(_VERBS))]
            obj = _OBJECTS[rng.integers(len(_OBJECTS))]
            toks = [
                _tok("the", "OTHER"),
                _tok(key, "NOUN"),
                _tok(verb, "VERB"),
                _tok(obj, "OTHER"),
            ]
            for _ in range(n_extra):
                toks.append(_tok(_OBJECTS[rng.integers(len(_OBJECTS))], "OTHER"))
            toks.append(_tok(".", "PUNCT"))
            return toks

        for a in range(anaphors_per_doc):
            # Five-utterance window: four context utterances then the
            # anaphor's own; the gold antecedent is 1..4 back.
            block_keys = list(rng.choice(len(_KEY_WORDS), size=5, replace=False))
            gold_offset = int(rng.integers(1, 5))
            block_start = index
            for slot in range(4):
                key = _KEY_WORDS[block_keys[slot]]
                is_gold = (4 - slot) == gold_offset
                # The gold utterance is the unique longest candidate.
                n_extra = 3 if is_gold else int(rng.integers(0, 2))
                utts.append(
                    _utt(index, speakers[index % 2], filler_utterance(key, n_extra))
                )
                index += 1
            gold_index = block_start + 4 - gold_offset
            gold_key = utts[gold_index].tokens[1].text

            anaphor_tokens = [
                _tok(gold_key, "NOUN"),
                _tok("again", "OTHER"),
                _tok(",", "PUNCT"),
                _tok("that", "PRON"),
                _tok("works", "VERB"),
                _tok(".", "PUNCT"),
            ]
            utts.append(_utt(index, speakers[index % 2], anaphor_tokens))
            anaphor_span = SpanRef(utt=index, start=3, end=3)
            index += 1

            clusters.append(
                frozenset(
                    {
                        Mention(span=anaphor_span, kind=ANAPHOR),
                        Mention(
                            span=SpanRef(
                                utt=gold_index, start=0,
                                end=len(utts[gold_index].tokens) - 1,
                            ),
                            kind=UTTERANCE,
                        ),
                    }
                )
            )

        doc = Document(doc_id=f"toy-{seed}-{d:03d}", utterances=tuple(utts))
        entries.append(
            DocEntry(document=doc,
                     gold=Clustering(doc_id=doc.doc_id, clusters=clusters))
        )
    return entries


@dataclass
class ShapeBookkeeping:
    n_docs: int
    n_utterances: int
    n_turns: int
    n_tokens: int
    n_anaphors: int
    n_antecedents: int
    n_speakers_total: int


def table_shaped_corpus(
    seed: int = 0,
    doc_utterances: list[int] | None = None,
    doc_turns: list[int] | None = None,
    n_tokens: int | None = None,
    doc_anaphors: list[int] | None = None,
    n_extra_antecedents: int = 0,
    n_speakers: int = 2,
) -> tuple[list[DocEntry], ShapeBookkeeping]:
    """Build a corpus matching exact per-document utterance/turn counts, a
    total token budget, and per-document anaphor counts; some clusters get
    a second antecedent utterance until ``n_extra_antecedents`` are placed.

    Returns the corpus plus its own bookkeeping (the oracle for stats).
    """
    if doc_utterances is None:
        doc_utterances = [46] * 8 + [45] * 12
    if doc_turns is None:
        doc_turns = [14] * len(doc_utterances)
    if doc_anaphors is None:
        doc_anaphors = [3] * len(doc_utterances)
    n_docs = len(doc_utterances)
    if n_tokens is None:
        n_tokens = sum(doc_utterances) * 12

    rng = np.random.default_rng(seed)
    total_utts = sum(doc_utterances)
    base, rem = divmod(n_tokens, total_utts)
    if base < 4:
        raise ValueError("token budget too small for well-formed utterances")
    # First `rem` utterances get one extra token.
    utt_token_counts = [base + 1] * rem + [base] * (total_utts - rem)

    entries = []
    extra_left = n_extra_antecedents
    cursor = 0
    for d in range(n_docs):
        n_utt = doc_utterances[d]
        n_turn = doc_turns[d]
        # Speaker run lengths: n_turn maximal runs covering n_utt utterances.
        runs = [n_utt // n_turn] * n_turn
        for i in range(n_utt - sum(runs)):
            runs[i % n_turn] += 1
        speakers = []
        for t, run in enumerate(runs):
            speakers.extend([f"S{t % n_speakers}"] * run)

        # Anaphor placements: one per dedicated utterance late in the doc,
        # with its antecedent(s) placed on earlier dedicated utterances.
        n_ana = doc_anaphors[d]
        utts: list[Utterance] = []
        for i in range(n_utt):
            count = utt_token_counts[cursor]
            cursor += 1
            toks = [_tok("the", "OTHER"), _tok(_KEY_WORDS[int(rng.integers(len(_KEY_WORDS)))], "NOUN")]
            while len(toks) < count - 1:
                toks.append(_tok(_VERBS[int(rng.integers(len(_VERBS)))], "VERB"))
            toks.append(_tok(".", "PUNCT"))
            utts.append(_utt(i, speakers[i], toks))

        clusters = []
        used = 0
        for a in range(n_ana):
            ana_utt = used + 1
            ante_utt = used
            extra_ante = None
            if extra_left > 0 and ana_utt + 1 < n_utt - 1:
                extra_ante = ana_utt + 1
                extra_left -= 1
            used = (extra_ante if extra_ante is not None else ana_utt) + 1
            if used >= n_utt:
                raise ValueError("not enough utterances for anaphor layout")
            # Re-tag the anaphor token in place.
            old = utts[ana_utt]
            toks = list(old.tokens)
            toks[1] = _tok("that", "PRON")
            utts[ana_utt] = _utt(old.index, old.speaker, toks)
            members = {
                Mention(span=SpanRef(utt=ana_utt, start=1, end=1), kind=ANAPHOR),
                _whole(utts, ante_utt),
            }
            if extra_ante is not None:
                members.add(_whole(utts, extra_ante))
            clusters.append(frozenset(members))

        doc = Document(doc_id=f"shape-{d:03d}", utterances=tuple(utts))
        entries.append(
            DocEntry(document=doc,
                     gold=Clustering(doc_id=doc.doc_id, clusters=clusters))
        )

    if extra_left:
        raise ValueError("could not place all extra antecedents")
    bookkeeping = ShapeBookkeeping(
        n_docs=n_docs,
        n_utterances=total_utts,
        n_turns=sum(doc_turns),
        n_tokens=n_tokens,
        n_anaphors=sum(doc_anaphors),
        n_antecedents=sum(doc_anaphors) + n_extra_antecedents,
        n_speakers_total=n_docs * n_speakers,
    )
    return entries, bookkeeping


def surface_count_corpus(
    form_counts: dict[str, int], seed: int = 0, clusters_per_doc: int = 20
) -> list[DocEntry]:
    """Corpus whose gold anaphors realize exact per-surface-form counts;
    every anaphor gets its own two-mention cluster."""
    rng = np.random.default_rng(seed)
    jobs = [form for form, n in form_counts.items() for _ in range(n)]
    entries = []
    doc_idx = 0
    for start in range(0, len(jobs), clusters_per_doc):
        chunk = jobs[start : start + clusters_per_doc]
        utts: list[Utterance] = []
        clusters = []
        for i, form in enumerate(chunk):
            ante_idx = 2 * i
            ana_idx = 2 * i + 1
            utts.append(
                _utt(ante_idx, "S0", [
                    _tok("the", "OTHER"),
                    _tok(_KEY_WORDS[int(rng.integers(len(_KEY_WORDS)))], "NOUN"),
                    _tok(_VERBS[int(rng.integers(len(_VERBS)))], "VERB"),
                    _tok(".", "PUNCT"),
                ])
            )
            words = form.split(" ")
            toks = [_tok("regarding", "OTHER")]
            span_start = len(toks)
            toks.extend(_tok(w, "PRON" if len(words) == 1 else "NOUN")
                        for w in words)
            span_end = len(toks) - 1
            toks.append(_tok("indeed", "OTHER"))
            toks.append(_tok(".", "PUNCT"))
            utts.append(_utt(ana_idx, "S1", toks))
            clusters.append(
                frozenset(
                    {
                        Mention(span=SpanRef(utt=ana_idx, start=span_start,
                                             end=span_end), kind=ANAPHOR),
                        _whole(utts, ante_idx),
                    }
                )
            )
        doc = Document(doc_id=f"forms-{doc_idx:03d}", utterances=tuple(utts))
        entries.append(
            DocEntry(document=doc,
                     gold=Clustering(doc_id=doc.doc_id, clusters=clusters))
        )
        doc_idx += 1
    return entries


def link_distance_corpus(
    distance_counts: dict[int, int], seed: int = 0, links_per_doc: int = 25
) -> list[DocEntry]:
    """Corpus whose gold links realize an exact utterance-distance
    distribution; each link is its own cluster on fresh utterances."""
    rng = np.random.default_rng(seed)
    jobs = [d for d, n in sorted(distance_counts.items()) for _ in range(n)]
    rng.shuffle(jobs)
    entries = []
    doc_idx = 0
    for start in range(0, len(jobs), links_per_doc):
        chunk = jobs[start : start + links_per_doc]
        utts: list[Utterance] = []
        clusters = []
        base = 0
        for dist in chunk:
            for i in range(dist + 1):
                toks = [
                    _tok("the", "OTHER"),
                    _tok(_KEY_WORDS[int(rng.integers(len(_KEY_WORDS)))], "NOUN"),
                    _tok(_VERBS[int(rng.integers(len(_VERBS)))], "VERB"),
                    _tok(".", "PUNCT"),
                ]
                if i == dist:
                    toks.insert(2, _tok("that", "PRON"))
                utts.append(_utt(base + i, f"S{(base + i) % 2}", toks))
            ana_utt = base + dist
            clusters.append(
                frozenset(
                    {
                        Mention(span=SpanRef(utt=ana_utt, start=2, end=2),
                                kind=ANAPHOR),
                        _whole(utts, base),
                    }
                )
            )
            base += dist + 1
        doc = Document(doc_id=f"dist-{doc_idx:03d}", utterances=tuple(utts))
        entries.append(
            DocEntry(document=doc,
                     gold=Clustering(doc_id=doc.doc_id, clusters=clusters))
        )
        doc_idx += 1
    return entries
