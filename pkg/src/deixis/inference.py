"""Resolution of documents with trained parameters and prediction output."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .candidates import AnaphorLexicon, candidate_antecedents, extract_candidate_anaphors
from .corpus import (
    ANAPHOR,
    UTTERANCE,
    Clustering,
    Document,
    FilterLexicon,
    Mention,
    SpanRef,
    serialize_document,
)
from .model import (
    Hyperparams,
    ModelParams,
    ScoreBreakdown,
    score_candidates,
    utterance_span,
)


@dataclass
class Prediction:
    document: Document
    links: dict[SpanRef, int | None]  # chosen antecedent utterance, or dummy
    clustering: Clustering
    breakdowns: list[ScoreBreakdown] = field(default_factory=list)


def _choose_antecedent(breakdown: ScoreBreakdown) -> int | None:
    """Argmax over candidate scores; ties prefer the nearer utterance, and
    a concrete utterance over the dummy."""
    chosen = None
    chosen_score = -np.inf
    # Visit the dummy first, then utterances from farthest to nearest; the
    # >= comparison makes nearer utterances win ties and any utterance beat
    # a tied dummy.
    order = [breakdown.entries[-1]] + list(breakdown.entries[:-1])
    for entry in order:
        if entry.score >= chosen_score:
            chosen = entry.antecedent
            chosen_score = entry.score
    return chosen


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def resolve_document(
    doc: Document,
    params: ModelParams,
    hp: Hyperparams,
    emb_provider,
    lexicon: AnaphorLexicon,
    lex: FilterLexicon,
    *,
    keep_breakdowns: bool = False,
) -> Prediction:
    """Resolve every lexicon candidate anaphor and merge the links into
    clusters (anaphors choosing the same utterance share a cluster)."""
    emb = emb_provider.for_document(doc)
    links: dict[SpanRef, int | None] = {}
    breakdowns: list[ScoreBreakdown] = []
    for span in extract_candidate_anaphors(doc, lexicon):
        cand = candidate_antecedents(span, doc, hp.window)
        graph = score_candidates(span, cand, doc, emb, params, hp, lex)
        chosen = _choose_antecedent(graph.breakdown)
        if chosen is not None and span.utt - chosen > hp.window:
            raise AssertionError(
                f"{doc.doc_id}: predicted link distance {span.utt - chosen} "
                f"exceeds window {hp.window}"
            )
        links[span] = chosen
        if keep_breakdowns:
            breakdowns.append(graph.breakdown)

    uf = _UnionFind()
    for span, chosen in links.items():
        if chosen is None:
            continue
        anaphor = Mention(span=span, kind=ANAPHOR)
        antecedent = Mention(span=utterance_span(doc, chosen), kind=UTTERANCE)
        uf.union(anaphor, antecedent)

    groups: dict[Mention, set[Mention]] = {}
    for mention in list(uf.parent):
        groups.setdefault(uf.find(mention), set()).add(mention)
    clustering = Clustering(
        doc_id=doc.doc_id,
        clusters=[frozenset(g) for g in groups.values() if len(g) >= 2],
    )
    return Prediction(
        document=doc, links=links, clustering=clustering, breakdowns=breakdowns
    )


def write_predictions(predictions: list[Prediction], path: str | Path) -> None:
    """Write predictions in the canonical corpus JSONL schema (documents
    with their predicted clusters); output parses back identically."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for pred in predictions:
                fh.write(
                    serialize_document(pred.document, pred.clustering) + "\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write predictions to {path}: {exc}") from exc
