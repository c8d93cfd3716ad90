"""Coreference-style evaluation for deixis clusterings.

MUC (link-based), B-cubed (mention-based), CEAF_e (entity-based with an
optimal one-to-one cluster alignment), their unweighted CoNLL average,
exact-boundary anaphor recognition, and the per-anaphor / per-link-distance
analysis tables.

The metric cores operate on plain collections of hashable mention ids so
they can be unit-tested in isolation; ``evaluate`` layers the corpus
bookkeeping (document pairing, system-singleton dropping, aggregation) on
top.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import (
    ANAPHOR,
    UTTERANCE,
    Clustering,
    DocEntry,
    Document,
    Mention,
    surface_form,
)

logger = logging.getLogger(__name__)

MARKED = "marked"
ALL_BUT_FIRST = "all-but-first"

DISTANCE_BINS = ("0", "1", "2", "3", "4", "5", ">5")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, p_num: float, p_den: float,
                    r_num: float, r_den: float) -> "PRF":
        p = p_num / p_den if p_den > 0 else 0.0
        r = r_num / r_den if r_den > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(precision=p, recall=r, f1=f)

    def __str__(self) -> str:
        return f"P {self.precision:.4f}  R {self.recall:.4f}  F1 {self.f1:.4f}"


Counts = tuple[float, float, float, float]  # p_num, p_den, r_num, r_den


def _clusters_as_sets(clusters) -> list[frozenset]:
    return [frozenset(c) for c in clusters]


def _mention_to_cluster(clusters: list[frozenset]) -> dict:
    out = {}
    for c in clusters:
        for m in c:
            out[m] = c
    return out


def muc_counts(gold, sys) -> Counts:
    """Link-based counts: recall charges each gold cluster for the system
    clusters needed to cover it, precision symmetrically."""
    gold = _clusters_as_sets(gold)
    sys = _clusters_as_sets(sys)

    def one_side(a, b_map) -> tuple[float, float]:
        num = 0.0
        den = 0.0
        for cluster in a:
            partitions = {id(b_map[m]) for m in cluster if m in b_map}
            unaligned = sum(1 for m in cluster if m not in b_map)
            num += len(cluster) - unaligned - len(partitions)
            den += len(cluster) - 1
        return num, den

    r_num, r_den = one_side(gold, _mention_to_cluster(sys))
    p_num, p_den = one_side(sys, _mention_to_cluster(gold))
    return p_num, p_den, r_num, r_den


def b_cubed_counts(gold, sys) -> Counts:
    """Mention-averaged intersection ratios; mentions present on only one
    side contribute zero to the other side's average."""
    gold = _clusters_as_sets(gold)
    sys = _clusters_as_sets(sys)

    def one_side(a, b_map) -> tuple[float, float]:
        num = 0.0
        den = 0.0
        a_map = _mention_to_cluster(a)
        for m, cluster in a_map.items():
            den += 1
            other = b_map.get(m)
            if other is not None:
                num += len(cluster & other) / len(cluster)
        return num, den

    p_num, p_den = one_side(sys, _mention_to_cluster(gold))
    r_num, r_den = one_side(gold, _mention_to_cluster(sys))
    return p_num, p_den, r_num, r_den


def phi4(a: frozenset, b: frozenset) -> float:
    if not a or not b:
        return 0.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def optimal_cluster_alignment(gold, sys) -> list[tuple[int, int]]:
    """Maximum-similarity one-to-one alignment of gold and system clusters
    under phi4, via the Kuhn-Munkres assignment."""
    gold = _clusters_as_sets(gold)
    sys = _clusters_as_sets(sys)
    if not gold or not sys:
        return []
    sim = np.zeros((len(gold), len(sys)))
    for i, g in enumerate(gold):
        for j, s in enumerate(sys):
            sim[i, j] = phi4(g, s)
    rows, cols = linear_sum_assignment(sim, maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols)]


def ceaf_e_counts(gold, sys) -> Counts:
    gold = _clusters_as_sets(gold)
    sys = _clusters_as_sets(sys)
    total = sum(
        phi4(gold[i], sys[j]) for i, j in optimal_cluster_alignment(gold, sys)
    )
    return total, float(len(sys)), total, float(len(gold))


def muc(gold: Clustering, sys: Clustering) -> PRF:
    return PRF.from_counts(*muc_counts(gold.clusters, sys.clusters))


def b_cubed(gold: Clustering, sys: Clustering) -> PRF:
    return PRF.from_counts(*b_cubed_counts(gold.clusters, sys.clusters))


def ceaf_e(gold: Clustering, sys: Clustering) -> PRF:
    return PRF.from_counts(*ceaf_e_counts(gold.clusters, sys.clusters))


def conll(gold: Clustering, sys: Clustering) -> float:
    return (muc(gold, sys).f1 + b_cubed(gold, sys).f1 + ceaf_e(gold, sys).f1) / 3.0


def _derived_anaphors(clustering: Clustering, convention: str) -> set:
    """System anaphor spans under the chosen convention."""
    if convention == MARKED:
        return {m.span for m in clustering.mentions() if m.kind == ANAPHOR}
    if convention == ALL_BUT_FIRST:
        spans = set()
        for cluster in clustering.clusters:
            ordered = sorted(cluster, key=lambda m: m.span)
            spans.update(m.span for m in ordered[1:])
        return spans
    raise ValueError(f"unknown recognition convention {convention!r}")


def recognition_counts(gold: Clustering, sys: Clustering,
                       convention: str = MARKED) -> Counts:
    gold_spans = {m.span for m in gold.mentions() if m.kind == ANAPHOR}
    sys_spans = _derived_anaphors(sys, convention)
    hits = float(len(gold_spans & sys_spans))
    return hits, float(len(sys_spans)), hits, float(len(gold_spans))


def recognition(gold: Clustering, sys: Clustering,
                convention: str = MARKED) -> PRF:
    return PRF.from_counts(*recognition_counts(gold, sys, convention))


def drop_system_singletons(clustering: Clustering) -> Clustering:
    return Clustering(
        doc_id=clustering.doc_id,
        clusters=[c for c in clustering.clusters if len(c) >= 2],
    )


def _pair_by_doc(
    gold_entries: list[DocEntry], sys_clusterings: list[Clustering]
) -> list[tuple[DocEntry, Clustering]]:
    by_id = {c.doc_id: c for c in sys_clusterings}
    extra = set(by_id) - {e.document.doc_id for e in gold_entries}
    if extra:
        logger.warning("system output for unknown documents ignored: %s",
                       sorted(extra))
    pairs = []
    for entry in gold_entries:
        sys = by_id.get(entry.document.doc_id)
        if sys is None:
            sys = Clustering(doc_id=entry.document.doc_id, clusters=[])
        pairs.append((entry, drop_system_singletons(sys)))
    return pairs


@dataclass
class ScoreReport:
    muc: PRF
    b3: PRF
    ceaf_e: PRF
    conll: float
    recognition: PRF
    n_documents: int

    def text_lines(self) -> list[str]:
        return [
            f"documents    {self.n_documents}",
            f"muc          {self.muc}",
            f"b3           {self.b3}",
            f"ceaf_e       {self.ceaf_e}",
            f"conll        {self.conll:.4f}",
            f"recognition  {self.recognition}",
        ]

    def tsv_lines(self) -> list[str]:
        def row(name: str, prf: PRF) -> str:
            return (f"{name}\t{prf.precision:.4f}\t{prf.recall:.4f}"
                    f"\t{prf.f1:.4f}")

        return [
            "metric\tprecision\trecall\tf1",
            row("muc", self.muc),
            row("b3", self.b3),
            row("ceaf_e", self.ceaf_e),
            f"conll\t\t\t{self.conll:.4f}",
            row("recognition", self.recognition),
        ]


def _aggregate(pairs, metric) -> PRF:
    totals = np.zeros(4)
    for gold_clusters, sys_clusters in pairs:
        totals += np.array(metric(gold_clusters, sys_clusters))
    return PRF.from_counts(*totals)


def evaluate(
    gold_entries: list[DocEntry],
    sys_clusterings: list[Clustering],
    convention: str = MARKED,
) -> ScoreReport:
    """Corpus-level scores, micro-aggregated over documents."""
    doc_pairs = _pair_by_doc(gold_entries, sys_clusterings)
    cluster_pairs = [
        (
            [_mention_keys(c) for c in entry.gold.clusters] if entry.gold else [],
            [_mention_keys(c) for c in sys.clusters],
        )
        for entry, sys in doc_pairs
    ]
    muc_prf = _aggregate(cluster_pairs, muc_counts)
    b3_prf = _aggregate(cluster_pairs, b_cubed_counts)
    ceaf_prf = _aggregate(cluster_pairs, ceaf_e_counts)

    rec_totals = np.zeros(4)
    for entry, sys in doc_pairs:
        gold = entry.gold or Clustering(entry.document.doc_id, [])
        rec_totals += np.array(recognition_counts(gold, sys, convention))

    return ScoreReport(
        muc=muc_prf,
        b3=b3_prf,
        ceaf_e=ceaf_prf,
        conll=(muc_prf.f1 + b3_prf.f1 + ceaf_prf.f1) / 3.0,
        recognition=PRF.from_counts(*rec_totals),
        n_documents=len(doc_pairs),
    )


def _mention_keys(cluster: frozenset) -> frozenset:
    return frozenset(
        (m.span.utt, m.span.start, m.span.end, m.kind) for m in cluster
    )


# ---------------------------------------------------------------------------
# Per-anaphor analysis
# ---------------------------------------------------------------------------


@dataclass
class PerAnaphorRow:
    form: str
    count: int
    conll: float
    recognition: PRF


@dataclass
class PerAnaphorReport:
    rows: list[PerAnaphorRow]

    def tsv_lines(self) -> list[str]:
        lines = ["anaphor\tcount\tconll\trec_p\trec_r\trec_f1"]
        for r in self.rows:
            lines.append(
                f"{r.form}\t{r.count}\t{r.conll:.4f}"
                f"\t{r.recognition.precision:.4f}\t{r.recognition.recall:.4f}"
                f"\t{r.recognition.f1:.4f}"
            )
        return lines


def _forms_in(clustering: Clustering, doc: Document) -> dict:
    forms = defaultdict(set)
    for m in clustering.mentions():
        if m.kind == ANAPHOR:
            forms[surface_form(doc, m.span)].add(m.span)
    return forms


def _filter_clusters(clustering: Clustering, doc: Document,
                     keep: set[str]) -> list[frozenset]:
    """Clusters containing an anaphor whose surface form is in ``keep``."""
    out = []
    for cluster in clustering.clusters:
        if any(
            m.kind == ANAPHOR and surface_form(doc, m.span) in keep
            for m in cluster
        ):
            out.append(_mention_keys(cluster))
    return out


def per_anaphor_report(
    gold_entries: list[DocEntry],
    sys_clusterings: list[Clustering],
    top_k: int = 4,
    convention: str = MARKED,
) -> PerAnaphorReport:
    """Resolution and recognition results broken down by anaphor surface
    form: the top-``top_k`` forms by gold count plus an aggregate rest row.

    For each form, both partitions are filtered to the clusters containing
    an anaphor with that form and scored; counts are micro-aggregated over
    documents.  A form present in gold but never predicted scores zero
    recall rather than being omitted.
    """
    doc_pairs = _pair_by_doc(gold_entries, sys_clusterings)

    counts: Counter = Counter()
    all_forms: set[str] = set()
    for entry, sys in doc_pairs:
        doc = entry.document
        gold_forms = _forms_in(entry.gold, doc) if entry.gold else {}
        for form, spans in gold_forms.items():
            counts[form] += len(spans)
        all_forms.update(gold_forms)
        all_forms.update(_forms_in(sys, doc))

    top = [form for form, _ in sorted(
        counts.items(), key=lambda kv: (-kv[1], kv[0])
    )[:top_k]]
    rest = sorted(all_forms - set(top))

    def score_forms(forms: set[str], label: str) -> PerAnaphorRow | None:
        if not forms:
            return None
        cluster_pairs = []
        rec = np.zeros(4)
        for entry, sys in doc_pairs:
            doc = entry.document
            gold = entry.gold or Clustering(doc.doc_id, [])
            gold_f = _filter_clusters(gold, doc, forms)
            sys_f = _filter_clusters(sys, doc, forms)
            if not gold_f and not sys_f:
                continue
            cluster_pairs.append((gold_f, sys_f))
            gold_spans = {
                s for f in forms
                for s in _forms_in(gold, doc).get(f, set())
            }
            sys_spans = {
                s for f in forms
                for s in _forms_in(sys, doc).get(f, set())
            } if convention == MARKED else {
                s for s in _derived_anaphors(sys, convention)
                if surface_form(doc, s) in forms
            }
            hits = len(gold_spans & sys_spans)
            rec += np.array(
                [hits, len(sys_spans), hits, len(gold_spans)], dtype=float
            )
        if not cluster_pairs:
            return None
        m = _aggregate(cluster_pairs, muc_counts)
        b = _aggregate(cluster_pairs, b_cubed_counts)
        c = _aggregate(cluster_pairs, ceaf_e_counts)
        return PerAnaphorRow(
            form=label,
            count=sum(counts[f] for f in forms),
            conll=(m.f1 + b.f1 + c.f1) / 3.0,
            recognition=PRF.from_counts(*rec),
        )

    rows = []
    for form in top:
        row = score_forms({form}, form)
        if row is not None:
            rows.append(row)
    rest_row = score_forms(set(rest), "others")
    if rest_row is not None:
        rows.append(rest_row)
    return PerAnaphorReport(rows=rows)


# ---------------------------------------------------------------------------
# Link-distance analysis
# ---------------------------------------------------------------------------


def distance_bin(distance: int) -> str:
    return str(distance) if 0 <= distance <= 5 else ">5"


def _links(clustering: Clustering) -> set[tuple]:
    """(anaphor span, utterance index) pairs implied by a clustering."""
    links = set()
    for cluster in clustering.clusters:
        anaphors = [m for m in cluster if m.kind == ANAPHOR]
        utterances = [m for m in cluster if m.kind == UTTERANCE]
        for a in anaphors:
            for u in utterances:
                links.add(((a.span.utt, a.span.start, a.span.end), u.span.utt))
    return links


@dataclass
class LinkDistanceReport:
    gold: dict[str, int] = field(
        default_factory=lambda: {b: 0 for b in DISTANCE_BINS}
    )
    correct: dict[str, int] = field(
        default_factory=lambda: {b: 0 for b in DISTANCE_BINS}
    )
    incorrect: dict[str, int] = field(
        default_factory=lambda: {b: 0 for b in DISTANCE_BINS}
    )

    def tsv_lines(self) -> list[str]:
        def row(name, counts):
            return name + "\t" + "\t".join(
                str(counts[b]) for b in DISTANCE_BINS
            )

        return [
            "links\t" + "\t".join(DISTANCE_BINS),
            row("gold", self.gold),
            row("correct", self.correct),
            row("incorrect", self.incorrect),
        ]


def link_distance_report(
    gold_clusterings: list[Clustering], sys_clusterings: list[Clustering]
) -> LinkDistanceReport:
    """Gold links binned by utterance distance, and predicted links split
    into correct (present in gold) and incorrect per bin."""
    report = LinkDistanceReport()
    sys_by_id = {c.doc_id: c for c in sys_clusterings}
    for gold in gold_clusterings:
        gold_links = _links(gold)
        sys_links = _links(sys_by_id.get(gold.doc_id,
                                         Clustering(gold.doc_id, [])))
        for (a, u) in gold_links:
            report.gold[distance_bin(abs(a[0] - u))] += 1
        for (a, u) in sys_links:
            b = distance_bin(abs(a[0] - u))
            if (a, u) in gold_links:
                report.correct[b] += 1
            else:
                report.incorrect[b] += 1
    return report
