"""Metric correctness against brute-force oracles, metric properties, and
the analysis reports."""

from fractions import Fraction

import numpy as np
import pytest

import oracles
from conftest import anaphor, clustering, make_doc, utterance_mention
from deixis.corpus import Clustering, DocEntry
from deixis.scorer import (
    ALL_BUT_FIRST,
    MARKED,
    PRF,
    b_cubed_counts,
    ceaf_e_counts,
    distance_bin,
    drop_system_singletons,
    evaluate,
    link_distance_report,
    muc_counts,
    optimal_cluster_alignment,
    per_anaphor_report,
    phi4,
    recognition,
    recognition_counts,
)

GOLD = [frozenset("abc"), frozenset("de")]
SYS = [frozenset("ab"), frozenset("cde")]


def prf_of(counts):
    return PRF.from_counts(*counts)


def random_clusterings(rng, n_items=12, max_clusters=5):
    items = [f"m{i}" for i in range(n_items)]
    rng.shuffle(items)

    def split(pool):
        out = []
        i = 0
        while i < len(pool):
            size = int(rng.integers(1, 4))
            out.append(frozenset(pool[i : i + size]))
            i += size
        return out[:max_clusters]

    gold = split(items)
    rng.shuffle(items)
    sys = split(items[: int(rng.integers(2, n_items))])
    return gold, sys


class TestHandWorkedExample:
    def test_muc(self):
        assert prf_of(muc_counts(GOLD, SYS)).f1 == pytest.approx(2 / 3)

    def test_b_cubed(self):
        prf = prf_of(b_cubed_counts(GOLD, SYS))
        assert prf.precision == pytest.approx(11 / 15)
        assert prf.recall == pytest.approx(11 / 15)

    def test_ceaf_e(self):
        prf = prf_of(ceaf_e_counts(GOLD, SYS))
        assert prf.f1 == pytest.approx(4 / 5)

    def test_against_oracles(self):
        for counts, oracle in (
            (muc_counts, oracles.muc_oracle),
            (b_cubed_counts, oracles.b_cubed_oracle),
            (ceaf_e_counts, oracles.ceaf_e_oracle),
        ):
            ours = prf_of(counts(GOLD, SYS))
            theirs = oracles.prf(*oracle(GOLD, SYS))
            assert ours.precision == pytest.approx(float(theirs[0]), abs=1e-12)
            assert ours.recall == pytest.approx(float(theirs[1]), abs=1e-12)
            assert ours.f1 == pytest.approx(float(theirs[2]), abs=1e-12)


class TestMetricProperties:
    def test_identity_is_perfect(self):
        for counts in (muc_counts, b_cubed_counts, ceaf_e_counts):
            prf = prf_of(counts(GOLD, GOLD))
            assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)

    def test_empty_sys_has_zero_recall(self):
        for counts in (muc_counts, b_cubed_counts, ceaf_e_counts):
            prf = prf_of(counts(GOLD, []))
            assert prf.recall == 0.0
            assert prf.f1 == 0.0

    def test_b3_sys_singletons(self):
        prf = prf_of(b_cubed_counts([frozenset("ab")],
                                    [frozenset("a"), frozenset("b")]))
        assert prf.precision == 1.0
        assert prf.recall == pytest.approx(0.5)

    def test_ceaf_disjoint(self):
        prf = prf_of(ceaf_e_counts([frozenset("ab")], [frozenset("xy")]))
        assert (prf.precision, prf.recall, prf.f1) == (0.0, 0.0, 0.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            gold, sys = random_clusterings(rng)
            gold2 = list(reversed(gold))
            sys2 = list(reversed(sys))
            for counts in (muc_counts, b_cubed_counts, ceaf_e_counts):
                assert counts(gold, sys) == pytest.approx(counts(gold2, sys2))

    def test_gold_sys_swap_swaps_p_and_r(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            gold, sys = random_clusterings(rng)
            for counts in (muc_counts, b_cubed_counts, ceaf_e_counts):
                a = prf_of(counts(gold, sys))
                b = prf_of(counts(sys, gold))
                assert a.precision == pytest.approx(b.recall)
                assert a.recall == pytest.approx(b.precision)

    def test_removing_correct_link_never_raises_muc_recall(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            gold, _ = random_clusterings(rng)
            gold = [c for c in gold if len(c) >= 2]
            if not gold:
                continue
            sys = [set(c) for c in gold]
            base = prf_of(muc_counts(gold, [frozenset(c) for c in sys]))
            # Split one mention out of a cluster: removes one correct link.
            big = max(sys, key=len)
            moved = next(iter(big))
            big.discard(moved)
            damaged = [frozenset(c) for c in sys if c] + [frozenset({moved})]
            worse = prf_of(muc_counts(gold, damaged))
            assert worse.recall <= base.recall + 1e-12

    def test_km_matches_exhaustive_small(self):
        rng = np.random.default_rng(10)
        for _ in range(40):
            gold, sys = random_clusterings(rng, n_items=10, max_clusters=4)
            impl_pairs = optimal_cluster_alignment(gold, sys)
            impl_total = sum(
                Fraction(2 * len(gold[i] & sys[j]),
                         len(gold[i]) + len(sys[j]))
                if gold[i] & sys[j] else Fraction(0)
                for i, j in impl_pairs
            )
            assert impl_total == oracles.best_alignment_total(gold, sys)


class TestRecognition:
    def _setting(self):
        doc = make_doc(
            "d",
            [("A", ["the", "plan", "works"]), ("B", ["so", "that", "helps"])],
        )
        gold = clustering("d", {anaphor(1, 1), utterance_mention(doc, 0)})
        return doc, gold

    def test_exact_match_counts(self):
        doc, gold = self._setting()
        sys = clustering("d", {anaphor(1, 1), utterance_mention(doc, 0)})
        prf = recognition(gold, sys, MARKED)
        assert prf.f1 == 1.0

    def test_partial_overlap_gets_no_credit(self):
        doc, gold = self._setting()
        sys = clustering("d", {anaphor(1, 1, 2), utterance_mention(doc, 0)})
        prf = recognition(gold, sys, MARKED)
        assert prf.f1 == 0.0

    def test_no_predictions(self):
        _, gold = self._setting()
        prf = recognition(gold, Clustering("d", []), MARKED)
        assert (prf.precision, prf.recall, prf.f1) == (0.0, 0.0, 0.0)

    def test_all_but_first_convention(self):
        doc, gold = self._setting()
        # Unmarked system: the utterance mention sorts first, the anaphor
        # span counts as derived anaphor.
        sys = clustering("d", {anaphor(1, 1), utterance_mention(doc, 0)})
        derived = recognition(gold, sys, ALL_BUT_FIRST)
        assert derived.recall == 1.0

    def test_unknown_convention_rejected(self):
        _, gold = self._setting()
        with pytest.raises(ValueError):
            recognition_counts(gold, gold, "sloppy")


class TestEvaluate:
    def _entries(self):
        doc = make_doc(
            "d",
            [("A", ["the", "plan", "works"]), ("B", ["so", "that", "helps"])],
        )
        gold = clustering("d", {anaphor(1, 1), utterance_mention(doc, 0)})
        return [DocEntry(document=doc, gold=gold)]

    def test_identity(self):
        entries = self._entries()
        report = evaluate(entries, [entries[0].gold])
        assert report.conll == pytest.approx(1.0)
        assert report.recognition.f1 == 1.0

    def test_empty_sys(self):
        entries = self._entries()
        report = evaluate(entries, [])
        assert report.conll == 0.0

    def test_system_singletons_dropped(self):
        entries = self._entries()
        doc = entries[0].document
        sys = clustering(
            "d", {anaphor(1, 1), utterance_mention(doc, 0)}, {anaphor(1, 2)}
        )
        report = evaluate(entries, [sys])
        assert report.conll == pytest.approx(1.0)
        assert drop_system_singletons(sys).clusters == [
            frozenset({anaphor(1, 1), utterance_mention(doc, 0)})
        ]


class TestPerAnaphor:
    def _entries(self):
        doc = make_doc(
            "d",
            [
                ("A", ["the", "plan", "works"]),
                ("B", ["so", "that", "helps"]),
                ("A", ["sure", "it", "does"]),
            ],
        )
        gold = clustering(
            "d",
            {anaphor(1, 1), utterance_mention(doc, 0)},
            {anaphor(2, 1), utterance_mention(doc, 1)},
        )
        return [DocEntry(document=doc, gold=gold)]

    def test_single_form_matches_overall(self):
        doc = make_doc("d", [("A", ["plan"]), ("B", ["that", "helps"])])
        gold = clustering("d", {anaphor(1, 0), utterance_mention(doc, 0)})
        entries = [DocEntry(document=doc, gold=gold)]
        report = per_anaphor_report(entries, [gold])
        overall = evaluate(entries, [gold])
        assert len(report.rows) == 1
        assert report.rows[0].form == "that"
        assert report.rows[0].conll == pytest.approx(overall.conll)

    def test_counts_and_rows(self):
        entries = self._entries()
        report = per_anaphor_report(entries, [entries[0].gold])
        by_form = {r.form: r for r in report.rows}
        assert by_form["that"].count == 1
        assert by_form["it"].count == 1
        assert "okay" not in by_form

    def test_gold_form_never_predicted_scores_zero_recall(self):
        entries = self._entries()
        doc = entries[0].document
        sys = clustering("d", {anaphor(1, 1), utterance_mention(doc, 0)})
        report = per_anaphor_report(entries, [sys])
        by_form = {r.form: r for r in report.rows}
        assert by_form["it"].conll == 0.0
        assert by_form["it"].recognition.recall == 0.0


class TestLinkDistance:
    def test_bins(self):
        assert [distance_bin(d) for d in (0, 3, 5, 6, 40)] == [
            "0", "3", "5", ">5", ">5"
        ]

    def test_identity_has_no_incorrect(self):
        doc = make_doc("d", [("A", ["x"]), ("B", ["that"])])
        gold = clustering("d", {anaphor(1, 0), utterance_mention(doc, 0)})
        report = link_distance_report([gold], [gold])
        assert report.gold["1"] == 1
        assert all(v == 0 for v in report.incorrect.values())
        assert report.correct["1"] == 1

    def test_long_wrong_link_lands_in_last_bin(self):
        utts = [("A", [f"w{i}"]) for i in range(14)]
        utts[13] = ("A", ["that"])
        doc = make_doc("d", utts)
        gold = clustering("d", {anaphor(13, 0), utterance_mention(doc, 12)})
        sys = clustering("d", {anaphor(13, 0), utterance_mention(doc, 1)})
        report = link_distance_report([gold], [sys])
        assert report.incorrect[">5"] == 1
        assert report.correct["1"] == 0
