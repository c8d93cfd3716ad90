"""Scoring network semantics: span vectors, type penalties, score assembly,
the antecedent distribution, and the model file format."""

import numpy as np
import pytest

import oracles
from conftest import make_doc
from deixis.candidates import AnaphorLexicon, candidate_antecedents
from deixis.corpus import SpanRef, load_filter_lexicon
from deixis.embeddings import DeterministicEmbeddings
from deixis.features import pair_features
from deixis.model import (
    Hyperparams,
    TypePrediction,
    antecedent_distribution,
    init_params,
    load_model,
    penalties,
    save_model,
    score_candidates,
    span_representation,
    type_predict,
    utterance_span,
    width_bucket,
)

HP = Hyperparams(
    window=4, emb_dim=8, span_dim=12, ffnn_hidden=16, feature_dim=4,
    dropout=0.0, lambda_type=1.0,
)


@pytest.fixture(scope="module")
def setting():
    doc = make_doc(
        "m",
        [
            ("A", [("the", "OTHER"), ("plan", "NOUN"), ("works", "VERB")]),
            ("B", [("Okay", "INTJ"), (".", "PUNCT")]),
            ("A", [("we", "PRON"), ("ship", "VERB"), ("friday", "NOUN")]),
            ("B", [("plan", "NOUN"), ("aside", "OTHER"), (",", "PUNCT"),
                   ("that", "PRON"), ("works", "VERB")]),
        ],
    )
    emb = DeterministicEmbeddings(dim=HP.emb_dim, seed=3).for_document(doc)
    params = init_params(HP, seed=9)
    lex = load_filter_lexicon()
    return doc, emb, params, lex


class TestWidthBucket:
    def test_boundaries(self):
        got = [width_bucket(w) for w in (1, 2, 3, 4, 5, 7, 8, 15, 16, 31, 32, 99)]
        assert got == [0, 1, 2, 3, 4, 4, 5, 5, 6, 6, 7, 7]


class TestSpanRepresentation:
    def test_deterministic(self, setting):
        doc, emb, params, _ = setting
        span = SpanRef(0, 0, 2)
        a = span_representation(span, doc, emb, params, HP)
        b = span_representation(span, doc, emb, params, HP)
        np.testing.assert_array_equal(a.value, b.value)

    def test_matches_plain_oracle(self, setting):
        doc, emb, params, _ = setting
        span = SpanRef(0, 0, 2)
        g = span_representation(span, doc, emb, params, HP)
        rows = np.asarray(emb[0:3], dtype=np.float64)
        expected = oracles.span_rep_np(params, rows, width_bucket(3))
        np.testing.assert_allclose(g.value, expected, atol=1e-12)

    def test_single_token_uses_same_row_twice(self, setting):
        doc, emb, params, _ = setting
        span = SpanRef(0, 1, 1)
        g = span_representation(span, doc, emb, params, HP)
        row = np.asarray(emb[1], dtype=np.float64)
        expected = oracles.span_rep_np(params, row[None, :], width_bucket(1))
        np.testing.assert_allclose(g.value, expected, atol=1e-12)

    def test_attention_weights_sum_to_one(self, setting):
        doc, emb, params, _ = setting
        _, alpha = span_representation(
            SpanRef(0, 0, 2), doc, emb, params, HP, return_attention=True
        )
        assert alpha.shape == (3,)
        assert alpha.sum() == pytest.approx(1.0)


class TestTypePrediction:
    def test_argmax_rule(self):
        assert TypePrediction(ot=(0.7, 0.3)).t == "A"
        assert TypePrediction(ot=(0.3, 0.7)).t == "NA"
        assert TypePrediction(ot=(0.5, 0.5)).t == "NA"

    def test_penalties(self):
        assert penalties(TypePrediction(ot=(0.7, 0.3))) == (
            pytest.approx(0.4), 0.0
        )
        assert penalties(TypePrediction(ot=(0.2, 0.8))) == (
            0.0, pytest.approx(0.6)
        )
        assert penalties(TypePrediction(ot=(0.5, 0.5))) == (0.0, 0.0)

    def test_penalties_nonnegative_and_exclusive(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            tp = TypePrediction(ot=tuple(rng.normal(size=2)))
            p1, p2 = penalties(tp)
            assert p1 >= 0 and p2 >= 0
            assert p1 * p2 == 0

    def test_type_predict_consistent_with_graph(self, setting):
        doc, emb, params, _ = setting
        g = span_representation(SpanRef(3, 3, 3), doc, emb, params, HP)
        tp = type_predict(g, params, HP)
        assert tp.t in ("A", "NA")
        p1, p2 = penalties(tp)
        cand = candidate_antecedents(SpanRef(3, 3, 3), doc, HP.window)
        graph = score_candidates(
            SpanRef(3, 3, 3), cand, doc, emb, params, HP, load_filter_lexicon()
        )
        assert graph.breakdown.p1 == pytest.approx(p1)
        assert graph.breakdown.p2 == pytest.approx(p2)


class TestScoreAssembly:
    def _graph(self, setting, hp):
        doc, emb, params, lex = setting
        x = SpanRef(3, 3, 3)
        cand = candidate_antecedents(x, doc, hp.window)
        return score_candidates(x, cand, doc, emb, params, hp, lex)

    def test_distance_and_length_terms(self, setting):
        graph = self._graph(setting, HP)
        bd = graph.breakdown
        for entry in bd.entries[:-1]:
            dist = 3 - entry.antecedent
            length = len(setting[0].utterances[entry.antecedent])
            assert entry.distance_penalty == pytest.approx(HP.gamma1 * dist)
            assert entry.length_penalty == pytest.approx(HP.gamma2 / length)
            expected = (
                bd.s_m_x + entry.s_m_y + entry.s_c + entry.s_a
                - entry.distance_penalty - entry.length_penalty
                - HP.gamma4 * bd.p2
            )
            assert entry.score == pytest.approx(expected)

    def test_distance_term_scales_with_gamma1(self, setting):
        g1 = self._graph(setting, HP.with_overrides(gamma1=1.0))
        g2 = self._graph(setting, HP.with_overrides(gamma1=2.5))
        e1 = [e for e in g1.breakdown.entries if e.antecedent == 0][0]
        e2 = [e for e in g2.breakdown.entries if e.antecedent == 0][0]
        assert e1.distance_penalty == pytest.approx(3.0)
        assert e2.distance_penalty == pytest.approx(7.5)

    def test_dummy_score_is_minus_gamma3_p1(self, setting):
        graph = self._graph(setting, HP.with_overrides(gamma3=5.0))
        bd = graph.breakdown
        assert bd.entries[-1].antecedent is None
        assert bd.entries[-1].score == pytest.approx(-5.0 * bd.p1)
        assert bd.entries[-1].s_c == 0.0 and bd.entries[-1].s_a == 0.0

    def test_raising_gamma3_lowers_dummy_when_p1_positive(self, setting):
        doc, emb, _, lex = setting
        # This seed predicts ANAPHOR for the "that" span, so p1 > 0.
        params = init_params(HP, seed=11)
        x = SpanRef(3, 3, 3)
        cand = candidate_antecedents(x, doc, HP.window)
        low = score_candidates(x, cand, doc, emb, params,
                               HP.with_overrides(gamma3=5.0), lex)
        assert low.breakdown.p1 > 0
        high = score_candidates(x, cand, doc, emb, params,
                                HP.with_overrides(gamma3=10.0), lex)
        assert high.breakdown.entries[-1].score < low.breakdown.entries[-1].score
        assert high.breakdown.prob_of(None) < low.breakdown.prob_of(None)

    def test_gamma1_moves_argmax_toward_nearer(self, setting):
        doc, emb, params, lex = setting
        x = SpanRef(3, 3, 3)
        cand = candidate_antecedents(x, doc, HP.window)

        def argmax_distance(hp):
            bd = score_candidates(x, cand, doc, emb, params, hp, lex).breakdown
            best = max(bd.entries, key=lambda e: e.score)
            return -1 if best.antecedent is None else 3 - best.antecedent

        base = HP.with_overrides(gamma1=0.0)
        distances = [argmax_distance(base)]
        for gamma1 in (0.5, 1.0, 2.0, 10.0, 100.0):
            distances.append(argmax_distance(HP.with_overrides(gamma1=gamma1)))
        concrete = [d for d in distances if d >= 0]
        assert concrete == sorted(concrete, reverse=True)

    def test_eq1_regression_against_plain_oracle(self, setting):
        """With the knob terms off and the feature/context tables zeroed,
        the graph score equals a plain numpy implementation of the base
        pairwise score."""
        doc, emb, params, lex = setting
        hp = HP.with_overrides(gamma1=0.0, gamma2=0.0, gamma3=0.0, gamma4=0.0)
        zeroed = init_params(hp, seed=9)
        zeroed.load_values(params.copy_values())
        for name in zeroed:
            if name.startswith("feat_"):
                zeroed[name].value = np.zeros_like(zeroed[name].value)

        x = SpanRef(3, 3, 3)
        cand = candidate_antecedents(x, doc, hp.window)
        graph = score_candidates(x, cand, doc, emb, params=zeroed, hp=hp, lex=lex)

        g_x = oracles.span_rep_np(
            params,
            np.asarray(emb[doc.flat_index(3, 3) : doc.flat_index(3, 3) + 1]),
            width_bucket(1),
        )
        phi_dim = 11 * hp.feature_dim
        for entry in graph.breakdown.entries[:-1]:
            y = entry.antecedent
            span = utterance_span(doc, y)
            lo = doc.flat_index(y, 0)
            hi = doc.flat_index(y, span.end)
            g_y = oracles.span_rep_np(
                params, np.asarray(emb[lo : hi + 1]), width_bucket(span.width())
            )
            s_lo = doc.flat_index(3, 0)
            s_hi = doc.flat_index(3, len(doc.utterances[3]) - 1)
            g_s = oracles.span_rep_np(
                params, np.asarray(emb[s_lo : s_hi + 1]),
                width_bucket(len(doc.utterances[3])),
            )
            expected = oracles.plain_pair_score(
                zeroed, g_x, g_y, g_s, np.zeros(phi_dim)
            )
            assert entry.score == pytest.approx(expected, abs=1e-10)


class TestDistribution:
    def test_closed_form(self):
        p = antecedent_distribution(np.array([0.0, np.log(2.0)]))
        np.testing.assert_allclose(p, [1 / 3, 2 / 3])

    def test_uniform_for_equal_scores(self):
        p = antecedent_distribution(np.full(7, 3.25))
        np.testing.assert_allclose(p, np.full(7, 1 / 7))

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=9)
        np.testing.assert_allclose(
            antecedent_distribution(s), antecedent_distribution(s + 123.4),
            atol=1e-12,
        )

    def test_normalized_on_graph(self, setting):
        doc, emb, params, lex = setting
        x = SpanRef(3, 3, 3)
        cand = candidate_antecedents(x, doc, HP.window)
        bd = score_candidates(x, cand, doc, emb, params, HP, lex).breakdown
        assert bd.probs.sum() == pytest.approx(1.0)
        assert ((bd.probs > 0) & (bd.probs <= 1)).all()

    def test_extreme_scores_stable(self):
        p = antecedent_distribution(np.array([1e4, -1e4, 0.0]))
        assert np.isfinite(p).all()
        assert p.sum() == pytest.approx(1.0)


class TestModelFile:
    def test_roundtrip(self, tmp_path, setting):
        _, _, params, lex = setting
        lexicon = AnaphorLexicon(
            forms=frozenset({("that",), ("the", "move")})
        )
        path = tmp_path / "model.ddmp"
        save_model(path, params, HP, lexicon, lex)
        params2, hp2, lexicon2, lex2 = load_model(path)

        assert hp2 == HP
        assert lexicon2.forms == lexicon.forms
        assert lex2.filling_words == lex.filling_words
        assert lex2.reporting_verbs == lex.reporting_verbs
        assert list(params2) == list(params)
        for name in params:
            np.testing.assert_array_equal(
                params2[name].value, params[name].value.astype(np.float32)
            )

    def test_resave_is_byte_identical(self, tmp_path, setting):
        _, _, params, lex = setting
        lexicon = AnaphorLexicon(forms=frozenset({("that",)}))
        p1 = tmp_path / "m1.ddmp"
        p2 = tmp_path / "m2.ddmp"
        save_model(p1, params, HP, lexicon, lex)
        params2, hp2, lexicon2, lex2 = load_model(p1)
        save_model(p2, params2, hp2, lexicon2, lex2)
        assert p1.read_bytes() == p2.read_bytes()
