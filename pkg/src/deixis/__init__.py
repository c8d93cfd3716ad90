"""Discourse deixis resolution for dialogue.

Pipeline: parse JSONL dialogue corpora, extract candidate anaphors from a
training-derived surface lexicon, score candidate antecedent utterances
with a span-ranking network (trained jointly with a two-way type
predictor), and evaluate predictions with MUC / B-cubed / CEAF_e, their
CoNLL average, and exact-boundary recognition.
"""

from .candidates import (
    AnaphorLexicon,
    CandidateSet,
    build_anaphor_lexicon,
    candidate_antecedents,
    extract_candidate_anaphors,
)
from .corpus import (
    ANAPHOR,
    UTTERANCE,
    Clustering,
    CorpusError,
    CorpusFormatError,
    CorpusValidationError,
    DocEntry,
    Document,
    FilterLexicon,
    Mention,
    SpanRef,
    Token,
    Utterance,
    corpus_stats,
    is_unimportant,
    load_corpus,
    load_filter_lexicon,
    parse_document,
    serialize_document,
    write_corpus,
)
from .embeddings import (
    DeterministicEmbeddings,
    EmbeddingError,
    EmbeddingStore,
    deterministic_embeddings,
    load_embedding_file,
    write_embedding_file,
)
from .inference import Prediction, resolve_document, write_predictions
from .model import (
    Hyperparams,
    ModelParams,
    ScoreBreakdown,
    TypePrediction,
    antecedent_distribution,
    init_params,
    load_model,
    penalties,
    save_model,
    score_candidates,
    span_representation,
    type_predict,
)
from .scorer import (
    PRF,
    ScoreReport,
    b_cubed,
    ceaf_e,
    conll,
    evaluate,
    link_distance_report,
    muc,
    per_anaphor_report,
    recognition,
)
from .training import (
    LossReport,
    TrainingError,
    gradient_check,
    grid_search,
    joint_loss,
    make_training_examples,
    train,
)

__version__ = "0.1.0"
