"""The span-ranking scoring network.

Scores every candidate utterance (and the dummy antecedent) for a candidate
anaphor:

    s(x, y)   = s_m(x) + s_m(y) + s_c(x, y) + s_a(x, y)
                - gamma1 * dist(x, y) - gamma2 / length(y) - gamma4 * p2(x)
    s(x, eps) = -gamma3 * p1(x)

where s_m is a feedforward mention scorer, s_c adds two bilinear terms (one
for the anaphor span, one for the utterance the anaphor sits in), s_a is a
feedforward scorer over concatenated span vectors plus pair features, and
p1/p2 are the soft penalties derived from the two-way type predictor.  The
distribution over antecedents is the softmax of the scores.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .candidates import AnaphorLexicon, CandidateSet
from .corpus import Document, FilterLexicon, SpanRef
from .features import (
    DUMMY_PAIR_FEATURES,
    N_COUNT_BUCKETS,
    N_SEGMENT_BUCKETS,
    PairFeatures,
    count_bucket,
    pair_features,
)

MODEL_MAGIC = b"DDMP"
MODEL_VERSION = 1

TYPE_ANAPHOR = "A"
TYPE_NON_ANAPHOR = "NA"

N_WIDTH_BUCKETS = 8


def width_bucket(width: int) -> int:
    """Bucket a span width into {1,2,3,4,5-7,8-15,16-31,32+} -> 0..7."""
    if width <= 4:
        return width - 1
    if width <= 7:
        return 4
    if width <= 15:
        return 5
    if width <= 31:
        return 6
    return 7


@dataclass(frozen=True)
class Hyperparams:
    window: int = 10
    max_anaphor_width: int = 15
    emb_dim: int = 64
    span_dim: int = 64
    ffnn_hidden: int = 150
    feature_dim: int = 20
    dropout: float = 0.3
    learning_rate: float = 3e-4
    epochs: int = 30
    patience: int = 5
    seed: int = 11
    lambda_type: float = 800.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 5.0
    gamma4: float = 5.0
    segment_size: int = 128

    def __post_init__(self):
        if min(self.gamma1, self.gamma2, self.gamma3, self.gamma4) < 0:
            raise ValueError("gamma values must be non-negative")
        if self.window < 0:
            raise ValueError("window must be >= 0")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")

    INT_FIELDS = (
        "window", "max_anaphor_width", "emb_dim", "span_dim", "ffnn_hidden",
        "feature_dim", "epochs", "patience", "seed", "segment_size",
    )

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_overrides(self, **kwargs) -> "Hyperparams":
        unknown = set(kwargs) - set(self.field_names())
        if unknown:
            raise ValueError(f"unknown hyperparameter keys: {sorted(unknown)}")
        return replace(self, **kwargs)


class ModelParams(dict):
    """Ordered name -> Tensor map of every learned weight."""

    def tensors(self) -> list[Tensor]:
        return list(self.values())

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, v in values.items():
            self[k].value = np.asarray(v, dtype=np.float64).reshape(
                self[k].value.shape
            )

    def n_coordinates(self) -> int:
        return sum(t.value.size for t in self.values())

    def zero_grad(self) -> None:
        for t in self.values():
            t.grad = None


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = shape[-1] if len(shape) > 1 else shape[0]
    fan_out = shape[0]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _ffnn_params(
    params: ModelParams, rng, prefix: str, in_dim: int, hidden: int, out_dim: int
) -> None:
    dims = [in_dim, hidden, hidden, out_dim]
    for i in range(3):
        params[f"{prefix}.W{i}"] = Tensor(
            _glorot(rng, (dims[i + 1], dims[i])), name=f"{prefix}.W{i}"
        )
        params[f"{prefix}.b{i}"] = Tensor(
            np.zeros(dims[i + 1]), name=f"{prefix}.b{i}"
        )


def init_params(hp: Hyperparams, seed: int | None = None) -> ModelParams:
    """Fresh parameters; deterministic in (hp, seed)."""
    rng = np.random.default_rng(hp.seed if seed is None else seed)
    E, D, H, F = hp.emb_dim, hp.span_dim, hp.ffnn_hidden, hp.feature_dim
    params = ModelParams()

    params["attention_w"] = Tensor(_glorot(rng, (E,)), name="attention_w")
    params["width_emb"] = Tensor(
        rng.normal(0.0, 0.02, size=(N_WIDTH_BUCKETS, F)), name="width_emb"
    )
    params["span_proj_W"] = Tensor(
        _glorot(rng, (D, 3 * E + F)), name="span_proj_W"
    )
    params["span_proj_b"] = Tensor(np.zeros(D), name="span_proj_b")

    _ffnn_params(params, rng, "ffnn_m", D, H, 1)
    params["bilinear_Wc"] = Tensor(_glorot(rng, (D, D)), name="bilinear_Wc")
    params["bilinear_Ws"] = Tensor(_glorot(rng, (D, D)), name="bilinear_Ws")

    feature_tables = [
        ("feat_same_speaker", 2),
        ("feat_segment_dist", N_SEGMENT_BUCKETS),
        ("feat_utt_dist", hp.window + 1),
        ("feat_filtered_dist", hp.window + 1),
        ("feat_n_words", N_COUNT_BUCKETS),
        ("feat_n_nouns", N_COUNT_BUCKETS),
        ("feat_n_verbs", N_COUNT_BUCKETS),
        ("feat_n_adjs", N_COUNT_BUCKETS),
        ("feat_overlap", N_COUNT_BUCKETS),
        ("feat_is_longest", 2),
        ("feat_is_max_overlap", 2),
    ]
    for name, size in feature_tables:
        params[name] = Tensor(rng.normal(0.0, 0.02, size=(size, F)), name=name)
    phi_dim = len(feature_tables) * F

    _ffnn_params(params, rng, "ffnn_pair", 4 * D + phi_dim, H, 1)
    _ffnn_params(params, rng, "ffnn_type", D, H, 2)
    return params


def _ffnn(
    params: ModelParams,
    prefix: str,
    x: Tensor,
    dropout: float,
    rng: np.random.Generator | None,
) -> Tensor:
    h = x
    for i in range(3):
        h = ag.add(ag.matvec(params[f"{prefix}.W{i}"], h), params[f"{prefix}.b{i}"])
        if i < 2:
            h = ag.gelu(h)
            if rng is not None:
                h = ag.dropout(h, dropout, rng)
    return h


def span_representation(
    span: SpanRef,
    doc: Document,
    emb: np.ndarray,
    params: ModelParams,
    hp: Hyperparams,
    *,
    rng: np.random.Generator | None = None,
    return_attention: bool = False,
):
    """Span vector from first/last token embeddings, an attention-weighted
    token sum, and a width-bucket embedding, concatenated and projected."""
    lo = doc.flat_index(span.utt, span.start)
    hi = doc.flat_index(span.utt, span.end)
    rows = np.asarray(emb[lo : hi + 1], dtype=np.float64)

    scores = ag.matvec(ag.const(rows, name="span_tokens"), params["attention_w"])
    alpha = ag.softmax(scores)
    attended = ag.weighted_rows(rows, alpha)

    raw = ag.concat(
        [
            ag.const(rows[0]),
            ag.const(rows[-1]),
            attended,
            ag.row(params["width_emb"], width_bucket(span.width())),
        ]
    )
    g = ag.add(ag.matvec(params["span_proj_W"], raw), params["span_proj_b"])
    if rng is not None:
        g = ag.dropout(g, hp.dropout, rng)
    if return_attention:
        return g, alpha.value
    return g


@dataclass(frozen=True)
class TypePrediction:
    ot: tuple[float, float]  # (score for ANAPHOR, score for NON-ANAPHOR)

    @property
    def t(self) -> str:
        # Ties are read as NON-ANAPHOR.
        return TYPE_ANAPHOR if self.ot[0] > self.ot[1] else TYPE_NON_ANAPHOR


def type_logits(g_anaphor: Tensor, params: ModelParams, hp: Hyperparams,
                rng: np.random.Generator | None = None) -> Tensor:
    return _ffnn(params, "ffnn_type", g_anaphor, hp.dropout, rng)


def type_predict(g_anaphor: Tensor, params: ModelParams,
                 hp: Hyperparams) -> TypePrediction:
    ot = type_logits(g_anaphor, params, hp)
    return TypePrediction(ot=(float(ot.value[0]), float(ot.value[1])))


def penalties(tp: TypePrediction) -> tuple[float, float]:
    """Soft consistency penalties: p1 > 0 only for predicted anaphors,
    p2 > 0 only for predicted non-anaphors; never both."""
    diff = tp.ot[0] - tp.ot[1]
    if tp.t == TYPE_ANAPHOR:
        return diff, 0.0
    return 0.0, max(-diff, 0.0)


@dataclass
class CandidateScore:
    antecedent: int | None  # None is the dummy
    s_m_y: float
    s_c: float
    s_a: float
    distance_penalty: float
    length_penalty: float
    type_penalty: float
    score: float


@dataclass
class ScoreBreakdown:
    anaphor: SpanRef
    s_m_x: float
    ot: tuple[float, float]
    p1: float
    p2: float
    entries: list[CandidateScore]
    probs: np.ndarray = field(default=None)

    @property
    def antecedents(self) -> list[int | None]:
        return [e.antecedent for e in self.entries]

    def scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries])

    def prob_of(self, antecedent: int | None) -> float:
        return float(self.probs[self.antecedents.index(antecedent)])


def antecedent_distribution(scores: np.ndarray) -> np.ndarray:
    """Stable softmax over the candidate scores (dummy included)."""
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


@dataclass
class CandidateGraph:
    """Tensors for one anaphor's candidate set, dummy last."""

    anaphor: SpanRef
    antecedents: tuple  # utterance indices then None
    scores: list[Tensor]
    ot: Tensor
    p1: Tensor
    p2: Tensor
    g_x: Tensor
    breakdown: ScoreBreakdown

    def score_vector(self) -> Tensor:
        return ag.stack(self.scores)


def _phi_embedding(params: ModelParams, f: PairFeatures, hp: Hyperparams) -> Tensor:
    af = f.antecedent_features
    picks = [
        ("feat_same_speaker", int(f.same_speaker)),
        ("feat_segment_dist", f.segment_distance_bucket),
        ("feat_utt_dist", min(f.utterance_distance, hp.window)),
        ("feat_filtered_dist", min(f.filtered_utterance_distance, hp.window)),
        ("feat_n_words", count_bucket(af.n_words)),
        ("feat_n_nouns", count_bucket(af.n_nouns)),
        ("feat_n_verbs", count_bucket(af.n_verbs)),
        ("feat_n_adjs", count_bucket(af.n_adjs)),
        ("feat_overlap", count_bucket(af.n_content_overlap)),
        ("feat_is_longest", int(af.is_longest)),
        ("feat_is_max_overlap", int(af.is_max_overlap)),
    ]
    return ag.concat([ag.row(params[name], idx) for name, idx in picks])


def utterance_span(doc: Document, utt_index: int) -> SpanRef:
    return SpanRef(utt=utt_index, start=0, end=len(doc.utterances[utt_index]) - 1)


def score_candidates(
    anaphor: SpanRef,
    cand: CandidateSet,
    doc: Document,
    emb: np.ndarray,
    params: ModelParams,
    hp: Hyperparams,
    lex: FilterLexicon,
    *,
    rng: np.random.Generator | None = None,
) -> CandidateGraph:
    """Build the scoring graph for one anaphor over its candidate set.

    Pass ``rng`` only during training; it enables dropout.
    """
    g_x = span_representation(anaphor, doc, emb, params, hp, rng=rng)
    g_s = span_representation(
        utterance_span(doc, anaphor.utt), doc, emb, params, hp, rng=rng
    )
    s_m_x = ag.entry(_ffnn(params, "ffnn_m", g_x, hp.dropout, rng), 0)

    ot = type_logits(g_x, params, hp, rng)
    diff = ag.sub(ag.entry(ot, 0), ag.entry(ot, 1))
    p1 = ag.relu(diff)
    p2 = ag.relu(ag.scale(diff, -1.0))

    antecedents: list = []
    scores: list[Tensor] = []
    entries: list[CandidateScore] = []
    for y in cand.antecedents:
        g_y = span_representation(
            utterance_span(doc, y), doc, emb, params, hp, rng=rng
        )
        s_m_y = ag.entry(_ffnn(params, "ffnn_m", g_y, hp.dropout, rng), 0)
        s_c = ag.add(
            ag.dot(g_x, ag.matvec(params["bilinear_Wc"], g_y)),
            ag.dot(g_s, ag.matvec(params["bilinear_Ws"], g_y)),
        )
        f = pair_features(anaphor, y, doc, cand, lex, hp.segment_size)
        pair_in = ag.concat([g_x, g_y, ag.mul(g_x, g_y), g_s,
                             _phi_embedding(params, f, hp)])
        s_a = ag.entry(_ffnn(params, "ffnn_pair", pair_in, hp.dropout, rng), 0)

        dist_pen = hp.gamma1 * f.utterance_distance
        length = max(len(doc.utterances[y]), 1)
        len_pen = hp.gamma2 / length

        base = ag.sum_tensors([s_m_x, s_m_y, s_c, s_a])
        score = ag.sub(ag.add_scalar(base, -dist_pen - len_pen),
                       ag.scale(p2, hp.gamma4))
        antecedents.append(y)
        scores.append(score)
        entries.append(
            CandidateScore(
                antecedent=y,
                s_m_y=s_m_y.item(),
                s_c=s_c.item(),
                s_a=s_a.item(),
                distance_penalty=dist_pen,
                length_penalty=len_pen,
                type_penalty=hp.gamma4 * p2.item(),
                score=score.item(),
            )
        )

    # Dummy: fine score fixed at zero, lowered by the anaphor-type penalty.
    dummy = ag.scale(p1, -hp.gamma3)
    antecedents.append(None)
    scores.append(dummy)
    entries.append(
        CandidateScore(
            antecedent=None,
            s_m_y=0.0,
            s_c=0.0,
            s_a=0.0,
            distance_penalty=0.0,
            length_penalty=0.0,
            type_penalty=hp.gamma3 * p1.item(),
            score=dummy.item(),
        )
    )

    breakdown = ScoreBreakdown(
        anaphor=anaphor,
        s_m_x=s_m_x.item(),
        ot=(float(ot.value[0]), float(ot.value[1])),
        p1=p1.item(),
        p2=p2.item(),
        entries=entries,
        probs=antecedent_distribution(np.array([e.score for e in entries])),
    )
    return CandidateGraph(
        anaphor=anaphor,
        antecedents=tuple(antecedents),
        scores=scores,
        ot=ot,
        p1=p1,
        p2=p2,
        g_x=g_x,
        breakdown=breakdown,
    )


# ---------------------------------------------------------------------------
# Model file ("DDMP"): tensors as float32 plus a typed trailing record that
# holds the hyperparameters and both lexicons, so a model is self-contained.
# ---------------------------------------------------------------------------


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


class ModelFileError(Exception):
    pass


def save_model(
    path: str | Path,
    params: ModelParams,
    hp: Hyperparams,
    anaphor_lexicon: AnaphorLexicon,
    filter_lexicon: FilterLexicon,
) -> None:
    record: list[tuple[str, object]] = [
        (name, getattr(hp, name)) for name in hp.field_names()
    ]
    record.append(
        ("anaphor_lexicon",
         json.dumps(sorted(list(f) for f in anaphor_lexicon.forms)))
    )
    record.append(
        ("filter_filling", json.dumps(sorted(filter_lexicon.filling_words)))
    )
    record.append(
        ("filter_reporting", json.dumps(sorted(filter_lexicon.reporting_verbs)))
    )

    with Path(path).open("wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(params)))
        for name, tensor in params.items():
            arr = np.ascontiguousarray(tensor.value, dtype="<f4")
            fh.write(_pack_str(name))
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
        fh.write(struct.pack("<I", len(record)))
        for key, value in record:
            fh.write(_pack_str(key))
            if isinstance(value, bool) or isinstance(value, int):
                fh.write(b"i" + struct.pack("<q", int(value)))
            elif isinstance(value, float):
                fh.write(b"f" + struct.pack("<d", value))
            elif isinstance(value, str):
                raw = value.encode("utf-8")
                fh.write(b"s" + struct.pack("<I", len(raw)) + raw)
            else:
                raise ModelFileError(f"unsupported record value for {key!r}")


def load_model(
    path: str | Path,
) -> tuple[ModelParams, Hyperparams, AnaphorLexicon, FilterLexicon]:
    data = Path(path).read_bytes()
    off = 0

    def need(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise ModelFileError(
                f"truncated model file: needed {n} bytes for {what} at "
                f"byte offset {off}"
            )
        chunk = data[off : off + n]
        off += n
        return chunk

    def read_str(what: str) -> str:
        (n,) = struct.unpack("<H", need(2, what))
        return need(n, what).decode("utf-8")

    if need(4, "magic") != MODEL_MAGIC:
        raise ModelFileError("bad magic; not a DDMP model file")
    version, n_tensors = struct.unpack("<II", need(8, "header"))
    if version != MODEL_VERSION:
        raise ModelFileError(f"unsupported model version {version}")

    params = ModelParams()
    for _ in range(n_tensors):
        name = read_str("tensor name")
        (rank,) = struct.unpack("<B", need(1, "rank"))
        dims = struct.unpack(f"<{rank}I", need(4 * rank, "dims"))
        count = int(np.prod(dims)) if rank else 1
        payload = need(count * 4, f"tensor {name!r}")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float64)
        if not np.isfinite(arr).all():
            raise ModelFileError(f"tensor {name!r} has non-finite values")
        params[name] = Tensor(arr, name=name)

    (n_entries,) = struct.unpack("<I", need(4, "record count"))
    record: dict[str, object] = {}
    for _ in range(n_entries):
        key = read_str("record key")
        tag = need(1, "record tag")
        if tag == b"i":
            (record[key],) = struct.unpack("<q", need(8, key))
        elif tag == b"f":
            (record[key],) = struct.unpack("<d", need(8, key))
        elif tag == b"s":
            (n,) = struct.unpack("<I", need(4, key))
            record[key] = need(n, key).decode("utf-8")
        else:
            raise ModelFileError(f"unknown record tag {tag!r} for {key!r}")

    hp_kwargs = {}
    for name in Hyperparams.field_names():
        if name not in record:
            raise ModelFileError(f"model file missing hyperparameter {name!r}")
        value = record[name]
        hp_kwargs[name] = (
            int(value) if name in Hyperparams.INT_FIELDS else float(value)
        )
    hp = Hyperparams(**hp_kwargs)

    forms = frozenset(
        tuple(f) for f in json.loads(record["anaphor_lexicon"])
    )
    lexicon = AnaphorLexicon(forms=forms)
    filling = frozenset(json.loads(record["filter_filling"]))
    reporting = frozenset(json.loads(record["filter_reporting"]))
    parts = frozenset(
        w for entry_ in filling | reporting for w in entry_.split() if " " in entry_
    )
    filt = FilterLexicon(
        filling_words=filling, reporting_verbs=reporting, _parts=parts
    )
    return params, hp, lexicon, filt
