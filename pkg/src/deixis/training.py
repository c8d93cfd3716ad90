"""Joint training of the resolver and type predictor, plus gradient
checking and hyperparameter grid search.

The resolution loss is the marginal log-likelihood over the gold antecedent
set of each candidate anaphor (dummy target for unmatched candidates); the
type loss is a cross-entropy over the two-way type scores, weighted by the
type-loss coefficient.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .candidates import (
    AnaphorLexicon,
    build_anaphor_lexicon,
    candidate_antecedents,
    extract_candidate_anaphors,
)
from .corpus import ANAPHOR, UTTERANCE, DocEntry, Document, FilterLexicon, SpanRef
from .model import (
    TYPE_ANAPHOR,
    TYPE_NON_ANAPHOR,
    Hyperparams,
    ModelParams,
    init_params,
    score_candidates,
)

logger = logging.getLogger(__name__)


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class AnaphorExample:
    span: SpanRef
    label: str  # TYPE_ANAPHOR or TYPE_NON_ANAPHOR
    targets: tuple  # utterance indices, or (None,) for the dummy


@dataclass
class TrainingExample:
    document: Document
    anaphors: list[AnaphorExample]


@dataclass
class TrainingData:
    examples: list[TrainingExample]
    n_gold_anaphors: int
    n_missed_by_lexicon: int
    n_gold_out_of_window: int


@dataclass
class LossReport:
    resolution_loss: float
    type_loss: float
    lambda_type: float

    @property
    def total(self) -> float:
        return self.resolution_loss + self.lambda_type * self.type_loss


def make_training_examples(
    entries: list[DocEntry], lexicon: AnaphorLexicon, hp: Hyperparams
) -> TrainingData:
    """Label lexicon-extracted candidates against gold clusters.

    A candidate is an anaphor iff its boundary exactly matches a gold
    anaphor; its targets are the gold cluster's utterances inside the
    recency window, falling back to the dummy when none survive.
    """
    examples: list[TrainingExample] = []
    n_gold = 0
    n_missed = 0
    n_out_of_window = 0
    for entry in entries:
        if entry.gold is None:
            raise TrainingError(
                f"{entry.document.doc_id}: training corpus must carry gold clusters"
            )
        doc = entry.document
        gold_by_span: dict[SpanRef, frozenset] = {}
        for cluster in entry.gold.clusters:
            for m in cluster:
                if m.kind == ANAPHOR:
                    gold_by_span[m.span] = cluster
        n_gold += len(gold_by_span)

        candidates = extract_candidate_anaphors(doc, lexicon)
        candidate_set = set(candidates)
        for span in gold_by_span:
            if span not in candidate_set:
                n_missed += 1
                logger.warning(
                    "%s: gold anaphor at %s not covered by the anaphor "
                    "lexicon (recall ceiling)", doc.doc_id, span,
                )

        anaphors: list[AnaphorExample] = []
        for span in candidates:
            cluster = gold_by_span.get(span)
            if cluster is None:
                anaphors.append(
                    AnaphorExample(span=span, label=TYPE_NON_ANAPHOR,
                                   targets=(None,))
                )
                continue
            lo = max(0, span.utt - hp.window)
            targets = tuple(
                sorted(
                    m.span.utt
                    for m in cluster
                    if m.kind == UTTERANCE and lo <= m.span.utt <= span.utt
                )
            )
            if not targets:
                n_out_of_window += 1
                logger.info(
                    "%s: gold antecedents of %s all outside window %d; "
                    "training target is the dummy", doc.doc_id, span, hp.window,
                )
                targets = (None,)
            anaphors.append(
                AnaphorExample(span=span, label=TYPE_ANAPHOR, targets=targets)
            )
        examples.append(TrainingExample(document=doc, anaphors=anaphors))
    return TrainingData(
        examples=examples,
        n_gold_anaphors=n_gold,
        n_missed_by_lexicon=n_missed,
        n_gold_out_of_window=n_out_of_window,
    )


def joint_loss(
    examples: list[TrainingExample],
    params: ModelParams,
    hp: Hyperparams,
    emb_provider,
    lex: FilterLexicon,
    *,
    rng: np.random.Generator | None = None,
) -> tuple[LossReport, Tensor]:
    """Build the loss graph over the given examples.

    Returns the float report and the loss tensor (call ``ag.backward`` on
    the tensor to populate parameter gradients).
    """
    res_terms: list[Tensor] = []
    type_terms: list[Tensor] = []
    for example in examples:
        doc = example.document
        emb = emb_provider.for_document(doc)
        for ana in example.anaphors:
            cand = candidate_antecedents(ana.span, doc, hp.window)
            graph = score_candidates(
                ana.span, cand, doc, emb, params, hp, lex, rng=rng
            )
            scores_vec = graph.score_vector()
            positions = {a: i for i, a in enumerate(graph.antecedents)}
            gold_idx = [positions[t] for t in ana.targets]
            res = ag.sub(
                ag.logsumexp(scores_vec),
                ag.logsumexp(ag.gather(scores_vec, gold_idx)),
            )
            label_idx = 0 if ana.label == TYPE_ANAPHOR else 1
            type_ce = ag.sub(ag.logsumexp(graph.ot), ag.entry(graph.ot, label_idx))
            if not (np.isfinite(res.value) and np.isfinite(type_ce.value)):
                raise TrainingError(
                    f"non-finite loss for anaphor {ana.span} in {doc.doc_id}"
                )
            res_terms.append(res)
            type_terms.append(type_ce)

    zero = ag.const(0.0)
    res_sum = ag.sum_tensors(res_terms) if res_terms else zero
    type_sum = ag.sum_tensors(type_terms) if type_terms else zero
    total = ag.add(res_sum, ag.scale(type_sum, hp.lambda_type))
    report = LossReport(
        resolution_loss=float(res_sum.value),
        type_loss=float(type_sum.value),
        lambda_type=hp.lambda_type,
    )
    return report, total


class Adam:
    """Adam with the usual decay constants; deterministic and stateful."""

    def __init__(self, params: ModelParams, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v.value) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.value) for k, v in params.items()}

    def step(self, params: ModelParams) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name, tensor in params.items():
            g = tensor.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            tensor.value -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class EpochLog:
    epoch: int
    resolution_loss: float
    type_loss: float
    total_loss: float
    dev_conll: float
    wall_seconds: float

    def line(self) -> str:
        return (
            f"epoch {self.epoch}\tres {self.resolution_loss:.6f}\t"
            f"type {self.type_loss:.6f}\ttotal {self.total_loss:.6f}\t"
            f"dev_conll {self.dev_conll:.4f}\twall {self.wall_seconds:.2f}s"
        )


@dataclass
class TrainResult:
    params: ModelParams
    lexicon: AnaphorLexicon
    hp: Hyperparams
    history: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_conll: float = 0.0

    def log_lines(self) -> list[str]:
        return [e.line() for e in self.history]


def _dev_conll(
    dev_entries: list[DocEntry],
    params: ModelParams,
    hp: Hyperparams,
    emb_provider,
    lexicon: AnaphorLexicon,
    lex: FilterLexicon,
) -> float:
    # Imported here to keep module dependencies one-directional.
    from .inference import resolve_document
    from .scorer import evaluate

    predictions = [
        resolve_document(
            e.document, params, hp, emb_provider, lexicon, lex
        ).clustering
        for e in dev_entries
    ]
    report = evaluate(dev_entries, predictions)
    return report.conll


def train(
    train_entries: list[DocEntry],
    dev_entries: list[DocEntry],
    hp: Hyperparams,
    emb_provider,
    lex: FilterLexicon,
) -> TrainResult:
    """Adam training with per-epoch dev scoring and early stopping.

    Fully deterministic in (corpora, hp): shuffling, initialization, and
    dropout all derive from hp.seed.  Returns the best-dev parameters.
    """
    if not dev_entries:
        raise TrainingError("dev corpus is empty")
    if not train_entries:
        raise TrainingError("training corpus is empty")

    lexicon = build_anaphor_lexicon(train_entries, hp.max_anaphor_width)
    data = make_training_examples(train_entries, lexicon, hp)
    if data.n_missed_by_lexicon:
        logger.warning(
            "anaphor lexicon misses %d/%d gold anaphors",
            data.n_missed_by_lexicon, data.n_gold_anaphors,
        )

    params = init_params(hp)
    opt = Adam(params, lr=hp.learning_rate)
    dropout_rng = np.random.default_rng(np.random.SeedSequence([hp.seed, 7]))

    result = TrainResult(params=params, lexicon=lexicon, hp=hp)
    best_values = params.copy_values()
    best = -np.inf
    since_best = 0
    for epoch in range(1, hp.epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng(
            np.random.SeedSequence([hp.seed, epoch])
        ).permutation(len(data.examples))
        res_sum = 0.0
        type_sum = 0.0
        for idx in order:
            params.zero_grad()
            report, loss = joint_loss(
                [data.examples[idx]], params, hp, emb_provider, lex,
                rng=dropout_rng if hp.dropout > 0 else None,
            )
            ag.backward(loss)
            opt.step(params)
            res_sum += report.resolution_loss
            type_sum += report.type_loss

        dev = _dev_conll(dev_entries, params, hp, emb_provider, lexicon, lex)
        log = EpochLog(
            epoch=epoch,
            resolution_loss=res_sum,
            type_loss=type_sum,
            total_loss=res_sum + hp.lambda_type * type_sum,
            dev_conll=dev,
            wall_seconds=time.perf_counter() - t0,
        )
        result.history.append(log)
        logger.info(log.line())

        if dev > best:
            best = dev
            best_values = params.copy_values()
            result.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= hp.patience:
                logger.info(
                    "early stop at epoch %d (no dev improvement for %d epochs)",
                    epoch, hp.patience,
                )
                break

    params.load_values(best_values)
    result.best_dev_conll = float(best)
    return result


def gradient_check(
    params: ModelParams,
    example: TrainingExample,
    hp: Hyperparams,
    emb_provider,
    lex: FilterLexicon,
    *,
    h: float = 1e-3,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error between analytic gradients of the joint loss and
    central finite differences on a random coordinate subset.

    Runs in double precision with dropout disabled.  The relative error
    denominator is floored to keep rounding noise on near-zero coordinates
    from dominating the ratio.
    """

    def loss_value() -> float:
        report, _ = joint_loss([example], params, hp, emb_provider, lex)
        return report.total

    params.zero_grad()
    _, loss = joint_loss([example], params, hp, emb_provider, lex)
    ag.backward(loss)
    analytic = {k: (t.grad.copy() if t.grad is not None else
                    np.zeros_like(t.value)) for k, t in params.items()}

    names = list(params)
    sizes = np.array([params[k].value.size for k in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_coords, total), replace=False)

    max_rel = 0.0
    for flat in picks:
        ti = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[ti]
        local = int(flat - offsets[ti])
        tensor = params[name]
        original = tensor.value.flat[local]

        tensor.value.flat[local] = original + h
        f_plus = loss_value()
        tensor.value.flat[local] = original - h
        f_minus = loss_value()
        tensor.value.flat[local] = original

        numeric = (f_plus - f_minus) / (2.0 * h)
        a = float(analytic[name].flat[local])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
        max_rel = max(max_rel, rel)
    return max_rel


@dataclass
class GridRow:
    lambda_type: float
    gammas: tuple[float, float, float, float]
    dev_conll: float


@dataclass
class GridSearchResult:
    best_hp: Hyperparams
    rows: list[GridRow]

    def table_tsv(self) -> str:
        lines = ["lambda\tgamma1\tgamma2\tgamma3\tgamma4\tdev_conll"]
        for r in self.rows:
            lines.append(
                f"{r.lambda_type:g}\t" + "\t".join(f"{g:g}" for g in r.gammas)
                + f"\t{r.dev_conll:.4f}"
            )
        return "\n".join(lines)


def grid_search(
    train_entries: list[DocEntry],
    dev_entries: list[DocEntry],
    hp: Hyperparams,
    emb_provider,
    lex: FilterLexicon,
    lambda_grid: list[float],
    gamma_grid: list[float],
    *,
    full_cartesian: bool = False,
    sweeps: int = 2,
) -> GridSearchResult:
    """Maximize dev CoNLL over the type-loss coefficient and the four
    gamma knobs.

    Coordinate-wise by default (lambda first, then each gamma, repeated);
    ``full_cartesian`` trains every combination.  Ties prefer the smaller
    lambda, then the lexicographically smaller gamma vector.
    """
    if not lambda_grid or not gamma_grid:
        raise TrainingError("grids must be non-empty")
    lambda_grid = sorted(lambda_grid)
    gamma_grid = sorted(gamma_grid)

    cache: dict[tuple, float] = {}
    rows: list[GridRow] = []

    def score(config: dict[str, float]) -> float:
        key = (config["lambda_type"], config["gamma1"], config["gamma2"],
               config["gamma3"], config["gamma4"])
        if key not in cache:
            trial_hp = hp.with_overrides(**config)
            cache[key] = train(
                train_entries, dev_entries, trial_hp, emb_provider, lex
            ).best_dev_conll
            rows.append(GridRow(lambda_type=key[0], gammas=key[1:],
                                dev_conll=cache[key]))
        return cache[key]

    current = {
        "lambda_type": lambda_grid[0],
        "gamma1": gamma_grid[0],
        "gamma2": gamma_grid[0],
        "gamma3": gamma_grid[0],
        "gamma4": gamma_grid[0],
    }
    if full_cartesian:
        for values in itertools.product(lambda_grid, gamma_grid, gamma_grid,
                                        gamma_grid, gamma_grid):
            score(dict(zip(
                ("lambda_type", "gamma1", "gamma2", "gamma3", "gamma4"), values
            )))
    else:
        coords = [("lambda_type", lambda_grid)] + [
            (f"gamma{i}", gamma_grid) for i in range(1, 5)
        ]
        for _ in range(sweeps):
            for name, grid in coords:
                best_val = None
                best_score = -np.inf
                for value in grid:
                    trial = dict(current)
                    trial[name] = value
                    s = score(trial)
                    if s > best_score:
                        best_score = s
                        best_val = value
                current[name] = best_val

    best_key = min(
        cache, key=lambda k: (-cache[k], k[0], k[1], k[2], k[3], k[4])
    )
    best_hp = hp.with_overrides(
        lambda_type=best_key[0], gamma1=best_key[1], gamma2=best_key[2],
        gamma3=best_key[3], gamma4=best_key[4],
    )
    return GridSearchResult(best_hp=best_hp, rows=rows)
