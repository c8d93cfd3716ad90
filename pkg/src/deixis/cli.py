"""Command-line entry point: train, predict, score, stats, grid, gradcheck.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .candidates import build_anaphor_lexicon
from .corpus import (
    CorpusError,
    corpus_stats,
    load_corpus,
    load_filter_lexicon,
)
from .embeddings import DeterministicEmbeddings, EmbeddingError, load_embedding_file
from .inference import resolve_document, write_predictions
from .model import Hyperparams, init_params, load_model, save_model
from .scorer import (
    ALL_BUT_FIRST,
    MARKED,
    evaluate,
    link_distance_report,
    per_anaphor_report,
)
from .synthetic import toy_resolution_corpus
from .training import TrainingError, gradient_check, grid_search
from .training import make_training_examples, train as train_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # Usage problems are validation errors (exit 1), not argparse's 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message, EXIT_VALIDATION)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {path}", EXIT_IO)
    return p


def parse_config(path: Path) -> dict:
    """Flat "key = value" config; '#' starts a comment.  Keys must mirror
    hyperparameter names exactly; unknown keys are errors."""
    overrides = {}
    known = {f: t for f, t in zip(
        Hyperparams.field_names(),
        [name in Hyperparams.INT_FIELDS for name in Hyperparams.field_names()],
    )}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            overrides[key] = int(value) if known[key] else float(value)
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from exc
    return overrides


def _load_hp(args) -> Hyperparams:
    hp = Hyperparams()
    if getattr(args, "config", None):
        hp = hp.with_overrides(**parse_config(_require_file(args.config, "config")))
    return hp


def _embedding_provider(args, hp: Hyperparams):
    if args.emb:
        store = load_embedding_file(_require_file(args.emb, "embedding file"))
        return store
    return DeterministicEmbeddings(dim=hp.emb_dim, seed=args.det_emb)


def _add_emb_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--emb", help="binary embedding file")
    group.add_argument("--det-emb", type=int, metavar="SEED",
                       help="deterministic embeddings with this seed")


def _resolve_all(entries, params, hp, emb, lexicon, filt, jobs: int):
    def one(entry):
        return resolve_document(entry.document, params, hp, emb, lexicon, filt)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, entries))
    return [one(e) for e in entries]


def cmd_train(args) -> int:
    hp = _load_hp(args)
    train_entries = load_corpus(_require_file(args.train, "training corpus"))
    dev_entries = load_corpus(_require_file(args.dev, "dev corpus"))
    emb = _embedding_provider(args, hp)
    filt = load_filter_lexicon(args.filter_lexicon)
    result = train_model(train_entries, dev_entries, hp, emb, filt)
    for line in result.log_lines():
        print(line)
    print(f"best epoch {result.best_epoch}  dev_conll {result.best_dev_conll:.4f}")
    save_model(args.out, result.params, hp, result.lexicon, filt)
    if args.log:
        Path(args.log).write_text(
            "\n".join(result.log_lines()) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_predict(args) -> int:
    params, hp, lexicon, filt = load_model(_require_file(args.model, "model"))
    entries = load_corpus(_require_file(args.input, "input corpus"), gold=False)
    emb = _embedding_provider(args, hp)
    if getattr(emb, "dim", hp.emb_dim) != hp.emb_dim:
        raise CliError(
            f"embedding dim {emb.dim} does not match model dim {hp.emb_dim}"
        )
    predictions = _resolve_all(entries, params, hp, emb, lexicon, filt, args.jobs)
    write_predictions(predictions, args.out)
    n_links = sum(
        1 for p in predictions for v in p.links.values() if v is not None
    )
    print(f"resolved {len(predictions)} documents, {n_links} links -> {args.out}")
    return EXIT_OK


def cmd_score(args) -> int:
    gold = load_corpus(_require_file(args.gold, "gold corpus"))
    sys_entries = load_corpus(_require_file(args.sys, "system corpus"), gold=False)
    sys_clusterings = []
    for e in sys_entries:
        if e.gold is None:
            raise CliError(
                f"system file has no clusters for document {e.document.doc_id}"
            )
        sys_clusterings.append(e.gold)
    convention = MARKED if args.recognition_convention == "marked" else ALL_BUT_FIRST
    report = evaluate(gold, sys_clusterings, convention)
    lines = report.tsv_lines() if args.tsv else report.text_lines()
    print("\n".join(lines))
    if args.per_anaphor:
        print()
        print("\n".join(
            per_anaphor_report(gold, sys_clusterings,
                               convention=convention).tsv_lines()
        ))
    if args.per_distance:
        print()
        print("\n".join(
            link_distance_report(
                [e.gold for e in gold], sys_clusterings
            ).tsv_lines()
        ))
    return EXIT_OK


def cmd_stats(args) -> int:
    entries = load_corpus(_require_file(args.input, "input corpus"))
    s = corpus_stats(entries)
    print(f"docs                {s.n_docs}")
    print(f"utterances          {s.n_utterances}")
    print(f"turns               {s.n_turns}")
    print(f"tokens              {s.n_tokens}")
    print(f"anaphors            {s.n_anaphors}")
    print(f"antecedents         {s.n_antecedents}")
    print(f"avg utts/doc        {s.avg_utterances_per_doc:.1f}")
    print(f"avg tokens/utt      {s.avg_tokens_per_utterance:.1f}")
    print(f"avg turns/doc       {s.avg_turns_per_doc:.1f}")
    print(f"avg anaphors/doc    {s.avg_anaphors_per_doc:.1f}")
    print(f"avg antecedents/doc {s.avg_antecedents_per_doc:.1f}")
    print(f"avg speakers/doc    {s.avg_speakers_per_doc:.1f}")
    return EXIT_OK


def cmd_grid(args) -> int:
    hp = _load_hp(args)
    train_entries = load_corpus(_require_file(args.train, "training corpus"))
    dev_entries = load_corpus(_require_file(args.dev, "dev corpus"))
    emb = _embedding_provider(args, hp)
    filt = load_filter_lexicon(args.filter_lexicon)
    lambda_grid = [float(x) for x in args.lambda_grid.split(",")]
    gamma_grid = [float(x) for x in args.gamma_grid.split(",")]
    result = grid_search(
        train_entries, dev_entries, hp, emb, filt, lambda_grid, gamma_grid,
        full_cartesian=args.full_cartesian,
    )
    print(result.table_tsv())
    best = result.best_hp
    print(
        f"best\tlambda {best.lambda_type:g}\tgamma1 {best.gamma1:g}\t"
        f"gamma2 {best.gamma2:g}\tgamma3 {best.gamma3:g}\tgamma4 {best.gamma4:g}"
    )
    if args.out:
        Path(args.out).write_text(result.table_tsv() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    hp = Hyperparams(
        window=4, emb_dim=16, span_dim=24, ffnn_hidden=32, feature_dim=8,
        dropout=0.0, lambda_type=1.0, seed=args.seed,
    )
    entries = toy_resolution_corpus(n_docs=1, seed=args.seed)
    lexicon = build_anaphor_lexicon(entries, hp.max_anaphor_width)
    data = make_training_examples(entries, lexicon, hp)
    filt = load_filter_lexicon(None)
    emb = DeterministicEmbeddings(dim=hp.emb_dim, seed=args.seed)
    params = init_params(hp, seed=args.seed)
    err = gradient_check(
        params, data.examples[0], hp, emb, filt, seed=args.seed
    )
    print(f"max relative gradient error: {err:.3e}")
    if err >= 1e-4:
        print("FAIL: gradient check tolerance is 1e-4", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="deixis",
                     description="Discourse deixis resolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a resolver")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    _add_emb_flags(p)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--filter-lexicon")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="resolve a corpus with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _add_emb_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", help="score system output against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--sys", required=True)
    p.add_argument("--per-anaphor", action="store_true")
    p.add_argument("--per-distance", action="store_true")
    p.add_argument("--recognition-convention",
                   choices=["marked", "all-but-first"], default="marked")
    p.add_argument("--tsv", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("grid", help="grid search over loss knobs")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    _add_emb_flags(p)
    p.add_argument("--config")
    p.add_argument("--lambda-grid", default="0.2,0.5,1,200,500,800,1200,1600")
    p.add_argument("--gamma-grid", default="1,5,10")
    p.add_argument("--full-cartesian", action="store_true")
    p.add_argument("--out")
    p.add_argument("--filter-lexicon")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CorpusError, TrainingError, EmbeddingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
