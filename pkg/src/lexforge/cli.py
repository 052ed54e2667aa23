"""Command-line entry point: one subcommand per pipeline stage.

Exit status: 0 on success, 1 on input errors, 2 on usage/config errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import SCHEMA_VERSION, __version__
from ._parallel import resolve_threads
from .config import ConfigError, PipelineConfig, load_config

logger = logging.getLogger("lexforge")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def write_report(obj: dict, path: str | None) -> None:
    obj = {"schema_version": SCHEMA_VERSION, **obj}
    if path is None or path == "-":
        sys.stdout.write(_dump(obj))
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_dump(obj))


def _build(factory, **kwargs):
    try:
        return factory(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _threads(args, cfg: PipelineConfig) -> int:
    if args.threads is not None:
        value = args.threads
    elif os.environ.get("FORGE_THREADS"):
        value = None
    else:
        value = cfg.threads if cfg.threads is not None else 1
    try:
        return resolve_threads(value)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


# ---------------------------------------------------------------- commands

def cmd_stats(args, cfg):
    from .corpus import LoadStats, corpus_stats, load_corpus

    ls = LoadStats()
    stats = corpus_stats(load_corpus(args.input, strict=not args.lenient, stats=ls))
    report = {"groups": stats.to_json(), "skipped_records": ls.skipped}
    write_report(report, args.report)
    if args.figures:
        from .plotting import plot_corpus_stats
        plot_corpus_stats(report["groups"], args.figures)


def cmd_dedup(args, cfg):
    from .corpus import load_corpus, write_corpus
    from .dedup import DedupConfig, dedup_corpus

    dc = _build(
        DedupConfig,
        num_perm=cfg.resolve("dedup", "num_perm", args.num_perm, 256),
        threshold=cfg.resolve("dedup", "threshold", args.threshold, 0.90),
        shingle_n=cfg.resolve("dedup", "shingle_n", args.shingle_n, 5),
        seed=cfg.resolve("dedup", "seed", args.seed, 42),
        exact_verify=cfg.resolve("dedup", "exact_verify", args.exact_verify or None, False),
    )
    kept, report = dedup_corpus(load_corpus(args.input, strict=not args.lenient), dc,
                                threads=_threads(args, cfg))
    write_corpus(kept, args.output)
    rj = report.to_json()
    rj.pop("schema_version")
    write_report(rj, args.report)
    if args.figures:
        from .plotting import plot_dedup_clusters
        plot_dedup_clusters(rj, args.figures)


def cmd_balance(args, cfg):
    from .balance import apply_balance, plan_balance
    from .corpus import corpus_stats, load_corpus, write_corpus

    if args.targets:
        with open(args.targets, encoding="utf-8") as fh:
            targets = json.load(fh)
    else:
        targets = cfg.section("balance").get("targets")
    if not isinstance(targets, dict):
        raise ConfigError("balance needs --targets or a balance.targets config entry")
    seed = cfg.resolve("balance", "seed", args.seed, 42)
    stats = corpus_stats(load_corpus(args.input))
    plan = plan_balance(stats, {k: float(v) for k, v in targets.items()}, seed=seed)
    n_out = write_corpus(apply_balance(load_corpus(args.input), plan), args.output)
    out_stats = corpus_stats(load_corpus(args.output))
    report = {"seed": seed, "plan": plan.to_json(), "docs_in": stats.doc_count,
              "docs_out": n_out, "before": stats.to_json(), "after": out_stats.to_json()}
    if args.report:
        write_report(report, args.report)


def cmd_train_tokenizer(args, cfg):
    from .corpus import load_corpus
    from .tokenizer import TokenizerConfig, normalize, train_wordpiece

    seeds_path = args.seed_terms or cfg.section("tokenizer").get("seed_terms")
    seeds, skipped = [], 0
    if seeds_path:
        for line in _read_lines(seeds_path):
            term = normalize(line)
            if not term:
                continue
            if " " in term:
                skipped += 1
                continue
            seeds.append(term)
        if skipped:
            logger.warning("skipped %d multi-word seed terms (tokens cannot contain spaces)", skipped)
    tc = _build(
        TokenizerConfig,
        vocab_size=cfg.resolve("tokenizer", "vocab_size", args.vocab_size, 48_000),
        min_frequency=cfg.resolve("tokenizer", "min_frequency", args.min_frequency, 2),
        max_word_chars=cfg.resolve("tokenizer", "max_word_chars", args.max_word_chars, 100),
        seed_terms=tuple(seeds),
    )
    vocab = train_wordpiece(load_corpus(args.input), tc)
    vocab.save(args.out)
    report = {"vocab_size_requested": tc.vocab_size, "vocab_size_actual": len(vocab),
              "seed_terms": len(tc.seed_terms), "seed_terms_skipped_multiword": skipped,
              "min_frequency": tc.min_frequency, "max_word_chars": tc.max_word_chars}
    if args.report:
        write_report(report, args.report)
    else:
        logger.info("vocabulary: %d entries written to %s", len(vocab), args.out)


def _text_lines(path):
    if str(path).endswith(".jsonl"):
        from .corpus import load_corpus
        for doc in load_corpus(path):
            yield from doc.text.split("\n")
    else:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                yield line.rstrip("\n")


def cmd_tokenize_stats(args, cfg):
    from .tokenizer import Vocabulary, fragmentation_report

    vocab = Vocabulary.load(args.vocab)
    per_line: list[int] = []
    rep = fragmentation_report(vocab, _text_lines(args.input), per_line=per_line)
    write_report({"vocab_size": len(vocab), **rep.to_json()}, args.report)
    if args.figures:
        from .plotting import plot_fragmentation
        plot_fragmentation(per_line, args.figures)


def cmd_vocab_transfer(args, cfg):
    from .tokenizer import Vocabulary
    from .transfer import apply_transfer, overlap_analysis, read_emb1, write_emb1

    old_v, new_v = Vocabulary.load(args.old_vocab), Vocabulary.load(args.new_vocab)
    rep = overlap_analysis(old_v, new_v)
    if args.old_emb:
        if not args.out:
            raise ConfigError("--old-emb requires --out")
        new_m = apply_transfer(rep, read_emb1(args.old_emb), args.exclude_specials, old_v)
        write_emb1(new_m, args.out)
    out = rep.to_json(include_pairs=args.include_pairs)
    out.pop("schema_version")
    out["mean_excludes_specials"] = bool(args.exclude_specials)
    write_report(out, args.report)


def cmd_emb_convert(args, cfg):
    from .transfer import read_emb1, read_tsv, write_emb1, write_tsv

    src = read_tsv(args.input) if args.input.endswith(".tsv") else read_emb1(args.input)
    if args.output.endswith(".tsv"):
        write_tsv(src, args.output)
    else:
        write_emb1(src, args.output)


def cmd_mask(args, cfg):
    from .corpus import load_corpus
    from .masking import KeywordIndex, MaskingConfig, build_dataset, masking_summary
    from .tokenizer import Vocabulary

    sec = cfg.section("masking")
    kwargs = {
        "mlm_prob": cfg.resolve("masking", "mlm_prob", args.mlm_prob, 0.25),
        "seed": cfg.resolve("masking", "seed", args.seed, 42),
        "span_len_p": cfg.resolve("masking", "span_len_p", None, 0.2),
        "span_len_max": cfg.resolve("masking", "span_len_max", None, 10),
    }
    for key in ("strategy_weights", "replace_probs"):
        if key in sec:
            kwargs[key] = dict(sec[key])
    mc = _build(MaskingConfig, **kwargs)
    max_len = cfg.resolve("masking", "max_len", args.max_len, 512)
    vocab = Vocabulary.load(args.vocab)
    idx = KeywordIndex.load(args.keywords) if args.keywords else None
    examples = build_dataset(load_corpus(args.input), vocab, idx, mc, max_len=max_len,
                             threads=_threads(args, cfg))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(ex.dumps() + "\n")
    summary = masking_summary(examples, mc)
    summary["max_len"] = max_len
    summary["keywords"] = len(idx) if idx is not None else 0
    if args.report:
        write_report(summary, args.report)
    if args.figures:
        from .plotting import plot_masking
        plot_masking(summary, args.figures)


def cmd_eval_cloze(args, cfg):
    from .cloze import ClozeConfig, evaluate_cloze, load_items, load_predictions

    cc = _build(
        ClozeConfig,
        resamples=cfg.resolve("cloze", "resamples", args.resamples, 10_000),
        level=cfg.resolve("cloze", "level", args.level, 0.95),
        seed=cfg.resolve("cloze", "seed", args.seed, 7),
        case_fold=cfg.resolve("cloze", "case_fold", args.case_fold or None, False),
    )
    if cc.resamples < 1000:
        raise ConfigError("--resamples must be >= 1000")
    if not 0 < cc.level < 1:
        raise ConfigError("--level must be in (0, 1)")
    rep = evaluate_cloze(load_items(args.items), load_predictions(args.preds), cc).to_json()
    rep.pop("schema_version")
    write_report(rep, args.report)
    if args.figures:
        from .plotting import plot_cloze
        plot_cloze(rep, args.figures)


def cmd_eval_seg(args, cfg):
    from .segmentation import evaluate_segmentation, load_tag_sequences

    tol = cfg.resolve("seg", "tolerance", args.tolerance, 5)
    if not isinstance(tol, int) or tol < 0:
        raise ConfigError("tolerance must be a non-negative integer")
    rep = evaluate_segmentation(load_tag_sequences(args.gold), load_tag_sequences(args.pred),
                                tolerance=tol).to_json()
    rep.pop("schema_version")
    write_report(rep, args.report)
    if args.figures:
        from .plotting import plot_segmentation
        plot_segmentation(rep, args.figures)


def cmd_window(args, cfg):
    from .segmentation import WindowConfig, merge_window_predictions, window_split

    wc = _build(WindowConfig,
                size=cfg.resolve("window", "size", args.size, 512),
                stride=cfg.resolve("window", "stride", args.stride, 256))
    out = open(args.output, "w", encoding="utf-8", newline="\n") if args.output else sys.stdout
    try:
        with open(args.input, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        if args.merge:
            by_doc: dict[str, list] = {}
            for r in records:
                by_doc.setdefault(str(r["doc_id"]), []).append(r)
            for doc_id, ws in by_doc.items():
                ws.sort(key=lambda r: (r["start"], r.get("window", 0)))
                length = max(r["start"] + len(r["tags"]) for r in ws)
                rec = {"doc_id": doc_id}
                if all("tokens" in r for r in ws):
                    rec["tokens"] = merge_window_predictions(
                        [(r["start"], r["tokens"]) for r in ws], length)
                rec["tags"] = merge_window_predictions([(r["start"], r["tags"]) for r in ws], length)
                out.write(json.dumps(rec, ensure_ascii=False) + "\n")
        else:
            for r in records:
                tokens = r["tokens"]
                tags = r.get("tags")
                for k, w in enumerate(window_split(tokens, wc)):
                    rec = {"doc_id": r["doc_id"], "window": k, "start": w.start, "tokens": w.tokens}
                    if tags is not None:
                        rec["tags"] = tags[w.start:w.end]
                    out.write(json.dumps(rec, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config file (default: none)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $FORGE_THREADS, else config, else 1)")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="(default: INFO)")

    parser = argparse.ArgumentParser(prog="lexforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lexforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=fn)
        return p

    p = add("stats", cmd_stats, "per-group document counts and byte sizes")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--report", help="report path (default: stdout)")
    p.add_argument("--lenient", action="store_true", help="skip malformed records")
    p.add_argument("--figures", help="directory for PNG + TSV figures")

    p = add("dedup", cmd_dedup, "MinHash-LSH near-duplicate removal")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--output", required=True, help="kept documents JSONL")
    p.add_argument("--report", help="report path (default: stdout)")
    p.add_argument("--num-perm", type=int, help="permutations [config or 256]")
    p.add_argument("--threshold", type=float, help="Jaccard threshold [config or 0.90]")
    p.add_argument("--shingle-n", type=int, help="character shingle width [config or 5]")
    p.add_argument("--seed", type=int, help="permutation seed [config or 42]")
    p.add_argument("--exact-verify", action="store_true", help="accept on exact Jaccard")
    p.add_argument("--lenient", action="store_true", help="skip malformed records")
    p.add_argument("--figures", help="directory for PNG + TSV figures")

    p = add("balance", cmd_balance, "sub-domain byte rebalancing")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--targets", help="JSON map group key -> target bytes [config balance.targets]")
    p.add_argument("--seed", type=int, help="selection seed [config or 42]")
    p.add_argument("--output", required=True, help="balanced corpus JSONL")
    p.add_argument("--report", help="plan and before/after stats JSON")

    p = add("train-tokenizer", cmd_train_tokenizer, "train a cased WordPiece vocabulary")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--vocab-size", type=int, help="[config or 48000]")
    p.add_argument("--min-frequency", type=int, help="minimum character frequency [config or 2]")
    p.add_argument("--max-word-chars", type=int, help="[config or 100]")
    p.add_argument("--seed-terms", help="dictionary file, one term per line")
    p.add_argument("--out", required=True, help="vocab.txt output")
    p.add_argument("--report", help="training summary JSON")

    p = add("tokenize-stats", cmd_tokenize_stats, "subword fragmentation per line and per word")
    p.add_argument("--vocab", required=True, help="vocab.txt")
    p.add_argument("--input", required=True, help="corpus JSONL or plain-text lines")
    p.add_argument("--report", help="report path (default: stdout)")
    p.add_argument("--figures", help="directory for PNG + TSV figures")

    p = add("vocab-transfer", cmd_vocab_transfer, "overlap analysis and mean-initialized transfer")
    p.add_argument("--old-vocab", required=True, help="vocab.txt of the original model")
    p.add_argument("--new-vocab", required=True, help="vocab.txt of the new tokenizer")
    p.add_argument("--old-emb", help="old EMB1 matrix")
    p.add_argument("--out", help="new EMB1 matrix")
    p.add_argument("--report", help="overlap report (default: stdout)")
    p.add_argument("--exclude-specials", action="store_true",
                   help="leave special-token rows out of the mean")
    p.add_argument("--include-pairs", action="store_true", help="list id pairs in the report")

    p = add("emb-convert", cmd_emb_convert, "convert between EMB1 and TSV by file extension")
    p.add_argument("--input", required=True, help="source matrix (.tsv or EMB1)")
    p.add_argument("--output", required=True, help="destination matrix (.tsv or EMB1)")

    p = add("mask", cmd_mask, "generate hybrid-masked MLM examples")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--vocab", required=True, help="vocab.txt")
    p.add_argument("--keywords", help="keyword terms, one per line")
    p.add_argument("--mlm-prob", type=float, help="[config or 0.25]")
    p.add_argument("--max-len", type=int, help="window length incl. [CLS]/[SEP] [config or 512]")
    p.add_argument("--seed", type=int, help="[config or 42]")
    p.add_argument("--out", required=True, help="examples JSONL")
    p.add_argument("--report", help="masking statistics JSON")
    p.add_argument("--figures", help="directory for PNG + TSV figures")

    p = add("eval-cloze", cmd_eval_cloze, "Top-1/Top-3 cloze accuracy with bootstrap CIs")
    p.add_argument("--items", required=True, help="items JSONL")
    p.add_argument("--preds", required=True, help="predictions JSONL")
    p.add_argument("--resamples", type=int, help="[config or 10000]")
    p.add_argument("--level", type=float, help="CI level [config or 0.95]")
    p.add_argument("--seed", type=int, help="[config or 7]")
    p.add_argument("--case-fold", action="store_true", help="case-insensitive matching")
    p.add_argument("--report", help="report path (default: stdout)")
    p.add_argument("--figures", help="directory for PNG + TSV figures")

    p = add("eval-seg", cmd_eval_seg, "BIO segmentation metric suite")
    p.add_argument("--gold", required=True, help="gold JSONL")
    p.add_argument("--pred", required=True, help="prediction JSONL")
    p.add_argument("--tolerance", type=int, help="tol_pass window in tokens [config or 5]")
    p.add_argument("--report", help="report path (default: stdout)")
    p.add_argument("--figures", help="directory for PNG + TSV figures")

    p = add("window", cmd_window, "split documents into sliding windows, or merge them back")
    p.add_argument("--input", required=True, help="documents (or windows with --merge) JSONL")
    p.add_argument("--size", type=int, help="[config or 512]")
    p.add_argument("--stride", type=int, help="[config or 256]")
    p.add_argument("--merge", action="store_true", help="merge window predictions per doc_id")
    p.add_argument("--output", help="output JSONL (default: stdout)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        _threads(args, cfg)  # reject bad --threads / FORGE_THREADS for every stage
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"lexforge {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"lexforge {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
