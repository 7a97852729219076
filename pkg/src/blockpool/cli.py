"""Command-line entry point.

Exit codes: 0 success, 1 data/config/runtime errors, 2 usage errors.
The BLOCKPOOL_THREADS environment variable caps worker threads; 0 (the
default) pins everything to a deterministic single thread.
"""

from __future__ import annotations

import os

_THREADS = int(os.environ.get("BLOCKPOOL_THREADS", "0") or 0)
if _THREADS <= 1:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, "1")

import argparse
import sys

from .errors import BlockpoolError


def _p_vocab(sub):
    p = sub.add_parser("vocab", help="train or tune a subword vocabulary")
    s = p.add_subparsers(dest="vocab_cmd", required=True)
    t = s.add_parser("train", help="train BPE with a fixed size and max piece length")
    t.add_argument("--input", required=True, help="corpus, one sentence per line")
    t.add_argument("--size", type=int, required=True, help="target piece count (>= 256)")
    t.add_argument("--max-len", type=int, required=True, help="max piece length in bytes")
    t.add_argument("--out", required=True, help="vocabulary file to write")
    u = s.add_parser("tune", help="grid-sweep size and max length toward a target factor")
    u.add_argument("--input", required=True)
    u.add_argument("--target", type=float, default=4.0, help="target average downsampling factor")
    u.add_argument("--size-grid", required=True, help="comma-separated sizes")
    u.add_argument("--lmax-grid", required=True, help="comma-separated max lengths")
    u.add_argument("--out", required=True)


def _p_segment(sub):
    p = sub.add_parser("segment", help="segment a corpus; `segment report` for diagnostics")
    p.add_argument("mode", nargs="?", choices=["report"], help="emit a consistency report instead of lengths")
    p.add_argument("--method", required=True, choices=["fixed", "buffixed", "wdd", "sdd"])
    p.add_argument("--k", type=int, default=4, help="block size for fixed/buffixed")
    p.add_argument("--vocab", help="vocabulary file (sdd)")
    p.add_argument("--input", required=True)
    p.add_argument("--out", help="output TSV (default stdout)")


def _p_train(sub):
    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True, help="`section.key = value` run config file")
    p.add_argument("--override", action="append", default=[], metavar="K=V")


def _p_translate(sub):
    p = sub.add_parser("translate", help="greedy-translate a file line by line")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-blocks", type=int, default=64)


def _p_classify(sub):
    p = sub.add_parser("classify", help="predict a label per input line")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)


def _p_evaluate(sub):
    p = sub.add_parser("evaluate", help="BLEU, accuracy, or the ablation deltas")
    s = p.add_subparsers(dest="eval_cmd", required=True)
    b = s.add_parser("bleu")
    b.add_argument("--hyp", required=True)
    b.add_argument("--ref", required=True)
    a = s.add_parser("accuracy")
    a.add_argument("--pred", required=True)
    a.add_argument("--ref", required=True)
    ab = s.add_parser("ablation")
    ab.add_argument("--results", required=True, help="TSV: variant<TAB>score")


def _p_probe(sub):
    p = sub.add_parser("probe", help="embedding-similarity z-score tables")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--train-corpus", required=True)
    p.add_argument("--baseline-n", type=int, default=10000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cap", type=int, default=2000)
    p.add_argument("--out", help="output TSV (default stdout)")


def _p_check(sub):
    p = sub.add_parser("check", help="built-in verification routines")
    s = p.add_subparsers(dest="check_cmd", required=True)
    g = s.add_parser("grad")
    g.add_argument("--preset", default="tiny", choices=["tiny"])
    l = s.add_parser("leak")
    l.add_argument("--variant", default="sdd", choices=["fixed", "sdd"])
    l.add_argument("--preset", default="tiny", choices=["tiny"])
    s.add_parser("mask")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockpool", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    _p_vocab(sub)
    _p_segment(sub)
    _p_train(sub)
    _p_translate(sub)
    _p_classify(sub)
    _p_evaluate(sub)
    _p_probe(sub)
    _p_check(sub)
    return ap


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return f.read().splitlines()


def _write_text(path, text):
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cmd_vocab(args) -> int:
    from .subword import avg_downsampling_factor, save_vocab, train_bpe, tune_vocab

    lines = _read_lines(args.input)
    if args.vocab_cmd == "train":
        vocab = train_bpe(lines, size=args.size, lmax=args.max_len)
        save_vocab(vocab, args.out)
        stats = avg_downsampling_factor(vocab, lines)
        print(f"size={vocab.size}\tlmax={vocab.lmax}\tavg_factor={stats.avg_factor:.4f}")
    else:
        size_grid = [int(s) for s in args.size_grid.split(",")]
        lmax_grid = [int(s) for s in args.lmax_grid.split(",")]
        vocab, stats = tune_vocab(lines, args.target, size_grid, lmax_grid, threads=_THREADS)
        save_vocab(vocab, args.out)
        print(f"size={vocab.size}\tlmax={vocab.lmax}\tavg_factor={stats.avg_factor:.4f}")
    return 0


def _cmd_segment(args) -> int:
    from .segmenter import (
        consistency_report,
        encode_text,
        segment_buffered_fixed,
        segment_fixed,
        segment_sdd,
        segment_wdd,
    )
    from .subword import load_vocab

    method = {"buffixed": "buffered_fixed"}.get(args.method, args.method)
    vocab = load_vocab(args.vocab) if args.vocab else None
    if method == "sdd" and vocab is None:
        raise BlockpoolError("sdd segmentation requires --vocab")
    lines = _read_lines(args.input)

    if args.mode == "report":
        rep = consistency_report(lines, method=method, k=args.k, vocab=vocab)
        rows = [f"summary\tmethod\t{rep.method}"]
        rows.append(f"summary\tmean_block_len\t{rep.mean_block_len:.4f}")
        rows.append(f"summary\tmax_block_len\t{rep.max_block_len}")
        rows.append(f"summary\tnum_blocks\t{rep.num_blocks}")
        for length in sorted(rep.histogram):
            rows.append(f"hist\t{length}\t{rep.histogram[length]}")
        for word in sorted(rep.variant_counts):
            rows.append(f"word\t{word}\t{rep.variant_counts[word]}")
        _write_text(args.out, "\n".join(rows) + "\n")
        return 0

    out_rows = []
    for line in lines:
        if method == "buffered_fixed":
            _, seg = segment_buffered_fixed(line, args.k)
        else:
            seq = encode_text(line, add_bos_eos=True)
            if method == "fixed":
                seg = segment_fixed(seq, args.k)
            elif method == "wdd":
                seg = segment_wdd(seq)
            else:
                seg = segment_sdd(seq, vocab)
        out_rows.append("\t".join(str(l) for l in seg.lengths))
    _write_text(args.out, "\n".join(out_rows) + "\n")
    return 0


def _cmd_train(args) -> int:
    from .runconfig import apply_overrides, echo_config, parse_config, resolve_run
    from .training import load_labeled, load_parallel, train

    setup = resolve_run(apply_overrides(parse_config(args.config), args.override))
    print(echo_config(setup), file=sys.stderr)

    values = setup.values
    if setup.spec.task == "classification":
        train_data = load_labeled(values["data.labeled"])
        dev_data = load_labeled(values["data.dev_labeled"]) if "data.dev_labeled" in values else []
    else:
        train_data = load_parallel(values["data.src"], values["data.tgt"])
        dev_data = (
            load_parallel(values["data.dev_src"], values["data.dev_tgt"])
            if "data.dev_src" in values
            else []
        )

    out_dir = setup.out_dir
    log_path = ckpt_path = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, "metrics.tsv")
        ckpt_path = os.path.join(out_dir, "best.ckpt")
        with open(os.path.join(out_dir, "config.resolved"), "w", encoding="utf-8") as f:
            f.write(echo_config(setup) + "\n")
    result = train(setup.spec, train_data, dev_data, setup.train,
                   log_path=log_path, checkpoint_path=ckpt_path)
    print(f"steps={result.steps}\tbest_{setup.train.eval_metric}={result.best_metric}")
    return 0


def _cmd_translate(args) -> int:
    from .training import load_checkpoint

    model = load_checkpoint(args.ckpt)
    lines = _read_lines(args.input)
    outputs = []
    truncated = 0
    for line in lines:
        text, meta = model.translate(line, max_blocks=args.max_blocks)
        outputs.append(text)
        truncated += int(meta["truncated"])
    _write_text(args.out, "\n".join(outputs) + "\n")
    if truncated:
        print(f"warning: {truncated} outputs hit max-blocks and were truncated", file=sys.stderr)
    return 0


def _cmd_classify(args) -> int:
    from .training import load_checkpoint

    model = load_checkpoint(args.ckpt)
    for line in _read_lines(args.input):
        probs = model.classify(line)
        print(model.spec.labels[int(probs.argmax())])
    return 0


def _cmd_evaluate(args) -> int:
    from .metrics import ablation_report, accuracy, bleu

    if args.eval_cmd == "bleu":
        score = bleu(_read_lines(args.hyp), _read_lines(args.ref))
        print(f"{score.score:.4f}")
        print(
            "precisions=" + ",".join(f"{p:.4f}" for p in score.precisions)
            + f"\tbp={score.brevity_penalty:.4f}\thyp_len={score.hyp_len}\tref_len={score.ref_len}",
            file=sys.stderr,
        )
    elif args.eval_cmd == "accuracy":
        print(f"{accuracy(_read_lines(args.pred), _read_lines(args.ref)):.6f}")
    else:
        results = {}
        for i, line in enumerate(_read_lines(args.results), start=1):
            if not line.strip():
                continue
            variant, score = line.split("\t")
            results[{"buffixed": "buffered_fixed"}.get(variant, variant)] = float(score)
        deltas = ablation_report(results)
        for key in ("position", "length", "morpheme"):
            print(f"{key}\t{deltas[key]:+.4f}")
    return 0


def _cmd_probe(args) -> int:
    from .probe import (
        Lexicon,
        build_pair_sets,
        compute_baseline,
        corpus_word_set,
        eligible_words,
        z_scores,
    )
    from .rng import Rng
    from .training import load_checkpoint

    model = load_checkpoint(args.ckpt)
    lexicon = Lexicon.load(args.lexicon)
    train_words = corpus_word_set(_read_lines(args.train_corpus))
    eligible = eligible_words(lexicon, model.spec.vocab)
    sets = build_pair_sets(lexicon, eligible, train_words, Rng(args.seed), cap=args.cap)
    baseline = compute_baseline(model, eligible, n=args.baseline_n, seed=args.seed)
    table = z_scores(model, sets, baseline)
    rows = [f"# mu={baseline.mu!r} sigma={baseline.sigma!r} n={baseline.n} seed={baseline.seed}"]
    rows.append("kind\tsplit\tmean_z\tci95\tpairs")
    for (kind, split), (mean_z, ci, n) in table.items():
        rows.append(f"{kind}\t{split}\t{mean_z:.4f}\t{ci:.4f}\t{n}")
    _write_text(args.out, "\n".join(rows) + "\n")
    return 0


def _cmd_check(args) -> int:
    from .checks import grad_check, leak_check, mask_check

    if args.check_cmd == "grad":
        ok, detail = grad_check()
    elif args.check_cmd == "leak":
        ok, detail = leak_check(args.variant)
    else:
        ok, detail = mask_check()
    print(f"{'PASS' if ok else 'FAIL'}: {detail}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    handlers = {
        "vocab": _cmd_vocab,
        "segment": _cmd_segment,
        "train": _cmd_train,
        "translate": _cmd_translate,
        "classify": _cmd_classify,
        "evaluate": _cmd_evaluate,
        "probe": _cmd_probe,
        "check": _cmd_check,
    }
    try:
        return handlers[args.cmd](args)
    except BlockpoolError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
