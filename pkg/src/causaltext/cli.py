"""Command-line entry point.

Subcommands: generate, train-lda, classify, estimate, grid, ablate, report.
All randomness flows from explicit --seed flags; rerunning any command with
the same arguments produces byte-identical outputs. Exit status: 0 success,
1 run failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import classify as cl
from . import estimators as es
from .corpus import build_corpus, load_templates
from .dataset_io import read_dataset, write_dataset
from .effects import EffectParams
from .harness import (
    ExperimentConfig,
    accuracy_error_analysis,
    emit_report,
    load_config,
    run_ablation,
    run_grid,
    runs_csv,
)
from .lda import load_model, save_model, train_lda
from .ngram import build_ngram_lm
from .seeding import child_rng, child_seed
from .structured import sample_structured_params
from .textgen import (
    Dataset,
    TextEffectConfig,
    default_trivial_vocab,
    generate_dataset,
)

__all__ = ["main", "entrypoint"]


def _add_corpus_flags(p: argparse.ArgumentParser):
    p.add_argument("--corpus-docs", type=int, default=2000, help="bundled corpus size")
    p.add_argument("--corpus-seed", type=int, default=0, help="bundled corpus seed")
    p.add_argument("--vocab-cap", type=int, default=5000, help="max vocabulary types")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causaltext",
        description="Synthetic text benchmarks with known causal effects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    g = sub.add_parser("generate", help="generate a dataset file", formatter_class=fmt)
    g.add_argument("--dgp", choices=("trivial", "lda", "sequential"), required=True)
    g.add_argument("--tau-word", type=float, required=True)
    g.add_argument("--delta-word", type=float, required=True)
    g.add_argument("--tau-context", type=float, default=None,
                   help="topic/template effect (lda and sequential)")
    g.add_argument("--delta-context", type=float, default=None)
    g.add_argument("--n", type=int, default=10000, help="records to generate")
    g.add_argument("--seed", type=int, default=0, help="sole randomness source")
    g.add_argument("--structured-seed", type=int, default=0)
    g.add_argument("--doc-len", type=int, default=None,
                   help="tokens per record (default 16 trivial, 32 lda)")
    g.add_argument("--max-len", type=int, default=32, help="sequential generation cap")
    g.add_argument("--trivial-vocab", type=int, default=16)
    g.add_argument("--exponent-form", choices=("zipf", "blend"), default="zipf")
    g.add_argument("--lda-model", default=None, help="trained topic model file")
    g.add_argument("--lda-topics", type=int, default=20)
    g.add_argument("--lda-iters", type=int, default=300)
    g.add_argument("--ngram-order", type=int, default=2)
    g.add_argument("--ngram-smoothing", type=float, default=0.1)
    _add_corpus_flags(g)
    g.add_argument("--out", required=True, help="dataset path to write")

    t = sub.add_parser("train-lda", help="train and save a topic model", formatter_class=fmt)
    t.add_argument("--k", type=int, default=20, help="topic count")
    t.add_argument("--alpha", type=float, default=0.1)
    t.add_argument("--beta", type=float, default=0.01)
    t.add_argument("--iters", type=int, default=500, help="Gibbs sweeps")
    t.add_argument("--seed", type=int, default=0)
    _add_corpus_flags(t)
    t.add_argument("--out", required=True, help="model path to write")

    c = sub.add_parser("classify", help="train the latent-variable classifier on a dataset",
                       formatter_class=fmt)
    c.add_argument("--data", required=True, help="dataset file")
    c.add_argument("--target", choices=("u", "a"), default="u")
    c.add_argument("--split", default=None,
                   help="train,dev,test sizes (default 80/10/10 of n)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--save-model", default=None, help="write fitted weights here")

    e = sub.add_parser("estimate", help="run one estimator on a dataset", formatter_class=fmt)
    e.add_argument("--method", required=True,
                   choices=("measurement", "ipw", "propensity", "representation",
                            "oracle", "naive", "unadjusted", "plug_in"))
    e.add_argument("--data", required=True, help="dataset file")
    e.add_argument("--labeled", type=int, default=None,
                   help="labeled examples for measurement / plug_in")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None, help="CSV path (default: stdout)")

    gr = sub.add_parser("grid", help="run an experiment grid", formatter_class=fmt)
    gr.add_argument("--config", required=True, help="config file or preset name")
    gr.add_argument("--seed", type=int, default=None, help="override master seed")
    gr.add_argument("--workers", type=int, default=None)
    gr.add_argument("--out-dir", default=None, help="override config out_dir")
    gr.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="config override, repeatable")

    ab = sub.add_parser("ablate", help="run the labeled-budget ablation", formatter_class=fmt)
    ab.add_argument("--config", required=True)
    ab.add_argument("--seed", type=int, default=None)
    ab.add_argument("--workers", type=int, default=None)
    ab.add_argument("--out-dir", default=None)
    ab.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    rp = sub.add_parser("report", help="re-emit report files from stored runs",
                        formatter_class=fmt)
    rp.add_argument("--config", required=True)
    rp.add_argument("--out-dir", required=True,
                    help="directory holding runs/ and receiving the CSVs")
    rp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def _resolved_config(args) -> ExperimentConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"workers={args.workers}")
    if args.out_dir is not None:
        overrides.append(f'out_dir="{args.out_dir}"')
    return load_config(args.config, overrides)


def _cmd_generate(args) -> int:
    word = EffectParams(args.tau_word, args.delta_word)
    context = None
    if args.tau_context is not None or args.delta_context is not None:
        if args.tau_context is None or args.delta_context is None:
            print("generate: --tau-context and --delta-context go together", file=sys.stderr)
            return 2
        context = EffectParams(args.tau_context, args.delta_context)
    cfg = TextEffectConfig(
        word=word, context_effect=context,
        ordering_seed=child_seed(args.seed, "ordering"),
        exponent_form=args.exponent_form,
    )
    params = sample_structured_params(args.structured_seed)
    kwargs = {}
    if args.dgp == "trivial":
        kwargs = {"vocab": default_trivial_vocab(args.trivial_vocab),
                  "n_tokens": args.doc_len or 16}
    elif args.dgp == "lda":
        if context is None:
            print("generate: lda needs --tau-context/--delta-context", file=sys.stderr)
            return 2
        if args.lda_model:
            model = load_model(args.lda_model)
        else:
            docs, vocab = build_corpus(args.corpus_docs, args.corpus_seed,
                                       vocab_cap=args.vocab_cap)
            model = train_lda(docs, vocab, k=args.lda_topics, iters=args.lda_iters,
                              seed=child_seed(args.corpus_seed, "dgp-lda"))
        kwargs = {"model": model, "length": args.doc_len or 32}
    else:
        if context is None:
            print("generate: sequential needs --tau-context/--delta-context", file=sys.stderr)
            return 2
        docs, vocab = build_corpus(args.corpus_docs, args.corpus_seed,
                                   vocab_cap=args.vocab_cap)
        lm = build_ngram_lm(docs, vocab, order=args.ngram_order,
                            smoothing=args.ngram_smoothing)
        kwargs = {"lm": lm, "templates": load_templates(), "max_len": args.max_len}
    dataset = generate_dataset(params, args.dgp, cfg, args.n,
                               child_seed(args.seed, "dataset"), **kwargs)
    write_dataset(dataset, args.out)
    print(f"wrote {args.n} records to {args.out}")
    return 0


def _cmd_train_lda(args) -> int:
    docs, vocab = build_corpus(args.corpus_docs, args.corpus_seed, vocab_cap=args.vocab_cap)
    model = train_lda(docs, vocab, k=args.k, alpha=args.alpha, beta=args.beta,
                      iters=args.iters, seed=args.seed)
    save_model(model, args.out)
    print(f"trained {args.k}-topic model on {model.metadata['n_documents']} documents "
          f"-> {args.out}")
    return 0


def _cmd_classify(args) -> int:
    dataset = read_dataset(args.data)
    n = len(dataset.records)
    vocab_size = len(dataset.metadata["vocab"])
    rows = [cl.featurize(r.tokens, vocab_size) for r in dataset.records]
    X = cl.features_matrix(rows)
    y = np.array([getattr(r, args.target) for r in dataset.records], dtype=np.int64)
    if args.split:
        sizes = tuple(int(x) for x in args.split.split(","))
        if len(sizes) != 3:
            print("classify: --split needs three sizes", file=sys.stderr)
            return 2
    else:
        n_test = max(1, n // 10)
        n_dev = max(1, n // 10)
        sizes = (n - n_dev - n_test, n_dev, n_test)
    split = cl.make_split(n, sizes, rng=child_rng(args.seed, "cli-split"))
    model = cl.train_logreg(X[split.train], y[split.train], seed=args.seed)
    acc_test = cl.accuracy(model, X[split.test], y[split.test])
    acc_dev = cl.accuracy(model, X[split.dev], y[split.dev])
    print(f"target={args.target} n={n} split={sizes[0]}/{sizes[1]}/{sizes[2]}")
    print(f"dev_accuracy={acc_dev!r}")
    print(f"test_accuracy={acc_test!r}")
    if args.save_model:
        with open(args.save_model, "w", encoding="utf-8", newline="\n") as f:
            f.write(model.to_text())
        print(f"model -> {args.save_model}")
    return 0


def _estimate_report(dataset: Dataset, args):
    config = es.EstimatorConfig()
    if args.method in ("measurement", "ipw", "propensity", "representation"):
        if args.method == "measurement":
            return es.measurement_error_ate(dataset, labeled_budget=args.labeled,
                                            config=config, seed=args.seed)
        cls = {"ipw": es.IpwEstimator, "propensity": es.PropensityMatching,
               "representation": es.RepresentationMatching}[args.method]
        return es.crossfit(dataset, cls(config), seed=args.seed)
    budget = args.labeled if args.labeled is not None else 50
    for report in es.baseline_suite(dataset, labeled_budget=budget, seed=args.seed):
        if report.method == args.method:
            return report
    raise RuntimeError(f"baseline {args.method} not produced")


def _cmd_estimate(args) -> int:
    dataset = read_dataset(args.data)
    report = _estimate_report(dataset, args)
    meta = dataset.metadata
    effects = meta.get("effects", {})

    def _fmt(v):
        if v is None or (isinstance(v, float) and np.isnan(v)):
            return ""
        return repr(v) if isinstance(v, float) else str(v)

    header = ("method,dgp,structured_seed,text_seed,tau_word,delta_word,"
              "tau_second,delta_second,n,estimate,oracle,abs_error,ci_low,ci_high")
    row = ",".join([
        report.method, meta["dgp"], str(meta["structured_seed"]), str(meta["seed"]),
        _fmt(effects.get("tau_word")), _fmt(effects.get("delta_word")),
        _fmt(effects.get("tau_context")), _fmt(effects.get("delta_context")),
        str(meta["n"]), _fmt(report.estimate), _fmt(report.oracle),
        _fmt(report.abs_error), _fmt(report.ci_low), _fmt(report.ci_high),
    ])
    text = header + "\n" + row + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_grid(args) -> int:
    config = _resolved_config(args)
    report = run_grid(config)
    if config.out_dir:
        emit_report(report, config.out_dir)
        print(f"grid complete: {len(report.runs)} runs -> {config.out_dir}")
    else:
        sys.stdout.write(runs_csv(report))
    return 0


def _cmd_ablate(args) -> int:
    config = _resolved_config(args)
    ablation = run_ablation(config)
    if config.out_dir:
        emit_report(ablation["grid"], config.out_dir, ablation=ablation)
        print(f"ablation complete -> {config.out_dir}")
    else:
        from .harness import ablation_csv

        sys.stdout.write(ablation_csv(ablation))
    return 0


def _cmd_report(args) -> int:
    args.seed = None
    args.workers = None
    config = _resolved_config(args)
    report = run_grid(config, runs_dir=f"{args.out_dir}/runs")
    analysis = accuracy_error_analysis(report)
    written = emit_report(report, args.out_dir, analysis=analysis)
    print("\n".join(written))
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train-lda": _cmd_train_lda,
    "classify": _cmd_classify,
    "estimate": _cmd_estimate,
    "grid": _cmd_grid,
    "ablate": _cmd_ablate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"causaltext {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
