"""Command-line entry points.

Subcommands: prepare (vocab/IDF/PMI artifacts), train, eval, generate,
chat (interactive loop), serve (HTTP service), inspect-drift. Artifact
paths default into the directory named by $CONDIV_HOME (or ./condiv_home).
Failures print one machine-parsable line to stderr:
`condiv-error code=<n> kind=<kind> detail=<text>`.
"""

import argparse
import json
import os
import sys

import numpy as np

from .corpus import (
    IdfTable,
    Vocabulary,
    build_vocab,
    idf_documents,
    load_dataset,
    load_embeddings,
    EmbeddingTable,
    tokenize,
)
from .inference import (
    ChatSession,
    GenerationRequest,
    ModelBundle,
    chat_turn,
    generate,
)
from .metrics import PmiTable, build_pmi_table, evaluate_responses
from .model import CondivModel, checkpoint_hash, load_checkpoint
from .topic import drift_words, format_drift_report, topic_candidates
from .training import (
    TrainConfig,
    TrainError,
    build_model,
    evaluate_switcher,
    load_config,
    prepare_examples,
    train,
)


class CliError(Exception):
    def __init__(self, code: int, kind: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.kind = kind
        self.detail = detail


def home_dir() -> str:
    return os.environ.get("CONDIV_HOME", "condiv_home")


def _artifact(path, default_name, kind="missing-artifact"):
    resolved = path or os.path.join(home_dir(), default_name)
    if not os.path.exists(resolved):
        raise CliError(3, kind, resolved)
    return resolved


def _load_bundle(args):
    ckpt_path = _artifact(args.checkpoint, "ckpt-best.bin")
    vocab_path = _artifact(args.vocab, "vocab.txt")
    idf_path = _artifact(getattr(args, "idf", None), "idf.txt")
    config, params = load_checkpoint(ckpt_path)
    vocab = Vocabulary.load(vocab_path)
    if len(vocab) != config.vocab_size:
        raise CliError(4, "artifact-mismatch",
                       f"vocab size {len(vocab)} != checkpoint {config.vocab_size}")
    idf = IdfTable.load(idf_path)
    bundle = ModelBundle(model=CondivModel(config, params), vocab=vocab, idf=idf)
    return bundle, ckpt_path


def _dataset(path):
    if not path or not os.path.exists(path or ""):
        raise CliError(3, "missing-artifact", path or "<no --data given>")
    return load_dataset(path)


# -- subcommands -----------------------------------------------------------------


def cmd_prepare(args) -> int:
    examples = _dataset(args.data)
    out = args.out or home_dir()
    os.makedirs(out, exist_ok=True)
    vocab = build_vocab(examples, max_size=args.vocab_cap)
    vocab.save(os.path.join(out, "vocab.txt"))
    idf = IdfTable.from_documents(idf_documents(examples))
    idf.save(os.path.join(out, "idf.txt"))
    table = build_pmi_table(examples)
    table.save(os.path.join(out, "pmi.txt"))
    coverage = None
    if args.embeddings:
        emb = load_embeddings(args.embeddings, vocab, seed=args.seed or 0)
        coverage = emb.coverage
    print(json.dumps({
        "vocab_size": len(vocab), "documents": idf.doc_count,
        "pmi_pairs": table.pair_total, "embedding_coverage": coverage,
        "out": out,
    }))
    return 0


def cmd_train(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.beta is not None:
        overrides["forced_beta"] = args.beta
    config = (load_config(args.config, **overrides) if args.config
              else TrainConfig(**overrides))
    train_examples = _dataset(args.data)
    dev_examples = _dataset(args.dev) if args.dev else None
    if dev_examples is None:
        split = max(1, len(train_examples) // 10)
        dev_examples = train_examples[-split:]
        train_examples = train_examples[:-split] or dev_examples
    out = args.out or home_dir()
    os.makedirs(out, exist_ok=True)
    if args.vocab:
        vocab = Vocabulary.load(_artifact(args.vocab, "vocab.txt"))
    else:
        vocab = build_vocab(train_examples + dev_examples, max_size=config.vocab_cap)
        vocab.save(os.path.join(out, "vocab.txt"))
    idf = IdfTable.from_documents(idf_documents(train_examples + dev_examples))
    idf.save(os.path.join(out, "idf.txt"))
    if args.embeddings:
        emb = load_embeddings(_artifact(args.embeddings, "embeddings.txt"),
                              vocab, dim=config.embed_dim, seed=config.seed)
    else:
        emb = EmbeddingTable.random(vocab, config.embed_dim, seed=config.seed)
    train_prep = prepare_examples(train_examples, vocab, idf, emb, config)
    dev_prep = prepare_examples(dev_examples, vocab, idf, emb, config)
    model = build_model(config, vocab, emb)
    log_path = os.path.join(out, "train-log.jsonl")
    try:
        with open(log_path, "w", encoding="utf-8") as log_file:
            result = train(config, train_prep, dev_prep, model, out,
                           log_file=log_file)
    except TrainError as exc:
        raise CliError(5, "training-failed", str(exc)) from exc
    accuracy = evaluate_switcher(result.model, dev_prep)
    print(json.dumps({
        "checkpoint": result.checkpoint_path,
        "best_dev_loss": result.state.best_dev_loss,
        "epochs": result.state.epoch,
        "switcher_dev_accuracy": accuracy,
        "log": log_path,
    }))
    return 0


def _generate_over_dataset(args, bundle):
    examples = _dataset(args.data)
    outputs = []
    for i, ex in enumerate(examples):
        request = GenerationRequest(
            context=[" ".join(u) for u in ex.context_utterances],
            facts=[" ".join(f) for f in ex.facts],
            beta=args.beta, k=args.k,
            seed=(args.seed or 0) + i,
        )
        outputs.append((ex, generate(request, bundle)))
    return outputs


def cmd_generate(args) -> int:
    bundle, _ = _load_bundle(args)
    outputs = _generate_over_dataset(args, bundle)
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for ex, result in outputs:
            sink.write(json.dumps({
                "context": [" ".join(u) for u in ex.context_utterances],
                "reference": " ".join(ex.response),
                "response": result.text,
                "beta_used": result.beta_used,
                "beta_predicted": result.beta_predicted,
                "provenance": result.provenance,
            }) + "\n")
    finally:
        if args.out:
            sink.close()
    return 0


def cmd_eval(args) -> int:
    if args.hyp or args.ref:
        if not (args.hyp and args.ref):
            raise CliError(2, "usage", "--hyp and --ref must be given together")
        if not os.path.exists(args.hyp):
            raise CliError(3, "missing-artifact", args.hyp)
        if not os.path.exists(args.ref):
            raise CliError(3, "missing-artifact", args.ref)
        with open(args.hyp, encoding="utf-8") as f:
            hyps = [tokenize(line) for line in f.read().splitlines()]
        with open(args.ref, encoding="utf-8") as f:
            refs = [tokenize(line) for line in f.read().splitlines()]
        if len(hyps) != len(refs):
            raise CliError(2, "usage",
                           f"{len(hyps)} hypotheses vs {len(refs)} references")
        report = evaluate_responses(hyps, refs)
    else:
        bundle, _ = _load_bundle(args)
        outputs = _generate_over_dataset(args, bundle)
        table = None
        if args.pmi or os.path.exists(os.path.join(home_dir(), "pmi.txt")):
            table = PmiTable.load(_artifact(args.pmi, "pmi.txt"))
        hyps = [tokenize(r.text) for _, r in outputs]
        refs = [ex.response for ex, _ in outputs]
        sources = [(ex.joined_context, [t for f in ex.facts for t in f])
                   for ex, _ in outputs]
        report = evaluate_responses(hyps, refs, sources=sources, table=table)
    print(report.to_json())
    return 0


def cmd_chat(args) -> int:
    bundle, _ = _load_bundle(args)
    session = ChatSession(session_id="cli", seed_base=args.seed or 0)
    if args.facts:
        session.fact_pool = list(args.facts)
    print("condiv chat; 'exit' to quit, '/beta <x|auto>' to force the switcher")
    beta = args.beta
    while True:
        try:
            line = input("you> ").strip()
        except EOFError:
            break
        if not line:
            continue
        if line in ("exit", "quit"):
            break
        if line.startswith("/beta"):
            value = line.split(None, 1)[1] if " " in line else "auto"
            beta = None if value == "auto" else float(value)
            print(f"beta mode: {'auto' if beta is None else beta}")
            continue
        result = chat_turn(session, bundle, line, beta=beta, k=args.k)
        tagged = " ".join(f"{tok}[{tag.split(':')[0]}]"
                          for tok, tag in zip(result.tokens, result.provenance))
        print(f"bot(beta={result.beta_used:.2f})> {result.text}")
        print(f"  provenance: {tagged}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve_forever

    bundle, ckpt_path = _load_bundle(args)
    serve_forever(bundle, checkpoint_hash(ckpt_path), port=args.port,
                  host=args.host)
    return 0


def cmd_inspect_drift(args) -> int:
    if args.checkpoint or not args.vocab:
        bundle, _ = _load_bundle(args)
        vocab, idf, emb = bundle.vocab, bundle.idf, bundle.embeddings
        n_div = bundle.model.config.n_div
        top_n = bundle.top_n_topics
    else:
        vocab = Vocabulary.load(_artifact(args.vocab, "vocab.txt"))
        idf = IdfTable.load(_artifact(getattr(args, "idf", None), "idf.txt"))
        if args.embeddings:
            emb = load_embeddings(_artifact(args.embeddings, "embeddings.txt"),
                                  vocab, seed=args.seed or 0)
        else:
            emb = EmbeddingTable.random(vocab, 300, seed=args.seed or 0)
        n_div, top_n = 5, 5
    tokens = tokenize(args.text)
    topics = topic_candidates(tokens, [], idf, vocab, top_n=top_n)
    drift = drift_words(topics, emb, vocab, n_div=n_div)
    print(format_drift_report(topics, drift))
    return 0


# -- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condiv",
        description="fact-based dialogue with convergent/divergent decoding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpointed=True):
        p.add_argument("--config", help="flat key-value training config file")
        p.add_argument("--seed", type=int, default=None)
        if checkpointed:
            p.add_argument("--checkpoint", help="model checkpoint path")
            p.add_argument("--vocab", help="vocabulary artifact path")
            p.add_argument("--idf", help="IDF artifact path")
            p.add_argument("--beta", type=float, default=None,
                           help="force the switcher probability in [0,1]")
            p.add_argument("--k", type=int, default=10, help="top-k sample width")

    p = sub.add_parser("prepare", help="build vocab/IDF/PMI artifacts")
    p.add_argument("--data", required=True, help="training dataset (JSONL)")
    p.add_argument("--out", help="artifact directory (default $CONDIV_HOME)")
    p.add_argument("--vocab-cap", type=int, default=30000)
    p.add_argument("--embeddings", help="word-vector text file to check coverage")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_prepare)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--dev")
    p.add_argument("--out")
    p.add_argument("--vocab")
    p.add_argument("--embeddings")
    p.add_argument("--beta", type=float, default=None,
                   help="force the switcher during training (ablation)")
    common(p, checkpointed=False)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("generate", help="batch-generate over a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("eval", help="evaluate responses or a checkpoint")
    p.add_argument("--hyp", help="hypothesis file, one response per line")
    p.add_argument("--ref", help="reference file, one response per line")
    p.add_argument("--data", help="dataset to generate from (checkpoint mode)")
    p.add_argument("--pmi", help="PMI table artifact")
    common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("chat", help="interactive chat loop")
    p.add_argument("--facts", nargs="*", help="initial fact pool")
    common(p)
    p.set_defaults(fn=cmd_chat)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--port", type=int, default=8777)
    p.add_argument("--host", default="127.0.0.1")
    common(p)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("inspect-drift", help="print topic and drift words")
    p.add_argument("--text", required=True)
    p.add_argument("--embeddings")
    common(p)
    p.set_defaults(fn=cmd_inspect_drift)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"condiv-error code={exc.code} kind={exc.kind} detail={exc.detail}",
              file=sys.stderr)
        return exc.code
    except (ValueError, OSError) as exc:
        print(f"condiv-error code=1 kind=runtime detail={exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
