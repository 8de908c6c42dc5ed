"""Command-line entry points: gen, simulate, eval, serve, predict.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
from pathlib import Path

from . import activeloop, metrics, seqmodel
from .activeloop import LoopParams, SessionComplete, SessionEngine, run_iteration
from .corpus import (
    BUILTIN_SCHEMAS,
    Corpus,
    EmptyMentionError,
    LabelSchema,
    ParseError,
    SchemaError,
    gen_synthetic,
    load_corpus,
    save_corpus,
    tokenize,
)
from .embed import ProviderError, build_provider
from .seqmodel import CheckpointError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve_schema(arg: str) -> LabelSchema:
    if arg in BUILTIN_SCHEMAS:
        return BUILTIN_SCHEMAS[arg]
    path = Path(arg)
    if not path.exists():
        raise UsageError(
            f"--schema must be one of {sorted(BUILTIN_SCHEMAS)} or a JSON file path"
        )
    try:
        return LabelSchema.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError) as exc:
        raise SchemaError(f"invalid schema file {arg}: {exc}") from exc


def _provider_config(args) -> dict:
    if args.provider == "remote":
        if not args.embed_url:
            raise UsageError("--embed-url is required with --provider remote")
        return {
            "kind": "remote",
            "url": args.embed_url,
            "dimension": args.dim or 768,
        }
    return {"kind": "hashed-ngram", "dimension": args.dim or 64}


def _add_provider_flags(sub):
    sub.add_argument("--provider", choices=["hashed", "remote"], default="hashed")
    sub.add_argument("--embed-url", default=None)
    sub.add_argument("--dim", type=int, default=None)


def cmd_gen(args) -> int:
    if args.n < 1:
        raise UsageError("n must be >= 1")
    corpus = gen_synthetic(args.kind, args.n, args.seed)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} mentions to {args.out}")
    return EXIT_OK


def split_corpus(corpus: Corpus, seed: int, test_fraction: float = 0.3):
    """Deterministic shuffle split into a training pool and a held-out set."""
    ids = [m.id for m in corpus.mentions]
    random.Random(seed).shuffle(ids)
    n_test = int(len(ids) * test_fraction)
    n_train = len(ids) - n_test
    train_ids = set(ids[:n_train])
    by_id = corpus.by_id()
    train = Corpus(
        tuple(m for m in corpus.mentions if m.id in train_ids), corpus.schema
    )
    test = tuple(by_id[i] for i in ids[n_train:])
    return train, test


def simulate(
    corpus: Corpus,
    seed: int,
    params: LoopParams,
    provider_config: dict,
    audit_path: str | None = None,
    model_out: str | None = None,
) -> dict:
    """Run a full oracle-driven session and return the simulation report.

    The oracle answers queries from gold labels and verifies machine labels
    by exact comparison with gold.
    """
    if any(m.labels is None for m in corpus.mentions):
        raise SchemaError("simulation requires a fully gold-labeled corpus")
    train_pool, held_out = split_corpus(corpus, seed)
    engine = SessionEngine(
        train_pool,
        params=params,
        provider=build_provider(provider_config),
        model=seqmodel.new_model(corpus.schema, provider_config, seed=params.seed),
        test_mentions=held_out,
        audit_path=audit_path,
    )
    gold = corpus.by_id()

    def oracle_label(mention):
        return gold[mention.id].labels

    def oracle_verdicts(items):
        return {
            it.mention_id: (
                "correct" if tuple(it.labels) == gold[it.mention_id].labels else "incorrect"
            )
            for it in items
        }

    while True:
        try:
            run_iteration(engine, oracle_label, oracle_verdicts)
        except SessionComplete:
            break
    reason = engine.state.stop_reason or engine._check_stop()
    final = engine.latest_f1()
    if model_out is not None:
        seqmodel.save_model(engine.model, model_out)
    return {
        "params": {
            "k": params.k, "p": params.p, "q": params.q,
            "budget": params.budget, "seed": params.seed,
        },
        "train_pool": len(train_pool),
        "held_out": len(held_out),
        "records": engine.reports,
        "stop_reason": reason,
        "final": final,
    }


def cmd_simulate(args) -> int:
    schema = _resolve_schema(args.schema)
    corpus = load_corpus(args.corpus, schema)
    params = LoopParams(
        k=args.k, p=args.p, q=args.q, budget=args.budget, seed=args.seed
    )
    report = simulate(
        corpus, args.seed, params, _provider_config(args), audit_path=args.audit,
        model_out=args.save_model,
    )
    out = Path(args.out)
    tmp = out.with_suffix(out.suffix + ".tmp")
    tmp.write_text(json.dumps(report, indent=2), encoding="utf-8")
    tmp.replace(out)
    final = report["final"] or {}
    print(
        f"stopped ({report['stop_reason']}) after {len(report['records'])} iterations; "
        f"entity F1 {final.get('entity_f1', float('nan')):.4f}, "
        f"token F1 {final.get('token_f1', float('nan')):.4f}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    model = seqmodel.load_model(args.model)
    test = load_corpus(args.test, model.schema)
    if not len(test):
        raise UsageError("test file contains no mentions")
    if any(m.labels is None for m in test.mentions):
        raise SchemaError("evaluation requires gold labels on every mention")
    provider = build_provider(model.provider_config)
    predicted = {
        m.id: seqmodel.predict(model, m.tokens, provider=provider).labels
        for m in test.mentions
    }
    report = metrics.evaluate(test.mentions, predicted, model.schema)
    print(metrics.format_report(report))
    if args.out:
        Path(args.out).write_text(report.to_json(indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = seqmodel.load_model(args.model)
    if not args.mention or not args.mention.strip():
        raise UsageError("mention must be non-empty")
    provider = build_provider(model.provider_config)
    tokens = tokenize(args.mention)
    pred = seqmodel.predict(model, tokens, provider=provider)
    for token, label in zip(tokens, pred.labels):
        print(f"{token}\t{label}")
    print(f"confidence\t{math.exp(pred.log_prob):.6f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionRegistry, create_app

    schema = _resolve_schema(args.schema)
    corpus = load_corpus(args.corpus, schema)
    registry = SessionRegistry(
        {"default": corpus},
        provider_config=_provider_config(args),
        state_dir=args.state_dir,
    )
    app = create_app(registry)
    if args.frontend:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.frontend, html=True), name="ui")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:
        # uvicorn exits non-zero when the port is taken
        if exc.code:
            raise RuntimeError(f"server failed to start on port {args.port}") from exc
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="namestruct", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a gold-labeled synthetic corpus")
    p_gen.add_argument("kind", choices=["person", "org", "date"])
    p_gen.add_argument("n", type=int)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_sim = sub.add_parser("simulate", help="oracle-driven active-learning run")
    p_sim.add_argument("--corpus", required=True)
    p_sim.add_argument("--schema", required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--budget", type=int, default=20)
    p_sim.add_argument("--k", type=int, default=50)
    p_sim.add_argument("--p", type=int, default=15)
    p_sim.add_argument("--q", type=int, default=15)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--audit", default=None, help="append iteration records here (JSONL)")
    p_sim.add_argument("--save-model", default=None, help="write the final model checkpoint here")
    _add_provider_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a labeled JSONL file")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="label one mention with a trained checkpoint")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--mention", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_serve = sub.add_parser("serve", help="serve the annotation API (and optional UI)")
    p_serve.add_argument("--corpus", required=True)
    p_serve.add_argument("--schema", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--state-dir", default="./sessions")
    p_serve.add_argument("--frontend", default=None, help="static UI directory to mount")
    _add_provider_flags(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SchemaError, EmptyMentionError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ProviderError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
