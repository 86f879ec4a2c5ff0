"""Command-line entry point: ``anonsearch <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from anonsearch.anonymise import DEFAULT_POOL_SIZE, DecomposeParams, decompose
from anonsearch.attack import AttackParams, attack_both
from anonsearch.corpus import build_index, read_corpus
from anonsearch.embed import load_embeddings
from anonsearch.harness import ExperimentConfig, load_index, run_experiment

logger = logging.getLogger("anonsearch")


class CommandError(Exception):
    pass


def _single_token(query: str) -> str:
    q = query.strip().lower()
    if not q or len(q.split()) != 1:
        raise CommandError(f"query must be a single token, got {query!r}")
    return q


def cmd_index(args) -> int:
    index = build_index(read_corpus(args.corpus))
    index.save(args.out)
    print(f"indexed {index.doc_count} documents, {len(index.postings)} tokens -> {args.out}")
    return 0


def cmd_decompose(args) -> int:
    query = _single_token(args.query)
    store = load_embeddings(args.embeddings)
    params = DecomposeParams(
        n_related=args.n, m_distractors=args.m, sigma=args.sigma,
        pool_size=max(args.pool_size, args.m), seed=args.seed,
    )
    dq = decompose(store, query, params)
    print(json.dumps(dq.to_json(seed=args.seed), indent=2))
    return 0


def _read_terms(path: str) -> list[str]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        raw = raw.get("order") or raw.get("terms")
    if not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
        raise CommandError("terms file must hold a JSON list of strings or a decompose output")
    return [t.lower() for t in raw]


def cmd_attack(args) -> int:
    store = load_embeddings(args.embeddings)
    terms = _read_terms(args.terms)
    truth = _single_token(args.query) if args.query else None
    std, cons, km = attack_both(store, terms, AttackParams(k=args.k, seed=args.seed), true_query=truth)
    out = {
        "k": args.k,
        "clusters": km.clusters,
        "coherence": [c if c != float("-inf") else None for c in std.per_cluster_coherence],
        "standard": list(std.guesses),
        "conservative": list(cons.guesses),
    }
    if truth is not None:
        out["hit"] = {"standard": std.hit, "conservative": cons.hit}
    print(json.dumps(out, indent=2))
    return 0


def cmd_eval(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    result = run_experiment(config)
    print(f"{len(result.records)} records, {len(result.skipped)} skipped -> {config.output_dir}")
    for fit in result.fits:
        r = fit["pearson_r"]
        print(f"sigma={fit['sigma']} m={fit['m']} l={fit['l']} "
              f"r={'n/a' if r is None else f'{r:.3f}'} points={fit['n_points']}")
    return 0


def cmd_desk(args) -> int:
    from anonsearch.desk import DeskConfig, write_desk

    paths = write_desk(args.out, DeskConfig(seed=args.seed))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_game_serve(args) -> int:
    import uvicorn

    from anonsearch.game import GameService, create_app

    store = load_embeddings(args.embeddings)
    index = load_index(args.corpus)
    if args.queries:
        pool = [l.strip() for l in Path(args.queries).read_text(encoding="utf-8").splitlines() if l.strip()]
    else:
        from anonsearch.desk import default_queries

        pool = default_queries()
    pool = [q for q in pool if q.lower() in store]
    threshold = None if args.no_rho_filter else args.rho_threshold
    service = GameService(store, index, pool, threshold, args.pool_size, args.event_log)
    if args.event_log and Path(args.event_log).exists():
        service.replay(args.event_log)
    uvicorn.run(create_app(service), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anonsearch", description="Query anonymisation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an inverted index from a JSON Lines corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("decompose", help="decompose one query into related and distractor terms")
    p.add_argument("--query", required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool-size", type=int, default=DEFAULT_POOL_SIZE)
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("eval", help="run an experiment grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", help="run the clustering attack on a received term list")
    p.add_argument("--terms", required=True, help="JSON list of terms or a decompose output")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--query", help="true query, only used to score the guesses")
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("desk", help="write the synthetic embeddings + corpus desk setup")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=2015)
    p.set_defaults(func=cmd_desk)

    game = sub.add_parser("game", help="query prediction game")
    game_sub = game.add_subparsers(dest="game_command", required=True)
    p = game_sub.add_parser("serve", help="serve the game HTTP API")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--corpus", required=True, help="JSON Lines corpus or saved index")
    p.add_argument("--queries", help="query pool file, one token per line")
    p.add_argument("--rho-threshold", type=float, default=0.3)
    p.add_argument("--no-rho-filter", action="store_true")
    p.add_argument("--pool-size", type=int)
    p.add_argument("--event-log")
    p.set_defaults(func=cmd_game_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CommandError, ValueError, KeyError, OSError) as exc:
        print(f"anonsearch: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
