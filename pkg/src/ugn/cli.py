"""Command-line entry point ``ugn``.

Exit codes: 0 on success, 1 for invalid input (config, arguments, files),
2 when a run fails at runtime. Results are printed as ``key<TAB>value``.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .autograd import ShapeError
from .datasets import (FormatError, generate_sbm, generate_translation_pairs, load_edge_list,
                       save_edge_list, save_labels, save_matrix, save_matrix_pairs)
from .supernode import synthesize_features
from .training import Checkpoint, ConfigError, RunConfig, evaluate, train

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
INVALID = (ConfigError, FormatError, ShapeError, FileNotFoundError, IsADirectoryError,
           KeyError, ValueError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _emit(pairs) -> None:
    for k, v in pairs:
        print(f"{k}\t{v}")


def _cmd_train(args) -> None:
    cfg = RunConfig.from_file(args.config)
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = cfg.with_overrides(overrides)
    result = train(cfg, out_dir=args.out_dir)
    _emit([("config_hash", cfg.hash()), ("epochs", result.checkpoint.epoch)])
    sys.stdout.write(result.report.to_text())


def _cmd_eval(args) -> None:
    ckpt = Checkpoint.load(args.checkpoint)
    sys.stdout.write(evaluate(ckpt, args.data).to_text())


def _cmd_features(args) -> None:
    g = load_edge_list(args.graph)
    feats = synthesize_features(g, args.supernodes, args.rand_dim, rng=args.seed,
                                block_size=args.block_size)
    save_matrix(feats.matrix, args.out)
    _emit([("nodes", g.n), ("supernodes", feats.n_supernodes), ("dim", feats.dim), ("out", args.out)])


def _cmd_gen(args) -> None:
    if args.kind == "sbm":
        g = generate_sbm(args.n, args.communities, args.p_in, args.p_out, rng=args.seed)
        save_edge_list(g, args.out)
        save_labels(g.node_labels, args.out + ".labels")
        _emit([("nodes", g.n), ("edges", g.n_edges), ("out", args.out)])
    else:
        pairs = generate_translation_pairs(args.order, args.count, args.alpha, args.beta, args.noise,
                                           rng=args.seed, shared=args.shared,
                                           population=args.population)
        save_matrix_pairs(pairs, args.out)
        _emit([("pairs", len(pairs)), ("order", args.order), ("out", args.out)])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ugn", description="Graph neural network toolkit with a convolutional decoder.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch losses to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train from a key=value config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    t.add_argument("--out-dir")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="alternative data source with the same shape")
    e.set_defaults(func=_cmd_eval)

    f = sub.add_parser("features", help="synthesize node features")
    f.add_argument("kind", choices=["supernode"])
    f.add_argument("--graph", required=True)
    f.add_argument("--supernodes", type=int, required=True)
    f.add_argument("--rand-dim", type=int, default=0)
    f.add_argument("--block-size", type=int)
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_features)

    g = sub.add_parser("gen", help="generate synthetic data")
    g.add_argument("kind", choices=["sbm", "translate"])
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--communities", type=int, default=4)
    g.add_argument("--p-in", type=float, default=0.15)
    g.add_argument("--p-out", type=float, default=0.01)
    g.add_argument("--order", type=int, default=32)
    g.add_argument("--count", type=int, default=250)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--beta", type=float, default=0.5)
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--shared", type=float, default=0.5)
    g.add_argument("--population", type=float, default=1.0)
    g.set_defaults(func=_cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
