"""Command-line interface: one subcommand per pipeline stage plus ``run`` and ``transfer``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .embedder import SgnsConfig, load_embeddings, save_embeddings, train_sgns
from .errors import AttrWalkError, InputError, ParseError
from .features import (DEFAULT_FEATURES, FEATURES, compute_structural_features, concat_attributes,
                       load_attributes, save_attributes)
from .graph import load_edge_list, load_split, save_split, split_edges
from .inductive import UNSEEN_POLICIES, attributes_for, evaluate_transfer, save_node_vectors, transfer
from .linkpred import (EDGE_OPS, MODES, PHI_KINDS, PipelineConfig, compute_auc, fit_phi, node_pair_features,
                       run_pipeline, train_logistic)
from .rng import derive_seed
from .typemap import assign_types, load_typemap, save_assignment, save_typemap
from .walker import WalkConfig, generate_attributed_walks, generate_walks, load_corpus, save_corpus

log = logging.getLogger("attrwalk")

EXIT_CODES = """exit codes:
  0  success
  2  usage error (unknown flag or subcommand)
  3  missing input file or empty input
  4  parse / file-format error
  5  configuration, schema or shape error
  6  data, split or training error
  7  coverage error (type or token without a trained vector)
errors are reported on stderr as one line:
  attrwalk: error code=<kind> stage=<stage> message=<text>
"""

_PIPE = {f.name: f.default for f in fields(PipelineConfig)}


def _features(value: str) -> tuple[str, ...]:
    names = tuple(v for v in value.split(",") if v)
    bad = [v for v in names if v not in FEATURES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown feature(s) {bad}; choose from {','.join(FEATURES)}")
    return names


def _add_graph(p, required=True):
    p.add_argument("--graph", required=required, help="edge-list file")
    p.add_argument("--directed", action="store_true", help="treat edges as directed")


def _add_phi(p):
    p.add_argument("--phi", choices=PHI_KINDS, default=_PIPE["phi"], help="type map kind")
    p.add_argument("--bins", type=int, default=_PIPE["bins"], help="log-binning bins per column")
    p.add_argument("--alpha", type=float, default=_PIPE["alpha"], help="log-binning base")
    p.add_argument("--types", type=int, default=_PIPE["types"], help="k-means target type count")
    p.add_argument("--kmeans-iters", type=int, default=_PIPE["kmeans_iters"], help="max Lloyd iterations")
    p.add_argument("--kmeans-tol", type=float, default=_PIPE["kmeans_tol"], help="centroid shift tolerance")


def _add_features(p):
    p.add_argument("--features", type=_features, default=DEFAULT_FEATURES,
                   help="comma-separated structural features")
    p.add_argument("--attributes", help="node attribute file (used instead of structural features)")


def _add_walk(p):
    p.add_argument("--walks-per-node", type=int, default=_PIPE["walks_per_node"], help="walks started per node")
    p.add_argument("--walk-length", type=int, default=_PIPE["walk_length"], help="steps per walk")
    p.add_argument("-p", type=float, default=_PIPE["p"], help="return parameter")
    p.add_argument("-q", type=float, default=_PIPE["q"], help="in-out parameter")


def _add_sgns(p):
    p.add_argument("--dim", type=int, default=_PIPE["dim"], help="embedding dimension")
    p.add_argument("--window", type=int, default=_PIPE["window"], help="max context radius")
    p.add_argument("--negatives", type=int, default=_PIPE["negatives"], help="negatives per positive pair")
    p.add_argument("--epochs", type=int, default=_PIPE["epochs"], help="Skip-Gram epochs")
    p.add_argument("--initial-lr", type=float, default=_PIPE["initial_lr"], help="initial learning rate")
    p.add_argument("--min-lr", type=float, default=_PIPE["min_lr"], help="final learning rate")
    p.add_argument("--unigram-power", type=float, default=_PIPE["unigram_power"],
                   help="negative sampling exponent")


def _add_clf(p):
    p.add_argument("--operator", choices=EDGE_OPS, default=_PIPE["operator"], help="edge feature operator")
    p.add_argument("--clf-epochs", type=int, default=_PIPE["clf_epochs"], help="logistic regression epochs")
    p.add_argument("--clf-lr", type=float, default=_PIPE["clf_lr"], help="logistic regression step size")
    p.add_argument("--l2-penalty", type=float, default=_PIPE["l2_penalty"], help="L2 penalty")


def _add_common(p):
    p.add_argument("--seed", type=int, default=_PIPE["seed"], help="global seed; all streams derive from it")
    p.add_argument("--threads", type=int, default=_PIPE["threads"], help="worker threads")
    p.add_argument("--no-deterministic", dest="deterministic", action="store_false",
                   help="allow multi-threaded Skip-Gram (results then vary run to run)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="attrwalk", description="Attributed random-walk embeddings.",
                                     epilog=EXIT_CODES, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt, epilog=EXIT_CODES)
        _add_common(p)
        return p

    p = add("features", "compute structural node features")
    _add_graph(p)
    _add_features(p)
    p.add_argument("--out", required=True, help="attribute file to write")

    p = add("split", "split a graph into train edges and held-out test pairs")
    _add_graph(p)
    p.add_argument("--test-fraction", type=float, default=_PIPE["test_fraction"], help="held-out edge fraction")
    p.add_argument("--out", required=True, help="output directory")

    p = add("fit-phi", "fit a type map on node attributes")
    _add_graph(p)
    _add_features(p)
    _add_phi(p)
    p.add_argument("--out", required=True, help="type map file to write")

    p = add("assign", "assign types to nodes with a saved type map")
    _add_graph(p)
    p.add_argument("--typemap", required=True, help="type map file")
    p.add_argument("--attributes", help="node attribute file")
    p.add_argument("--out", required=True, help="two-column node/type file to write")

    p = add("walks", "generate a walk corpus (node ids, or types with --typemap)")
    _add_graph(p)
    _add_walk(p)
    p.add_argument("--typemap", help="emit types from this type map instead of node ids")
    p.add_argument("--attributes", help="node attribute file for --typemap")
    p.add_argument("--out", required=True, help="corpus file to write")

    p = add("embed", "train Skip-Gram embeddings on a walk corpus")
    p.add_argument("--corpus", required=True, help="corpus file")
    _add_sgns(p)
    p.add_argument("--out", required=True, help="embedding file to write")

    p = add("linkpred", "score a saved split with embeddings")
    p.add_argument("--split", required=True, help="split directory (from `split`)")
    p.add_argument("--emb", required=True, help="embedding file")
    p.add_argument("--typemap", help="type map; node tokens are types instead of node ids")
    _add_clf(p)
    p.add_argument("--out", help="report file to write (stdout otherwise)")

    p = add("run", "full pipeline: split, type, walk, embed, classify, AUC")
    _add_graph(p)
    p.add_argument("--mode", choices=MODES, default=_PIPE["mode"], help="node tokens or attributed types")
    p.add_argument("--test-fraction", type=float, default=_PIPE["test_fraction"], help="held-out edge fraction")
    p.add_argument("--features", type=_features, default=DEFAULT_FEATURES, help="comma-separated features")
    _add_phi(p)
    _add_walk(p)
    _add_sgns(p)
    _add_clf(p)
    p.add_argument("--repeats", type=int, default=_PIPE["repeats"], help="independent splits to average")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--results", help="results CSV to append to (default: <out>/results.csv)")

    p = add("transfer", "embed the nodes of a new graph with a trained type map and type embeddings")
    _add_graph(p)
    p.add_argument("--phi", "--typemap", dest="typemap", required=True, help="type map file")
    p.add_argument("--emb", required=True, help="type embedding file")
    p.add_argument("--attributes", help="node attribute file for the new graph")
    p.add_argument("--unseen", choices=UNSEEN_POLICIES, default="mean",
                   help="vector for nodes whose type has no trained vector")
    p.add_argument("--evaluate", action="store_true", help="also report link-prediction AUC on the new graph")
    _add_clf(p)
    p.add_argument("--test-fraction", type=float, default=_PIPE["test_fraction"], help="held-out edge fraction")
    p.add_argument("--out", required=True, help="node embedding file to write")
    return parser


def _attributes(args, g):
    if getattr(args, "attributes", None):
        return load_attributes(args.attributes, g)
    return None


def _pipeline_config(args) -> PipelineConfig:
    names = {f.name for f in fields(PipelineConfig)}
    kwargs = {k: v for k, v in vars(args).items() if k in names}
    return PipelineConfig(**kwargs)


def cmd_features(args):
    g = load_edge_list(args.graph, args.directed)
    x = compute_structural_features(g, args.features)
    given = _attributes(args, g)
    if given is not None:
        x = concat_attributes(given, x)
    save_attributes(x, g, args.out)


def cmd_split(args):
    g = load_edge_list(args.graph, args.directed)
    split = split_edges(g, args.test_fraction, derive_seed(args.seed, "split"))
    save_split(split, args.out)


def cmd_fit_phi(args):
    g = load_edge_list(args.graph, args.directed)
    x = _attributes(args, g)
    if x is None:
        x = compute_structural_features(g, args.features)
    phi = fit_phi(x, _pipeline_config(args))
    save_typemap(phi, args.out)
    log.info("fitted %s type map with %d types", phi.kind, phi.num_types)


def _assign(args, g):
    phi = load_typemap(args.typemap)
    return phi, assign_types(phi, attributes_for(phi, g, _attributes(args, g)))


def cmd_assign(args):
    g = load_edge_list(args.graph, args.directed)
    _, a = _assign(args, g)
    save_assignment(a, g.labels, args.out)


def cmd_walks(args):
    g = load_edge_list(args.graph, args.directed)
    cfg = WalkConfig(args.walks_per_node, args.walk_length, args.p, args.q, derive_seed(args.seed, "walks"))
    if args.typemap:
        _, a = _assign(args, g)
        corpus = generate_attributed_walks(g, a, cfg, threads=args.threads)
    else:
        corpus = generate_walks(g, cfg, threads=args.threads)
    save_corpus(corpus, args.out)


def cmd_embed(args):
    corpus = load_corpus(args.corpus)
    cfg = SgnsConfig(args.dim, args.window, args.negatives, args.epochs, args.initial_lr, args.min_lr,
                     args.unigram_power, derive_seed(args.seed, "sgns"),
                     1 if args.deterministic else args.threads)
    emb = train_sgns(corpus, cfg)
    emb.token_space = corpus.token_space
    save_embeddings(emb, args.out)


def cmd_linkpred(args):
    split = load_split(args.split)
    emb = load_embeddings(args.emb)
    if args.typemap:
        phi = load_typemap(args.typemap)
        tokens = assign_types(phi, attributes_for(phi, split.train_graph)).types
    else:
        tokens = np.arange(split.train_graph.num_nodes, dtype=np.int64)
    pairs = node_pair_features(split, emb, lambda nodes: tokens[nodes], args.operator,
                               derive_seed(args.seed, "train-negatives"))
    model = train_logistic(pairs.x_train, pairs.y_train, args.clf_epochs, args.clf_lr, args.l2_penalty,
                           derive_seed(args.seed, "classifier"))
    scores = model.decision_function(pairs.x_test)
    pos = pairs.y_test == 1
    text = (f"auc={compute_auc(scores[pos], scores[~pos])!r}\noperator={args.operator}\n"
            f"num_test_pos={int(pos.sum())}\nnum_test_neg={int((~pos).sum())}\n")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    cfg = _pipeline_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = load_edge_list(args.graph, args.directed)
    run = run_pipeline(g, cfg, graph_name=Path(args.graph).name)
    run.report.write(out / "report.txt")
    run.report.append_csv(Path(args.results) if args.results else out / "results.csv")
    save_embeddings(run.result.embedding, out / "embeddings.txt")
    if run.result.phi is not None:
        save_typemap(run.result.phi, out / "typemap.txt")
    save_split(run.split, out / "split")
    sys.stdout.write(f"auc={run.report.auc!r}\n")


def cmd_transfer(args):
    g = load_edge_list(args.graph, args.directed)
    phi = load_typemap(args.typemap)
    emb = load_embeddings(args.emb)
    res = transfer(phi, emb, g, _attributes(args, g), unseen=args.unseen)
    if res.missing_types:
        print(f"attrwalk: warning code=coverage missing_types={','.join(map(str, res.missing_types))}",
              file=sys.stderr)
    save_node_vectors(res.vectors, g.labels, args.out)
    if args.evaluate:
        cfg = _pipeline_config(args)
        auc, _, _ = evaluate_transfer(phi, emb, g, cfg, unseen=args.unseen)
        sys.stdout.write(f"auc={auc!r}\n")


COMMANDS = {
    "features": cmd_features,
    "split": cmd_split,
    "fit-phi": cmd_fit_phi,
    "assign": cmd_assign,
    "walks": cmd_walks,
    "embed": cmd_embed,
    "linkpred": cmd_linkpred,
    "run": cmd_run,
    "transfer": cmd_transfer,
}


def _error_line(code, stage, message) -> str:
    message = " ".join(str(message).split())
    return f"attrwalk: error code={code} stage={stage} message={message}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    resolved = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())}
    log.info("config %s", json.dumps(resolved, sort_keys=True))
    try:
        COMMANDS[args.command](args)
    except AttrWalkError as exc:
        print(_error_line(exc.code, getattr(exc, "stage", args.command), exc), file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(_error_line("input", args.command, f"no such file: {exc.filename}"), file=sys.stderr)
        return InputError.exit_code
    except KeyError as exc:
        # unknown node labels in split/attribute files surface as KeyError
        print(_error_line("parse", args.command, f"unknown key {exc}"), file=sys.stderr)
        return ParseError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
