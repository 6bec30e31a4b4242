"""
hetmap command-line interface

Commands:
    gen        emit a random (almost) series-parallel graph or ingest a workflow
    decompose  emit the series-parallel decomposition forest of a graph
    map        run one mapping algorithm on one graph
    eval       score a mapping with the reporting evaluator
    bench      run an experiment spec and emit its result table
    compare    side-by-side table of several mapping files for one graph
    serve      start the HTTP API

Output goes to stdout (or --out), diagnostics to stderr.
Exit codes: 0 success, 1 usage error, 2 data error.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

import pandas as pd

import config
from services import bench
from services.evaluator import EvalConfig, MakespanEvaluator, relative_improvement, result_to_csv, result_to_json
from services.generators import (AttributeDistribution, GenConfig, add_random_edges, augment_attributes, generate,
                                 load_workflow, random_sp_graph)
from services.genetic import GAConfig
from services.mappers import ALGORITHMS, EXTRA_ALGORITHMS, mapping_from_dict, mapping_to_dict, run_algorithm
from services.platform import load_platform
from services.spdag import decompose, forest_to_dot, forest_to_json
from services.taskgraph import degree_summary, graph_to_dict, load_graph, normalize_endpoints

logger = logging.getLogger("hetmap")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hetmap", description="Static task mapping for CPU/GPU/FPGA platforms")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="Seed for all randomness")
    parser.add_argument("--platform", default=config.DEFAULT_PLATFORM_FILE, help="Platform JSON file")
    parser.add_argument("--out", default=None, help="Write output to this file instead of stdout")
    parser.add_argument("--format", choices=["csv", "json"], default=None, help="Table/timeline output format")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="Generate a task graph")
    gen.add_argument("--n", type=int, default=20, help="Number of tasks")
    gen.add_argument("--extra-edges", type=int, default=0, help="Edges added to make the graph almost SP")
    gen.add_argument("--workflow", default=None, help="Ingest a workflow instance instead of generating")
    gen.add_argument("--no-attributes", action="store_true", help="Skip attribute augmentation")

    dec = sub.add_parser("decompose", help="Decompose a graph into series-parallel trees")
    dec.add_argument("--graph", required=True)
    dec.add_argument("--cut-rule", default=config.CUT_RULE, choices=["random", "smallest-outsize-first"])
    dec.add_argument("--dot", action="store_true", help="Emit Graphviz instead of JSON")

    mp = sub.add_parser("map", help="Map a graph with one algorithm")
    mp.add_argument("--algo", required=True, choices=sorted(ALGORITHMS) + sorted(EXTRA_ALGORITHMS))
    mp.add_argument("--graph", required=True)
    mp.add_argument("--gamma", type=float, default=config.GAMMA)
    mp.add_argument("--generations", type=int, default=config.GA_GENERATIONS)
    mp.add_argument("--population", type=int, default=config.GA_POPULATION)

    ev = sub.add_parser("eval", help="Evaluate a mapping")
    ev.add_argument("--graph", required=True)
    ev.add_argument("--mapping", required=True)

    bn = sub.add_parser("bench", help="Run an experiment spec")
    bn.add_argument("--spec", required=True)
    bn.add_argument("--summary", default=None, help="Also write per (axis, algorithm) aggregates here")
    bn.add_argument("--workers", type=int, default=config.MAX_WORKERS)

    cmp_ = sub.add_parser("compare", help="Compare mapping files for one graph")
    cmp_.add_argument("--graph", required=True)
    cmp_.add_argument("--mappings", nargs="+", required=True)

    sub.add_parser("serve", help="Start the HTTP API")
    return parser


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _eval_config(args) -> EvalConfig:
    return EvalConfig(seed=args.seed)


def cmd_gen(args) -> str:
    dist = AttributeDistribution()
    if args.workflow:
        g = load_workflow(args.workflow, external_inputs=True)
        if not args.no_attributes:
            g = augment_attributes(g, dist, args.seed, keep_complexity=True)
    else:
        cfg = GenConfig(n_tasks=args.n, extra_edges=args.extra_edges, seed=args.seed)
        if args.no_attributes:
            g, _ = random_sp_graph(cfg)
            g = add_random_edges(g, cfg.extra_edges, cfg.seed, cfg.edge_bytes)
        else:
            g = generate(cfg, dist)
    logger.info(f"Generated graph {degree_summary(g)}")
    return _dumps(graph_to_dict(g))


def cmd_decompose(args) -> str:
    g = load_graph(args.graph)
    normalized, start, _ = normalize_endpoints(g, config.DEFAULT_EDGE_BYTES)
    forest = decompose(normalized, start, args.cut_rule, args.seed)
    logger.info(f"Decomposition produced {len(forest)} trees with {len(forest.cuts)} cuts")
    return forest_to_dot(forest) if args.dot else forest_to_json(forest)


def cmd_map(args) -> str:
    g = load_graph(args.graph)
    platform = load_platform(args.platform)
    ga = GAConfig(population=args.population, generations=args.generations, seed=args.seed)
    result = run_algorithm(args.algo, g, platform, seed=args.seed, eval_cfg=_eval_config(args),
                           gamma=args.gamma, ga=ga)
    return _dumps(mapping_to_dict(result))


def _read_json(path: str):
    with open(path, "r") as f:
        return json.load(f)


def cmd_eval(args) -> str:
    g = load_graph(args.graph)
    platform = load_platform(args.platform)
    mapping, _ = mapping_from_dict(_read_json(args.mapping), g.num_nodes)
    result = MakespanEvaluator(g, platform, _eval_config(args)).best_result(mapping)
    if args.format == "csv":
        return result_to_csv(result)
    return result_to_json(result)


def cmd_bench(args) -> str:
    spec = bench.load_spec(args.spec)
    table = bench.run_experiment(spec, max_workers=args.workers)
    fmt = args.format or "csv"
    if args.summary:
        bench.write_table(bench.summarize(table), args.summary, fmt)
    return bench.write_table(table, None, fmt)


def cmd_compare(args) -> str:
    g = load_graph(args.graph)
    platform = load_platform(args.platform)
    evaluator = MakespanEvaluator(g, platform, _eval_config(args))
    baseline = evaluator.evaluate(evaluator.default_mapping())
    rows: List[dict] = []
    for path in args.mappings:
        mapping, meta = mapping_from_dict(_read_json(path), g.num_nodes)
        makespan = evaluator.evaluate(mapping)
        rows.append({
            "file": path,
            "algorithm": meta.get("algorithm", ""),
            "makespan_baseline": baseline,
            "makespan_mapped": makespan,
            "rel_improvement": relative_improvement(baseline, makespan),
        })
    table = pd.DataFrame(rows, columns=["file", "algorithm", "makespan_baseline", "makespan_mapped", "rel_improvement"])
    return bench.write_table(table, None, args.format or "csv")


def cmd_serve(args) -> str:
    from app import app
    app.run(host=config.HOST, port=config.PORT, debug=config.DEBUG)
    return ""


COMMANDS = {
    "gen": cmd_gen,
    "decompose": cmd_decompose,
    "map": cmd_map,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "compare": cmd_compare,
    "serve": cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else config.LOG_LEVEL,
                        format=config.LOG_FORMAT, stream=sys.stderr)
    try:
        text = COMMANDS[args.command](args)
        _emit(text, args.out)
    except (ValueError, OSError) as e:
        logger.error(f"Error running {args.command}: {e}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
