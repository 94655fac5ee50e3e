"""Command-line entry point: ``fuzzyfusion <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from ._io import write_text_atomic
from .baselines import LogisticModel, train_logistic
from .oracle import certify_tree, enumerate_all
from .report import (
    dumps_reports,
    evaluate,
    export_heatmap,
    format_table,
    load_prompt_grid,
    logistic_predictor,
    majority_vote_predictor,
    select_prompt,
    single_detector_predictor,
    tree_predictor,
)
from .rules import extract_rules, format_path
from .scores import Label, ScoreFormatError, dumps_scores, load_scores, registry_document, sample_balanced
from .serialize import TreeFormatError, load_tree, save_tree
from .simulator import complementary_suite, robustness_suite, save_profiles
from .tree import Hyperparams, StructureError, check_registry, grow, predict, predict_matrix

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CERT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _paths(text: str) -> list[str]:
    return [p for p in (s.strip() for s in text.split(",")) if p]


def _load(path, args):
    return load_scores(path, args.format, args.registry)


# --- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    matrix = _load(args.scores, args)
    if args.balanced is not None:
        matrix = sample_balanced(matrix, args.balanced, args.seed)
    n_fake = int(matrix.labels.sum())
    print(f"samples={len(matrix)} detectors={matrix.n_detectors} real={len(matrix) - n_fake} fake={n_fake}")
    for det in matrix.registry:
        print(f"  detector {det.name} ({det.kind.value})")
    for tag in matrix.benchmark_tags():
        print(f"  benchmark {tag}: {matrix.benchmarks.count(tag)}")
    if args.out:
        write_text_atomic(args.out, dumps_scores(matrix, args.out_format or "csv"))
    return EXIT_OK


def _hyperparams(args) -> Hyperparams:
    return Hyperparams(
        max_split_models=args.max_split_models,
        min_samples=args.min_samples,
        max_depth=args.max_depth,
        thr_grid_size=args.thr_grid_size,
        split_labeling=args.split_labeling,
    )


def cmd_train(args) -> int:
    matrix = _load(args.scores, args)
    tree = grow(matrix, _hyperparams(args))
    save_tree(tree, args.out)
    acc = float((predict_matrix(tree, matrix) == matrix.labels).mean())
    print(f"depth={tree.depth()} nodes={tree.n_nodes()} leaves={tree.n_leaves()} train_accuracy={acc:.4f}")
    return EXIT_OK


def cmd_certify(args) -> int:
    tree = load_tree(args.tree)
    matrix = _load(args.scores, args)
    verdict = certify_tree(tree, matrix)
    if args.report:
        root_report = enumerate_all(matrix.scores, matrix.labels, tree.hyperparams)
        write_text_atomic(args.report, root_report.to_csv(matrix.detector_names))
    if verdict.passed:
        print(f"PASS: {verdict.checked_nodes} nodes match the exhaustive oracle")
        return EXIT_OK
    print(f"FAIL: {len(verdict.mismatches)} mismatches")
    for line in verdict.mismatches:
        print(f"  {line}")
    return EXIT_CERT


def cmd_predict(args) -> int:
    tree = load_tree(args.tree)
    matrix = _load(args.scores, args)
    check_registry(tree, matrix)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "label", "predicted", "path"])
    for i in range(len(matrix)):
        label, path = predict(tree, [float(v) for v in matrix.scores[i]])
        w.writerow(
            [
                matrix.sample_ids[i],
                Label(int(matrix.labels[i])).token,
                label.token,
                format_path(path, tree.detectors) if args.explain else "",
            ]
        )
    write_text_atomic(args.out, buf.getvalue())
    return EXIT_OK


def cmd_explain(args) -> int:
    tree = load_tree(args.tree)
    for k, rule in enumerate(extract_rules(tree), start=1):
        print(f"R{k}: {rule.text}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    tree = load_tree(args.tree)
    matrices = [_load(p, args) for p in _paths(args.scores)]
    perturbed = [_load(p, args) for p in _paths(args.perturbed)] if args.perturbed else None
    predictors = [tree_predictor(tree)]
    if args.baselines:
        predictors.append(majority_vote_predictor())
        predictors += [single_detector_predictor(j, name) for j, name in enumerate(tree.detectors)]
    if args.logistic:
        predictors.append(logistic_predictor(LogisticModel.load(args.logistic), tuple(tree.detectors)))
    reports = [evaluate(p, matrices, perturbed) for p in predictors]
    write_text_atomic(args.out, dumps_reports(reports))
    print(format_table(reports), end="")
    return EXIT_OK


def cmd_train_logistic(args) -> int:
    matrix = _load(args.scores, args)
    model = train_logistic(matrix, args.learning_rate, args.iterations, args.seed)
    model.save(args.out)
    print(f"iterations={model.iterations} final_loss={model.final_loss:.6f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.suite != "complementary":
        raise UsageError(f"unknown suite {args.suite!r}")
    suite = complementary_suite(args.seed)
    out = Path(args.out)
    written = []

    def put(name, text):
        write_text_atomic(out / name, text)
        written.append(name)

    put("registry.json", json.dumps(registry_document(suite.dev.registry), indent=2) + "\n")
    save_profiles(suite.profiles, out / "profiles.json")
    written.append("profiles.json")
    specs = {"dev": suite.dev_spec.to_document(), "benchmarks": [s.to_document() for s in suite.bench_specs]}
    put("specs.json", json.dumps(specs, indent=2) + "\n")
    put("dev.csv", dumps_scores(suite.dev))
    for spec, matrix in zip(suite.bench_specs, suite.benches):
        put(f"bench_{spec.name}.csv", dumps_scores(matrix))
    for p in robustness_suite(suite.dev, suite.profiles, suite.dev_spec.seed):
        put(f"perturbed/dev_{p.channel}_s{p.severity}.csv", dumps_scores(p.matrix))
    for name in written:
        print(out / name)
    return EXIT_OK


def cmd_prompt_grid(args) -> int:
    grid = load_prompt_grid(args.accuracies)
    best = select_prompt(grid)
    write_text_atomic(args.out, export_heatmap(grid))
    print(
        f"selected system={best.system_idx} question={best.question_idx} "
        f"output={best.output_idx} accuracy={best.accuracy!r} ({len(grid)} prompts)"
    )
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="fuzzyfusion", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    seed = _Parser(add_help=False)
    seed.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default: the global --seed, 0)")

    data = _Parser(add_help=False)
    data.add_argument("--format", choices=["csv", "jsonl"], default=None, help="score file format (default: by extension)")
    data.add_argument("--registry", default=None, help="JSON sidecar declaring detector kinds")

    hp = _Parser(add_help=False)
    defaults = Hyperparams()
    hp.add_argument("--max-split-models", type=int, default=defaults.max_split_models, help="max detectors per node (s)")
    hp.add_argument("--min-samples", type=int, default=defaults.min_samples, help="each child must hold more than this (m)")
    hp.add_argument("--max-depth", type=int, default=defaults.max_depth, help="max internal nodes per path (d)")
    hp.add_argument("--thr-grid-size", type=int, default=defaults.thr_grid_size, help="thresholds searched per node (g)")
    hp.add_argument(
        "--split-labeling",
        choices=["majority", "fixed"],
        default=defaults.split_labeling.value,
        help="how children are labeled when scoring a split",
    )

    p = sub.add_parser("ingest", parents=[data, seed], formatter_class=fmt, help="validate and summarise a score file")
    p.add_argument("--scores", required=True, help="score file")
    p.add_argument("--balanced", type=int, default=None, help="draw this many real and fake records per subset")
    p.add_argument("--out", default=None, help="write the (sampled) matrix here")
    p.add_argument("--out-format", choices=["csv", "jsonl"], default=None, help="format of --out (default: csv)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[data, hp, seed], formatter_class=fmt, help="grow a fuzzy decision tree")
    p.add_argument("--scores", required=True, help="training score file")
    p.add_argument("--out", required=True, help="tree document to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", parents=[data, seed], formatter_class=fmt, help="check a tree against the brute-force oracle")
    p.add_argument("--tree", required=True, help="tree document")
    p.add_argument("--scores", required=True, help="the tree's training score file")
    p.add_argument("--report", default=None, help="dump the root node's full candidate list as CSV")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("predict", parents=[data, seed], formatter_class=fmt, help="label samples with a tree")
    p.add_argument("--tree", required=True, help="tree document")
    p.add_argument("--scores", required=True, help="score file to label")
    p.add_argument("--out", required=True, help="prediction CSV to write")
    p.add_argument("--explain", action="store_true", help="fill the path column with the branches taken")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", parents=[seed], formatter_class=fmt, help="print the tree as IF/THEN rules")
    p.add_argument("--tree", required=True, help="tree document")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", parents=[data, seed], formatter_class=fmt, help="accuracy report across benchmarks")
    p.add_argument("--tree", required=True, help="tree document")
    p.add_argument("--scores", required=True, help="comma-separated benchmark score files")
    p.add_argument("--perturbed", default=None, help="comma-separated perturbed score files for the robustness column")
    p.add_argument("--baselines", action="store_true", help="also report majority voting and every single detector")
    p.add_argument("--logistic", default=None, help="also report a logistic model document")
    p.add_argument("--out", required=True, help="JSON report to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-logistic", parents=[data, seed], formatter_class=fmt, help="fit the logistic baseline")
    p.add_argument("--scores", required=True, help="training score file")
    p.add_argument("--learning-rate", type=float, default=0.1, help="gradient descent step")
    p.add_argument("--iterations", type=int, default=2000, help="full-batch iterations")
    p.add_argument("--out", required=True, help="model JSON to write")
    p.set_defaults(func=cmd_train_logistic)

    p = sub.add_parser("simulate", parents=[seed], formatter_class=fmt, help="write a synthetic benchmark suite")
    p.add_argument("--suite", default="complementary", choices=["complementary"], help="canned suite")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prompt-grid", parents=[seed], formatter_class=fmt, help="select the best prompt and export a heatmap")
    p.add_argument("--accuracies", required=True, help="CSV: system_idx,question_idx,output_idx,accuracy")
    p.add_argument("--out", required=True, help="heatmap CSV to write")
    p.set_defaults(func=cmd_prompt_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fuzzyfusion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScoreFormatError, TreeFormatError, StructureError, ValueError, OSError) as exc:
        print(f"fuzzyfusion: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
