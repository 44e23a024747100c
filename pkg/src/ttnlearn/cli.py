"""Command-line interface: fit models, run benchmarks, inspect model files."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .adaptation import AdaptConfig
from .benchmarks import (
    FUNCTION_DIMS,
    ExperimentSpec,
    run_experiment,
    run_trial,
)
from .learning import AlsConfig
from .network import load, save, storage_complexity


def _config_from_dict(doc):
    adapt_keys = {f for f in AdaptConfig.__dataclass_fields__} - {"als"}
    als_keys = set(AlsConfig.__dataclass_fields__)
    adapt = {k: doc[k] for k in doc if k in adapt_keys}
    als = {k: doc[k] for k in doc if k in als_keys}
    return AdaptConfig(als=AlsConfig(**als), **adapt)


def _spec_from_dict(doc):
    fields = {
        k: doc[k]
        for k in (
            "function",
            "n_train",
            "n_test",
            "noise",
            "tree_kind",
            "trials",
            "seed",
            "degree",
            "output",
        )
        if k in doc
    }
    fields["config"] = _config_from_dict(doc.get("config", {}))
    return ExperimentSpec(**fields)


def _write_json(doc, path):
    text = json.dumps(doc, sort_keys=True, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_fit(args):
    with open(args.config) as fh:
        doc = json.load(fh)
    spec = _spec_from_dict(doc)
    stream = np.random.SeedSequence(spec.seed)
    report = run_trial(spec, stream)
    if doc.get("model_out"):
        # Re-run deterministically to obtain the network object itself.
        from .adaptation import adaptive_fit
        from .bases import LegendreBasis
        from .benchmarks import sample_data
        from .tree import build_tree

        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
        leaf_order = [int(v) for v in rng.permutation(spec.d) + 1]
        tree = build_tree(spec.tree_kind, spec.d, leaf_order)
        xs, ys, *_ = sample_data(spec, rng)
        net, _records = adaptive_fit(
            (xs, ys), LegendreBasis(spec.effective_degree), spec.config, rng, tree
        )
        save(net, doc["model_out"])
    _write_json(report, doc.get("report_out") or spec.output)
    return 0


def _cmd_bench(args):
    spec = ExperimentSpec(
        function=args.function,
        n_train=args.n,
        noise=args.noise,
        tree_kind=args.tree,
        trials=args.trials,
        seed=args.seed,
    )
    report = run_experiment(spec)
    _write_json(report, args.out)
    return 0


def _cmd_inspect(args):
    net = load(args.model)
    tree = net.tree
    print("tree:")
    for line in tree.to_text().splitlines():
        print(f"  {line}")
    print("ranks:")
    for a in tree.canonical_order():
        dims = " ".join(str(v) for v in sorted(tree.subset(a)))
        print(f"  {{{dims}}}: {net.rank(a)}")
    print(
        "storage complexity:",
        storage_complexity(tree, net.ranks, net.leaf_dims),
    )
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ttnlearn",
        description="Learn functions in tree-based tensor formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model from a JSON config file")
    p_fit.add_argument("--config", required=True)
    p_fit.set_defaults(func=_cmd_fit)

    p_bench = sub.add_parser("bench", help="run a multi-trial benchmark")
    p_bench.add_argument(
        "--function", required=True, choices=sorted(FUNCTION_DIMS)
    )
    p_bench.add_argument("--n", type=int, required=True)
    p_bench.add_argument("--trials", type=int, default=10)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--noise", type=float, default=0.0)
    p_bench.add_argument(
        "--tree", default="balanced", choices=["balanced", "linear"]
    )
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=_cmd_bench)

    p_inspect = sub.add_parser("inspect", help="print a saved model summary")
    p_inspect.add_argument("--model", required=True)
    p_inspect.set_defaults(func=_cmd_inspect)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
