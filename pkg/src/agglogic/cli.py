"""Command-line front end: sampling, evaluation, controllers, games, axiom
checks and convergence experiments.

Exit codes: 0 success / criteria passed, 1 criterion failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .dense import build_controller, controller_constant
from .evaluator import eval_term
from .games import FeaturePartition, GameParams, similar
from .graphs import MRFG
from .lab import ExperimentConfig, run_experiment
from .models import FeatureDistribution, RngStream, model_from_config, sample_graph
from .sparse import (SparseConfig, check_fbp_closeness, check_homogeneity,
                     check_richness)
from .models import sample_fbp
from .terms import parse_term


class UsageError(Exception):
    pass


def _load_config(args):
    if not args.config:
        raise UsageError("--config is required for this command")
    with open(args.config) as fh:
        return json.load(fh)


def _graph_from(obj) -> MRFG:
    if isinstance(obj, str):
        with open(obj) as fh:
            return MRFG.from_json(fh.read())
    return MRFG.from_json(json.dumps(obj))


def _out_path(args, name):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        return os.path.join(args.out, name)
    return None


def _emit(args, name, text):
    path = _out_path(args, name)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
        print(path)
    else:
        print(text)


def cmd_sample(args):
    cfg = _load_config(args)
    model = model_from_config(cfg["model"])
    D = FeatureDistribution.from_config(cfg["distribution"])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    g = sample_graph(model, int(cfg["n"]), D, RngStream(seed))
    _emit(args, "graph.json", g.to_json())
    return 0


def cmd_eval(args):
    if not args.term:
        raise UsageError("--term is required")
    term = parse_term(args.term)
    cfg = _load_config(args)
    if "graph" in cfg:
        g = _graph_from(cfg["graph"])
    else:
        model = model_from_config(cfg["model"])
        D = FeatureDistribution.from_config(cfg["distribution"])
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        g = sample_graph(model, int(cfg["n"]), D, RngStream(seed))
    print(repr(eval_term(term, g)))
    return 0


def cmd_controller(args):
    if not args.term:
        raise UsageError("--term is required")
    term = parse_term(args.term)
    cfg = _load_config(args)
    model = model_from_config(cfg["model"])
    D = FeatureDistribution.from_config(cfg["distribution"])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    ctrl = build_controller(term, model.p, D,
                            int(cfg.get("mc_samples", 20000)),
                            int(cfg.get("sup_points", 5000)))
    print(repr(controller_constant(ctrl, RngStream(seed))))
    return 0


def cmd_game(args):
    cfg = _load_config(args)
    g = _graph_from(cfg["graph_a"])
    h = _graph_from(cfg["graph_b"])
    params = GameParams(int(cfg["k"]), float(cfg["epsilon"]), float(cfg["eta"]))
    print("similar" if similar(g, h, params) else "not-similar")
    return 0


def cmd_axioms(args):
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    rng = RngStream(seed)
    D = FeatureDistribution.from_config(cfg["distribution"])
    if "graph" in cfg:
        g = _graph_from(cfg["graph"])
    else:
        model = model_from_config(cfg["model"])
        g = sample_graph(model, int(cfg["n"]), D, rng.split(0))
    c = float(cfg["c"])
    k = int(cfg["k"])
    eps = float(cfg["epsilon"])
    eta = float(cfg["eta"])
    r = int(cfg["r"])
    params = GameParams(k, eps, eta)
    part = FeaturePartition(D, float(cfg.get("epsilon_grid", eps)))
    trees = [sample_fbp(c, D, r, rng.split(1, i))
             for i in range(int(cfg.get("witness_trees", 3)))]
    reports = [
        check_homogeneity(g, k, eta, r),
        check_richness(g, params, r, trees),
        check_fbp_closeness(g, params, r, part, int(cfg.get("mc", 1000)),
                            rng.split(2), c),
    ]
    text = "[" + ",\n".join(rep.to_json() for rep in reports) + "]\n"
    _emit(args, "axioms.json", text)
    return 0 if all(rep.verdict for rep in reports) else 1


def cmd_experiment(args):
    obj = _load_config(args)
    if args.seed is not None:
        obj["seed"] = args.seed
    cfg = ExperimentConfig.from_json(obj)
    stats, csv_text = run_experiment(cfg)
    _emit(args, "results.csv", csv_text)
    summary = stats.to_json()
    path = _out_path(args, "summary.json")
    if path:
        with open(path, "w") as fh:
            fh.write(summary + "\n")
        print(path)
    else:
        print(summary)
    return 0 if stats.ok() else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="agglogic",
        description="Averaging logic over random featured graphs")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed override")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--term", help="term text (eval/controller)")
    parser.add_argument("command",
                        choices=["sample", "eval", "controller", "game",
                                 "axioms", "experiment"])
    args = parser.parse_args(argv)
    handlers = {
        "sample": cmd_sample, "eval": cmd_eval, "controller": cmd_controller,
        "game": cmd_game, "axioms": cmd_axioms, "experiment": cmd_experiment,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
