"""Command-line front end: gen-data, train, eval, experiment, serve."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    CONDITIONS,
    ExperimentConfig,
    HarnessError,
    emit_curves,
    emit_records,
    emit_summary,
    load_config,
    run_condition,
    run_experiment,
    summarise,
    train_rl_policy,
    write_manifest,
)
from .dialogue import default_lexicon
from .policy import load_qtables, save_qtables
from .tutor import TutorModel
from .world import WorldConfig, derive_seed, generate_dataset, save_dataset


def _build_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.master_seed is not None:
        config = replace(config, master_seed=args.master_seed)
    if getattr(args, "folds", None) is not None:
        config = replace(config, folds=args.folds)
    if getattr(args, "conditions", None):
        config = replace(config, conditions=tuple(args.conditions))
    return config


def cmd_gen_data(args) -> int:
    world = WorldConfig(
        noise_sigma=args.noise_sigma,
        train_size=args.train_size,
        test_size=args.test_size,
        seed=args.seed,
    )
    train_objects, test_objects = generate_dataset(world)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(out / "dataset_train.txt", train_objects, world.inventory)
    save_dataset(out / "dataset_test.txt", test_objects, world.inventory)
    print(f"wrote {len(train_objects)} train / {len(test_objects)} test objects to {out}")
    return 0


def _prepare(config: ExperimentConfig):
    world = replace(config.world, seed=derive_seed(config.master_seed, "world"))
    train_objects, test_objects = generate_dataset(world)
    tutor = TutorModel(lexicon=default_lexicon(world.inventory),
                       initiative_prob=config.initiative_prob)
    return world, train_objects, test_objects, tutor


def cmd_train(args) -> int:
    config = _build_config(args)
    _, train_objects, test_objects, tutor = _prepare(config)
    result = train_rl_policy(config, train_objects, test_objects, tutor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_qtables(out / "qtables.txt", result.dialogue_q, result.threshold_q)
    finals = [f.final_accuracy for f in result.folds]
    print(f"trained {config.rl_train_folds} folds; final accuracy per fold: "
          + " ".join(f"{a:.3f}" for a in finals))
    print(f"Q-tables written to {out / 'qtables.txt'}")
    return 0


def cmd_eval(args) -> int:
    config = _build_config(args)
    _, train_objects, test_objects, tutor = _prepare(config)
    dialogue_q = threshold_q = None
    if args.condition == "rl":
        if not args.qtables:
            raise HarnessError("--qtables is required for the rl condition")
        dialogue_q, threshold_q = load_qtables(args.qtables)
    records = run_condition(args.condition, config, train_objects, test_objects,
                            tutor, dialogue_q, threshold_q)
    summary = summarise(records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_curves(records, out)
    emit_summary(summary, out / "summary.tsv")
    emit_records(records, out / "records.jsonl")
    stats = summary[args.condition]
    print(f"{args.condition}: final accuracy "
          f"{stats['final_accuracy_mean']:.3f} ± {stats['final_accuracy_std']:.3f}, "
          f"total cost {stats['total_cost_mean']:.1f}, r_perf {stats['r_perf']:.6f}")
    return 0


def cmd_experiment(args) -> int:
    config = _build_config(args)
    _, summary = run_experiment(config, args.out)
    print(json.dumps(summary, indent=2, sort_keys=True))
    print(f"run directory: {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(storage_dir=args.storage, qtables_path=args.qtables,
                     frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="grounder",
        description="Interactive visual-attribute word learning: data, training, "
                    "experiments and the live tutoring service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate and save a synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-size", type=int, default=500)
    p.add_argument("--test-size", type=int, default=100)
    p.add_argument("--noise-sigma", type=float, default=0.08)
    p.add_argument("--out", default="runs/data")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the RL policies against the simulated tutor")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--master-seed", type=int, default=None)
    p.add_argument("--out", default="runs/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one condition over seeded folds")
    p.add_argument("--condition", choices=CONDITIONS, required=True)
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--master-seed", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--qtables", help="Q-table file (required for rl)")
    p.add_argument("--out", default="runs/eval")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run all conditions x folds and emit curves")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--master-seed", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--conditions", nargs="+", choices=CONDITIONS)
    p.add_argument("--out", default="runs/experiment")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("serve", help="start the live tutoring service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8100)
    p.add_argument("--storage", default="runs/sessions")
    p.add_argument("--qtables", default=None,
                   help="Q-table file backing the rl-pretrained policy")
    p.add_argument("--frontend", default=None,
                   help="directory with the built tutor UI (served at /)")
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
