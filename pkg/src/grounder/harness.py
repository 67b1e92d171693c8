"""Experiment harness: four conditions, seeded folds, curves and summary.

Reproduces the accuracy-versus-tutoring-cost experiment at desk scale:
an RL condition (both MDPs trained, then evaluated greedily) against
three rule-based baselines (constant 0.95 threshold and two decaying
schedules), each run over independently seeded folds of 500 training
instances with held-out accuracy measured every 10 instances.  All
randomness derives from a single master seed, and a run directory's
files are byte-identical across repeated runs.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .policy import (
    AgentConfig,
    FoldResult,
    QTable,
    RuleDialoguePolicy,
    SarsaDialoguePolicy,
    SarsaThresholdController,
    ScheduleThresholdController,
    load_qtables,
    run_fold,
    save_qtables,
    train,
)
from .tutor import TutorModel
from .vision import GroundingMap
from .world import WorldConfig, derive_seed, generate_dataset, save_dataset
from .dialogue import default_lexicon

CONDITIONS = ("rl", "constant95", "decay05", "decay01")


class HarnessError(ValueError):
    """Raised for invalid experiment configurations."""


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 7
    folds: int = 20
    conditions: tuple[str, ...] = CONDITIONS
    rl_train_folds: int = 20
    initiative_prob: float = 0.5
    world: WorldConfig = field(default_factory=WorldConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        for c in self.conditions:
            if c not in CONDITIONS:
                raise HarnessError(f"unknown condition {c!r}")
        if self.folds < 1:
            raise HarnessError("folds must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conditions"] = list(self.conditions)
        d["world"].pop("inventory", None)  # default inventory only in config files
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "world" in d:
            d["world"] = WorldConfig(**d["world"])
        if "agent" in d:
            d["agent"] = AgentConfig(**d["agent"])
        if "conditions" in d:
            d["conditions"] = tuple(d["conditions"])
        return cls(**d)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class RunRecord:
    """One condition x fold evaluation run."""

    condition: str
    fold: int
    baseline_accuracy: dict[str, float]
    curve: list[tuple]  # (instances_seen, accuracies dict, cumulative_cost, penalties)
    threshold_trace: list[float]

    @classmethod
    def from_fold(cls, condition: str, fold: int, result: FoldResult) -> "RunRecord":
        return cls(
            condition=condition,
            fold=fold,
            baseline_accuracy=result.baseline_accuracy,
            curve=[
                (p.instances_seen, p.accuracy, p.cumulative_cost, p.penalties)
                for p in result.curve
            ],
            threshold_trace=list(result.threshold_trace),
        )

    @property
    def final_accuracy(self) -> float:
        return self.curve[-1][1]["per_attribute"]

    @property
    def total_cost(self) -> float:
        return self.curve[-1][2]

    @property
    def delta_accuracy(self) -> float:
        return self.final_accuracy - self.baseline_accuracy["per_attribute"]


def r_perf(delta_acc: float, total_cost: float) -> float:
    """Overall performance ratio: accuracy gained per unit of tutoring cost."""
    if total_cost <= 0:
        raise HarnessError("r_perf needs a positive total cost")
    return delta_acc / total_cost


def summarise(records: list[RunRecord]) -> dict[str, dict[str, float]]:
    """Per-condition fold means/stds plus the overall performance ratio."""
    summary: dict[str, dict[str, float]] = {}
    for condition in sorted({r.condition for r in records}, key=_condition_order):
        rs = [r for r in records if r.condition == condition]
        finals = np.array([r.final_accuracy for r in rs])
        costs = np.array([r.total_cost for r in rs])
        deltas = np.array([r.delta_accuracy for r in rs])
        joints = np.array([r.curve[-1][1]["joint"] for r in rs])
        summary[condition] = {
            "folds": float(len(rs)),
            "final_accuracy_mean": float(finals.mean()),
            "final_accuracy_std": float(finals.std()),
            "final_joint_accuracy_mean": float(joints.mean()),
            "total_cost_mean": float(costs.mean()),
            "total_cost_std": float(costs.std()),
            "delta_accuracy_mean": float(deltas.mean()),
            "r_perf": r_perf(float(deltas.mean()), float(costs.mean())),
        }
    return summary


def _condition_order(condition: str) -> int:
    return CONDITIONS.index(condition)


def _make_policies(condition: str, config: ExperimentConfig,
                   dialogue_q: QTable | None, threshold_q: QTable | None):
    agent = config.agent
    if condition == "rl":
        if dialogue_q is None or threshold_q is None:
            raise HarnessError("rl condition requires trained Q-tables")
        policy = SarsaDialoguePolicy(dialogue_q, epsilon=0.0, alpha=agent.alpha,
                                     gamma=agent.gamma, learn=False)
        controller = SarsaThresholdController(
            threshold_q, epsilon=0.0, alpha=agent.alpha, gamma=agent.gamma,
            reward_scale=agent.reward_scale,
            initial_threshold=agent.initial_threshold, learn=False,
        )
    else:
        policy = RuleDialoguePolicy()
        controller = ScheduleThresholdController(condition)
    return policy, controller


def run_condition(
    condition: str,
    config: ExperimentConfig,
    train_objects,
    test_objects,
    tutor_model: TutorModel,
    dialogue_q: QTable | None = None,
    threshold_q: QTable | None = None,
) -> list[RunRecord]:
    """Evaluate one condition over the configured folds (no policy learning;
    classifier learning always on)."""
    records = []
    for fold in range(config.folds):
        order_rng = np.random.default_rng(
            derive_seed(config.master_seed, "fold-order", fold)
        )
        order = list(train_objects)
        order_rng.shuffle(order)
        rng = np.random.default_rng(
            derive_seed(config.master_seed, "eval", condition, fold)
        )
        gmap = GroundingMap.fresh(
            inventory=tutor_model.lexicon.inventory,
            colour_dim=len(train_objects[0].colour_features),
            shape_dim=len(train_objects[0].shape_features),
            learning_rate=config.agent.classifier_learning_rate,
            weight_decay=config.agent.classifier_weight_decay,
        )
        policy, controller = _make_policies(condition, config, dialogue_q, threshold_q)
        result = run_fold(gmap, order, test_objects, tutor_model, policy,
                          controller, rng, config.agent)
        records.append(RunRecord.from_fold(condition, fold, result))
    return records


def train_rl_policy(config: ExperimentConfig, train_objects, test_objects,
                    tutor_model: TutorModel):
    """Pre-train the RL agent's Q-tables against the simulated tutor."""
    def seed_for(*parts):
        return derive_seed(config.master_seed, "rl-train", *parts)

    return train(train_objects, test_objects, tutor_model, config.agent,
                 config.rl_train_folds, seed_for)


def run_experiment(config: ExperimentConfig, out_dir) -> tuple[list[RunRecord], dict]:
    """Run every configured condition x fold, then write the run directory:
    dataset, curve files, summary, per-fold records, Q-tables and a
    manifest with the config hash, derived seeds and file digests."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world_config = replace(config.world, seed=derive_seed(config.master_seed, "world"))
    train_objects, test_objects = generate_dataset(world_config)
    tutor_model = TutorModel(lexicon=default_lexicon(world_config.inventory),
                             initiative_prob=config.initiative_prob)

    dialogue_q = threshold_q = None
    train_folds: list[FoldResult] = []
    if "rl" in config.conditions:
        trained = train_rl_policy(config, train_objects, test_objects, tutor_model)
        dialogue_q, threshold_q = trained.dialogue_q, trained.threshold_q
        train_folds = trained.folds

    records: list[RunRecord] = []
    for condition in config.conditions:
        records.extend(
            run_condition(condition, config, train_objects, test_objects,
                          tutor_model, dialogue_q, threshold_q)
        )
    summary = summarise(records)

    save_dataset(out / "dataset_train.txt", train_objects, world_config.inventory)
    save_dataset(out / "dataset_test.txt", test_objects, world_config.inventory)
    emit_curves(records, out)
    emit_summary(summary, out / "summary.tsv")
    emit_records(records, out / "records.jsonl")
    if dialogue_q is not None:
        save_qtables(out / "qtables.txt", dialogue_q, threshold_q)
        _emit_training_curves(train_folds, out / "rl_training_curves.tsv")
    write_manifest(config, world_config, out)
    return records, summary


def _float(x) -> str:
    return repr(float(x))


def emit_curves(records: list[RunRecord], out_dir) -> list[Path]:
    """Write the three fold-averaged curve files behind the accuracy, cost
    and accuracy-versus-cost figures (one row per condition x bin)."""
    if not records:
        raise HarnessError("no records to emit")
    out = Path(out_dir)
    conditions = sorted({r.condition for r in records}, key=_condition_order)
    acc_path = out / "accuracy_vs_instances.tsv"
    cost_path = out / "cost_vs_instances.tsv"
    ratio_path = out / "accuracy_vs_cost.tsv"

    acc_rows = ["condition\tinstances\taccuracy_mean\taccuracy_std"
                "\tjoint_mean\tjoint_std\tcolour_mean\tshape_mean"]
    cost_rows = ["condition\tinstances\tcost_mean\tcost_std"]
    ratio_rows = ["condition\tinstances\tcost_mean\taccuracy_mean\taccuracy_std"]
    for condition in conditions:
        rs = [r for r in records if r.condition == condition]
        n_bins = len(rs[0].curve)
        for b in range(n_bins):
            instances = rs[0].curve[b][0]
            acc = np.array([r.curve[b][1]["per_attribute"] for r in rs])
            joint = np.array([r.curve[b][1]["joint"] for r in rs])
            colour = np.array([r.curve[b][1]["colour"] for r in rs])
            shape = np.array([r.curve[b][1]["shape"] for r in rs])
            cost = np.array([r.curve[b][2] for r in rs])
            acc_rows.append("\t".join([
                condition, str(instances), _float(acc.mean()), _float(acc.std()),
                _float(joint.mean()), _float(joint.std()),
                _float(colour.mean()), _float(shape.mean()),
            ]))
            cost_rows.append("\t".join([
                condition, str(instances), _float(cost.mean()), _float(cost.std()),
            ]))
            ratio_rows.append("\t".join([
                condition, str(instances), _float(cost.mean()),
                _float(acc.mean()), _float(acc.std()),
            ]))
    acc_path.write_text("\n".join(acc_rows) + "\n", encoding="utf-8")
    cost_path.write_text("\n".join(cost_rows) + "\n", encoding="utf-8")
    ratio_path.write_text("\n".join(ratio_rows) + "\n", encoding="utf-8")
    return [acc_path, cost_path, ratio_path]


def emit_summary(summary: dict, path) -> None:
    keys = ["folds", "final_accuracy_mean", "final_accuracy_std",
            "final_joint_accuracy_mean", "total_cost_mean", "total_cost_std",
            "delta_accuracy_mean", "r_perf"]
    rows = ["condition\t" + "\t".join(keys)]
    for condition, stats in summary.items():
        rows.append(condition + "\t" + "\t".join(_float(stats[k]) for k in keys))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def emit_records(records: list[RunRecord], path) -> None:
    lines = []
    for r in records:
        lines.append(canonical_json({
            "condition": r.condition,
            "fold": r.fold,
            "baseline_accuracy": r.baseline_accuracy,
            "curve": [
                [p[0], p[1]["per_attribute"], p[1]["colour"], p[1]["shape"],
                 p[1]["joint"], p[2], p[3]]
                for p in r.curve
            ],
            "threshold_trace": r.threshold_trace,
        }))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _emit_training_curves(folds: list[FoldResult], path) -> None:
    rows = ["fold\tinstances\taccuracy\tcost\tthreshold"]
    for f, result in enumerate(folds):
        for p, thd in zip(result.curve, result.threshold_trace):
            rows.append("\t".join([
                str(f), str(p.instances_seen),
                _float(p.accuracy["per_attribute"]),
                _float(p.cumulative_cost), _float(thd),
            ]))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_manifest(config: ExperimentConfig, world_config: WorldConfig, out_dir) -> Path:
    out = Path(out_dir)
    files = sorted(
        p.name for p in out.iterdir()
        if p.is_file() and p.name != "manifest.json"
    )
    digests = {
        name: hashlib.sha256((out / name).read_bytes()).hexdigest() for name in files
    }
    seeds = {
        "master": config.master_seed,
        "world": world_config.seed,
        "fold_order": [
            derive_seed(config.master_seed, "fold-order", f) for f in range(config.folds)
        ],
        "eval": {
            c: [derive_seed(config.master_seed, "eval", c, f) for f in range(config.folds)]
            for c in config.conditions
        },
    }
    manifest = {
        "tool": {"name": "grounder", "version": __version__},
        "config": config.to_dict(),
        "config_sha256": config.config_hash(),
        "seeds": seeds,
        "files": digests,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path
