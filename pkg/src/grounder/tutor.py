"""Data-driven simulated tutor with per-act tutoring costs.

The tutor conditions its response on the learner's last act and its
correctness against ground truth.  Out of the box it follows a
deterministic core mapping (truthful answers, confirmations and
corrections); a conditional action table fitted from an annotated corpus
can override any conditioning key, with unseen keys backing off to the
core mapping.

Tutoring costs follow a fixed scale: 5 points per informed attribute,
0.5 per simple confirmation/rejection (including answers to polar
questions) and 5 per corrected attribute of a learner *statement*.
Questions and conversational moves are free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dialogue import (
    LEARNER,
    TUTOR,
    DialogueAct,
    DialogueContext,
    DialogueError,
    TemplateLexicon,
    default_lexicon,
    parse_turn_tag,
    slots_for,
)
from .world import CATEGORIES, VisualObject

C_INF = 5.0
C_ACK = 0.5
C_CRT = 5.0

LEARNER_LEGAL_KINDS = frozenset(
    {"Listen", "Inform", "Ask", "Polar", "Ack", "CLrRequest", "HelpRequest", "DoNotKnow"}
)


class TutorError(ValueError):
    """Raised for tutor-illegal learner acts and malformed corpora."""


@dataclass(frozen=True)
class CostEntry:
    code: str  # "inform" | "ack" | "correction"
    amount: float
    act_tag: str


@dataclass
class CostLedger:
    """Cumulative tutoring cost for one run, one entry per charged act."""

    entries: list[CostEntry] = field(default_factory=list)

    @property
    def total(self) -> float:
        return sum(e.amount for e in self.entries)

    def extend(self, entries) -> None:
        self.entries.extend(entries)

    def count(self, code: str) -> int:
        return sum(1 for e in self.entries if e.code == code)


# A response plan is a tuple of abstract directives resolved against ground
# truth at emission time, which keeps fitted tables truthful on new objects:
#   ("Ack", None) / ("Ack", cat) / ("Reject", None) / ("Reject", cat)
#   ("InformTruth", cats) / ("Ask", cats) / ("Listen", None)
#   ("Check", None), ("Focus", cat), ... for conversational-colour kinds
Plan = tuple


def resolve_plan(plan: Plan, truth: VisualObject) -> tuple[DialogueAct, ...]:
    acts = []
    for directive, arg in plan:
        if directive == "InformTruth":
            cats = arg
            acts.append(DialogueAct(
                actor=TUTOR, kind="Inform",
                slots=slots_for(cats, {c: truth.label(c) for c in cats}),
            ))
        elif directive in ("Ack", "Reject", "Focus"):
            slots = slots_for([arg]) if arg else ()
            acts.append(DialogueAct(actor=TUTOR, kind=directive, slots=slots))
        elif directive == "Ask":
            acts.append(DialogueAct(actor=TUTOR, kind="Ask", slots=slots_for(arg)))
        else:
            acts.append(DialogueAct(actor=TUTOR, kind=directive))
    return tuple(acts)


def condition_key(learner_act: DialogueAct, truth: VisualObject) -> tuple:
    """(kind, categories, per-category correctness) conditioning signature."""
    correctness = tuple(
        "right" if w == truth.label(c) else "wrong"
        for c, w in learner_act.slots if w is not None
    )
    return (learner_act.kind, learner_act.categories, correctness)


@dataclass
class TutorModel:
    """Simulated tutor: action model + lexicon + initiative behaviour."""

    lexicon: TemplateLexicon = field(default_factory=default_lexicon)
    initiative_prob: float = 0.5
    action_table: dict[tuple, list[tuple[float, Plan]]] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.initiative_prob <= 1.0:
            raise TutorError("initiative_prob must be a probability")
        for key, outcomes in self.action_table.items():
            if not outcomes:
                raise TutorError(f"empty outcome list for condition {key!r}")
            if any(w <= 0 for w, _ in outcomes):
                raise TutorError(f"non-positive weight for condition {key!r}")


def open_dialogue(model: TutorModel, obj: VisualObject,
                  rng: np.random.Generator) -> tuple[DialogueAct, ...]:
    """Tutor's opening move: a question with ``initiative_prob``, else nothing."""
    if rng.random() < model.initiative_prob:
        return (DialogueAct(actor=TUTOR, kind="Ask", slots=slots_for(CATEGORIES)),)
    return ()


def _core_plan(learner_act: DialogueAct, ctx: DialogueContext,
               truth: VisualObject) -> Plan:
    """Deterministic default response mapping."""
    kind = learner_act.kind
    if kind == "Ask":
        return (("InformTruth", learner_act.categories),)
    if kind == "DoNotKnow":
        cats = learner_act.categories or CATEGORIES
        return (("InformTruth", cats),)
    if kind == "HelpRequest":
        cats = tuple(c for c in CATEGORIES if not ctx.provided.get(c)) or CATEGORIES
        return (("InformTruth", cats),)
    if kind in ("Inform", "Polar"):
        rights = [c for c, w in learner_act.slots if w == truth.label(c)]
        wrongs = [c for c, w in learner_act.slots if w != truth.label(c)]
        if not wrongs:
            return (("Ack", None),)
        plan = [("Ack", c) for c in rights]
        if len(wrongs) == len(CATEGORIES):
            plan += [("Reject", None), ("InformTruth", tuple(wrongs))]
        else:
            for c in wrongs:
                plan += [("Reject", c), ("InformTruth", (c,))]
        return tuple(plan)
    if kind in ("Ack", "Listen", "CLrRequest"):
        unresolved = tuple(c for c in CATEGORIES if not ctx.provided.get(c))
        if unresolved and kind != "CLrRequest":
            return (("Ask", unresolved),)
        return (("Listen", None),)
    raise TutorError(f"tutor cannot respond to learner act {learner_act.tag()!r}")


def charge_costs(learner_act: DialogueAct, tutor_acts) -> list[CostEntry]:
    """Assign §-style tutoring costs to one tutor turn.

    Rules: each Ack costs 0.5; an Inform answering a question costs 5 per
    attribute; a Reject+Inform pair correcting a learner statement costs a
    flat 5 per corrected attribute; a Reject answering a polar question (or
    standing alone) costs 0.5, plus 5 for any correct label also supplied.
    """
    statement = learner_act.kind == "Inform"
    # categories covered by a Reject earlier in the same turn
    covered: set[str] = set()
    open_reject_all = False
    coverage = []
    for act in tutor_acts:
        if act.kind == "Reject":
            if act.categories:
                covered.update(act.categories)
            else:
                open_reject_all = True
        coverage.append((act, set(covered), open_reject_all))

    entries = []
    informed_after_reject: set[int] = set()
    for i, (act, covered_here, reject_all) in enumerate(coverage):
        if act.kind == "Inform":
            for c, w in act.slots:
                if reject_all or c in covered_here:
                    informed_after_reject.add(i)
                    if statement:
                        entries.append(CostEntry("correction", C_CRT, act.tag()))
                    else:
                        entries.append(CostEntry("inform", C_INF, act.tag()))
                else:
                    entries.append(CostEntry("inform", C_INF, act.tag()))
    rejected_cats_informed = {
        c
        for i, (act, covered_here, reject_all) in enumerate(coverage)
        if i in informed_after_reject
        for c, _ in act.slots
    }
    for act, _, _ in coverage:
        if act.kind == "Ack":
            entries.append(CostEntry("ack", C_ACK, act.tag()))
        elif act.kind == "Reject":
            folded = (
                statement
                and (set(act.categories) <= rejected_cats_informed
                     if act.categories else bool(rejected_cats_informed))
            )
            if not folded:
                entries.append(CostEntry("ack", C_ACK, act.tag()))
    return entries


def respond(
    model: TutorModel,
    learner_act: DialogueAct,
    ctx: DialogueContext,
    truth: VisualObject,
    rng: np.random.Generator,
) -> tuple[tuple[DialogueAct, ...], str, list[CostEntry]]:
    """Tutor acts, rendered utterance and cost entries for one learner act."""
    if learner_act.actor != LEARNER or learner_act.kind not in LEARNER_LEGAL_KINDS:
        raise TutorError(f"not a learner-legal act: {learner_act.tag()!r}")
    key = condition_key(learner_act, truth)
    outcomes = model.action_table.get(key)
    if outcomes:
        weights = np.array([w for w, _ in outcomes], dtype=float)
        idx = int(rng.choice(len(outcomes), p=weights / weights.sum()))
        plan = outcomes[idx][1]
    else:
        plan = _core_plan(learner_act, ctx, truth)
    acts = resolve_plan(plan, truth)
    utterance = model.lexicon.generate_turn(acts, rng)
    return acts, utterance, charge_costs(learner_act, acts)


# --- corpus fitting --------------------------------------------------------


def abstract_tutor_turn(acts, truth_labels: dict[str, str]) -> Plan:
    """Abstract concrete tutor acts into a truth-relative response plan."""
    plan = []
    for act in acts:
        if act.kind == "Inform":
            for c, w in act.slots:
                if truth_labels.get(c) != w:
                    raise TutorError(
                        f"corpus tutor informs {w!r} but truth is {truth_labels.get(c)!r}"
                    )
            plan.append(("InformTruth", act.categories))
        elif act.kind in ("Ack", "Reject", "Focus"):
            plan.append((act.kind, act.categories[0] if act.categories else None))
        elif act.kind == "Ask":
            plan.append(("Ask", act.categories))
        else:
            plan.append((act.kind, None))
    return tuple(plan)


def read_corpus(path_or_lines) -> list[dict]:
    """Read an annotated dialogue corpus.

    Format: dialogues separated by blank lines; each starts with a
    ``truth: colour=<word> shape=<word>`` line followed by turn lines
    ``T: <tag>+<tag>`` / ``L: <tag>``, using Table-style annotation tags.
    """
    if isinstance(path_or_lines, (list, tuple)):
        lines = list(path_or_lines)
    else:
        with open(path_or_lines, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    dialogues = []
    current: dict | None = None
    for i, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            if not line and current is not None:
                dialogues.append(current)
                current = None
            continue
        if line.startswith("truth:"):
            truth = {}
            for part in line[len("truth:"):].split():
                c, w = part.split("=")
                truth[c.strip()] = w.strip()
            current = {"truth": truth, "turns": []}
        elif line[:2] in ("T:", "L:"):
            if current is None:
                raise TutorError(f"line {i}: turn before a truth: header")
            actor = TUTOR if line[0] == "T" else LEARNER
            try:
                acts = parse_turn_tag(line[2:].strip(), actor)
            except DialogueError as exc:
                raise TutorError(f"line {i}: {exc}") from exc
            current["turns"].append((actor, acts))
        else:
            raise TutorError(f"line {i}: unrecognised corpus line {line!r}")
    if current is not None:
        dialogues.append(current)
    return dialogues


def fit_action_table(
    transcripts,
    lexicon: TemplateLexicon | None = None,
    initiative_prob: float = 0.5,
) -> TutorModel:
    """Fit the conditional action model from an annotated corpus.

    Counts (learner act kind + correctness signature) -> tutor act sequence
    frequencies; conditions never seen in the corpus back off to the
    deterministic core mapping.
    """
    dialogues = read_corpus(transcripts) if not (
        transcripts and isinstance(transcripts, list)
        and isinstance(transcripts[0], dict)
    ) else transcripts
    if not dialogues:
        raise TutorError("empty corpus")
    counts: dict[tuple, dict[Plan, int]] = {}
    for d in dialogues:
        truth_labels = d["truth"]
        turns = d["turns"]
        for j in range(len(turns) - 1):
            (actor, acts), (next_actor, next_acts) = turns[j], turns[j + 1]
            if actor != LEARNER or next_actor != TUTOR:
                continue
            learner_act = acts[0]
            correctness = tuple(
                "right" if truth_labels.get(c) == w else "wrong"
                for c, w in learner_act.slots if w is not None
            )
            key = (learner_act.kind, learner_act.categories, correctness)
            plan = abstract_tutor_turn(next_acts, truth_labels)
            counts.setdefault(key, {})[plan] = counts.setdefault(key, {}).get(plan, 0) + 1
    table = {
        key: [(float(n), plan) for plan, n in plans.items()]
        for key, plans in counts.items()
    }
    return TutorModel(
        lexicon=lexicon or default_lexicon(),
        initiative_prob=initiative_prob,
        action_table=table,
    )
