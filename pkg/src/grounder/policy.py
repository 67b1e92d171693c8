"""Hierarchical learner policies: threshold MDP, dialogue MDP, SARSA, baselines.

Two interdependent tabular MDPs drive the learner.  The threshold MDP
adjusts the positive confidence threshold every learning step (10
training instances), rewarded by the accuracy delta over the step it
governed.  The dialogue MDP picks the learner's conversational moves
within each dialogue, rewarded at episode level by a base of 10 minus
tutoring cost minus a penalty per incoherent act.  Both are trained with
on-policy SARSA (epsilon-greedy, discount 1).  Rule-based baselines use
the same episode machinery with hand-crafted threshold schedules.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dialogue import (
    LEARNER,
    TUTOR,
    DialogueAct,
    DialogueContext,
    Turn,
    slots_for,
    update_context,
)
from .tutor import CostLedger, TutorModel, open_dialogue, respond
from .vision import (
    GroundingMap,
    PredictionStatus,
    best_prediction,
    evaluate_accuracy,
    learn_from_label,
    status,
)
from .world import CATEGORIES, COLOUR, SHAPE, VisualObject

THRESHOLD_MIN = 0.65
THRESHOLD_MAX = 0.95
THRESHOLD_STEP = 0.05
THRESHOLD_GRID = tuple(h / 100 for h in range(65, 100, 5))

THRESHOLD_ACTIONS = ("Increase", "Decrease", "Keep")

PRE_DA_VALUES = ("none", "inform", "reject", "ack", "ask", "other")
PRE_CONTEXT_VALUES = ("none", "colour", "shape", "both")


class PolicyError(ValueError):
    """Raised for invalid states, actions or update arguments."""


# --- threshold MDP ----------------------------------------------------------


@dataclass(frozen=True)
class ThresholdState:
    instance_bin: int
    current_threshold: float
    delta_acc_level: int

    def __post_init__(self):
        if not 0 <= self.instance_bin <= 49:
            raise PolicyError(f"instance_bin out of range: {self.instance_bin}")
        if round(self.current_threshold * 100) not in range(65, 100, 5):
            raise PolicyError(f"threshold off grid: {self.current_threshold}")
        if self.delta_acc_level not in (-1, 0, 1):
            raise PolicyError(f"bad delta_acc_level: {self.delta_acc_level}")


def delta_acc_level(prev_acc: float, cur_acc: float) -> int:
    """Sign of the accuracy change, with exact zero (tol 1e-12) mapping to 0."""
    delta = cur_acc - prev_acc
    if abs(delta) <= 1e-12:
        return 0
    return 1 if delta > 0 else -1


def apply_threshold_action(threshold: float, action: str) -> float:
    """Move the threshold one 0.05 step, clamped to [0.65, 0.95]."""
    if action not in THRESHOLD_ACTIONS:
        raise PolicyError(f"unknown threshold action {action!r}")
    h = round(threshold * 100)
    if abs(threshold * 100 - h) > 1e-6 or h not in range(65, 100, 5):
        raise PolicyError(f"threshold off grid: {threshold}")
    if action == "Increase":
        h += 5
    elif action == "Decrease":
        h -= 5
    return min(95, max(65, h)) / 100


def threshold_reward(prev_acc: float, cur_acc: float, scale: float = 100.0) -> float:
    """Local reward: proportional to the accuracy delta over the last step."""
    return scale * (cur_acc - prev_acc)


def baseline_threshold_schedule(kind: str, bin_index: int) -> float:
    """Hand-crafted threshold schedules used by the rule-based baselines."""
    if bin_index < 0:
        raise PolicyError("bin_index must be >= 0")
    if kind == "constant95":
        return 0.95
    if kind == "decay05":
        return max(65, 95 - 5 * bin_index) / 100
    if kind == "decay01":
        return max(65, 95 - 1 * bin_index) / 100
    raise PolicyError(f"unknown schedule kind {kind!r}")


# --- dialogue MDP -----------------------------------------------------------


@dataclass(frozen=True)
class DialogueState:
    c_state: int
    s_state: int
    pre_da: str
    pre_context: str

    def __post_init__(self):
        if self.c_state not in (0, 1, 2) or self.s_state not in (0, 1, 2):
            raise PolicyError("attribute states must be in {0,1,2}")
        if self.pre_da not in PRE_DA_VALUES:
            raise PolicyError(f"bad pre_da {self.pre_da!r}")
        if self.pre_context not in PRE_CONTEXT_VALUES:
            raise PolicyError(f"bad pre_context {self.pre_context!r}")


@dataclass(frozen=True)
class LearnerAction:
    kind: str  # AskWH | AskPolar | Inform | DoNotKnow | Ack | Listen
    target: str | None = None  # colour | shape | both | None

    def tag(self) -> str:
        return self.kind if self.target is None else f"{self.kind}({self.target})"


CANONICAL_ACTIONS = tuple(
    [LearnerAction(kind, target)
     for kind in ("AskWH", "AskPolar", "Inform", "DoNotKnow")
     for target in ("colour", "shape", "both")]
    + [LearnerAction("Ack"), LearnerAction("Listen")]
)

_PRE_DA_PRIORITY = ("Inform", "Reject", "Ack", "Ask")


def pre_da_of(ctx: DialogueContext) -> str:
    """Most informative kind in the tutor's most recent turn."""
    last = ctx.last_turn(TUTOR)
    if last is None:
        return "none"
    kinds = {a.kind for a in last.acts}
    for kind in _PRE_DA_PRIORITY:
        if kind in kinds:
            return kind.lower()
    if kinds <= {"Listen"}:
        return "none"
    return "other"


def pre_context_of(ctx: DialogueContext) -> str:
    discussed = ctx.discussed_categories()
    if len(discussed) == 2:
        return "both"
    return discussed[0] if discussed else "none"


def category_statuses(
    gmap: GroundingMap, obj: VisualObject, ctx: DialogueContext, threshold: float
) -> tuple[PredictionStatus, PredictionStatus]:
    out = []
    for category in CATEGORIES:
        _, conf = best_prediction(gmap, category, obj.features(category))
        out.append(status(conf, threshold, provided=bool(ctx.provided.get(category))))
    return tuple(out)


def encode_dialogue_state(
    gmap: GroundingMap, obj: VisualObject, ctx: DialogueContext, threshold: float
) -> DialogueState:
    c_stat, s_stat = category_statuses(gmap, obj, ctx, threshold)
    return DialogueState(
        c_state=int(c_stat),
        s_state=int(s_stat),
        pre_da=pre_da_of(ctx),
        pre_context=pre_context_of(ctx),
    )


def legal_actions(gmap: GroundingMap, obj: VisualObject) -> list[LearnerAction]:
    """Canonical-order action list satisfying the confidence constraints:
    Inform/AskPolar need confidence > 0.5 on every targeted category,
    DoNotKnow needs confidence <= 0.5 on every targeted category."""
    conf = {
        c: best_prediction(gmap, c, obj.features(c))[1] for c in CATEGORIES
    }

    def targeted(target):
        return CATEGORIES if target == "both" else (target,)

    legal = []
    for a in CANONICAL_ACTIONS:
        if a.kind in ("AskWH", "Ack", "Listen"):
            legal.append(a)
        elif a.kind in ("AskPolar", "Inform"):
            if all(conf[c] > 0.5 for c in targeted(a.target)):
                legal.append(a)
        elif a.kind == "DoNotKnow":
            if all(conf[c] <= 0.5 for c in targeted(a.target)):
                legal.append(a)
    return legal


def to_dialogue_act(action: LearnerAction, gmap: GroundingMap, obj: VisualObject) -> DialogueAct:
    """Instantiate a learner action as a concrete dialogue act, filling
    attribute words from the learner's current best predictions."""
    cats = CATEGORIES if action.target == "both" else (action.target,)
    if action.kind == "AskWH":
        return DialogueAct(actor=LEARNER, kind="Ask", slots=slots_for(cats))
    if action.kind in ("AskPolar", "Inform"):
        words = {c: best_prediction(gmap, c, obj.features(c))[0] for c in cats}
        kind = "Polar" if action.kind == "AskPolar" else "Inform"
        return DialogueAct(actor=LEARNER, kind=kind, slots=slots_for(cats, words))
    if action.kind == "DoNotKnow":
        return DialogueAct(actor=LEARNER, kind="DoNotKnow", slots=slots_for(cats))
    if action.kind == "Ack":
        return DialogueAct(actor=LEARNER, kind="Ack")
    if action.kind == "Listen":
        return DialogueAct(actor=LEARNER, kind="Listen")
    raise PolicyError(f"unknown learner action {action!r}")


def rule_policy(state: DialogueState) -> LearnerAction:
    """Best rule-based strategy: WH-ask unknown attributes, polar-check
    unsure ones, colour before shape; close when nothing is pending."""
    if state.c_state == 0:
        return LearnerAction("AskWH", "colour")
    if state.c_state == 1:
        return LearnerAction("AskPolar", "colour")
    if state.s_state == 0:
        return LearnerAction("AskWH", "shape")
    if state.s_state == 1:
        return LearnerAction("AskPolar", "shape")
    return LearnerAction("Ack")


def global_reward(ledger, penalty_count: int, base: float = 10.0,
                  penalty_weight: float = 2.0) -> float:
    """Episode-level reward: base minus tutoring cost minus action penalties."""
    total = ledger.total if isinstance(ledger, CostLedger) else float(ledger)
    return base - total - penalty_weight * penalty_count


# --- tabular SARSA ----------------------------------------------------------


@dataclass
class QTable:
    """Tabular action values; missing entries read as ``init_value``."""

    init_value: float = 0.0
    values: dict = field(default_factory=dict)
    visits: dict = field(default_factory=dict)

    def get(self, state, action) -> float:
        return self.values.get((state, action), self.init_value)

    def set(self, state, action, value: float) -> None:
        self.values[(state, action)] = value


def sarsa_update(q: QTable, state, action, reward: float, next_state, next_action,
                 alpha: float, gamma: float = 1.0) -> QTable:
    """One on-policy update: Q(s,a) += alpha*(r + gamma*Q(s',a') - Q(s,a)).

    A terminal transition is signalled by ``next_state is None`` and uses
    a zero bootstrap target.
    """
    if not np.isfinite(reward):
        raise PolicyError(f"non-finite reward: {reward}")
    if not 0.0 < alpha <= 1.0:
        raise PolicyError("alpha must be in (0, 1]")
    bootstrap = 0.0 if next_state is None else q.get(next_state, next_action)
    current = q.get(state, action)
    q.set(state, action, current + alpha * (reward + gamma * bootstrap - current))
    q.visits[(state, action)] = q.visits.get((state, action), 0) + 1
    return q


def select_action(q: QTable, state, legal, epsilon: float, rng: np.random.Generator):
    """Epsilon-greedy over the legal actions; greedy ties break to the
    earliest action in canonical (list) order."""
    if not legal:
        raise PolicyError("no legal actions to select from")
    if epsilon > 0 and rng.random() < epsilon:
        return legal[int(rng.integers(len(legal)))]
    best, best_value = legal[0], q.get(state, legal[0])
    for a in legal[1:]:
        v = q.get(state, a)
        if v > best_value:
            best, best_value = a, v
    return best


# --- dialogue policies ------------------------------------------------------


class RuleDialoguePolicy:
    """Deterministic rule-based dialogue policy (no learning)."""

    learns = False

    def choose(self, state, legal, rng):
        action = rule_policy(state)
        if action in legal:
            return action
        return legal[0]

    def update(self, state, action, reward, next_state, next_action):
        pass


class SarsaDialoguePolicy:
    """Epsilon-greedy SARSA policy over the dialogue Q-table."""

    def __init__(self, q: QTable, epsilon: float = 0.2, alpha: float = 0.1,
                 gamma: float = 1.0, learn: bool = True):
        self.q = q
        self.epsilon = epsilon
        self.alpha = alpha
        self.gamma = gamma
        self.learn = learn

    @property
    def learns(self):
        return self.learn

    def choose(self, state, legal, rng):
        return select_action(self.q, state, legal, self.epsilon if self.learn else 0.0, rng)

    def update(self, state, action, reward, next_state, next_action):
        if self.learn:
            sarsa_update(self.q, state, action, reward, next_state, next_action,
                         self.alpha, self.gamma)


# --- threshold controllers --------------------------------------------------


class ScheduleThresholdController:
    """Threshold follows a fixed hand-crafted schedule."""

    def __init__(self, kind: str):
        self.kind = kind

    def start(self) -> float:
        return baseline_threshold_schedule(self.kind, 0)

    def step(self, bin_index, threshold, prev_acc, cur_acc, rng) -> float:
        return baseline_threshold_schedule(self.kind, bin_index + 1)

    def finish(self, prev_acc, cur_acc) -> None:
        pass


class SarsaThresholdController:
    """Threshold adjusted by the SARSA-trained threshold MDP."""

    def __init__(self, q: QTable, epsilon: float = 0.2, alpha: float = 0.1,
                 gamma: float = 1.0, reward_scale: float = 100.0,
                 initial_threshold: float = 0.95, learn: bool = True):
        self.q = q
        self.epsilon = epsilon
        self.alpha = alpha
        self.gamma = gamma
        self.reward_scale = reward_scale
        self.initial_threshold = initial_threshold
        self.learn = learn
        self._prev = None

    def start(self) -> float:
        self._prev = None
        return self.initial_threshold

    def step(self, bin_index, threshold, prev_acc, cur_acc, rng) -> float:
        state = ThresholdState(bin_index, threshold, delta_acc_level(prev_acc, cur_acc))
        action = select_action(
            self.q, state, THRESHOLD_ACTIONS,
            self.epsilon if self.learn else 0.0, rng,
        )
        if self.learn and self._prev is not None:
            prev_state, prev_action = self._prev
            reward = threshold_reward(prev_acc, cur_acc, self.reward_scale)
            sarsa_update(self.q, prev_state, prev_action, reward, state, action,
                         self.alpha, self.gamma)
        self._prev = (state, action)
        return apply_threshold_action(threshold, action)

    def finish(self, prev_acc, cur_acc) -> None:
        if self.learn and self._prev is not None:
            prev_state, prev_action = self._prev
            reward = threshold_reward(prev_acc, cur_acc, self.reward_scale)
            sarsa_update(self.q, prev_state, prev_action, reward, None, None,
                         self.alpha, self.gamma)
        self._prev = None


# --- dialogue episodes ------------------------------------------------------


@dataclass
class EpisodeResult:
    turns: list[Turn]
    ledger: CostLedger
    penalties: int
    steps: int
    outcome: str  # "no_dialogue" | "resolved" | "turn_cap"


def is_incoherent(act: DialogueAct, ctx: DialogueContext) -> bool:
    """Acts that cannot properly respond to the tutor: listening over a
    pending question, acknowledging nothing, or re-asking a provided
    attribute."""
    if act.kind == "Listen":
        return bool(ctx.pending_question)
    if act.kind == "Ack":
        last = ctx.last_turn(TUTOR)
        if last is None:
            return True
        return not any(a.kind in ("Inform", "Ack", "Reject") for a in last.acts)
    if act.kind == "Ask":
        return any(ctx.provided.get(c) for c in act.categories)
    return False


def run_dialogue_episode(
    policy,
    gmap: GroundingMap,
    tutor_model: TutorModel,
    obj: VisualObject,
    threshold: float,
    rng: np.random.Generator,
    turn_cap: int = 30,
    base_reward: float = 10.0,
    penalty_weight: float = 2.0,
) -> EpisodeResult:
    """One complete dialogue about one object.

    Alternates learner/tutor turns from the tutor's opening move until both
    attributes are taught or confidently known, applying a classifier
    update for every attribute label the tutor provides or confirms.  When
    the learner is already confident about both attributes no dialogue
    takes place at all.  SARSA policies receive one update per learner
    decision, with the episode reward of Eq.-style ``base - cost -
    penalty`` spread over the steps that incurred each term (the terminal
    step carries the base).
    """
    lexicon = tutor_model.lexicon
    ctx = DialogueContext(object_id=obj.id)
    ledger = CostLedger()
    penalties = 0

    c_stat, s_stat = category_statuses(gmap, obj, ctx, threshold)
    if c_stat == PredictionStatus.KNOWN and s_stat == PredictionStatus.KNOWN:
        return EpisodeResult([], ledger, 0, 0, "no_dialogue")

    opening = open_dialogue(tutor_model, obj, rng)
    if opening:
        update_context(ctx, TUTOR, opening, lexicon.generate_turn(opening, rng))
    else:
        silent = (DialogueAct(actor=TUTOR, kind="Listen"),)
        update_context(ctx, TUTOR, silent, "")

    prev = None  # (state, action, reward) awaiting its SARSA update
    steps = 0
    outcome = "turn_cap"
    for _ in range(turn_cap):
        state = encode_dialogue_state(gmap, obj, ctx, threshold)
        legal = legal_actions(gmap, obj)
        action = policy.choose(state, legal, rng)
        if prev is not None:
            policy.update(*prev, state, action)
        steps += 1

        act = to_dialogue_act(action, gmap, obj)
        pen = 1 if is_incoherent(act, ctx) else 0
        penalties += pen
        update_context(ctx, LEARNER, (act,), lexicon.generate_turn((act,), rng))

        tutor_acts, tutor_utterance, entries = respond(tutor_model, act, ctx, obj, rng)
        ledger.extend(entries)
        provided_before = dict(ctx.provided_words)
        update_context(ctx, TUTOR, tutor_acts, tutor_utterance)
        for category in CATEGORIES:
            word = ctx.provided_words.get(category)
            if word is not None and provided_before.get(category) != word:
                learn_from_label(gmap, obj, word)

        c_stat, s_stat = category_statuses(gmap, obj, ctx, threshold)
        done = c_stat == PredictionStatus.KNOWN and s_stat == PredictionStatus.KNOWN
        reward = (
            -sum(e.amount for e in entries)
            - penalty_weight * pen
            + (base_reward if done else 0.0)
        )
        prev = (state, action, reward)
        if done:
            outcome = "resolved"
            closing = DialogueAct(actor=LEARNER, kind="Ack")
            update_context(ctx, LEARNER, (closing,), lexicon.generate_turn((closing,), rng))
            break

    if outcome == "turn_cap":
        penalties += 1
        if prev is not None:
            state, action, reward = prev
            prev = (state, action, reward - penalty_weight)
    if prev is not None:
        policy.update(*prev, None, None)
    return EpisodeResult(ctx.turns, ledger, penalties, steps, outcome)


# --- fold training loop -----------------------------------------------------


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters shared by training and evaluation runs."""

    alpha: float = 0.1
    gamma: float = 1.0
    epsilon: float = 0.2
    reward_scale: float = 100.0  # threshold-MDP reward per unit accuracy delta
    penalty_weight: float = 2.0
    base_reward: float = 10.0
    initial_threshold: float = 0.95
    bin_size: int = 10
    turn_cap: int = 30
    classifier_learning_rate: float = 0.25
    classifier_weight_decay: float = 0.05


@dataclass
class BinPoint:
    instances_seen: int
    accuracy: dict[str, float]
    cumulative_cost: float
    penalties: int


@dataclass
class FoldResult:
    baseline_accuracy: dict[str, float]
    curve: list[BinPoint]
    threshold_trace: list[float]
    total_penalties: int

    @property
    def final_accuracy(self) -> float:
        return self.curve[-1].accuracy["per_attribute"]

    @property
    def total_cost(self) -> float:
        return self.curve[-1].cumulative_cost


def run_fold(
    gmap: GroundingMap,
    ordered_train: list[VisualObject],
    test: list[VisualObject],
    tutor_model: TutorModel,
    dialogue_policy,
    threshold_controller,
    rng: np.random.Generator,
    config: AgentConfig,
) -> FoldResult:
    """One 500-instance learning run: a dialogue episode per instance and a
    threshold decision plus held-out accuracy evaluation per bin."""
    bins = len(ordered_train) // config.bin_size
    if bins < 1:
        raise PolicyError("need at least one full bin of training instances")
    baseline = evaluate_accuracy(gmap, test)
    threshold = threshold_controller.start()
    prev_acc = baseline["per_attribute"]
    curve: list[BinPoint] = []
    trace: list[float] = []
    total_cost = 0.0
    total_penalties = 0
    index = 0
    for b in range(bins):
        trace.append(threshold)
        bin_penalties = 0
        for _ in range(config.bin_size):
            episode = run_dialogue_episode(
                dialogue_policy, gmap, tutor_model, ordered_train[index], threshold,
                rng, turn_cap=config.turn_cap, base_reward=config.base_reward,
                penalty_weight=config.penalty_weight,
            )
            total_cost += episode.ledger.total
            bin_penalties += episode.penalties
            index += 1
        accs = evaluate_accuracy(gmap, test)
        total_penalties += bin_penalties
        curve.append(BinPoint(index, accs, total_cost, bin_penalties))
        if b < bins - 1:
            threshold = threshold_controller.step(
                b, threshold, prev_acc, accs["per_attribute"], rng
            )
        else:
            threshold_controller.finish(prev_acc, accs["per_attribute"])
        prev_acc = accs["per_attribute"]
    return FoldResult(baseline, curve, trace, total_penalties)


@dataclass
class TrainResult:
    dialogue_q: QTable
    threshold_q: QTable
    folds: list[FoldResult]


def train(
    train_objects: list[VisualObject],
    test_objects: list[VisualObject],
    tutor_model: TutorModel,
    config: AgentConfig,
    folds: int,
    seed_for,
) -> TrainResult:
    """Train both MDPs with SARSA across independent folds.

    Classifiers restart fresh each fold; the Q-tables accumulate across
    folds.  ``seed_for(*tags)`` must return a deterministic integer seed
    (see ``world.derive_seed``).
    """
    dialogue_q = QTable()
    threshold_q = QTable()
    results = []
    for fold in range(folds):
        order_rng = np.random.default_rng(seed_for("order", fold))
        order = list(train_objects)
        order_rng.shuffle(order)
        rng = np.random.default_rng(seed_for("episodes", fold))
        gmap = GroundingMap.fresh(
            inventory=tutor_model.lexicon.inventory,
            colour_dim=len(train_objects[0].colour_features),
            shape_dim=len(train_objects[0].shape_features),
            learning_rate=config.classifier_learning_rate,
            weight_decay=config.classifier_weight_decay,
        )
        policy = SarsaDialoguePolicy(
            dialogue_q, config.epsilon, config.alpha, config.gamma, learn=True
        )
        controller = SarsaThresholdController(
            threshold_q, config.epsilon, config.alpha, config.gamma,
            config.reward_scale, config.initial_threshold, learn=True,
        )
        results.append(
            run_fold(gmap, order, test_objects, tutor_model, policy, controller,
                     rng, config)
        )
    return TrainResult(dialogue_q, threshold_q, results)


# --- Q-table serialisation --------------------------------------------------

QTABLE_HEADER = "# grounder qtables v1"


def _state_tag(state) -> str:
    if isinstance(state, DialogueState):
        return f"D|{state.c_state},{state.s_state},{state.pre_da},{state.pre_context}"
    if isinstance(state, ThresholdState):
        return (
            f"T|{state.instance_bin},{round(state.current_threshold * 100)},"
            f"{state.delta_acc_level}"
        )
    raise PolicyError(f"unknown state type {type(state)}")


def _state_from_tag(tag: str):
    kind, body = tag.split("|", 1)
    parts = body.split(",")
    if kind == "D":
        return DialogueState(int(parts[0]), int(parts[1]), parts[2], parts[3])
    if kind == "T":
        return ThresholdState(int(parts[0]), int(parts[1]) / 100, int(parts[2]))
    raise PolicyError(f"unknown state tag {tag!r}")


def _action_tag(action) -> str:
    if isinstance(action, LearnerAction):
        return action.tag()
    return str(action)


def _action_from_tag(tag: str, state) -> object:
    if isinstance(state, ThresholdState):
        return tag
    if "(" in tag:
        kind, target = tag[:-1].split("(")
        return LearnerAction(kind, target)
    return LearnerAction(tag)


def save_qtables(path, dialogue_q: QTable, threshold_q: QTable) -> None:
    """Persist both Q-tables as sorted text rows: state, action, value, visits."""
    rows = []
    for q in (dialogue_q, threshold_q):
        for (state, action), value in q.values.items():
            rows.append(
                (
                    _state_tag(state),
                    _action_tag(action),
                    repr(float(value)),
                    str(q.visits.get((state, action), 0)),
                )
            )
    rows.sort()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(QTABLE_HEADER + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


def load_qtables(path) -> tuple[QTable, QTable]:
    dialogue_q, threshold_q = QTable(), QTable()
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != QTABLE_HEADER:
            raise PolicyError(f"not a qtable file: {path}")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            state_tag, action_tag, value, visits = line.split("\t")
            state = _state_from_tag(state_tag)
            action = _action_from_tag(action_tag, state)
            q = threshold_q if isinstance(state, ThresholdState) else dialogue_q
            q.values[(state, action)] = float(value)
            q.visits[(state, action)] = int(visits)
    return dialogue_q, threshold_q
