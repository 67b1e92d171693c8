"""Interactive grounding of visual attribute words through tutoring dialogues.

The package wires together a synthetic visual-object world, online
per-word classifiers, a dialogue-act layer with template NLU/NLG, a
simulated tutor with a tutoring-cost model, SARSA-trained dialogue and
confidence-threshold policies, a reproducible experiment harness and a
live tutoring service for human tutors.
"""

__version__ = "0.1.0"

from .world import (  # noqa: F401
    AttributeInventory,
    VisualObject,
    WorldConfig,
    generate_dataset,
    prototype,
)
from .vision import (  # noqa: F401
    AttributeClassifier,
    GroundingMap,
    PredictionStatus,
    best_prediction,
    learn_from_label,
    predict_proba,
    sgd_step,
    status,
)
from .dialogue import (  # noqa: F401
    DialogueAct,
    DialogueContext,
    TemplateLexicon,
    default_lexicon,
    update_context,
)
from .tutor import CostLedger, TutorModel, fit_action_table, open_dialogue, respond  # noqa: F401
from .policy import (  # noqa: F401
    AgentConfig,
    DialogueState,
    LearnerAction,
    QTable,
    ThresholdState,
    apply_threshold_action,
    baseline_threshold_schedule,
    delta_acc_level,
    encode_dialogue_state,
    global_reward,
    rule_policy,
    run_dialogue_episode,
    sarsa_update,
    select_action,
    threshold_reward,
    train,
)
from .harness import ExperimentConfig, r_perf, run_experiment, summarise  # noqa: F401
