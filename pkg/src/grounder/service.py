"""Live tutoring service: a human tutor replaces the simulator over HTTP/WS.

Each session owns one learner (grounding map + frozen policy) working
through a queue of objects.  Tutor utterances arrive as free text, are
parsed with the same lexicon the simulator uses, and drive the identical
update path (context bookkeeping, label learning, cost charging), so a
recorded simulated dialogue replayed through this API reproduces the
in-process run bit for bit.

Sessions persist as append-only event logs and are rebuilt by replay
after a restart.  All server events carry a per-session sequence number;
delivery to a client is FIFO and reconnects resume from the last seen
sequence number.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .dialogue import LEARNER, TUTOR, DialogueAct, DialogueContext, update_context
from .policy import (
    AgentConfig,
    QTable,
    RuleDialoguePolicy,
    SarsaDialoguePolicy,
    SarsaThresholdController,
    ScheduleThresholdController,
    category_statuses,
    delta_acc_level,
    encode_dialogue_state,
    is_incoherent,
    legal_actions,
    load_qtables,
    to_dialogue_act,
)
from .tutor import TutorModel, charge_costs, CostLedger
from .vision import GroundingMap, PredictionStatus, evaluate_accuracy, learn_from_label
from .world import CATEGORIES, WorldConfig, generate_dataset
from .dialogue import default_lexicon

POLICIES = ("rule-constant95", "rl-pretrained")
CHECKPOINT_EVERY = 10


class SessionError(ValueError):
    pass


def glyph_spec(shape_label: str, inventory) -> dict:
    """Name-agnostic drawing instructions for a shape word."""
    table = {
        "circle": {"kind": "ellipse", "cx": 0.5, "cy": 0.5, "r": 0.42},
        "square": {"kind": "polygon",
                   "points": [[0.12, 0.12], [0.88, 0.12], [0.88, 0.88], [0.12, 0.88]]},
        "triangle": {"kind": "polygon",
                     "points": [[0.5, 0.08], [0.92, 0.9], [0.08, 0.9]]},
    }
    if shape_label in table:
        return table[shape_label]
    # regular n-gon fallback for custom inventories
    index = inventory.shapes.index(shape_label)
    n = 5 + index
    points = [
        [0.5 + 0.42 * float(np.cos(2 * np.pi * k / n - np.pi / 2)),
         0.5 + 0.42 * float(np.sin(2 * np.pi * k / n - np.pi / 2))]
        for k in range(n)
    ]
    return {"kind": "polygon", "points": points}


@dataclass
class LiveSession:
    """One tutoring session; all mutation goes through ``apply_*`` methods."""

    id: str
    policy_name: str
    seed: int
    objects: list
    test_objects: list
    gmap: GroundingMap
    tutor_model: TutorModel
    agent: AgentConfig
    dialogue_policy: object
    threshold_controller: object
    log_path: Path
    rng: np.random.Generator
    events: list[dict] = field(default_factory=list)
    ctx: DialogueContext | None = None
    ledger: CostLedger = field(default_factory=CostLedger)
    penalties: int = 0
    object_index: int = 0
    decisions: int = 0
    dialogue_done: bool = False
    ended: bool = False
    threshold: float = 0.95
    prev_accuracy: float = 0.0
    baseline_accuracy: dict = field(default_factory=dict)
    last_learner_act: DialogueAct | None = None
    processed_turns: dict[int, list[dict]] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    subscribers: list = field(default_factory=list)
    replaying: bool = False

    # --- event plumbing ---------------------------------------------------

    def emit(self, type_: str, **payload) -> dict:
        event = {"seq": len(self.events), "session": self.id, "type": type_}
        event.update(payload)
        self.events.append(event)
        return event

    def log(self, record: dict) -> None:
        if self.replaying:
            return
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    # --- readouts ----------------------------------------------------------

    def current_object(self):
        return self.objects[self.object_index]

    def readout(self) -> dict:
        obj = self.current_object()
        ctx = self.ctx or DialogueContext(object_id=obj.id)
        c_stat, s_stat = category_statuses(self.gmap, obj, ctx, self.threshold)
        return {
            "c_state": int(c_stat),
            "s_state": int(s_stat),
            "pos_threshold": self.threshold,
            "cumulative_cost": self.ledger.total,
            "penalties": self.penalties,
            "provided": [c for c in CATEGORIES if ctx.provided.get(c)],
            "confidences": {
                c: self.gmap.confidences(c, obj.features(c)) for c in CATEGORIES
            },
            "objects_done": self.object_index,
            "objects_total": len(self.objects),
        }

    def object_spec(self) -> dict:
        obj = self.current_object()
        return {
            "id": obj.id,
            "colour_value": [float(v) for v in obj.colour_features],
            "glyph": glyph_spec(obj.shape_label, self.gmap.inventory),
        }

    # --- dialogue lifecycle -------------------------------------------------

    def begin_object(self) -> list[dict]:
        """Present the current object; zero-turn dialogues close immediately."""
        obj = self.current_object()
        self.ctx = DialogueContext(object_id=obj.id)
        self.decisions = 0
        self.dialogue_done = False
        self.last_learner_act = None
        events = [self.emit("object", spec=self.object_spec(), state=self.readout())]
        c_stat, s_stat = category_statuses(self.gmap, obj, self.ctx, self.threshold)
        if c_stat == PredictionStatus.KNOWN and s_stat == PredictionStatus.KNOWN:
            self.dialogue_done = True
            events.append(self.emit("dialogue_end", reason="already_known",
                                    state=self.readout()))
        return events

    def _learner_move(self) -> list[dict]:
        """Let the policy take one decision and speak it."""
        obj = self.current_object()
        state = encode_dialogue_state(self.gmap, obj, self.ctx, self.threshold)
        legal = legal_actions(self.gmap, obj)
        action = self.dialogue_policy.choose(state, legal, self.rng)
        self.decisions += 1
        act = to_dialogue_act(action, self.gmap, obj)
        if is_incoherent(act, self.ctx):
            self.penalties += 1
        utterance = self.tutor_model.lexicon.generate_turn((act,), self.rng)
        update_context(self.ctx, LEARNER, (act,), utterance)
        self.last_learner_act = act
        return [self.emit("learner_turn", act=act.tag(), utterance=utterance,
                          state=self.readout())]

    def _close_dialogue(self, reason: str) -> list[dict]:
        events = []
        if reason == "resolved":
            closing = DialogueAct(actor=LEARNER, kind="Ack")
            utterance = self.tutor_model.lexicon.generate_turn((closing,), self.rng)
            update_context(self.ctx, LEARNER, (closing,), utterance)
            events.append(self.emit("learner_turn", act=closing.tag(),
                                    utterance=utterance, state=self.readout()))
        else:
            self.penalties += 1
        self.dialogue_done = True
        events.append(self.emit("dialogue_end", reason=reason, state=self.readout()))
        return events

    def apply_tutor_text(self, text: str, client_seq: int | None = None) -> list[dict]:
        """Process one tutor utterance; the same path the simulator parity
        relies on: parse -> context/labels/costs -> learner's next move."""
        if self.ended:
            raise SessionError("session has ended")
        if self.dialogue_done:
            raise SessionError("dialogue finished; advance to the next object")
        obj = self.current_object()
        acts = self.tutor_model.lexicon.parse(text, actor=TUTOR)
        if not acts:
            reply = DialogueAct(actor=LEARNER, kind="CLrRequest")
            utterance = self.tutor_model.lexicon.generate_turn((reply,), self.rng)
            update_context(self.ctx, LEARNER, (reply,), utterance)
            events = [
                self.emit("no_parse", utterance=text, client_seq=client_seq),
                self.emit("learner_turn", act=reply.tag(), utterance=utterance,
                          state=self.readout()),
            ]
            return events

        learner_act = self.last_learner_act or DialogueAct(actor=LEARNER, kind="Listen")
        entries = charge_costs(learner_act, acts)
        self.ledger.extend(entries)
        provided_before = dict(self.ctx.provided_words)
        update_context(self.ctx, TUTOR, acts, text)
        labels = []
        for category in CATEGORIES:
            word = self.ctx.provided_words.get(category)
            if word is not None and provided_before.get(category) != word:
                learn_from_label(self.gmap, obj, word)
                labels.append(word)
        events = [self.emit(
            "tutor_turn",
            acts=[a.tag() for a in acts],
            utterance=text,
            cost_delta=sum(e.amount for e in entries),
            labels_learned=labels,
            client_seq=client_seq,
        )]

        c_stat, s_stat = category_statuses(self.gmap, obj, self.ctx, self.threshold)
        if c_stat == PredictionStatus.KNOWN and s_stat == PredictionStatus.KNOWN:
            events.extend(self._close_dialogue("resolved"))
        elif self.decisions >= self.agent.turn_cap:
            events.extend(self._close_dialogue("turn_cap"))
        else:
            events.extend(self._learner_move())
        return events

    def apply_advance(self) -> list[dict]:
        if self.ended:
            raise SessionError("session has ended")
        if not self.dialogue_done:
            raise SessionError("current dialogue is still in progress")
        self.object_index += 1
        if self.object_index % CHECKPOINT_EVERY == 0 or self.object_index >= len(self.objects):
            accs = evaluate_accuracy(self.gmap, self.test_objects)
            events = [self.emit("checkpoint", instances=self.object_index,
                                accuracy=accs)]
            bin_index = min(self.object_index // CHECKPOINT_EVERY - 1, 48)
            if self.object_index < len(self.objects):
                self.threshold = self.threshold_controller.step(
                    max(bin_index, 0), self.threshold, self.prev_accuracy,
                    accs["per_attribute"], self.rng,
                )
            self.prev_accuracy = accs["per_attribute"]
        else:
            events = []
        if self.object_index >= len(self.objects):
            return events + self.apply_end()
        return events + self.begin_object()

    def apply_end(self) -> list[dict]:
        if self.ended:
            raise SessionError("session has ended")
        self.ended = True
        accs = evaluate_accuracy(self.gmap, self.test_objects)
        delta = accs["per_attribute"] - self.baseline_accuracy["per_attribute"]
        total = self.ledger.total
        summary = {
            "objects_completed": self.object_index,
            "total_cost": total,
            "penalties": self.penalties,
            "baseline_accuracy": self.baseline_accuracy,
            "final_accuracy": accs,
            "delta_accuracy": delta,
            "r_perf": (delta / total) if total > 0 else None,
        }
        return [self.emit("session_summary", summary=summary)]

    # --- logged entry points -------------------------------------------------

    def step(self, text: str, client_seq: int | None = None) -> list[dict]:
        """Apply one tutor utterance, idempotently when ``client_seq`` repeats."""
        with self.lock:
            if client_seq is not None and client_seq in self.processed_turns:
                return self.processed_turns[client_seq]
            self.log({"event": "tutor_text", "text": text, "client_seq": client_seq})
            events = self.apply_tutor_text(text, client_seq)
            if client_seq is not None:
                self.processed_turns[client_seq] = events
            self._publish(events)
            return events

    def advance(self) -> list[dict]:
        with self.lock:
            self.log({"event": "advance"})
            events = self.apply_advance()
            self._publish(events)
            return events

    def end(self) -> list[dict]:
        with self.lock:
            self.log({"event": "end"})
            events = self.apply_end()
            self._publish(events)
            return events

    def _publish(self, events: list[dict]) -> None:
        for queue in list(self.subscribers):
            for event in events:
                queue.put_nowait(event)


def _make_policies(policy_name: str, qtables: tuple[QTable, QTable] | None,
                   agent: AgentConfig):
    if policy_name == "rule-constant95":
        return RuleDialoguePolicy(), ScheduleThresholdController("constant95")
    if policy_name == "rl-pretrained":
        if qtables is None:
            raise SessionError(
                "rl-pretrained policy needs Q-tables; start the service with "
                "--qtables or create the session with rule-constant95"
            )
        dialogue_q, threshold_q = qtables
        policy = SarsaDialoguePolicy(dialogue_q, epsilon=0.0, learn=False)
        controller = SarsaThresholdController(
            threshold_q, epsilon=0.0, learn=False,
            initial_threshold=agent.initial_threshold,
        )
        return policy, controller
    raise SessionError(f"unknown policy {policy_name!r}; choose one of {POLICIES}")


def build_session(
    session_id: str,
    policy_name: str,
    seed: int,
    num_objects: int,
    storage_dir: Path,
    qtables: tuple[QTable, QTable] | None,
    agent: AgentConfig | None = None,
) -> LiveSession:
    agent = agent or AgentConfig()
    world = WorldConfig(seed=seed)
    train_objects, test_objects = generate_dataset(world)
    queue = train_objects[: num_objects or len(train_objects)]
    gmap = GroundingMap.fresh(
        inventory=world.inventory,
        shape_dim=world.shape_dim,
        learning_rate=agent.classifier_learning_rate,
        weight_decay=agent.classifier_weight_decay,
    )
    tutor_model = TutorModel(lexicon=default_lexicon(world.inventory))
    policy, controller = _make_policies(policy_name, qtables, agent)
    session = LiveSession(
        id=session_id,
        policy_name=policy_name,
        seed=seed,
        objects=queue,
        test_objects=test_objects,
        gmap=gmap,
        tutor_model=tutor_model,
        agent=agent,
        dialogue_policy=policy,
        threshold_controller=controller,
        log_path=storage_dir / f"{session_id}.jsonl",
        rng=np.random.default_rng(seed),
    )
    session.threshold = controller.start()
    session.baseline_accuracy = evaluate_accuracy(gmap, test_objects)
    session.prev_accuracy = session.baseline_accuracy["per_attribute"]
    return session


class SessionStore:
    """Session index with atomic create/lookup and crash-safe restore."""

    def __init__(self, storage_dir, qtables_path=None):
        self.storage_dir = Path(storage_dir)
        self.storage_dir.mkdir(parents=True, exist_ok=True)
        self.qtables = load_qtables(qtables_path) if qtables_path else None
        self.sessions: dict[str, LiveSession] = {}
        self.lock = threading.Lock()

    def create(self, policy_name: str, seed: int, num_objects: int) -> LiveSession:
        session_id = uuid.uuid4().hex[:12]
        session = build_session(session_id, policy_name, seed, num_objects,
                                self.storage_dir, self.qtables)
        session.log({"event": "created", "policy": policy_name, "seed": seed,
                     "objects": num_objects})
        events = session.begin_object()
        session._publish(events)
        with self.lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: str) -> LiveSession:
        with self.lock:
            if session_id in self.sessions:
                return self.sessions[session_id]
        session = self._restore(session_id)
        with self.lock:
            return self.sessions.setdefault(session_id, session)

    def _restore(self, session_id: str) -> LiveSession:
        log_path = self.storage_dir / f"{session_id}.jsonl"
        if not log_path.exists():
            raise SessionError(f"unknown session {session_id!r}")
        with open(log_path, "r", encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        if not records or records[0]["event"] != "created":
            raise SessionError(f"corrupt session log for {session_id!r}")
        created = records[0]
        # replay through a fresh session without re-appending to the log
        session = build_session(session_id, created["policy"], created["seed"],
                                created["objects"], self.storage_dir, self.qtables)
        session.replaying = True
        session.begin_object()
        for record in records[1:]:
            if record["event"] == "tutor_text":
                seq = record.get("client_seq")
                if seq is not None and seq in session.processed_turns:
                    continue
                events = session.apply_tutor_text(record["text"], seq)
                if seq is not None:
                    session.processed_turns[seq] = events
            elif record["event"] == "advance":
                session.apply_advance()
            elif record["event"] == "end":
                session.apply_end()
        session.replaying = False
        return session


def create_app(storage_dir="runs/sessions", qtables_path=None, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="grounder live tutoring service")
    store = SessionStore(storage_dir, qtables_path)
    app.state.store = store

    def _get(session_id: str) -> LiveSession:
        try:
            return store.get(session_id)
        except SessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/api/sessions")
    async def create_session(body: dict):
        policy = body.get("policy", "rule-constant95")
        seed = int(body.get("seed", 0))
        num_objects = int(body.get("objects", 0))
        try:
            session = store.create(policy, seed, num_objects)
        except SessionError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"session": session.id, "policy": policy, "events": session.events}

    @app.get("/api/sessions/{session_id}")
    async def get_session(session_id: str):
        session = _get(session_id)
        return {
            "session": session.id,
            "policy": session.policy_name,
            "done": session.ended,
            "events": session.events,
        }

    @app.post("/api/sessions/{session_id}/turn")
    async def post_turn(session_id: str, body: dict):
        session = _get(session_id)
        try:
            events = session.step(str(body.get("utterance", "")), body.get("seq"))
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"events": events}

    @app.post("/api/sessions/{session_id}/advance")
    async def post_advance(session_id: str):
        session = _get(session_id)
        try:
            events = session.advance()
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"events": events}

    @app.post("/api/sessions/{session_id}/end")
    async def post_end(session_id: str):
        session = _get(session_id)
        try:
            events = session.end()
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"events": events}

    @app.websocket("/api/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        import asyncio

        await websocket.accept()
        try:
            session = store.get(session_id)
        except SessionError as exc:
            await websocket.send_json({"type": "error", "detail": str(exc)})
            await websocket.close()
            return
        queue: asyncio.Queue = asyncio.Queue()
        session.subscribers.append(queue)

        async def pump():
            while True:
                event = await queue.get()
                await websocket.send_json(event)

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                message = await websocket.receive_json()
                mtype = message.get("type")
                if mtype == "hello":
                    last_seen = int(message.get("last_seen", -1))
                    for event in session.events[last_seen + 1:]:
                        await websocket.send_json(event)
                elif mtype == "tutor_turn":
                    try:
                        session.step(str(message.get("utterance", "")),
                                     message.get("seq"))
                    except SessionError as exc:
                        await websocket.send_json({"type": "error", "detail": str(exc)})
                elif mtype == "advance":
                    try:
                        session.advance()
                    except SessionError as exc:
                        await websocket.send_json({"type": "error", "detail": str(exc)})
                elif mtype == "end":
                    try:
                        session.end()
                    except SessionError as exc:
                        await websocket.send_json({"type": "error", "detail": str(exc)})
                else:
                    await websocket.send_json(
                        {"type": "error", "detail": f"unknown message type {mtype!r}"}
                    )
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            if queue in session.subscribers:
                session.subscribers.remove(queue)

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app
