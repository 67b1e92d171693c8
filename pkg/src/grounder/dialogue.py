"""Dialogue acts, per-dialogue context and template-based NLU/NLG.

Acts follow the BURCHAK-style annotation scheme: a typed act with an
optional (category -> word) slot payload, written e.g.
``Inform(colour:red&shape:square)`` or ``Ask(colour)``.  Utterances are
produced and understood through a weighted template lexicon; every act a
policy can produce round-trips through generate -> parse.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .world import CATEGORIES, AttributeInventory

LEARNER = "learner"
TUTOR = "tutor"

ACT_KINDS = (
    "Listen", "Inform", "Ask", "Polar", "Ack", "Reject", "Focus", "CLr",
    "CLrRequest", "Help", "HelpRequest", "Check", "Repeat", "Retry",
    "DoNotKnow",
)
TUTOR_ONLY = frozenset({"Reject", "Focus", "CLr", "Help", "Check", "Repeat", "Retry"})
LEARNER_ONLY = frozenset({"CLrRequest", "HelpRequest", "DoNotKnow"})

# kinds whose slots must carry attribute words / must not carry words
_WORD_REQUIRED = frozenset({"Inform", "Polar"})
_NO_WORDS = frozenset({"Ask", "Ack", "Reject", "Focus", "DoNotKnow"})
_NO_SLOTS = frozenset({"Listen", "CLr", "CLrRequest", "Help", "HelpRequest",
                       "Check", "Repeat", "Retry"})


class DialogueError(ValueError):
    """Raised for ill-formed acts, tags or lexicon entries."""


@dataclass(frozen=True)
class DialogueAct:
    """One typed dialogue move with category/word slots.

    ``slots`` is an ordered tuple of (category, word-or-None) pairs in
    canonical category order.
    """

    actor: str
    kind: str
    slots: tuple[tuple[str, str | None], ...] = ()

    def __post_init__(self):
        if self.actor not in (LEARNER, TUTOR):
            raise DialogueError(f"unknown actor {self.actor!r}")
        if self.kind not in ACT_KINDS:
            raise DialogueError(f"unknown act kind {self.kind!r}")
        if self.actor == LEARNER and self.kind in TUTOR_ONLY:
            raise DialogueError(f"{self.kind} is a tutor-only act")
        if self.actor == TUTOR and self.kind in LEARNER_ONLY:
            raise DialogueError(f"{self.kind} is a learner-only act")
        cats = [c for c, _ in self.slots]
        if len(set(cats)) != len(cats):
            raise DialogueError("duplicate category in slots")
        for c, _ in self.slots:
            if c not in CATEGORIES:
                raise DialogueError(f"unknown category {c!r}")
        if list(self.slots) != sorted(self.slots, key=lambda p: CATEGORIES.index(p[0])):
            raise DialogueError("slots must be in canonical category order")
        if self.kind in _NO_SLOTS and self.slots:
            raise DialogueError(f"{self.kind} carries no slots")
        if self.kind in _WORD_REQUIRED:
            if not self.slots or any(w is None for _, w in self.slots):
                raise DialogueError(f"{self.kind} requires (category, word) slots")
        if self.kind in _NO_WORDS and any(w is not None for _, w in self.slots):
            raise DialogueError(f"{self.kind} carries categories but no words")
        if self.kind == "Ask" and not self.slots:
            raise DialogueError("Ask must name at least one category")

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.slots)

    def word(self, category: str) -> str | None:
        for c, w in self.slots:
            if c == category:
                return w
        return None

    def tag(self) -> str:
        """Table-style annotation tag, e.g. ``Inform(colour:red&shape:square)``."""
        parts = []
        for c, w in self.slots:
            parts.append(c if w is None else f"{c}:{w}")
        return f"{self.kind}({'&'.join(parts)})"


def slots_for(categories, words=None) -> tuple[tuple[str, str | None], ...]:
    """Build a canonical slots tuple from categories and an optional word map."""
    words = words or {}
    cats = sorted(set(categories), key=CATEGORIES.index)
    return tuple((c, words.get(c)) for c in cats)


_TAG_RE = re.compile(r"^([A-Za-z]+)\((.*)\)$")


def parse_act_tag(tag: str, actor: str) -> DialogueAct:
    """Parse an annotation tag like ``Ask(colour&shape)`` into an act."""
    m = _TAG_RE.match(tag.strip())
    if not m:
        raise DialogueError(f"malformed act tag: {tag!r}")
    kind, body = m.group(1), m.group(2).strip()
    slots = []
    if body:
        for part in body.split("&"):
            part = part.strip()
            if ":" in part:
                c, w = part.split(":", 1)
                slots.append((c.strip(), w.strip()))
            else:
                slots.append((part, None))
    slots.sort(key=lambda p: CATEGORIES.index(p[0]) if p[0] in CATEGORIES else 99)
    return DialogueAct(actor=actor, kind=kind, slots=tuple(slots))


def parse_turn_tag(tag: str, actor: str) -> tuple[DialogueAct, ...]:
    """Parse a ``+``-joined sequence of act tags (one annotated turn)."""
    return tuple(parse_act_tag(part, actor) for part in tag.split("+"))


def turn_tag(acts) -> str:
    return "+".join(a.tag() for a in acts)


@dataclass
class Turn:
    actor: str
    acts: tuple[DialogueAct, ...]
    utterance: str


@dataclass
class DialogueContext:
    """Bookkeeping for one dialogue about one object.

    ``discussed`` and ``provided`` only ever grow within a dialogue;
    ``provided_words`` remembers which word the tutor asserted or confirmed
    per category, ``pending_question`` which categories the tutor awaits an
    answer on, and ``pending_claim`` the learner's last unconfirmed
    statement/polar words.
    """

    object_id: int
    turns: list[Turn] = field(default_factory=list)
    discussed: dict[str, bool] = field(default_factory=dict)
    provided: dict[str, bool] = field(default_factory=dict)
    provided_words: dict[str, str] = field(default_factory=dict)
    pending_question: dict[str, bool] = field(default_factory=dict)
    pending_claim: dict[str, str] = field(default_factory=dict)

    def discussed_categories(self) -> tuple[str, ...]:
        return tuple(c for c in CATEGORIES if self.discussed.get(c))

    def provided_categories(self) -> tuple[str, ...]:
        return tuple(c for c in CATEGORIES if self.provided.get(c))

    def last_turn(self, actor: str) -> Turn | None:
        for turn in reversed(self.turns):
            if turn.actor == actor:
                return turn
        return None


def update_context(ctx: DialogueContext, actor: str, acts, utterance: str) -> DialogueContext:
    """Append one turn and update the derived dialogue state in place."""
    acts = tuple(acts)
    ctx.turns.append(Turn(actor, acts, utterance))
    for act in acts:
        for c in act.categories:
            ctx.discussed[c] = True
    if actor == TUTOR:
        for act in acts:
            if act.kind == "Inform":
                for c, w in act.slots:
                    ctx.provided[c] = True
                    ctx.provided_words[c] = w
                    ctx.pending_claim.pop(c, None)
            elif act.kind == "Ack":
                confirmed = act.categories or tuple(ctx.pending_claim)
                for c in confirmed:
                    if c in ctx.pending_claim:
                        ctx.provided[c] = True
                        ctx.provided_words[c] = ctx.pending_claim.pop(c)
            elif act.kind == "Reject":
                rejected = act.categories or tuple(ctx.pending_claim)
                for c in rejected:
                    ctx.pending_claim.pop(c, None)
            elif act.kind == "Ask":
                for c in act.categories:
                    ctx.pending_question[c] = True
    else:
        for act in acts:
            if act.kind in ("Inform", "Polar"):
                for c, w in act.slots:
                    ctx.pending_claim[c] = w
                    ctx.pending_question.pop(c, None)
            elif act.kind in ("Ask", "DoNotKnow"):
                for c in act.categories:
                    ctx.pending_question.pop(c, None)
            elif act.kind == "HelpRequest":
                ctx.pending_question.clear()
    return ctx


_PUNCT_RE = re.compile(r"[^\w\s]")


def _tokens(text: str) -> tuple[str, ...]:
    return tuple(_PUNCT_RE.sub(" ", text.lower().replace("'", "")).split())


_PLACEHOLDER_RE = re.compile(r"(\{colour\}|\{shape\})")


@dataclass(frozen=True)
class Template:
    """One utterance template for a (possibly composite) act sequence."""

    actor: str
    signature: tuple[tuple[str, tuple[tuple[str, bool], ...]], ...]
    weight: float
    text: str

    @property
    def pattern(self) -> tuple[str, ...]:
        toks = []
        for piece in _PLACEHOLDER_RE.split(self.text):
            if piece == "{colour}":
                toks.append("\x00colour")
            elif piece == "{shape}":
                toks.append("\x00shape")
            else:
                toks.extend(_tokens(piece))
        return tuple(toks)


def _signature(acts) -> tuple:
    """Lexicon key for an act sequence: kinds plus slot shapes (word-bearing or not)."""
    return tuple(
        (a.kind, tuple((c, w is not None) for c, w in a.slots)) for a in acts
    )


def _signature_tag(sig) -> str:
    parts = []
    for kind, slots in sig:
        inner = "&".join(c + (":W" if has_word else "") for c, has_word in slots)
        parts.append(f"{kind}({inner})")
    return "+".join(parts)


def signature_from_tag(tag: str, actor: str) -> tuple:
    acts = []
    for part in tag.split("+"):
        m = _TAG_RE.match(part.strip())
        if not m:
            raise DialogueError(f"malformed signature tag: {part!r}")
        kind, body = m.group(1), m.group(2).strip()
        slots = []
        if body:
            for piece in body.split("&"):
                piece = piece.strip()
                if piece.endswith(":W"):
                    slots.append((piece[:-2], True))
                else:
                    slots.append((piece, False))
        slots.sort(key=lambda p: CATEGORIES.index(p[0]) if p[0] in CATEGORIES else 99)
        acts.append((kind, tuple(slots)))
    return tuple(acts)


class TemplateLexicon:
    """Weighted utterance templates plus per-word surface forms."""

    def __init__(self, inventory: AttributeInventory | None = None):
        self.inventory = inventory or AttributeInventory()
        self.templates: dict[tuple, list[Template]] = {}
        # canonical word -> surface forms (first one is used for generation)
        self.surface: dict[str, list[str]] = {w: [w] for w in self.inventory.all_words}
        self._parse_cache: tuple | None = None

    def add_template(self, actor: str, signature_tag: str, weight: float, text: str) -> None:
        sig = signature_from_tag(signature_tag, actor)
        tpl = Template(actor, sig, weight, text)
        self.templates.setdefault((actor, sig), []).append(tpl)
        self._parse_cache = None

    def add_surface(self, word: str, form: str) -> None:
        if word not in self.surface:
            raise DialogueError(f"surface form for unknown word {word!r}")
        if form not in self.surface[word]:
            self.surface[word].append(form)
        self._parse_cache = None

    def set_surface(self, word: str, forms: list[str]) -> None:
        """Replace surface forms (e.g. to switch to a made-up-word lexicon)."""
        if word not in self.surface:
            raise DialogueError(f"surface form for unknown word {word!r}")
        self.surface[word] = list(forms)
        self._parse_cache = None

    # --- generation -----------------------------------------------------

    def _fill(self, text: str, acts) -> str:
        for act in acts:
            for c, w in act.slots:
                if w is not None:
                    text = text.replace("{%s}" % c, self.surface[w][0], 1)
        return text

    def generate_turn(self, acts, rng: np.random.Generator) -> str:
        """Render an act sequence, greedily matching the longest known
        sequence prefix and joining the segments."""
        acts = tuple(acts)
        if not acts:
            return ""
        actor = acts[0].actor
        if all(a.kind == "Listen" for a in acts):
            return ""
        pieces = []
        i = 0
        while i < len(acts):
            match = None
            for j in range(len(acts), i, -1):
                sig = _signature(acts[i:j])
                if (actor, sig) in self.templates:
                    match = (j, self.templates[(actor, sig)])
                    break
            if match is None:
                raise DialogueError(
                    f"no template for {turn_tag(acts[i:])!r} ({actor})"
                )
            j, candidates = match
            weights = np.array([t.weight for t in candidates], dtype=float)
            idx = int(rng.choice(len(candidates), p=weights / weights.sum()))
            pieces.append(self._fill(candidates[idx].text, acts[i:j]))
            i = j
        return " ".join(pieces)

    def generate(self, act: DialogueAct, rng: np.random.Generator) -> str:
        return self.generate_turn((act,), rng)

    # --- parsing --------------------------------------------------------

    def _surface_index(self) -> dict[str, list[tuple[tuple[str, ...], str]]]:
        index = {}
        for category in CATEGORIES:
            forms = []
            for w in self.inventory.words(category):
                for f in self.surface[w]:
                    forms.append((_tokens(f), w))
            forms.sort(key=lambda fw: -len(fw[0]))
            index[category] = forms
        return index

    def _match(self, pattern, tokens, pos, surface_index):
        """Try to match a template pattern at ``pos``; yields (end, (category, word) pairs)."""
        words = []
        for pat_tok in pattern:
            if pat_tok.startswith("\x00"):
                category = pat_tok[1:]
                for form_tokens, word in surface_index[category]:
                    if tokens[pos:pos + len(form_tokens)] == form_tokens:
                        words.append((category, word))
                        pos += len(form_tokens)
                        break
                else:
                    return None
            else:
                if pos < len(tokens) and tokens[pos] == pat_tok:
                    pos += 1
                else:
                    return None
        return pos, words

    def _instantiate(self, template: Template, words, actor: str) -> tuple[DialogueAct, ...]:
        by_category: dict[str, list[str]] = {}
        for c, w in words:
            by_category.setdefault(c, []).append(w)
        acts = []
        for kind, slot_shape in template.signature:
            slots = []
            for c, has_word in slot_shape:
                slots.append((c, by_category[c].pop(0) if has_word else None))
            acts.append(DialogueAct(actor=actor, kind=kind, slots=tuple(slots)))
        return tuple(acts)

    def parse(self, utterance: str, actor: str = TUTOR) -> tuple[DialogueAct, ...]:
        """Longest-match template parse; ``()`` means no-parse.

        Empty or whitespace-only input parses to a Listen act.  Composite
        turns parse to a sequence of acts.
        """
        tokens = _tokens(utterance)
        if not tokens:
            return (DialogueAct(actor=actor, kind="Listen"),)
        if self._parse_cache is None:
            by_actor = {}
            for (a, _), tpls in self.templates.items():
                for tpl in tpls:
                    by_actor.setdefault(a, []).append((tpl, tpl.pattern))
            for lst in by_actor.values():
                lst.sort(key=lambda e: -len(e[1]))
            self._parse_cache = (by_actor, self._surface_index())
        by_actor, surface_index = self._parse_cache
        entries = by_actor.get(actor, [])

        def parse_from(pos: int):
            if pos == len(tokens):
                return ()
            for tpl, pattern in entries:
                if not pattern:
                    continue
                m = self._match(pattern, tokens, pos, surface_index)
                if m is None:
                    continue
                end, words = m
                rest = parse_from(end)
                if rest is not None:
                    return self._instantiate(tpl, words, actor) + rest
            return None

        result = parse_from(0)
        return result if result is not None else ()


def load_lexicon(path_or_lines, inventory: AttributeInventory | None = None) -> TemplateLexicon:
    """Load a lexicon from the documented line format.

    Lines (``|``-separated, ``#`` comments ignored):
        template|<actor>|<act signature>|<weight>|<template text>
        surface|<canonical word>|<surface form>
    Act signatures use annotation-tag syntax with ``:W`` marking a
    word-bearing slot, e.g. ``Reject()+Inform(colour:W)``.
    """
    if isinstance(path_or_lines, (list, tuple)):
        lines = path_or_lines
    else:
        with open(path_or_lines, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    lex = TemplateLexicon(inventory)
    for i, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if parts[0] == "template":
            if len(parts) != 5:
                raise DialogueError(f"line {i}: template lines need 5 fields")
            _, actor, sig, weight, text = parts
            lex.add_template(actor, sig, float(weight), text)
        elif parts[0] == "surface":
            if len(parts) != 3:
                raise DialogueError(f"line {i}: surface lines need 3 fields")
            lex.add_surface(parts[1], parts[2])
        else:
            raise DialogueError(f"line {i}: unknown lexicon line kind {parts[0]!r}")
    return lex


def default_lexicon(inventory: AttributeInventory | None = None) -> TemplateLexicon:
    """The lexicon shipped with the package (English surface forms)."""
    text = resources.files("grounder.data").joinpath("lexicon_default.txt").read_text("utf-8")
    return load_lexicon(text.splitlines(), inventory)
