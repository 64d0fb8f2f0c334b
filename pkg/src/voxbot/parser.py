"""Template-grammar semantic parser: chat text to action dictionaries.

An action dictionary is a plain JSON-style dict, one of four dialogue types
(HUMAN_GIVE_COMMAND, GET_MEMORY, PUT_MEMORY, NOOP). Words from the input are
referenced as spans `[sentence_index, [start, end]]` rather than copied, so
the vocabulary stays open. The parser is a pure function of the text: it
tokenizes, tries grammar templates longest-first, and falls back to NOOP.
The same grammar drives `generate`, which emits (dialogue, dictionary) pairs
whose parse round-trips exactly.
"""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass
from importlib import resources

DIALOGUE_TYPES = ("HUMAN_GIVE_COMMAND", "GET_MEMORY", "PUT_MEMORY", "NOOP")
ACTION_TYPES = (
    "MOVE", "BUILD", "DESTROY", "DIG", "FILL", "SPAWN",
    "DANCE", "UNDO", "LOOP", "STOP", "RESUME",
)
LOCATION_TYPES = ("REFERENCE_OBJECT", "COORDINATES", "SPEAKER_POS", "AGENT_POS")
ANSWER_TYPES = ("NAME", "LOCATION", "COUNT")
RELATIVE_DIRECTIONS = ("LEFT", "RIGHT", "FRONT", "BACK", "UP", "DOWN")
CONDITION_TYPES = ("BLOCK_TYPE", "DEPTH", "NEVER")

NOOP = {"dialogue_type": "NOOP"}


class GrammarError(Exception):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase tokens: runs of letters/digits, or single punctuation chars."""
    tokens: list[str] = []
    word = []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        else:
            if word:
                tokens.append("".join(word))
                word = []
            if not ch.isspace():
                tokens.append(ch)
    if word:
        tokens.append("".join(word))
    return tokens


def tokenize_dialogue(dialogue: list[str]) -> list[list[str]]:
    return [tokenize(s) for s in dialogue]


def is_punct(token: str) -> bool:
    return len(token) == 1 and not token.isalnum()


def span(sentence_index: int, start: int, end: int) -> list:
    return [sentence_index, [start, end]]


def span_words(sentences: list[list[str]], sp) -> list[str]:
    si, (a, b) = sp
    return sentences[si][a : b + 1]


@dataclass(frozen=True)
class Slot:
    type: str
    name: str


@dataclass
class Template:
    pattern: list  # str literals and Slot entries
    skeleton: dict
    order: int

    @property
    def length(self) -> int:
        return len(self.pattern)

    def match(self, tokens: list[str], lexicons: dict[str, list[str]]) -> dict[str, int] | None:
        if len(tokens) != len(self.pattern):
            return None
        bound: dict[str, int] = {}
        for i, part in enumerate(self.pattern):
            tok = tokens[i]
            if isinstance(part, str):
                if tok != part:
                    return None
            elif part.type == "num":
                if not tok.isdigit():
                    return None
                bound[part.name] = i
            elif part.type == "word":
                bound[part.name] = i
            elif tok in lexicons.get(part.type, ()):
                bound[part.name] = i
            else:
                return None
        return bound

    def fill(self, sentence_index: int, bound: dict[str, int]) -> dict:
        def subst(node):
            if isinstance(node, dict):
                return {k: subst(v) for k, v in node.items()}
            if isinstance(node, list):
                return [subst(v) for v in node]
            if isinstance(node, str) and node.startswith("$"):
                i = bound[node[1:]]
                return span(sentence_index, i, i)
            return node

        return subst(copy.deepcopy(self.skeleton))

    def slot_names(self) -> set[str]:
        return {p.name for p in self.pattern if isinstance(p, Slot)}


class Grammar:
    """Template set plus the word lexicons the slots draw from."""

    def __init__(self, templates: list[Template], lexicons: dict[str, list[str]]):
        self.templates = templates
        self.lexicons = lexicons
        self._ordered = sorted(templates, key=lambda t: (-t.length, t.order))

    def ordered_templates(self) -> list[Template]:
        return self._ordered

    def first_words(self) -> set[str]:
        """First literal token of each template; used to spot command-like chat."""
        out = set()
        for t in self.templates:
            if t.pattern and isinstance(t.pattern[0], str):
                out.add(t.pattern[0])
        return out

    @classmethod
    def loads(cls, text: str) -> "Grammar":
        lexicons: dict[str, list[str]] = {}
        templates: list[Template] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("!lex"):
                parts = line.split()
                if len(parts) < 3:
                    raise GrammarError(f"line {lineno}: !lex needs a type and words")
                lexicons[parts[1]] = parts[2:]
                continue
            if "=>" not in line:
                raise GrammarError(f"line {lineno}: expected 'PATTERN => SKELETON'")
            pat_text, skel_text = line.split("=>", 1)
            pattern: list = []
            for tok in pat_text.split():
                if tok.startswith("$"):
                    body = tok[1:]
                    typ, _, name = body.partition(":")
                    pattern.append(Slot(typ, name or typ))
                else:
                    pattern.append(tok)
            try:
                skeleton = json.loads(skel_text)
            except json.JSONDecodeError as e:
                raise GrammarError(f"line {lineno}: bad skeleton JSON: {e}") from None
            t = Template(pattern, skeleton, len(templates))
            placeholders = _placeholders(skeleton)
            if placeholders != t.slot_names():
                raise GrammarError(
                    f"line {lineno}: slots {sorted(t.slot_names())} do not match "
                    f"skeleton placeholders {sorted(placeholders)}"
                )
            for part in pattern:
                if isinstance(part, Slot) and part.type not in ("num", "word") and part.type not in lexicons:
                    raise GrammarError(f"line {lineno}: no lexicon for slot type {part.type!r}")
            probe = t.fill(0, {n: 0 for n in t.slot_names()})
            bad = validate(probe)
            if bad:
                raise GrammarError(f"line {lineno}: skeleton fails schema: {bad}")
            templates.append(t)
        if not templates:
            raise GrammarError("grammar has no templates")
        return cls(templates, lexicons)

    @classmethod
    def load(cls, path) -> "Grammar":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())

    @classmethod
    def default(cls) -> "Grammar":
        text = resources.files("voxbot.data").joinpath("grammar.txt").read_text("utf-8")
        return cls.loads(text)


def _placeholders(node) -> set[str]:
    if isinstance(node, dict):
        return set().union(*(_placeholders(v) for v in node.values())) if node else set()
    if isinstance(node, list):
        return set().union(*(_placeholders(v) for v in node)) if node else set()
    if isinstance(node, str) and node.startswith("$"):
        return {node[1:]}
    return set()


def parse(dialogue: list[str], grammar: Grammar | None = None) -> dict:
    """Parse a dialogue (list of sentences) into an action dictionary.

    The most recent sentence is matched; no template match means NOOP.
    """
    grammar = grammar or _default_grammar()
    sentences = tokenize_dialogue(dialogue)
    if not sentences:
        return dict(NOOP)
    si = len(sentences) - 1
    tokens = sentences[si]
    end = len(tokens)
    while end > 0 and is_punct(tokens[end - 1]):
        end -= 1
    if end == 0:
        return dict(NOOP)
    view = tokens[:end]
    for template in grammar.ordered_templates():
        bound = template.match(view, grammar.lexicons)
        if bound is not None:
            return template.fill(si, bound)
    return dict(NOOP)


def generate(grammar: Grammar, seed: int, n: int) -> list[tuple[list[str], dict]]:
    """Deterministically sample n (dialogue, action dictionary) pairs."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not grammar.templates:
        raise GrammarError("cannot generate from an empty grammar")
    rng = random.Random(seed)
    pairs = []
    for _ in range(n):
        t = rng.choice(grammar.templates)
        tokens: list[str] = []
        bound: dict[str, int] = {}
        for part in t.pattern:
            if isinstance(part, str):
                tokens.append(part)
            else:
                if part.type == "num":
                    word = str(rng.randint(0, 63))
                else:
                    word = rng.choice(grammar.lexicons[part.type])
                bound[part.name] = len(tokens)
                tokens.append(word)
        pairs.append(([" ".join(tokens)], t.fill(0, bound)))
    return pairs


# -- schema validation --------------------------------------------------------

def _is_span(v) -> bool:
    return (
        isinstance(v, (list, tuple))
        and len(v) == 2
        and isinstance(v[0], int)
        and v[0] >= 0
        and isinstance(v[1], (list, tuple))
        and len(v[1]) == 2
        and all(isinstance(i, int) for i in v[1])
        and 0 <= v[1][0] <= v[1][1]
    )


def _check_span(v, path, out, sentences):
    if isinstance(v, str) and v.startswith("$"):
        return  # unfilled template placeholder, allowed pre-parse
    if not _is_span(v):
        out.append(f"{path}: not a span")
        return
    if sentences is not None:
        si, (a, b) = v
        if si >= len(sentences):
            out.append(f"{path}: sentence index {si} out of range")
        elif b >= len(sentences[si]):
            out.append(f"{path}: word range [{a}, {b}] exceeds sentence length")


def _check_ref(node, path, out, sentences):
    if not isinstance(node, dict):
        out.append(f"{path}: expected an attribute dict")
        return
    for k, v in node.items():
        if not k.startswith("has_"):
            out.append(f"{path}.{k}: unknown attribute key")
        else:
            _check_span(v, f"{path}.{k}", out, sentences)


def _check_location(node, path, out, sentences):
    if not isinstance(node, dict):
        out.append(f"{path}: expected a dict")
        return
    lt = node.get("location_type")
    if lt not in LOCATION_TYPES:
        out.append(f"{path}.location_type: unknown value {lt!r}")
        return
    allowed = {"location_type"}
    if lt == "REFERENCE_OBJECT":
        allowed |= {"reference_object", "relative_direction", "relative_to"}
        if "reference_object" not in node:
            out.append(f"{path}: missing reference_object")
        else:
            _check_ref(node["reference_object"], f"{path}.reference_object", out, sentences)
        if "relative_direction" in node:
            if node["relative_direction"] not in RELATIVE_DIRECTIONS:
                out.append(f"{path}.relative_direction: unknown value")
            if "relative_to" not in node:
                out.append(f"{path}: relative_direction without relative_to")
            else:
                _check_ref(node["relative_to"], f"{path}.relative_to", out, sentences)
        elif "relative_to" in node:
            out.append(f"{path}: relative_to without relative_direction")
    elif lt == "COORDINATES":
        allowed |= {"coordinates"}
        coords = node.get("coordinates")
        if not isinstance(coords, dict) or set(coords) != {"x", "y", "z"}:
            out.append(f"{path}.coordinates: expected x, y, z spans")
        else:
            for axis in ("x", "y", "z"):
                _check_span(coords[axis], f"{path}.coordinates.{axis}", out, sentences)
    for k in node:
        if k not in allowed:
            out.append(f"{path}.{k}: unknown key")


def _check_stop_condition(node, path, out, sentences):
    if not isinstance(node, dict):
        out.append(f"{path}: expected a dict")
        return
    ct = node.get("condition_type")
    if ct not in CONDITION_TYPES:
        out.append(f"{path}.condition_type: unknown value {ct!r}")
        return
    if ct == "BLOCK_TYPE":
        if "block_type" not in node:
            out.append(f"{path}: missing block_type")
        else:
            _check_span(node["block_type"], f"{path}.block_type", out, sentences)
    if ct == "DEPTH":
        if "depth" not in node:
            out.append(f"{path}: missing depth")
        else:
            _check_span(node["depth"], f"{path}.depth", out, sentences)


def _check_action(node, path, out, sentences):
    if not isinstance(node, dict):
        out.append(f"{path}: expected a dict")
        return
    at = node.get("action_type")
    if at is None:
        out.append(f"{path}: missing action_type")
        return
    if at not in ACTION_TYPES:
        out.append(f"{path}.action_type: unknown value {at!r}")
        return
    allowed = {"action_type", "location", "schematic", "reference_object", "stop_condition", "repeat"}
    if at == "LOOP":
        allowed.add("body")
    for k in node:
        if k not in allowed:
            out.append(f"{path}.{k}: unknown key")
    if "location" in node:
        _check_location(node["location"], f"{path}.location", out, sentences)
    if "schematic" in node:
        _check_ref(node["schematic"], f"{path}.schematic", out, sentences)
    if "reference_object" in node:
        _check_ref(node["reference_object"], f"{path}.reference_object", out, sentences)
    if "stop_condition" in node:
        _check_stop_condition(node["stop_condition"], f"{path}.stop_condition", out, sentences)
    if "repeat" in node:
        rep = node["repeat"]
        if not isinstance(rep, dict) or rep.get("repeat_key") != "FOR" or "repeat_count" not in rep:
            out.append(f"{path}.repeat: expected repeat_key FOR with repeat_count")
        else:
            _check_span(rep["repeat_count"], f"{path}.repeat.repeat_count", out, sentences)
    if "body" in node:
        _check_action(node["body"], f"{path}.body", out, sentences)


def validate(dictionary: dict, dialogue: list[str] | None = None) -> list[str]:
    """Return schema violations (empty when the dictionary is well-formed)."""
    out: list[str] = []
    sentences = tokenize_dialogue(dialogue) if dialogue is not None else None
    if not isinstance(dictionary, dict):
        return ["root: not a dict"]
    dt = dictionary.get("dialogue_type")
    if dt not in DIALOGUE_TYPES:
        return [f"dialogue_type: unknown value {dt!r}"]
    if dt == "HUMAN_GIVE_COMMAND":
        if "action" not in dictionary:
            out.append("root: missing action")
        else:
            _check_action(dictionary["action"], "action", out, sentences)
        extra = set(dictionary) - {"dialogue_type", "action"}
    elif dt == "GET_MEMORY":
        if dictionary.get("answer_type") not in ANSWER_TYPES:
            out.append("answer_type: unknown value")
        if "filters" not in dictionary:
            out.append("root: missing filters")
        else:
            _check_ref(dictionary["filters"], "filters", out, sentences)
        extra = set(dictionary) - {"dialogue_type", "answer_type", "filters"}
    elif dt == "PUT_MEMORY":
        if "filters" not in dictionary:
            out.append("root: missing filters")
        else:
            _check_ref(dictionary["filters"], "filters", out, sentences)
        upsert = dictionary.get("upsert")
        if not isinstance(upsert, dict) or "has_tag" not in upsert:
            out.append("upsert: expected {has_tag: span}")
        else:
            _check_span(upsert["has_tag"], "upsert.has_tag", out, sentences)
            for k in upsert:
                if k != "has_tag":
                    out.append(f"upsert.{k}: unknown key")
        extra = set(dictionary) - {"dialogue_type", "filters", "upsert"}
    else:  # NOOP
        extra = set(dictionary) - {"dialogue_type"}
    for k in sorted(extra):
        out.append(f"root.{k}: unknown key")
    return out


def load_wordlist(path) -> frozenset[str]:
    """Newline-delimited word list (profanity etc); `#` comments allowed."""
    words = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            w = line.strip().lower()
            if w and not w.startswith("#"):
                words.add(w)
    return frozenset(words)


def default_profanity() -> frozenset[str]:
    text = resources.files("voxbot.data").joinpath("profanity.txt").read_text("utf-8")
    return frozenset(
        w.strip().lower()
        for w in text.splitlines()
        if w.strip() and not w.startswith("#")
    )


_GRAMMAR_CACHE: Grammar | None = None


def _default_grammar() -> Grammar:
    global _GRAMMAR_CACHE
    if _GRAMMAR_CACHE is None:
        _GRAMMAR_CACHE = Grammar.default()
    return _GRAMMAR_CACHE
