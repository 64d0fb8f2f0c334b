"""Dialogue objects that turn action dictionaries into tasks and replies.

Reference objects are resolved against memory (tags, names) plus perception
heuristics (colour, size, relative direction). Ambiguity on destructive
commands raises a clarification question; elsewhere the candidate nearest
the speaker wins. Schematic names map to a small library of parametric
shapes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

from . import perception, tasks
from .dialogue import ConfirmReferenceObject, DialogueObject
from .memory import KIND_BLOCK_OBJECT, KIND_MOB
from .parser import span_words
from .world import BlockId, Location, MOB_KINDS, Schematic, euclidean

# Chat words for block materials -> registry names.
BLOCK_WORDS = {
    "stone": "stone",
    "dirt": "dirt",
    "grass": "grass",
    "cobblestone": "cobblestone",
    "planks": "planks",
    "bedrock": "bedrock",
    "sand": "sand",
    "wood": "oak_wood",
    "leaves": "leaves",
    "glass": "glass",
    "lapis": "lapis_block",
    "sandstone": "sandstone",
    "wool": "white_wool",
    "gold": "gold_block",
    "iron": "iron_block",
    "brick": "brick_block",
    "obsidian": "obsidian",
    "diamond": "diamond_block",
}

# Size adjective -> primary dimension for built schematics; chosen to land
# inside the same adjective's perception range so built objects keep their
# described size.
SIZE_DIMENSION = {"tiny": 2, "small": 3, "medium": 6, "big": 11, "huge": 15}

DEFAULT_MATERIAL = BlockId(5)  # planks


def load_dances(path=None) -> dict[str, list[tuple[int, int, int]]]:
    """Dance registry: `name dx,dy,dz ...` per line."""
    if path is None:
        text = resources.files("voxbot.data").joinpath("dances.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    dances: dict[str, list[tuple[int, int, int]]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        moves = []
        for step in parts[1:]:
            dx, dy, dz = (int(v) for v in step.split(","))
            moves.append((dx, dy, dz))
        dances[parts[0]] = moves
    return dances


# -- schematic library -----------------------------------------------------------


def _solid_cube(n: int, m: BlockId) -> dict:
    return {(x, y, z): m for x in range(n) for y in range(n) for z in range(n)}


def _hollow_box(w: int, h: int, d: int, m: BlockId) -> dict:
    out = {}
    for x in range(w):
        for y in range(h):
            for z in range(d):
                if x in (0, w - 1) or y in (0, h - 1) or z in (0, d - 1):
                    out[(x, y, z)] = m
    return out


def _house(w: int, h: int, d: int, m: BlockId) -> dict:
    out = {}
    for x in range(w):
        for z in range(d):
            out[(x, h - 1, z)] = m  # flat roof
            for y in range(h - 1):
                if x in (0, w - 1) or z in (0, d - 1):
                    out[(x, y, z)] = m
    # door gap on the z=0 face
    door_x = w // 2
    for y in (0, 1):
        out.pop((door_x, y, 0), None)
    return out


def _wall(w: int, h: int, m: BlockId) -> dict:
    return {(x, y, 0): m for x in range(w) for y in range(h)}


def _tower(h: int, m: BlockId) -> dict:
    return {(0, y, 0): m for y in range(h)}


def _sphere(r: int, m: BlockId) -> dict:
    out = {}
    c = r
    for x in range(2 * r + 1):
        for y in range(2 * r + 1):
            for z in range(2 * r + 1):
                if math.dist((x, y, z), (c, c, c)) <= r + 0.49:
                    out[(x, y, z)] = m
    return out


def _pyramid(n: int, m: BlockId) -> dict:
    out = {}
    y = 0
    while n > 0:
        off = y
        for x in range(n):
            for z in range(n):
                out[(off + x, y, off + z)] = m
        n -= 2
        y += 1
    return out


def build_schematic(
    name: str,
    material: BlockId = DEFAULT_MATERIAL,
    primary: int | None = None,
    width: int | None = None,
    height: int | None = None,
    depth: int | None = None,
) -> Schematic | None:
    """Parametric shape library; None when the name is not a known shape."""
    p = primary
    if name == "cube":
        return Schematic.of_blocks(_solid_cube(p or width or 3, material))
    if name == "box":
        n = p or width or 3
        return Schematic.of_blocks(_hollow_box(n, n, n, material))
    if name == "wall":
        return Schematic.of_blocks(_wall(width or p or 4, height or 3, material))
    if name == "tower":
        return Schematic.of_blocks(_tower(height or p or 5, material))
    if name == "sphere":
        r = max(1, (p or width or 4) // 2)
        return Schematic.of_blocks(_sphere(r, material))
    if name == "pyramid":
        return Schematic.of_blocks(_pyramid(p or width or 5, material))
    if name == "house":
        n = p or width or 5
        return Schematic.of_blocks(_house(n, max(3, (height or n - 1)), depth or n, material))
    if name in ("shed", "hut"):
        n = p or width or (4 if name == "shed" else 3)
        return Schematic.of_blocks(_house(n, height or 3, depth or n, material))
    if name == "barn":
        n = p or width or 6
        return Schematic.of_blocks(_house(n, height or 4, depth or n, material))
    return None


# -- reference resolution -----------------------------------------------------------


@dataclass
class Candidate:
    memory_id: int
    kind: str
    positions: frozenset
    names: list[str] = field(default_factory=list)
    colour: str | None = None

    @property
    def repr_loc(self) -> Location:
        return Location(*min(self.positions, key=lambda p: (p[1], p[2], p[0])))

    def nearest_to(self, pos) -> Location:
        return Location(*min(self.positions, key=lambda p: (euclidean(p, pos), (p[1], p[2], p[0]))))

    def label(self) -> str:
        name = self.names[0] if self.names else ("mob" if self.kind == KIND_MOB else "thing")
        colour = f"{self.colour} " if self.colour else ""
        x, y, z = self.repr_loc
        return f"the {colour}{name} at ( {x} , {y} , {z} )"


def _collect_candidates(assistant) -> list[Candidate]:
    memory = assistant.memory
    out = []
    for obj in memory.query([], kind=KIND_BLOCK_OBJECT):
        names, colour = _names_and_colour(assistant, obj.memory_id)
        positions = obj.payload["positions"]
        if colour is None and positions:
            colour = perception.infer_colour(assistant.world, positions, assistant.registry)
        out.append(Candidate(obj.memory_id, obj.kind, frozenset(positions), names, colour))
    for obj in memory.query([], kind=KIND_MOB):
        names, colour = _names_and_colour(assistant, obj.memory_id)
        kind_word = obj.payload.get("mob_kind")
        if kind_word and kind_word not in names:
            names.append(kind_word)
        x, y, z = obj.payload.get("position", (0, 0, 0))
        pos = frozenset({Location(int(x), int(y), int(z))})
        out.append(Candidate(obj.memory_id, obj.kind, pos, names, colour))
    return out


def _names_and_colour(assistant, memory_id: int):
    names: list[str] = []
    colour = None
    for t in assistant.memory.triples_of(memory_id):
        if t.predicate in ("has_name", "has_tag") and isinstance(t.obj, str):
            if t.obj not in names:
                names.append(t.obj)
        elif t.predicate == "has_colour" and isinstance(t.obj, str):
            colour = t.obj
    return names, colour


def resolve_reference(assistant, ref: dict, sentences, speaker: str) -> list[Candidate]:
    """Filter memory objects by the reference dict's attribute spans.

    Filter order: name tags, then colour, then size. Candidates come back
    sorted nearest-to-speaker first.
    """
    word = lambda key: (
        " ".join(span_words(sentences, ref[key])) if key in ref else None
    )
    name = word("has_name")
    colour = word("has_colour")
    size = word("has_size")
    cands = _collect_candidates(assistant)
    if name:
        cands = [c for c in cands if name in c.names]
    if colour:
        cands = [c for c in cands if c.colour == colour]
    if size:
        cands = [c for c in cands if c.positions and perception.match_size(size, c.positions)]
    origin = _speaker_loc(assistant, speaker)
    cands.sort(key=lambda c: (euclidean(c.repr_loc, origin), c.memory_id))
    return cands


def _speaker_loc(assistant, speaker: str) -> Location:
    pos = assistant.speaker_position(speaker)
    return pos if pos is not None else assistant.agent_position()


def _speaker_yaw(assistant, speaker: str) -> float:
    getter = getattr(assistant, "speaker_look", None)
    if getter is not None:
        look = getter(speaker)
        if look is not None:
            return look[0]
    return 0.0


def apply_relative_direction(assistant, location: dict, cands: list, sentences, speaker: str):
    direction = location.get("relative_direction")
    if not direction or not cands:
        return cands
    anchors = resolve_reference(assistant, location.get("relative_to", {}), sentences, speaker)
    if not anchors:
        return []
    anchor = anchors[0].repr_loc
    best = perception.resolve_relative_direction(
        anchor,
        direction,
        _speaker_loc(assistant, speaker),
        _speaker_yaw(assistant, speaker),
        [(c, c.repr_loc) for c in cands],
    )
    return [best] if best is not None else []


# -- the interpreter ------------------------------------------------------------------


class Interpreter(DialogueObject):
    kind = "Interpreter"

    def __init__(self, dictionary: dict, sentences, speaker: str):
        super().__init__()
        self.dictionary = dictionary
        self.sentences = sentences
        self.speaker = speaker
        self._confirm: ConfirmReferenceObject | None = None
        self._confirm_done = False

    # helpers ---------------------------------------------------------------

    def _word(self, node: dict, key: str) -> str | None:
        if not isinstance(node, dict) or key not in node:
            return None
        return " ".join(span_words(self.sentences, node[key]))

    def _int(self, node: dict, key: str) -> int | None:
        w = self._word(node, key)
        if w is None:
            return None
        try:
            return int(w)
        except ValueError:
            return None

    def child_done(self, child: DialogueObject) -> None:
        if child is self._confirm:
            self._confirm_done = True

    def _ask_which(self, ctx, cands: list[Candidate]) -> None:
        shown = cands[:3]
        options = " ".join(f"( {i + 1} ) {c.label()}" for i, c in enumerate(shown))
        question = f"i see {len(cands)} of those . which one do you mean ? {options}"
        self._confirm = ConfirmReferenceObject(question, shown)
        self._confirm_done = False
        ctx.push(self._confirm)

    def step(self, ctx) -> None:
        action = self.dictionary.get("action") or {}
        at = action.get("action_type")
        handler = getattr(self, f"_do_{at.lower()}", None) if at else None
        if handler is None:
            ctx.say("sorry , i can 't do that yet")
            self.finished = True
            return
        if handler(ctx, action):
            self.finished = True

    # location resolution ------------------------------------------------------

    def _resolve_location(self, ctx, action: dict, destructive: bool = False):
        """Returns (status, value): ("loc", Location), ("object", Candidate),
        ("confirm", None) while clarifying, ("fail", None) after replying."""
        a = ctx.assistant
        location = action.get("location")
        if location is None:
            return ("none", None)
        lt = location.get("location_type")
        if lt == "COORDINATES":
            coords = location.get("coordinates", {})
            vals = [self._int(coords, axis) for axis in ("x", "y", "z")]
            if None in vals:
                ctx.say("i didn 't catch those coordinates")
                return ("fail", None)
            loc = Location(*vals)
            if not a.world.in_bounds(loc):
                ctx.say("that spot is outside the world")
                return ("fail", None)
            return ("loc", loc)
        if lt == "SPEAKER_POS":
            return ("loc", _speaker_loc(a, self.speaker))
        if lt == "AGENT_POS":
            return ("loc", a.agent_position())
        if lt == "REFERENCE_OBJECT":
            got = self._resolve_object(ctx, location.get("reference_object", {}),
                                       destructive, location=location)
            return got
        ctx.say("i don 't understand that location")
        return ("fail", None)

    def _resolve_object(self, ctx, ref: dict, destructive: bool, location: dict | None = None):
        if self._confirm is not None:
            if not self._confirm_done:
                return ("confirm", None)
            if self._confirm.cancelled or self._confirm.result is None:
                return ("fail", None)  # cancel is silent; reparse may follow
            return ("object", self._confirm.result)
        a = ctx.assistant
        cands = resolve_reference(a, ref, self.sentences, self.speaker)
        if location is not None:
            cands = apply_relative_direction(a, location, cands, self.sentences, self.speaker)
        if not cands:
            what = self._word(ref, "has_name") or self._word(ref, "has_colour") or "that"
            ctx.say(f"i don 't know of any {what} here")
            return ("fail", None)
        if len(cands) > 1 and destructive:
            self._ask_which(ctx, cands)
            return ("confirm", None)
        return ("object", cands[0])  # nearest to the speaker

    # actions -----------------------------------------------------------------

    def _do_move(self, ctx, action) -> bool:
        a = ctx.assistant
        status, value = self._resolve_location(ctx, action)
        if status == "confirm":
            return False
        if status == "fail":
            return True
        if status == "none":
            ctx.say("where should i go ?")
            return True
        if status == "object":
            target = value.nearest_to(a.agent_position())
            ctx.push_task(tasks.Move(target, stop_within=1))
        else:
            loc_dict = action.get("location", {})
            stop = 0 if loc_dict.get("location_type") == "COORDINATES" else 1
            ctx.push_task(tasks.Move(value, stop_within=stop))
        ctx.say("on my way")
        return True

    def _do_build(self, ctx, action) -> bool:
        a = ctx.assistant
        schematic_dict = action.get("schematic", {})
        name = self._word(schematic_dict, "has_name") or "cube"
        material = DEFAULT_MATERIAL
        colour = self._word(schematic_dict, "has_colour")
        block_word = self._word(schematic_dict, "has_block_type")
        if colour:
            options = a.registry.blocks_of_color(colour)
            if options:
                material = options[0]
        elif block_word and block_word in BLOCK_WORDS:
            block = a.registry.by_name(BLOCK_WORDS[block_word])
            if block is not None:
                material = block
        size_word = self._word(schematic_dict, "has_size")
        primary = SIZE_DIMENSION.get(size_word) if size_word else None
        schematic = build_schematic(
            name,
            material,
            primary=primary,
            width=self._int(schematic_dict, "has_width"),
            height=self._int(schematic_dict, "has_height"),
            depth=self._int(schematic_dict, "has_length") or self._int(schematic_dict, "has_depth"),
        )
        if schematic is None or len(schematic) == 0:
            ctx.say(f"i don 't know how to build a {name} . what does it look like ?")
            return True
        status, value = self._resolve_location(ctx, action)
        if status == "confirm":
            return False
        if status == "fail":
            return True
        exact = status == "loc" and action.get("location", {}).get("location_type") == "COORDINATES"
        if status == "none":
            base = self._in_front_of_agent(a, dist=2)
        elif status == "object":
            base = value.repr_loc
        else:
            base = value
        if status == "loc" and action.get("location", {}).get("location_type") == "SPEAKER_POS":
            base = Location(base.x + 2, base.y, base.z)
        origin = base if exact else self._on_ground(a, base)
        origin = self._fit_origin(a, origin, schematic)
        if origin is None:
            ctx.say("there is no room to build that here")
            return True
        ctx.push_task(tasks.Build(schematic, origin, name_hint=name))
        ctx.say(f"ok , building a {name}")
        return True

    def _do_destroy(self, ctx, action) -> bool:
        status, value = self._resolve_object(
            ctx, action.get("reference_object", {}), destructive=True
        )
        if status == "confirm":
            return False
        if status == "fail":
            return True
        cand: Candidate = value
        if cand.kind != KIND_BLOCK_OBJECT:
            ctx.say("i can only destroy built things")
            return True
        ctx.push_task(tasks.Destroy(cand.positions, cand.memory_id))
        ctx.say("ok , destroying it")
        return True

    def _do_dig(self, ctx, action) -> bool:
        a = ctx.assistant
        status, value = self._resolve_location(ctx, action)
        if status == "confirm":
            return False
        if status == "fail":
            return True
        if status == "object":
            base = value.repr_loc
        elif status == "none":
            base = a.agent_position()
        else:
            base = value
        if action.get("location", {}).get("location_type") == "SPEAKER_POS":
            base = Location(base.x + 2, base.y, base.z)
        schematic_dict = action.get("schematic", {})
        w = self._int(schematic_dict, "has_width") or 1
        l = self._int(schematic_dict, "has_length") or 1
        d = self._int(schematic_dict, "has_depth") or 1
        top = a.world.surface_level(base.x, base.z) - 1
        if top < 0:
            ctx.say("there is nothing to dig there")
            return True
        ctx.push_task(tasks.Dig(Location(base.x, top, base.z), (w, d, l)))
        ctx.say("ok , digging")
        return True

    def _do_fill(self, ctx, action) -> bool:
        a = ctx.assistant
        status, value = self._resolve_location(ctx, action)
        if status == "confirm":
            return False
        if status == "fail":
            return True
        base = value if status == "loc" else (
            value.repr_loc if status == "object" else a.agent_position()
        )
        ctx.push_task(tasks.Fill(base))
        ctx.say("ok , filling it in")
        return True

    def _do_spawn(self, ctx, action) -> bool:
        a = ctx.assistant
        kind = self._word(action.get("reference_object", {}), "has_name")
        if kind not in MOB_KINDS:
            ctx.say(f"i don 't know how to spawn a {kind}")
            return True
        status, value = self._resolve_location(ctx, action)
        if status == "confirm":
            return False
        if status == "fail":
            return True
        if status == "loc":
            loc = value
        else:
            loc = self._on_ground(a, self._in_front_of_agent(a, dist=2))
        ctx.push_task(tasks.Spawn(kind, loc))
        ctx.say(f"ok , spawning a {kind}")
        return True

    def _do_dance(self, ctx, action) -> bool:
        a = ctx.assistant
        name = self._word(action.get("reference_object", {}), "has_name") or "square"
        moves = a.dances.get(name)
        if not moves:
            ctx.say(f"i don 't know the {name} dance")
            return True
        ctx.push_task(tasks.Dance(moves))
        ctx.say("time to dance !")
        return True

    def _do_undo(self, ctx, action) -> bool:
        a = ctx.assistant
        record = a.memory.last_undoable_task()
        if record is None:
            ctx.say("there is nothing to undo")
            return True
        ctx.push_task(tasks.Undo(record.payload["undo_log"], record.payload["task_kind"]))
        ctx.say(f"undoing that {record.payload['task_kind'].lower()}")
        return True

    def _do_stop(self, ctx, action) -> bool:
        ctx.assistant.task_stack.interrupt()
        ctx.say("ok , stopping")
        return True

    def _do_resume(self, ctx, action) -> bool:
        ctx.assistant.task_stack.resume()
        ctx.say("resuming")
        return True

    def _do_loop(self, ctx, action) -> bool:
        a = ctx.assistant
        body = action.get("body", {})
        if body.get("action_type") != "DIG":
            ctx.say("i only know how to loop digging")
            return True
        column = a.agent_position()
        cond_dict = action.get("stop_condition", {"condition_type": "NEVER"})
        ct = cond_dict.get("condition_type")
        if ct == "BLOCK_TYPE":
            word = self._word(cond_dict, "block_type")
            reg_name = BLOCK_WORDS.get(word)
            block = a.registry.by_name(reg_name) if reg_name else None
            if block is None:
                ctx.say(f"i don 't know the block {word}")
                return True
            ctx.push_task(tasks.dig_down_loop(a.world, column, block.id))
            ctx.say(f"ok , digging until i hit {word}")
            return True
        x, _, z = column
        top = a.world.surface_level(x, z) - 1
        probe = lambda i: Location(x, top - i, z)
        body_factory = lambda i: tasks.Dig(probe(i), (1, 1, 1))
        if ct == "DEPTH":
            depth = self._int(cond_dict, "depth") or 1
            ctx.push_task(tasks.Loop(tasks.DepthReached(depth), body_factory))
        else:
            ctx.push_task(tasks.Loop(tasks.Never(), body_factory))
        ctx.say("ok , digging down")
        return True

    # geometry helpers ------------------------------------------------------------

    def _in_front_of_agent(self, a, dist: int = 2) -> Location:
        pos = a.agent_position()
        yaw = 0.0
        look = getattr(a, "agent_look", None)
        if callable(look):
            yaw = look()[0]
        fx, _, fz = perception.look_vector(yaw, 0.0)
        return Location(pos.x + round(fx * dist), pos.y, pos.z + round(fz * dist))

    def _on_ground(self, a, loc: Location) -> Location:
        sx, _, sz = a.world.bounds
        x = min(max(loc.x, 0), sx - 1)
        z = min(max(loc.z, 0), sz - 1)
        return Location(x, a.world.surface_level(x, z), z)

    def _fit_origin(self, a, origin: Location, schematic: Schematic) -> Location | None:
        sx, sy, sz = a.world.bounds
        w, h, d = schematic.size
        if w > sx or h > sy or d > sz:
            return None
        x = min(max(origin.x, 0), sx - w)
        y = min(max(origin.y, 0), sy - h)
        z = min(max(origin.z, 0), sz - d)
        return Location(x, y, z)


class GetMemoryHandler(DialogueObject):
    kind = "GetMemoryHandler"

    def __init__(self, dictionary: dict, sentences, speaker: str):
        super().__init__()
        self.dictionary = dictionary
        self.sentences = sentences
        self.speaker = speaker

    def step(self, ctx) -> None:
        a = ctx.assistant
        cands = resolve_reference(a, self.dictionary.get("filters", {}), self.sentences, self.speaker)
        answer_type = self.dictionary.get("answer_type", "NAME")
        if answer_type == "COUNT":
            ctx.say(f"i know of {len(cands)} things like that")
        elif not cands:
            ctx.say("i don 't know what that is")
        elif answer_type == "LOCATION":
            c = cands[0]
            x, y, z = c.repr_loc
            what = c.names[0] if c.names else "it"
            ctx.say(f"the {what} is at ( {x} , {y} , {z} )")
        else:  # NAME
            c = cands[0]
            if c.names:
                ctx.say(f"that is a {c.names[0]}")
            else:
                ctx.say("i don 't have a name for that yet")
        self.finished = True


class PutMemoryHandler(DialogueObject):
    kind = "PutMemoryHandler"

    def __init__(self, dictionary: dict, sentences, speaker: str):
        super().__init__()
        self.dictionary = dictionary
        self.sentences = sentences
        self.speaker = speaker

    def step(self, ctx) -> None:
        a = ctx.assistant
        self.finished = True
        tag = None
        upsert = self.dictionary.get("upsert", {})
        if "has_tag" in upsert:
            tag = " ".join(span_words(self.sentences, upsert["has_tag"]))
        if not tag:
            ctx.say("what should i call it ?")
            return
        cands = resolve_reference(a, self.dictionary.get("filters", {}), self.sentences, self.speaker)
        if not cands:
            ctx.say("i don 't see anything like that . can you stand next to it ?")
            return
        target = cands[0]  # nearest to the speaker
        a.memory.insert_triple(target.memory_id, "has_tag", tag)
        ctx.say(f"got it , that is a {tag}")
