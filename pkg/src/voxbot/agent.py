"""The assistant agent: mirrored world, dialogue, perception, task stepping.

One `step()` is one pass of the main loop: drain network events into the
mirror and memory, hand at most one queued chat to the dialogue manager,
refresh perception when due, then advance the topmost task by one increment.
Nothing in the loop depends on wall-clock time, so the agent can pause
between steps indefinitely and resume identically.
"""
from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass

from .client import WorldClient
from .dialogue import DialogueManager
from .protocol import BlockChange
from .interpreter import load_dances
from .memory import KIND_MOB, MemoryStore
from .parser import Grammar, default_profanity, load_wordlist
from .perception import refresh_block_objects
from .tasks import TaskStack
from .transport import SocketEndpoint
from .world import BlockId, BlockRegistry, Location

log = logging.getLogger(__name__)

PERCEPTION_EVERY = 5
RECONNECT_EVERY = 40


@dataclass
class AgentConfig:
    name: str = "bot"
    grammar_path: str | None = None
    profanity_path: str | None = None
    dances_path: str | None = None
    registry_path: str | None = None
    vicinity: int = 32
    raycast_only: bool = False  # honor the "no block map reads" play mode


class NetActor:
    """Task actor that sends effects to the server and mirrors them locally."""

    def __init__(self, agent: "Agent"):
        self.agent = agent

    @property
    def world(self):
        return self.agent.client.world

    @property
    def position(self) -> Location:
        return self.agent.agent_position()

    def move_step(self, loc) -> None:
        x, y, z = loc
        self.agent.client.move_to((float(x), float(y), float(z)))

    def set_block(self, loc, block: BlockId):
        self.agent.client.channel.send(BlockChange(Location(*loc), block, "agent"))
        record = self.world.set_block(loc, block, "agent")
        self.agent.perception_dirty = True
        return record

    def spawn_mob(self, kind: str, loc) -> None:
        self.agent.client.request_spawn(kind, loc)

    def say(self, text: str) -> None:
        self.agent.client.say(text)


class Agent:
    def __init__(self, endpoint, config: AgentConfig | None = None):
        self.config = config or AgentConfig()
        self.client = WorldClient(endpoint, self.config.name)
        self.memory = MemoryStore()
        self.task_stack = TaskStack(self.memory)
        self.registry = (
            BlockRegistry.load(self.config.registry_path)
            if self.config.registry_path
            else BlockRegistry.default()
        )
        self.grammar = (
            Grammar.load(self.config.grammar_path)
            if self.config.grammar_path
            else Grammar.default()
        )
        profanity = (
            load_wordlist(self.config.profanity_path)
            if self.config.profanity_path
            else default_profanity()
        )
        self.dances = load_dances(self.config.dances_path)
        self.dialogue = DialogueManager(self, self.grammar, profanity)
        self.actor = NetActor(self)
        self.pending_chats: deque[tuple[str, str]] = deque()
        self.step_no = 0
        self.perception_dirty = True
        self._reconnect_addr: tuple[str, int] | None = None
        self._known_mob_count = 0
        self.client.login()

    @classmethod
    def connect(cls, host: str, port: int, config: AgentConfig | None = None) -> "Agent":
        agent = cls(SocketEndpoint.connect(host, port), config)
        agent._reconnect_addr = (host, port)
        return agent

    # -- assistant interface used by the dialogue engine -------------------------

    @property
    def world(self):
        return self.client.world

    def say(self, text: str) -> None:
        self.client.say(text)

    def push_task(self, task) -> None:
        self.task_stack.push(task)

    def speaker_position(self, name: str) -> Location | None:
        pos = self.client.player_position(name)
        if pos is None:
            return None
        return Location(int(pos[0]), int(pos[1]), int(pos[2]))

    def speaker_look(self, name: str):
        if self.client.world is None:
            return None
        rec = self.client.world.players.get(name)
        return rec.look if rec else None

    def agent_position(self) -> Location:
        x, y, z = self.client.position
        return Location(int(x), int(y), int(z))

    def agent_look(self):
        return self.client.look

    # -- main loop ------------------------------------------------------------------

    def step(self) -> None:
        self.step_no += 1
        if not self.client.connected:
            self._try_reconnect()
            return
        for kind, msg in self.client.pump():
            if kind == "chat" and msg.speaker != self.config.name:
                self.pending_chats.append((msg.speaker, msg.text))
            elif kind == "block":
                self.perception_dirty = True
            elif kind == "mob":
                x, y, z = msg.loc
                self.memory.insert_object(
                    KIND_MOB, {"mob_kind": msg.kind, "position": (x, y, z)}
                )
            elif kind == "snapshot":
                self.perception_dirty = True
                self._register_snapshot_mobs()
        if self.world is None:
            return
        if self.pending_chats:
            speaker, text = self.pending_chats.popleft()
            self.dialogue.handle_chat(speaker, text)
        if self.perception_dirty or self.step_no % PERCEPTION_EVERY == 0:
            self._refresh_perception()
        self.task_stack.step_top(self.actor)

    def run(self, stop_check=None, max_steps: int | None = None, delay: float = 0.01) -> dict:
        """Step until stopped; returns session summary counts."""
        steps = 0
        while (stop_check is None or not stop_check()) and (
            max_steps is None or steps < max_steps
        ):
            self.step()
            steps += 1
            if delay:
                time.sleep(delay)
        return self.summary()

    def summary(self) -> dict:
        return {
            "steps": self.step_no,
            "chats_handled": self.dialogue.chats_handled,
            "tasks_completed": self.task_stack.completed,
            "tasks_interrupted": self.task_stack.interrupted,
        }

    # -- internals ----------------------------------------------------------------------

    def _register_snapshot_mobs(self) -> None:
        if self.world is None:
            return
        for mob_id in sorted(self.world.mobs):
            if mob_id <= self._known_mob_count:
                continue
            mob = self.world.mobs[mob_id]
            x, y, z = mob.position
            self.memory.insert_object(
                KIND_MOB, {"mob_kind": mob.kind, "position": (int(x), int(y), int(z))}
            )
            self._known_mob_count = mob_id

    def _refresh_perception(self) -> None:
        world = self.world
        if world is None:
            return
        self.perception_dirty = False
        pos = self.agent_position()
        r = self.config.vicinity
        sx, sy, sz = world.bounds
        region = (
            Location(max(0, pos.x - r), max(0, pos.y - r), max(0, pos.z - r)),
            Location(min(sx - 1, pos.x + r), min(sy - 1, pos.y + r), min(sz - 1, pos.z + r)),
        )
        refresh_block_objects(world, self.memory, region, self.registry)

    def _try_reconnect(self) -> None:
        if self._reconnect_addr is None or self.step_no % RECONNECT_EVERY != 0:
            return
        host, port = self._reconnect_addr
        try:
            endpoint = SocketEndpoint.connect(host, port, timeout=1.0)
        except OSError:
            return
        log.info("reconnected to %s:%d", host, port)
        self.client = WorldClient(endpoint, self.config.name)
        self.actor = NetActor(self)
        self.client.login()
        self.perception_dirty = True
