import pytest

from voxbot.interpreter import load_dances
from voxbot.memory import MemoryStore
from voxbot.parser import Grammar, default_profanity
from voxbot.tasks import TaskStack
from voxbot.world import BlockRegistry, Location, VoxelWorld, make_flat_world


@pytest.fixture(scope="session")
def grammar():
    return Grammar.default()


@pytest.fixture(scope="session")
def registry():
    return BlockRegistry.default()


def small_world(bounds=(16, 12, 16), ground=4) -> VoxelWorld:
    return make_flat_world(bounds, ground)


class FakeAssistant:
    """Offline stand-in for the agent: enough surface for dialogue tests."""

    def __init__(self, world=None, speaker_pos=None, agent_pos=None):
        self.world = world if world is not None else small_world((32, 70, 32), 4)
        self.memory = MemoryStore()
        self.registry = BlockRegistry.default()
        self.grammar = Grammar.default()
        self.dances = load_dances()
        self.task_stack = TaskStack(self.memory)
        self.said = []
        self.step_no = 0
        self._speaker_pos = Location(*(speaker_pos or (2, 4, 2)))
        self._speaker_look = (0.0, 0.0)
        self._agent_pos = Location(*(agent_pos or (4, 4, 4)))

    def say(self, text):
        self.said.append(text)

    def push_task(self, task):
        self.task_stack.push(task)

    def speaker_position(self, name):
        return self._speaker_pos

    def speaker_look(self, name):
        return self._speaker_look

    def agent_position(self):
        return self._agent_pos

    def agent_look(self):
        return (0.0, 0.0)


def drive_stack(stack, actor, max_steps=10000):
    """Run the task stack until it drains (or the step budget runs out)."""
    steps = 0
    while len(stack) and steps < max_steps:
        stack.step_top(actor)
        steps += 1
    return steps


def net_cycle(server, clients, rounds=1):
    """One deterministic poll/tick/pump round for loopback sessions."""
    for _ in range(rounds):
        server.poll()
        server.tick()
        for c in clients:
            c.pump()
