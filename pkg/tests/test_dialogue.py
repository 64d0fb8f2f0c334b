import pytest

from voxbot import tasks
from voxbot.dialogue import (
    REPLY_CONFUSED,
    REPLY_PROFANITY,
    AwaitResponse,
    ConfirmReferenceObject,
    DialogueManager,
)
from voxbot.interpreter import GetMemoryHandler, Interpreter, PutMemoryHandler
from voxbot.memory import KIND_BLOCK_OBJECT
from voxbot.parser import tokenize_dialogue
from voxbot.world import BlockId, Location

from conftest import FakeAssistant


def manager_for(assistant) -> DialogueManager:
    return DialogueManager(assistant)


def add_block_object(assistant, positions, tags=(), colour=None, place=True):
    mem = assistant.memory
    mid = mem.insert_object(
        KIND_BLOCK_OBJECT, {"positions": frozenset(Location(*p) for p in positions)}
    )
    for tag in tags:
        mem.insert_triple(mid, "has_tag", tag)
    if colour:
        mem.insert_triple(mid, "has_colour", colour)
    if place:
        for p in positions:
            if assistant.world.in_bounds(p):
                assistant.world.set_block(p, BlockId(35, 11), "player")
    return mid


class TestProfanityGate:
    def test_reply_and_no_side_effects(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        replies = mgr.handle_chat("alice", "build a damn house")
        assert replies == [REPLY_PROFANITY]
        assert mgr.parse_count == 0  # parser never called
        assert len(mgr.stack) == 0
        assert len(assistant.task_stack) == 0
        assert assistant.memory.chats_by("alice") == []  # nothing recorded


class TestInterpreterMove:
    def test_move_to_unique_tagged_referent(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        add_block_object(assistant, [(10, 4, 20)], tags=["house"], colour="blue")
        mgr.handle_chat("alice", "go to the blue house")
        assert len(assistant.task_stack) == 1
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Move)
        assert task.target == Location(10, 4, 20)
        assert assistant.said  # acknowledged

    def test_move_to_coordinates_passthrough(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "go to 5 6 5")
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Move)
        assert task.target == Location(5, 6, 5)
        assert task.stop_within == 0

    def test_come_here_targets_speaker(self):
        assistant = FakeAssistant(speaker_pos=(7, 4, 9))
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "come here")
        task = assistant.task_stack.top()
        assert task.target == Location(7, 4, 9)
        assert task.stop_within == 1

    def test_unknown_referent_apologizes(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "go to the barn")
        assert len(assistant.task_stack) == 0
        assert any("barn" in s for s in assistant.said)

    def test_nearest_wins_for_nondestructive_ambiguity(self):
        assistant = FakeAssistant(speaker_pos=(2, 4, 2))
        mgr = manager_for(assistant)
        add_block_object(assistant, [(4, 4, 4)], tags=["house"])
        add_block_object(assistant, [(20, 4, 20)], tags=["house"])
        mgr.handle_chat("alice", "go to the house")
        task = assistant.task_stack.top()
        assert task.target == Location(4, 4, 4)  # nearest to the speaker

    def test_relative_direction_filter(self):
        assistant = FakeAssistant(speaker_pos=(0, 4, 0))
        assistant._speaker_look = (0.0, 0.0)  # facing +x: left is +z
        mgr = manager_for(assistant)
        add_block_object(assistant, [(10, 4, 0)], tags=["house"])
        add_block_object(assistant, [(10, 4, 6)], tags=["barn"])
        add_block_object(assistant, [(10, 4, 28)], tags=["barn"])
        mgr.handle_chat("alice", "go to the barn to the left of the house")
        task = assistant.task_stack.top()
        assert task is not None
        assert task.target == Location(10, 4, 6)  # nearest barn in the +z half-space


class TestInterpreterBuild:
    def test_build_known_schematic(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a cube")
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Build)
        assert len(task.schematic) == 27
        assert any("building" in s for s in assistant.said)

    def test_build_unknown_schematic_asks(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a castle")
        assert len(assistant.task_stack) == 0
        assert any("castle" in s and "?" in s for s in assistant.said)

    def test_build_colour_picks_material(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a blue cube")
        task = assistant.task_stack.top()
        blocks = set(task.schematic.blocks.values())
        assert blocks == {BlockId(22, 0)}  # lowest blue block id

    def test_build_block_word_material(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a stone wall")
        task = assistant.task_stack.top()
        assert set(task.schematic.blocks.values()) == {BlockId(1, 0)}

    def test_build_with_dimensions(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a 5 x 2 wall")
        task = assistant.task_stack.top()
        assert task.schematic.size == (5, 2, 1)

    def test_build_at_coordinates(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a cube at 8 6 8")
        task = assistant.task_stack.top()
        assert task.origin == Location(8, 6, 8)


class TestClarification:
    def test_ambiguous_destroy_asks_then_resolves(self):
        assistant = FakeAssistant(speaker_pos=(2, 4, 2))
        mgr = manager_for(assistant)
        near = add_block_object(assistant, [(4, 4, 4)], tags=["house"])
        far = add_block_object(assistant, [(20, 4, 20)], tags=["house"])
        replies = mgr.handle_chat("alice", "destroy the house")
        assert any("which one" in r for r in replies)
        assert len(assistant.task_stack) == 0
        assert isinstance(mgr.stack.top(), AwaitResponse)
        # everything below the top must be blocked, not runnable
        below = mgr.stack.objects[:-1]
        assert all(isinstance(o, (Interpreter, ConfirmReferenceObject)) for o in below)
        mgr.handle_chat("alice", "the second one")
        assert len(mgr.stack) == 0
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Destroy)
        assert task.object_memory_id == far  # candidates listed nearest-first

    def test_yes_picks_nearest(self):
        assistant = FakeAssistant(speaker_pos=(2, 4, 2))
        mgr = manager_for(assistant)
        near = add_block_object(assistant, [(4, 4, 4)], tags=["house"])
        add_block_object(assistant, [(20, 4, 20)], tags=["house"])
        mgr.handle_chat("alice", "destroy the house")
        mgr.handle_chat("alice", "yes")
        task = assistant.task_stack.top()
        assert task.object_memory_id == near

    def test_no_cancels(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        add_block_object(assistant, [(4, 4, 4)], tags=["house"])
        add_block_object(assistant, [(20, 4, 20)], tags=["house"])
        mgr.handle_chat("alice", "destroy the house")
        mgr.handle_chat("alice", "no")
        assert len(mgr.stack) == 0
        assert len(assistant.task_stack) == 0

    def test_new_command_cancels_and_reparses(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        add_block_object(assistant, [(4, 4, 4)], tags=["house"])
        add_block_object(assistant, [(20, 4, 20)], tags=["house"])
        mgr.handle_chat("alice", "destroy the house")
        assert len(mgr.stack) > 0
        mgr.handle_chat("alice", "come here")
        assert len(mgr.stack) == 0
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Move)  # the new command ran instead

    def test_clarification_terminates_after_one_reply(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        add_block_object(assistant, [(4, 4, 4)], tags=["house"])
        add_block_object(assistant, [(20, 4, 20)], tags=["house"])
        mgr.handle_chat("alice", "destroy the house")
        mgr.handle_chat("alice", "1")
        assert len(mgr.stack) == 0  # nothing lingers


class TestGetMemory:
    def test_name_answer(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        add_block_object(assistant, [(4, 4, 4)], tags=["house"], colour="blue")
        replies = mgr.handle_chat("alice", "what is that blue thing")
        assert any("house" in r for r in replies)

    def test_count_zero_on_empty_memory(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        replies = mgr.handle_chat("alice", "how many blue things are there")
        assert any("0" in r for r in replies)

    def test_location_answer_has_coordinates(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mid = add_block_object(assistant, [(10, 4, 20)], tags=["shed"])
        replies = mgr.handle_chat("alice", "where is the shed")
        row = assistant.memory.get(mid)
        x, y, z = min(row.payload["positions"])
        joined = " ".join(replies)
        assert str(x) in joined and str(y) in joined and str(z) in joined

    def test_unknown_gives_dont_know(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        replies = mgr.handle_chat("alice", "what is that")
        assert any("know" in r for r in replies)


class TestPutMemory:
    def test_tags_unique_brown_object(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mid = add_block_object(assistant, [(4, 4, 4)], colour="brown")
        replies = mgr.handle_chat("alice", "that brown thing is a shed")
        tags = [t.obj for t in assistant.memory.triples_of(mid, "has_tag")]
        assert tags == ["shed"]
        assert any("shed" in r for r in replies)

    def test_idempotent_tagging(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mid = add_block_object(assistant, [(4, 4, 4)], colour="brown")
        mgr.handle_chat("alice", "that brown thing is a shed")
        mgr.handle_chat("alice", "that brown thing is a shed")
        tags = [t.obj for t in assistant.memory.triples_of(mid, "has_tag")]
        assert tags == ["shed"]

    def test_no_match_no_write(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        replies = mgr.handle_chat("alice", "that brown thing is a shed")
        assert any("see" in r or "?" in r for r in replies)
        assert assistant.memory.query([("has_tag", "shed")]) == []


class TestNoop:
    def test_imperative_looking_gets_polite_reply(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        replies = mgr.handle_chat("alice", "build me a wobbly flurble")
        assert replies == [REPLY_CONFUSED]

    def test_non_imperative_ignored(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        replies = mgr.handle_chat("alice", "the weather is nice")
        assert replies == []
        assert len(assistant.task_stack) == 0


class TestStopResumeUndo:
    def test_stop_interrupts_and_resume_continues(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a cube")
        mgr.handle_chat("alice", "stop")
        assert assistant.task_stack.paused
        assert assistant.task_stack.interrupted == 1
        mgr.handle_chat("alice", "resume")
        assert not assistant.task_stack.paused

    def test_undo_with_no_history(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        replies = mgr.handle_chat("alice", "undo")
        assert any("nothing to undo" in r for r in replies)

    def test_undo_after_finished_build(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "build a cube at 8 6 8")
        actor = tasks.LocalActor(assistant.world, Location(8, 8, 8))
        while len(assistant.task_stack):
            assistant.task_stack.step_top(actor)
        before = assistant.world.world_hash()
        mgr.handle_chat("alice", "undo")
        undo = assistant.task_stack.top()
        assert isinstance(undo, tasks.Undo)
        while len(assistant.task_stack):
            assistant.task_stack.step_top(actor)
        assert assistant.world.world_hash() != before  # cube removed


class TestLoopCommand:
    def test_dig_until_bedrock_pushes_loop(self):
        assistant = FakeAssistant(agent_pos=(4, 4, 4))
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "dig until you hit bedrock")
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Loop)

    def test_loop_executes_to_bedrock(self):
        assistant = FakeAssistant(agent_pos=(4, 4, 4))
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "dig until you hit bedrock")
        actor = tasks.LocalActor(assistant.world, Location(4, 4, 4))
        while len(assistant.task_stack):
            assistant.task_stack.step_top(actor)
        # ground is 4 tall with bedrock at y=0: three diggable layers
        for y in (1, 2, 3):
            assert assistant.world.get_block((4, y, 4)).is_air
        assert assistant.world.get_block((4, 0, 4)) == BlockId(7)


class TestSpawnDance:
    def test_spawn_sheep(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "spawn a sheep")
        assert isinstance(assistant.task_stack.top(), tasks.Spawn)

    def test_named_dance(self):
        assistant = FakeAssistant()
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "do the bounce dance")
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Dance)

    def test_dig_here(self):
        assistant = FakeAssistant(speaker_pos=(6, 4, 6))
        mgr = manager_for(assistant)
        mgr.handle_chat("alice", "dig a 2 x 2 hole")
        task = assistant.task_stack.top()
        assert isinstance(task, tasks.Dig)
