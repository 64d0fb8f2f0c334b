"""Interruptible tasks executed from a LIFO stack.

Every task advances by one bounded increment per step (at most one block
mutation or one move), so the stack can be paused indefinitely between steps
and interleaved with dialogue. Tasks mutate the world only through their
actor and keep every change record in an undo log; a task may push a child
task (a far-away Build pushes a Move first) and resumes when the child pops.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from . import pathfind
from .world import (
    AIR,
    BlockId,
    ChangeRecord,
    Location,
    OutOfBounds,
    Schematic,
    VoxelWorld,
    chebyshev,
)

PENDING = "pending"
RUNNING = "running"
BLOCKED = "blocked-on-child"
FINISHED = "finished"
INTERRUPTED = "interrupted"

# Agent must stand within this Chebyshev distance to place or break a voxel.
PLACEMENT_RANGE = 4
LOOP_CAP = 1000


class LocalActor:
    """Direct world mutation, for offline task execution and tests."""

    def __init__(self, world: VoxelWorld, position: Location, look=(0.0, 0.0)):
        self.world = world
        self.position = Location(*position)
        self.look = tuple(look)
        self.said: list[str] = []

    def move_step(self, loc) -> None:
        self.position = Location(*loc)

    def set_block(self, loc, block: BlockId) -> ChangeRecord:
        return self.world.set_block(loc, block, "agent")

    def spawn_mob(self, kind: str, loc) -> None:
        x, y, z = loc
        self.world.spawn_mob(kind, (x + 0.5, float(y), z + 0.5))

    def say(self, text: str) -> None:
        self.said.append(text)


class StepCtx:
    def __init__(self, stack: "TaskStack", actor):
        self.stack = stack
        self.actor = actor

    @property
    def world(self) -> VoxelWorld:
        return self.actor.world

    def push_child(self, child: "Task") -> None:
        parent = self.stack.top()
        if parent is not None:
            parent.status = BLOCKED
        self.stack.push(child, _resume=False)


class Task:
    kind = "task"

    def __init__(self):
        self.status = PENDING
        self.undo_log: list[ChangeRecord] = []
        self.memory_id: int | None = None
        self._done = False

    @property
    def done(self) -> bool:
        return self._done

    def finish(self) -> None:
        self._done = True
        self.status = FINISHED

    def abort(self) -> None:
        self._done = True
        self.status = INTERRUPTED

    def advance(self, ctx: StepCtx) -> None:
        if self._done:
            return  # finished tasks ignore further steps
        self.status = RUNNING
        self.step(ctx)

    def step(self, ctx: StepCtx) -> None:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.status}>"


class TaskStack:
    """LIFO stack; only the topmost unfinished task makes progress."""

    def __init__(self, memory=None):
        self._items: list[Task] = []
        self.memory = memory
        self.paused = False
        self.step_no = 0
        self.completed = 0
        self.interrupted = 0

    def __len__(self) -> int:
        return len(self._items)

    def tasks(self) -> list[Task]:
        return list(self._items)

    def top(self) -> Task | None:
        return self._items[-1] if self._items else None

    def push(self, task: Task, _resume: bool = True) -> None:
        if _resume:
            self.paused = False  # a fresh command implies "go"
        if self.memory is not None:
            task.memory_id = self.memory.record_task(task.kind, self.step_no)
        self._items.append(task)

    def step_top(self, actor) -> None:
        self.step_no += 1
        if self.paused:
            return
        self._pop_done()
        task = self.top()
        if task is None:
            return
        task.advance(StepCtx(self, actor))
        self._pop_done()

    def _pop_done(self) -> None:
        while self._items and self._items[-1].done:
            task = self._items.pop()
            if task.status == FINISHED:
                self.completed += 1
            else:
                self.interrupted += 1
            if self.memory is not None and task.memory_id is not None:
                self.memory.record_task_transition(task.memory_id, task.status, self.step_no)
                if task.undo_log:
                    self.memory.set_task_undo_log(task.memory_id, task.undo_log)

    def interrupt(self) -> None:
        """Pause the stack (chat command "stop"); the top task keeps its state."""
        self.paused = True
        task = self.top()
        if task is not None and not task.done:
            task.status = INTERRUPTED
            self.interrupted += 1
            if self.memory is not None and task.memory_id is not None:
                self.memory.record_task_transition(task.memory_id, INTERRUPTED, self.step_no)

    def resume(self) -> None:
        self.paused = False
        task = self.top()
        if task is not None and not task.done and task.status == INTERRUPTED:
            task.status = RUNNING


def _within_reach(actor, loc) -> bool:
    return chebyshev(actor.position, Location(*loc)) <= PLACEMENT_RANGE


class _ReachingTask(Task):
    """Shared helper: walk into placement range before touching a voxel.

    Returns True from `_reach` when the actor is in range; otherwise pushes a
    child Move (at most once per target voxel) and returns False. A second
    failure for the same voxel aborts the task to avoid a livelock.
    """

    def __init__(self):
        super().__init__()
        self._move_attempted: Location | None = None

    def _reach(self, ctx: StepCtx, loc) -> bool:
        loc = Location(*loc)
        if _within_reach(ctx.actor, loc):
            self._move_attempted = None
            return True
        if self._move_attempted == loc:
            ctx.actor.say("i can 't reach that spot")
            self.abort()
            return False
        self._move_attempted = loc
        ctx.push_child(Move(loc, stop_within=PLACEMENT_RANGE - 1))
        return False


class Move(Task):
    kind = "Move"

    def __init__(self, target, stop_within: int = 0, allow_modify: bool = False):
        super().__init__()
        self.target = Location(*target)
        self.stop_within = stop_within
        self.allow_modify = allow_modify
        self._plan: list | None = None
        self.failed = False

    def step(self, ctx: StepCtx) -> None:
        pos = ctx.actor.position
        if chebyshev(pos, self.target) <= self.stop_within:
            self.finish()
            return
        if self._plan is None or not self._plan:
            self._plan = pathfind.plan_path(
                ctx.world, pos, self.target,
                allow_modify=self.allow_modify, stop_within=self.stop_within,
            )
            if self._plan is None:
                self.failed = True
                ctx.actor.say("i can 't find a way there")
                self.finish()
                return
            if not self._plan:
                self.finish()
                return
        kind, loc = self._plan[0]
        if kind == pathfind.BREAK:
            self._plan.pop(0)
            if not ctx.world.get_block(loc).is_air:
                self.undo_log.append(ctx.actor.set_block(loc, AIR))
            return
        # one move step; replan if the cell was filled since planning
        if not ctx.world.get_block(loc).is_air:
            self._plan = None
            return
        self._plan.pop(0)
        ctx.actor.move_step(loc)


class Build(_ReachingTask):
    kind = "Build"

    def __init__(self, schematic: Schematic, origin, name_hint: str | None = None):
        super().__init__()
        self.schematic = schematic
        self.origin = Location(*origin)
        self.name_hint = name_hint
        self._queue: list[tuple[Location, BlockId]] | None = None
        self.placed: list[Location] = []

    def step(self, ctx: StepCtx) -> None:
        if self._queue is None:
            self._queue = [
                (self.origin.offset(*off), b) for off, b in self.schematic.items()
            ]
        while self._queue and not ctx.world.in_bounds(self._queue[0][0]):
            self._queue.pop(0)
        if not self._queue:
            self._register(ctx)
            self.finish()
            return
        loc, block = self._queue[0]
        if not self._reach(ctx, loc):
            return
        self._queue.pop(0)
        self.undo_log.append(ctx.actor.set_block(loc, block))
        self.placed.append(loc)

    def _register(self, ctx: StepCtx) -> None:
        memory = ctx.stack.memory
        if memory is None or not self.placed:
            return
        mid, _ = memory.upsert_block_object(frozenset(self.placed), "agent")
        if self.name_hint:
            memory.insert_triple(mid, "has_name", self.name_hint)
        memory.insert_triple(mid, "created_by", "agent")


class Destroy(_ReachingTask):
    kind = "Destroy"

    def __init__(self, positions, object_memory_id: int | None = None):
        super().__init__()
        # top-down order so the hole opens from above
        self._queue = sorted(
            (Location(*p) for p in positions),
            key=lambda l: (-l.y, l.z, l.x),
        )
        self.object_memory_id = object_memory_id

    def step(self, ctx: StepCtx) -> None:
        while self._queue and (
            not ctx.world.in_bounds(self._queue[0])
            or ctx.world.get_block(self._queue[0]).is_air
        ):
            self._queue.pop(0)
        if not self._queue:
            if self.object_memory_id is not None and ctx.stack.memory is not None:
                ctx.stack.memory.archive_object(self.object_memory_id)
            self.finish()
            return
        loc = self._queue[0]
        if not self._reach(ctx, loc):
            return
        self._queue.pop(0)
        self.undo_log.append(ctx.actor.set_block(loc, AIR))


class Dig(_ReachingTask):
    kind = "Dig"

    def __init__(self, corner, size: tuple[int, int, int]):
        super().__init__()
        cx, cy, cz = Location(*corner)
        sx, sy, sz = size
        # box extends +x and +z from the corner and digs downward from its y
        self._queue = [
            Location(cx + i, cy - j, cz + k)
            for j in range(sy)
            for k in range(sz)
            for i in range(sx)
        ]

    def step(self, ctx: StepCtx) -> None:
        while self._queue and (
            not ctx.world.in_bounds(self._queue[0])
            or ctx.world.get_block(self._queue[0]).is_air
        ):
            self._queue.pop(0)
        if not self._queue:
            self.finish()
            return
        loc = self._queue[0]
        if not self._reach(ctx, loc):
            return
        self._queue.pop(0)
        self.undo_log.append(ctx.actor.set_block(loc, AIR))


def is_hole_voxel(world: VoxelWorld, loc) -> bool:
    """Air voxel lying below the surface of most of its four neighbor columns."""
    loc = Location(*loc)
    if not world.in_bounds(loc) or not world.get_block(loc).is_air:
        return False
    above = 0
    for dx, dz in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        x, z = loc.x + dx, loc.z + dz
        if not world.in_bounds((x, 0, z)):
            continue
        if world.surface_level(x, z) > loc.y:
            above += 1
    return above >= 3


def find_hole(world: VoxelWorld, near, radius: int = 4) -> list[Location]:
    """Hole voxels around `near`: the seed column and its neighborhood."""
    nx, ny, nz = Location(*near)
    out = []
    sx, sy, sz = world.bounds
    for x in range(max(0, nx - radius), min(sx, nx + radius + 1)):
        for z in range(max(0, nz - radius), min(sz, nz + radius + 1)):
            top = world.surface_level(x, z)
            for y in range(0, min(top + radius, sy)):
                loc = Location(x, y, z)
                if is_hole_voxel(world, loc):
                    out.append(loc)
    return sorted(out, key=lambda l: (l.y, l.z, l.x))


def hole_fill_material(world: VoxelWorld, holes) -> BlockId:
    """Most common block adjacent to the hole set; ties to the lowest id."""
    counts: Counter[BlockId] = Counter()
    hole_set = set(holes)
    for loc in holes:
        for n in loc.neighbors6():
            if n in hole_set or not world.in_bounds(n):
                continue
            b = world.get_block(n)
            if not b.is_air:
                counts[b] += 1
    if not counts:
        return BlockId(3)  # nothing solid nearby: default to dirt
    best = max(counts.items(), key=lambda kv: (kv[1], (-kv[0].id, -kv[0].meta)))
    return best[0]


class Fill(_ReachingTask):
    kind = "Fill"

    def __init__(self, location):
        super().__init__()
        self.location = Location(*location)
        self._queue: list[Location] | None = None
        self._material: BlockId | None = None

    def step(self, ctx: StepCtx) -> None:
        if self._queue is None:
            self._queue = find_hole(ctx.world, self.location)
            if not self._queue:
                ctx.actor.say("i don 't see a hole here")
                self.finish()
                return
            self._material = hole_fill_material(ctx.world, self._queue)
        while self._queue and not ctx.world.get_block(self._queue[0]).is_air:
            self._queue.pop(0)
        if not self._queue:
            self.finish()
            return
        loc = self._queue[0]
        if not self._reach(ctx, loc):
            return
        self._queue.pop(0)
        self.undo_log.append(ctx.actor.set_block(loc, self._material))


class Spawn(Task):
    kind = "Spawn"

    def __init__(self, mob_kind: str, loc):
        super().__init__()
        self.mob_kind = mob_kind
        self.loc = Location(*loc)

    def step(self, ctx: StepCtx) -> None:
        ctx.actor.spawn_mob(self.mob_kind, self.loc)
        self.finish()


class Dance(Task):
    kind = "Dance"

    def __init__(self, moves: list[tuple[int, int, int]]):
        super().__init__()
        self._moves = list(moves)
        self._i = 0

    def step(self, ctx: StepCtx) -> None:
        if self._i >= len(self._moves):
            self.finish()
            return
        dx, dy, dz = self._moves[self._i]
        self._i += 1
        target = ctx.actor.position.offset(dx, dy, dz)
        if ctx.world.in_bounds(target) and ctx.world.get_block(target).is_air:
            ctx.actor.move_step(target)


class Undo(_ReachingTask):
    kind = "Undo"

    def __init__(self, records: list[ChangeRecord], label: str = "task"):
        super().__init__()
        self._queue = [r if isinstance(r, ChangeRecord) else ChangeRecord.from_json(r)
                       for r in reversed(records)]
        self.label = label

    def step(self, ctx: StepCtx) -> None:
        if not self._queue:
            self.finish()
            return
        rec = self._queue[0]
        if not self._reach(ctx, rec.loc):
            return
        self._queue.pop(0)
        if ctx.world.in_bounds(rec.loc):
            self.undo_log.append(ctx.actor.set_block(rec.loc, rec.old))


# -- loops ---------------------------------------------------------------------

class StopCondition:
    """Pure predicate over (world, loop state)."""

    def met(self, world: VoxelWorld, loop: "Loop") -> bool:
        raise NotImplementedError


class Never(StopCondition):
    def met(self, world, loop) -> bool:
        return False


class DepthReached(StopCondition):
    def __init__(self, depth: int):
        self.depth = depth

    def met(self, world, loop) -> bool:
        return loop.iteration >= self.depth


class BlockTypeHit(StopCondition):
    """True when the loop's probe location holds the given block id."""

    def __init__(self, block_id: int, probe):
        self.block_id = block_id
        self.probe = probe  # iteration -> Location

    def met(self, world, loop) -> bool:
        loc = self.probe(loop.iteration)
        try:
            return world.get_block(loc).id == self.block_id
        except OutOfBounds:
            return True  # ran off the world: nothing left to hit


class Loop(Task):
    kind = "Loop"

    def __init__(self, stop_condition: StopCondition, body_factory, cap: int = LOOP_CAP):
        super().__init__()
        self.stop_condition = stop_condition
        self.body_factory = body_factory  # iteration -> Task
        self.cap = cap
        self.iteration = 0

    def step(self, ctx: StepCtx) -> None:
        if self.stop_condition.met(ctx.world, self):
            self.finish()
            return
        if self.iteration >= self.cap:
            self.abort()
            return
        body = self.body_factory(self.iteration)
        self.iteration += 1
        ctx.push_child(body)


def dig_down_loop(world: VoxelWorld, column: Location, stop_block_id: int | None,
                  cap: int = LOOP_CAP) -> Loop:
    """Loop that removes the column under `column` one voxel per iteration,
    stopping when the next voxel down is the given block type."""
    x, _, z = Location(*column)
    top = world.surface_level(x, z) - 1  # first solid voxel of the column

    def probe(i: int) -> Location:
        return Location(x, top - i, z)

    def body(i: int) -> Task:
        return Dig(probe(i), (1, 1, 1))

    cond = BlockTypeHit(stop_block_id, probe) if stop_block_id is not None else Never()
    return Loop(cond, body, cap=cap)
