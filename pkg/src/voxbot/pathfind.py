"""Grid path planning for agent movement.

The agent occupies one voxel and moves one block per step along the six axis
directions (creative mode: vertical moves are free). A solid voxel can be
entered only after breaking it, and only when the planner is allowed to
modify the world. Costs: move 1, break 4, place 4; the admissible heuristic
is the per-axis excess over the allowed stopping distance, so plans are
optimal under this model.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

from .world import Location, VoxelWorld

COST_MOVE = 1
COST_BREAK = 4
COST_PLACE = 4

NODE_BUDGET = 200_000

MOVE = "move"
BREAK = "break"

# One planned step: (MOVE, loc) or (BREAK, loc).
Action = tuple[str, Location]


def plan_cost(plan: list[Action]) -> int:
    return sum(COST_MOVE if kind == MOVE else COST_BREAK for kind, _ in plan)


def _heuristic(pos: Location, goal: Location, stop_within: int) -> int:
    return (
        max(0, abs(pos.x - goal.x) - stop_within)
        + max(0, abs(pos.y - goal.y) - stop_within)
        + max(0, abs(pos.z - goal.z) - stop_within)
    )


def _at_goal(pos: Location, goal: Location, stop_within: int) -> bool:
    return (
        abs(pos.x - goal.x) <= stop_within
        and abs(pos.y - goal.y) <= stop_within
        and abs(pos.z - goal.z) <= stop_within
    )


def plan_path(
    world: VoxelWorld,
    start: Location,
    goal: Location,
    allow_modify: bool = False,
    stop_within: int = 0,
    node_budget: int = NODE_BUDGET,
) -> list[Action] | None:
    """A* plan from start to within Chebyshev `stop_within` of goal.

    Returns the action list ([] when already there), or None when no path
    exists within the node budget.
    """
    start = Location(*start)
    goal = Location(*goal)
    if not world.in_bounds(start) or not world.in_bounds(goal):
        raise ValueError("start and goal must be inside world bounds")
    if _at_goal(start, goal, stop_within):
        return []

    open_heap: list[tuple[int, int, Location]] = []
    g_best: dict[Location, int] = {start: 0}
    parent: dict[Location, Location] = {}
    counter = 0
    heapq.heappush(open_heap, (_heuristic(start, goal, stop_within), counter, start))
    popped = 0

    while open_heap:
        f, _, pos = heapq.heappop(open_heap)
        g = g_best[pos]
        if f > g + _heuristic(pos, goal, stop_within):
            continue  # stale entry
        if _at_goal(pos, goal, stop_within):
            return _reconstruct(world, parent, start, pos)
        popped += 1
        if popped > node_budget:
            return None
        for nxt in pos.neighbors6():
            if not world.in_bounds(nxt):
                continue
            solid = not world.get_block(nxt).is_air
            if solid and not allow_modify:
                continue
            step_cost = COST_MOVE + (COST_BREAK if solid else 0)
            ng = g + step_cost
            if ng < g_best.get(nxt, ng + 1):
                g_best[nxt] = ng
                parent[nxt] = pos
                counter += 1
                heapq.heappush(open_heap, (ng + _heuristic(nxt, goal, stop_within), counter, nxt))
    return None


def _reconstruct(world, parent, start, end) -> list[Action]:
    cells = [end]
    while cells[-1] != start:
        cells.append(parent[cells[-1]])
    cells.reverse()
    plan: list[Action] = []
    for cell in cells[1:]:
        if not world.get_block(cell).is_air:
            plan.append((BREAK, cell))
        plan.append((MOVE, cell))
    return plan
