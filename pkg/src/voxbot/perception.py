"""Heuristic perception over world snapshots.

Block objects are maximal 6-connected components of "unnatural" voxels: any
voxel with a placement record, or whose block type is not on the natural
terrain whitelist (so pre-seeded structures are still found). Vision is a
voxel ray march; directions, colour, and size are the small geometric and
counting heuristics the dialogue interpreter leans on. Everything here is a
pure function of its inputs.
"""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass

from .world import (
    DEFAULT_NATURAL_IDS,
    AIR,
    BlockId,
    BlockRegistry,
    Location,
    VoxelWorld,
    euclidean,
)

VISION_SIZE = 64
VISION_FOV_DEG = 70.0
VISION_RANGE = 64.0

SIZE_LEXICON = {
    "tiny": (1, 2),
    "small": (3, 5),
    "medium": (6, 10),
    "big": (11, 14),
    "huge": (15, None),
}


@dataclass(frozen=True)
class FoundObject:
    positions: frozenset
    provenance: str


def is_unnatural(world: VoxelWorld, loc, natural_ids=DEFAULT_NATURAL_IDS) -> bool:
    block = world.get_block(loc)
    if block.is_air:
        return False
    return world.is_placed(loc) or block.id not in natural_ids


def find_block_objects(
    world: VoxelWorld,
    region: tuple[Location, Location] | None = None,
    natural_ids=DEFAULT_NATURAL_IDS,
) -> list[FoundObject]:
    """Maximal 6-connected components of unnatural voxels.

    `region` bounds the seed search (inclusive corners); components grow
    beyond it so they stay maximal. Results are ordered by their minimum
    (y, z, x) voxel for determinism.
    """
    sx, sy, sz = world.bounds
    if region is None:
        lo, hi = Location(0, 0, 0), Location(sx - 1, sy - 1, sz - 1)
    else:
        lo, hi = (Location(*region[0]), Location(*region[1]))
    seen: set[Location] = set()
    components: list[FoundObject] = []
    for y in range(max(0, lo.y), min(sy, hi.y + 1)):
        for z in range(max(0, lo.z), min(sz, hi.z + 1)):
            for x in range(max(0, lo.x), min(sx, hi.x + 1)):
                seed = Location(x, y, z)
                if seed in seen or not is_unnatural(world, seed, natural_ids):
                    continue
                comp: set[Location] = set()
                queue = deque([seed])
                seen.add(seed)
                sources: Counter[str] = Counter()
                while queue:
                    cur = queue.popleft()
                    comp.add(cur)
                    sources[world.provenance(cur)] += 1
                    for nb in cur.neighbors6():
                        if nb in seen or not world.in_bounds(nb):
                            continue
                        if is_unnatural(world, nb, natural_ids):
                            seen.add(nb)
                            queue.append(nb)
                prov = _majority_provenance(sources)
                components.append(FoundObject(frozenset(comp), prov))
    components.sort(key=lambda c: min((p.y, p.z, p.x) for p in c.positions))
    return components


def _majority_provenance(sources: Counter) -> str:
    placed = {k: v for k, v in sources.items() if k != "natural"}
    if not placed:
        return "natural"
    return max(sorted(placed), key=lambda k: placed[k])


def refresh_block_objects(world, memory, region=None, registry: BlockRegistry | None = None,
                          natural_ids=DEFAULT_NATURAL_IDS) -> list[int]:
    """Register/refresh the components visible in `region` into memory.

    Objects that kept at least half their voxels keep their memory id. Known
    objects inside the region whose voxels all vanished are archived. Colour
    triples are refreshed from the registry. Returns the touched memory ids.
    """
    found = find_block_objects(world, region, natural_ids)
    touched = []
    matched: set[int] = set()
    for comp in found:
        mid, _ = memory.upsert_block_object(comp.positions, comp.provenance)
        matched.add(mid)
        touched.append(mid)
        if registry is not None:
            colour = infer_colour(world, comp.positions, registry)
            old = [t for t in memory.triples_of(mid, "has_colour")]
            for t in old:
                if t.obj != colour:
                    memory.remove_triple(mid, "has_colour", t.obj)
            if colour is not None:
                memory.insert_triple(mid, "has_colour", colour)
    if region is not None:
        lo, hi = Location(*region[0]), Location(*region[1])
        in_region = lambda p: (lo.x <= p.x <= hi.x and lo.y <= p.y <= hi.y and lo.z <= p.z <= hi.z)
    else:
        in_region = lambda p: True
    for obj in memory.objects_of_kind("BlockObject"):
        if obj.memory_id in matched or obj.payload.get("archived"):
            continue
        if all(in_region(p) for p in obj.payload["positions"]):
            memory.archive_object(obj.memory_id)
    return touched


# -- vision ---------------------------------------------------------------------

def look_vector(yaw_deg: float, pitch_deg: float) -> tuple[float, float, float]:
    yaw = math.radians(yaw_deg)
    pitch = math.radians(pitch_deg)
    return (
        math.cos(pitch) * math.cos(yaw),
        math.sin(pitch),
        math.cos(pitch) * math.sin(yaw),
    )


def left_vector(yaw_deg: float) -> tuple[float, float, float]:
    """Speaker's left in the horizontal plane (facing crossed with world up)."""
    yaw = math.radians(yaw_deg)
    return (-math.sin(yaw), 0.0, math.cos(yaw))


def render_vision(
    world: VoxelWorld,
    eye: tuple[float, float, float],
    look: tuple[float, float],
    size: int = VISION_SIZE,
    fov_deg: float = VISION_FOV_DEG,
    max_range: float = VISION_RANGE,
) -> list[list[tuple[BlockId, float]]]:
    """Ray-march a size x size depth image from `eye`.

    Each pixel holds (block, distance to the first non-air voxel along the
    pixel ray); pixels that hit nothing within range hold (air, max_range).
    Row 0 is the top of the image, column 0 the left side of the view.
    """
    if not world.in_bounds((int(eye[0]), int(eye[1]), int(eye[2]))):
        raise ValueError("eye must be inside world bounds")
    yaw, pitch = look
    f = look_vector(yaw, pitch)
    up = (0.0, 1.0, 0.0)
    r = _norm(_cross(up, f))
    if r is None:  # looking straight up/down: derive right from yaw alone
        l = left_vector(yaw)
        r = (-l[0], -l[1], -l[2])
    u = _cross(f, r)
    half = math.tan(math.radians(fov_deg) / 2.0)
    image = []
    for row in range(size):
        ndc_y = 1.0 - 2.0 * (row + 0.5) / size
        line = []
        for col in range(size):
            ndc_x = 2.0 * (col + 0.5) / size - 1.0
            d = (
                f[0] + ndc_x * half * r[0] + ndc_y * half * u[0],
                f[1] + ndc_x * half * r[1] + ndc_y * half * u[1],
                f[2] + ndc_x * half * r[2] + ndc_y * half * u[2],
            )
            n = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
            d = (d[0] / n, d[1] / n, d[2] / n)
            line.append(raycast(world, eye, d, max_range))
        image.append(line)
    return image


def raycast(world: VoxelWorld, origin, direction, max_range: float) -> tuple[BlockId, float]:
    """First non-air voxel along a ray (Amanatides-Woo voxel traversal).

    The reported distance is to the point where the ray enters the hit voxel
    (0 when the origin itself sits inside a solid voxel).
    """
    x, y, z = (math.floor(origin[0]), math.floor(origin[1]), math.floor(origin[2]))
    pos = [x, y, z]
    step = []
    t_max = []
    t_delta = []
    for axis in range(3):
        d = direction[axis]
        if d > 0:
            step.append(1)
            t_max.append(((pos[axis] + 1) - origin[axis]) / d)
            t_delta.append(1.0 / d)
        elif d < 0:
            step.append(-1)
            t_max.append((pos[axis] - origin[axis]) / d)
            t_delta.append(-1.0 / d)
        else:
            step.append(0)
            t_max.append(math.inf)
            t_delta.append(math.inf)
    t = 0.0
    while t <= max_range:
        loc = (pos[0], pos[1], pos[2])
        if world.in_bounds(loc):
            block = world.get_block(loc)
            if not block.is_air:
                return (block, t)
        axis = t_max.index(min(t_max))
        t = t_max[axis]
        t_max[axis] += t_delta[axis]
        pos[axis] += step[axis]
    return (AIR, max_range)


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _norm(v):
    n = math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
    if n < 1e-9:
        return None
    return (v[0] / n, v[1] / n, v[2] / n)


# -- relative directions -----------------------------------------------------------

def direction_axis(direction: str, speaker_yaw_deg: float) -> tuple[float, float, float]:
    f = look_vector(speaker_yaw_deg, 0.0)
    l = left_vector(speaker_yaw_deg)
    if direction == "LEFT":
        return l
    if direction == "RIGHT":
        return (-l[0], -l[1], -l[2])
    if direction == "FRONT":
        return f
    if direction == "BACK":
        return (-f[0], -f[1], -f[2])
    if direction == "UP":
        return (0.0, 1.0, 0.0)
    if direction == "DOWN":
        return (0.0, -1.0, 0.0)
    raise ValueError(f"unknown direction {direction!r}")


def resolve_relative_direction(anchor, direction: str, speaker_pos, speaker_yaw_deg: float,
                               candidates: list) -> object | None:
    """Pick the candidate in the direction's half-space relative to `anchor`,
    nearest to the anchor. Candidates are (item, Location) pairs; returns the
    item, or None when nothing lies in the half-space.
    """
    axis = direction_axis(direction, speaker_yaw_deg)
    ax, ay, az = anchor
    best = None
    best_key = None
    for item, loc in candidates:
        rel = (loc[0] - ax, loc[1] - ay, loc[2] - az)
        dot = rel[0] * axis[0] + rel[1] * axis[1] + rel[2] * axis[2]
        if dot <= 0:
            continue
        key = (euclidean(loc, (ax, ay, az)), (loc[1], loc[2], loc[0]))
        if best_key is None or key < best_key:
            best, best_key = item, key
    return best


# -- colour and size -----------------------------------------------------------------

def infer_colour(world: VoxelWorld, positions, registry: BlockRegistry) -> str | None:
    """Colour class of the object's most common block type (ties: lowest id)."""
    counts: Counter[BlockId] = Counter()
    for p in positions:
        b = world.get_block(p)
        if not b.is_air:
            counts[b] += 1
    if not counts:
        return None
    best = max(counts.items(), key=lambda kv: (kv[1], (-kv[0].id, -kv[0].meta)))[0]
    colour = registry.color_of(best)
    return colour if colour not in (None, "none") else None


def max_extent(positions) -> int:
    xs = [p[0] for p in positions]
    ys = [p[1] for p in positions]
    zs = [p[2] for p in positions]
    return max(max(xs) - min(xs), max(ys) - min(ys), max(zs) - min(zs)) + 1


def match_size(adjective: str, positions, lexicon=SIZE_LEXICON) -> bool:
    """True when the object's maximum axis extent falls in the adjective's range."""
    if adjective not in lexicon:
        raise KeyError(f"size adjective {adjective!r} not in lexicon")
    lo, hi = lexicon[adjective]
    extent = max_extent(positions)
    return extent >= lo and (hi is None or extent <= hi)
