"""Voxel world model: block types, schematics, and the mutable world grid.

The world is a bounded dense grid of (id, meta) block values plus entity
records (mobs, players) and a per-voxel provenance log that remembers which
voxels were placed by a player or agent rather than seeded as terrain.
Everything here is a plain value type; a VoxelWorld instance expects a single
writer (the server tick loop, or the agent's mirror apply path).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Iterator, NamedTuple

# 64-bit FNV-1a, used for world equality checks across processes (and
# reimplemented by the browser client, so the byte feed order is normative:
# non-air voxels in (y, z, x) scan order, each as x,y,z int32 BE + id + meta).
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF

PROV_NATURAL = "natural"
PROV_PLAYER = "player"
PROV_AGENT = "agent"
PROVENANCES = (PROV_NATURAL, PROV_PLAYER, PROV_AGENT)


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _U64
    return h


class WorldError(Exception):
    pass


class OutOfBounds(WorldError):
    """A location fell outside the configured world bounds."""


class Location(NamedTuple):
    x: int
    y: int
    z: int

    def offset(self, dx: int, dy: int, dz: int) -> "Location":
        return Location(self.x + dx, self.y + dy, self.z + dz)

    def neighbors6(self) -> Iterator["Location"]:
        x, y, z = self
        yield Location(x + 1, y, z)
        yield Location(x - 1, y, z)
        yield Location(x, y + 1, z)
        yield Location(x, y - 1, z)
        yield Location(x, y, z + 1)
        yield Location(x, y, z - 1)


def manhattan(a: Location, b: Location) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y) + abs(a.z - b.z)


def chebyshev(a: Location, b: Location) -> int:
    return max(abs(a.x - b.x), abs(a.y - b.y), abs(a.z - b.z))


def euclidean(a, b) -> float:
    return ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2) ** 0.5


@dataclass(frozen=True, slots=True)
class BlockId:
    """A block material: 8-bit id plus 4-bit metadata. id 0 is air."""

    id: int
    meta: int = 0

    def __post_init__(self):
        if not 0 <= self.id <= 255:
            raise ValueError(f"block id {self.id} outside 0..255")
        if not 0 <= self.meta <= 15:
            raise ValueError(f"block meta {self.meta} outside 0..15")

    @property
    def is_air(self) -> bool:
        return self.id == 0


AIR = BlockId(0, 0)


@dataclass(frozen=True, slots=True)
class ChangeRecord:
    """One voxel mutation: where, what was there, what is there now, and who."""

    loc: Location
    old: BlockId
    new: BlockId
    source: str

    def reversed(self) -> "ChangeRecord":
        return ChangeRecord(self.loc, self.new, self.old, self.source)

    def to_json(self) -> list:
        return [
            list(self.loc),
            [self.old.id, self.old.meta],
            [self.new.id, self.new.meta],
            self.source,
        ]

    @classmethod
    def from_json(cls, row) -> "ChangeRecord":
        loc, old, new, source = row
        return cls(Location(*loc), BlockId(*old), BlockId(*new), source)


class Schematic:
    """Relative blueprint: map of (x, y, z) offsets to non-air BlockIds.

    Construct through `of_blocks`, which normalizes offsets so the minimum on
    each axis is 0 and drops air entries (air is absence).
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks: dict[tuple[int, int, int], BlockId]):
        self.blocks = blocks

    @classmethod
    def of_blocks(cls, blocks: dict[tuple[int, int, int], BlockId]) -> "Schematic":
        return cls(dict(blocks)).normalize()

    def normalize(self) -> "Schematic":
        solid = {off: b for off, b in self.blocks.items() if not b.is_air}
        if not solid:
            return Schematic({})
        mx = min(o[0] for o in solid)
        my = min(o[1] for o in solid)
        mz = min(o[2] for o in solid)
        return Schematic({(x - mx, y - my, z - mz): b for (x, y, z), b in solid.items()})

    def items(self) -> list[tuple[tuple[int, int, int], BlockId]]:
        """Entries sorted by (y, z, x), matching world scan order."""
        return sorted(self.blocks.items(), key=lambda kv: (kv[0][1], kv[0][2], kv[0][0]))

    @property
    def size(self) -> tuple[int, int, int]:
        if not self.blocks:
            return (0, 0, 0)
        return (
            max(o[0] for o in self.blocks) + 1,
            max(o[1] for o in self.blocks) + 1,
            max(o[2] for o in self.blocks) + 1,
        )

    def __len__(self) -> int:
        return len(self.blocks)

    def __eq__(self, other) -> bool:
        return isinstance(other, Schematic) and self.blocks == other.blocks


@dataclass
class Mob:
    mob_id: int
    kind: str
    position: tuple[float, float, float]
    look: tuple[float, float] = (0.0, 0.0)


MOB_KINDS = ("cow", "pig", "sheep", "chicken")


@dataclass
class PlayerRecord:
    name: str
    position: tuple[float, float, float]
    look: tuple[float, float] = (0.0, 0.0)


class BlockRegistry:
    """Versioned table of known (id, meta) pairs with names and color classes.

    File format: optional `!version N` line, then one record per line:
    `id meta name color_class`. Lines starting with `#` are comments.
    """

    def __init__(self, version: int = 1):
        self.version = version
        self._entries: dict[tuple[int, int], tuple[str, str]] = {}
        self._by_name: dict[str, BlockId] = {}

    def add(self, id_: int, meta: int, name: str, color: str) -> None:
        b = BlockId(id_, meta)  # validates field widths
        self._entries[(b.id, b.meta)] = (name, color)
        self._by_name.setdefault(name, b)

    def __contains__(self, block) -> bool:
        if isinstance(block, BlockId):
            block = (block.id, block.meta)
        return tuple(block) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def name_of(self, block: BlockId) -> str | None:
        entry = self._entries.get((block.id, block.meta))
        return entry[0] if entry else None

    def color_of(self, block: BlockId) -> str | None:
        entry = self._entries.get((block.id, block.meta))
        return entry[1] if entry else None

    def by_name(self, name: str) -> BlockId | None:
        return self._by_name.get(name)

    def blocks_of_color(self, color: str) -> list[BlockId]:
        out = [BlockId(i, m) for (i, m), (_, c) in self._entries.items() if c == color and i != 0]
        return sorted(out, key=lambda b: (b.id, b.meta))

    def entries(self) -> list[tuple[int, int, str, str]]:
        return sorted((i, m, n, c) for (i, m), (n, c) in self._entries.items())

    @classmethod
    def loads(cls, text: str) -> "BlockRegistry":
        reg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("!version"):
                reg.version = int(line.split()[1])
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"registry line {lineno}: expected 'id meta name color'")
            reg.add(int(parts[0]), int(parts[1]), parts[2], parts[3])
        return reg

    @classmethod
    def load(cls, path) -> "BlockRegistry":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())

    @classmethod
    def default(cls) -> "BlockRegistry":
        text = resources.files("voxbot.data").joinpath("block_registry.txt").read_text("utf-8")
        return cls.loads(text)


# Terrain block types exempt from "unnatural" detection unless a placement
# record says otherwise: stone, grass, dirt, bedrock, sand, oak wood, leaves.
DEFAULT_NATURAL_IDS = frozenset({1, 2, 3, 7, 12, 17, 18})


class VoxelWorld:
    """Bounded dense voxel grid plus entities and per-voxel provenance."""

    def __init__(self, bounds: tuple[int, int, int] = (256, 128, 256)):
        sx, sy, sz = bounds
        if sx <= 0 or sy <= 0 or sz <= 0:
            raise ValueError("world bounds must be positive")
        self.bounds = (sx, sy, sz)
        n = sx * sy * sz
        self._ids = bytearray(n)
        self._metas = bytearray(n)
        self._solid: set[int] = set()
        self._placed: dict[int, str] = {}
        self.mobs: dict[int, Mob] = {}
        self.players: dict[str, PlayerRecord] = {}
        self._next_mob_id = 1

    # -- indexing ---------------------------------------------------------

    def _index(self, loc) -> int:
        sx, sy, sz = self.bounds
        x, y, z = loc
        if not (0 <= x < sx and 0 <= y < sy and 0 <= z < sz):
            raise OutOfBounds(f"{tuple(loc)} outside bounds {self.bounds}")
        return (y * sz + z) * sx + x

    def _loc_of(self, idx: int) -> Location:
        sx, _, sz = self.bounds
        x = idx % sx
        z = (idx // sx) % sz
        y = idx // (sx * sz)
        return Location(x, y, z)

    def in_bounds(self, loc) -> bool:
        sx, sy, sz = self.bounds
        x, y, z = loc
        return 0 <= x < sx and 0 <= y < sy and 0 <= z < sz

    # -- block access -----------------------------------------------------

    def get_block(self, loc) -> BlockId:
        idx = self._index(loc)
        return BlockId(self._ids[idx], self._metas[idx])

    def set_block(self, loc, block: BlockId, source: str = PROV_AGENT) -> ChangeRecord:
        if source not in PROVENANCES:
            raise ValueError(f"unknown provenance {source!r}")
        idx = self._index(loc)
        old = BlockId(self._ids[idx], self._metas[idx])
        self._ids[idx] = block.id
        self._metas[idx] = block.meta
        if block.is_air:
            self._solid.discard(idx)
            self._placed.pop(idx, None)
        else:
            self._solid.add(idx)
            if source == PROV_NATURAL:
                self._placed.pop(idx, None)
            else:
                self._placed[idx] = source
        return ChangeRecord(Location(*loc), old, block, source)

    def blit_schematic(self, schematic: Schematic, origin, source: str = PROV_AGENT) -> list[ChangeRecord]:
        ox, oy, oz = origin
        targets = [
            (Location(ox + dx, oy + dy, oz + dz), b)
            for (dx, dy, dz), b in schematic.items()
        ]
        for loc, _ in targets:  # all-or-nothing: validate before any write
            if not self.in_bounds(loc):
                raise OutOfBounds(f"schematic entry {tuple(loc)} outside bounds {self.bounds}")
        return [self.set_block(loc, b, source) for loc, b in targets]

    def apply_reversed(self, records: Iterable[ChangeRecord]) -> list[ChangeRecord]:
        """Reverse-apply change records (last first), restoring prior contents."""
        return [self.set_block(r.loc, r.old, r.source) for r in reversed(list(records))]

    def provenance(self, loc) -> str:
        return self._placed.get(self._index(loc), PROV_NATURAL)

    def is_placed(self, loc) -> bool:
        return self._index(loc) in self._placed

    # -- scanning ---------------------------------------------------------

    def non_air_count(self) -> int:
        return len(self._solid)

    def non_air_items(self) -> list[tuple[Location, BlockId]]:
        """All non-air voxels in (y, z, x) scan order."""
        return [
            (self._loc_of(i), BlockId(self._ids[i], self._metas[i]))
            for i in sorted(self._solid)
        ]

    def world_hash(self) -> int:
        h = FNV_OFFSET
        ids = self._ids
        metas = self._metas
        for i in sorted(self._solid):
            loc = self._loc_of(i)
            data = (
                loc.x.to_bytes(4, "big", signed=True)
                + loc.y.to_bytes(4, "big", signed=True)
                + loc.z.to_bytes(4, "big", signed=True)
                + bytes((ids[i], metas[i]))
            )
            h = fnv1a64(data, h)
        return h

    def surface_level(self, x: int, z: int) -> int:
        """y of the first air voxel above the topmost non-air one (0 if empty column)."""
        sx, sy, sz = self.bounds
        if not (0 <= x < sx and 0 <= z < sz):
            raise OutOfBounds(f"column ({x}, {z}) outside bounds")
        base = z * sx + x
        plane = sx * sz
        for y in range(sy - 1, -1, -1):
            if self._ids[y * plane + base]:
                return y + 1
        return 0

    # -- run-length form (snapshots) ---------------------------------------

    def to_runs(self) -> list[tuple[int, int, int]]:
        """RLE over the full (y, z, x) scan: list of (count, id, meta) runs."""
        total = self.bounds[0] * self.bounds[1] * self.bounds[2]
        runs: list[tuple[int, int, int]] = []
        pos = 0
        for i in sorted(self._solid):
            if i > pos:
                runs.append((i - pos, 0, 0))
            bid, meta = self._ids[i], self._metas[i]
            if runs and runs[-1][1] == bid and runs[-1][2] == meta and i == pos:
                runs[-1] = (runs[-1][0] + 1, bid, meta)
            else:
                runs.append((1, bid, meta))
            pos = i + 1
        if pos < total:
            runs.append((total - pos, 0, 0))
        return runs

    @classmethod
    def from_runs(cls, bounds, runs) -> "VoxelWorld":
        world = cls(tuple(bounds))
        total = bounds[0] * bounds[1] * bounds[2]
        pos = 0
        for count, bid, meta in runs:
            if count < 0 or pos + count > total:
                raise WorldError("run-length data overruns world volume")
            if bid:
                BlockId(bid, meta)  # validate field widths
                for i in range(pos, pos + count):
                    world._ids[i] = bid
                    world._metas[i] = meta
                world._solid.update(range(pos, pos + count))
            pos += count
        if pos != total:
            raise WorldError(f"run-length data covers {pos} of {total} voxels")
        return world

    # -- entities -----------------------------------------------------------

    def spawn_mob(self, kind: str, position, look=(0.0, 0.0)) -> Mob:
        if kind not in MOB_KINDS:
            raise WorldError(f"unknown mob kind {kind!r}")
        x, y, z = position
        if not self.in_bounds((int(x), int(y), int(z))):
            raise OutOfBounds(f"mob position {position} outside bounds")
        mob = Mob(self._next_mob_id, kind, (float(x), float(y), float(z)), tuple(look))
        self._next_mob_id += 1
        self.mobs[mob.mob_id] = mob
        return mob


def make_flat_world(
    bounds: tuple[int, int, int] = (256, 128, 256),
    ground_height: int = 4,
) -> VoxelWorld:
    """Seed a flat creative-mode world: bedrock floor, dirt, one grass layer."""
    world = VoxelWorld(bounds)
    sx, sy, sz = bounds
    if ground_height <= 0:
        return world
    if ground_height >= sy:
        raise WorldError("ground height must leave headroom inside bounds")
    bedrock, dirt, grass = BlockId(7), BlockId(3), BlockId(2)
    for y in range(ground_height):
        if y == 0:
            b = bedrock
        elif y == ground_height - 1:
            b = grass
        else:
            b = dirt
        for z in range(sz):
            for x in range(sx):
                world.set_block(Location(x, y, z), b, PROV_NATURAL)
    return world


def spawn_point(world: VoxelWorld) -> Location:
    sx, _, sz = world.bounds
    x, z = sx // 2, sz // 2
    return Location(x, world.surface_level(x, z), z)
