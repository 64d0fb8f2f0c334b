import math
import random

import numpy as np
import pytest

from voxbot import perception
from voxbot.memory import MemoryStore
from voxbot.world import BlockId, BlockRegistry, Location, VoxelWorld, make_flat_world

from conftest import small_world
from oracles import sampling_raycast_image, union_find_components


class TestBlockObjects:
    def test_empty_world(self):
        assert perception.find_block_objects(VoxelWorld((8, 8, 8))) == []

    def test_single_placed_block(self):
        world = small_world()
        world.set_block((4, 4, 4), BlockId(3), "player")  # dirt, but placed
        found = perception.find_block_objects(world)
        assert len(found) == 1
        assert found[0].positions == frozenset({Location(4, 4, 4)})
        assert found[0].provenance == "player"

    def test_two_clusters_one_gap(self):
        world = small_world()
        for x in (2, 3, 4):
            world.set_block((x, 5, 4), BlockId(5), "player")
        for x in (6, 7, 8):  # gap at x=5
            world.set_block((x, 5, 4), BlockId(5), "agent")
        found = perception.find_block_objects(world)
        assert len(found) == 2
        assert {len(f.positions) for f in found} == {3}
        oracle = union_find_components(world)
        assert {f.positions for f in found} == oracle

    def test_unnatural_by_type_without_provenance(self):
        # a pre-seeded world: diamond blocks with no placement record
        world = small_world()
        world.set_block((4, 4, 4), BlockId(57), "natural")
        found = perception.find_block_objects(world)
        assert len(found) == 1
        assert found[0].provenance == "natural"

    def test_natural_terrain_ignored(self):
        assert perception.find_block_objects(small_world()) == []

    def test_random_worlds_match_union_find(self):
        rng = random.Random(42)
        for _ in range(20):
            bounds = (rng.randint(6, 16), rng.randint(6, 12), rng.randint(6, 16))
            world = VoxelWorld(bounds)
            for _ in range(rng.randint(0, 120)):
                loc = (
                    rng.randrange(bounds[0]),
                    rng.randrange(bounds[1]),
                    rng.randrange(bounds[2]),
                )
                world.set_block(loc, BlockId(rng.choice([1, 5, 35])),
                                rng.choice(["player", "agent"]))
            found = {f.positions for f in perception.find_block_objects(world)}
            assert found == union_find_components(world)

    def test_region_seeds_but_components_stay_maximal(self):
        world = small_world((20, 10, 20))
        for x in range(4, 12):
            world.set_block((x, 5, 5), BlockId(5), "player")
        found = perception.find_block_objects(world, region=((0, 0, 0), (5, 9, 19)))
        assert len(found) == 1
        assert len(found[0].positions) == 8  # grew past the region edge


class TestRefresh:
    def test_registers_and_archives(self, registry):
        world = small_world()
        mem = MemoryStore()
        world.set_block((4, 4, 4), BlockId(35, 11), "player")
        ids = perception.refresh_block_objects(world, mem, registry=registry)
        assert len(ids) == 1
        [obj] = mem.query([], kind="BlockObject")
        colour = [t.obj for t in mem.triples_of(obj.memory_id, "has_colour")]
        assert colour == ["blue"]
        world.set_block((4, 4, 4), BlockId(0), "player")
        perception.refresh_block_objects(world, mem, registry=registry)
        assert mem.query([], kind="BlockObject") == []

    def test_identity_stable_under_growth(self, registry):
        world = small_world()
        mem = MemoryStore()
        world.set_block((4, 4, 4), BlockId(5), "player")
        [mid] = perception.refresh_block_objects(world, mem, registry=registry)
        world.set_block((5, 4, 4), BlockId(5), "player")
        [mid2] = perception.refresh_block_objects(world, mem, registry=registry)
        assert mid2 == mid

    def test_colour_updates_when_majority_changes(self, registry):
        world = small_world()
        mem = MemoryStore()
        world.set_block((4, 4, 4), BlockId(35, 11), "player")
        perception.refresh_block_objects(world, mem, registry=registry)
        for x in (5, 6):
            world.set_block((x, 4, 4), BlockId(35, 14), "player")
        [mid] = perception.refresh_block_objects(world, mem, registry=registry)
        colours = [t.obj for t in mem.triples_of(mid, "has_colour")]
        assert colours == ["red"]


class TestVision:
    def test_empty_world_all_sentinel(self):
        world = VoxelWorld((8, 8, 8))
        img = perception.render_vision(world, (4.5, 4.5, 4.5), (0.0, 0.0),
                                       size=8, max_range=16.0)
        assert all(px == (BlockId(0), 16.0) for row in img for px in row)

    def test_block_straight_ahead(self):
        world = VoxelWorld((16, 8, 8))
        world.set_block((9, 4, 4), BlockId(17), "player")  # 5 cells ahead of eye cell
        img = perception.render_vision(world, (4.5, 4.5, 4.5), (0.0, 0.0),
                                       size=8, max_range=16.0)
        center = img[3][3], img[3][4], img[4][3], img[4][4]
        hits = [px for px in center if px[0].id == 17]
        assert hits, "center pixels should see the block"
        for block, dist in hits:
            assert abs(dist - 5.0) <= 1.0  # entry face is 4.5 away

    def test_eye_inside_block_distance_zero(self):
        world = VoxelWorld((8, 8, 8))
        world.set_block((4, 4, 4), BlockId(1), "player")
        block, dist = perception.raycast(world, (4.5, 4.5, 4.5), (1.0, 0.0, 0.0), 8.0)
        assert block == BlockId(1) and dist == 0.0

    def test_random_scenes_match_sampling_oracle(self):
        rng = random.Random(5)
        for scene in range(3):
            world = VoxelWorld((12, 12, 12))
            block = BlockId(rng.choice([1, 5, 45]))
            for _ in range(6):
                cx = rng.randrange(1, 11)
                cy = rng.randrange(1, 11)
                cz = rng.randrange(1, 11)
                for dx in range(2):
                    for dy in range(2):
                        for dz in range(2):
                            loc = (min(cx + dx, 11), min(cy + dy, 11), min(cz + dz, 11))
                            world.set_block(loc, block, "player")
            eye = (6.31, 6.47, 6.53)
            world.set_block((6, 6, 6), BlockId(0), "player")
            look = (rng.uniform(0, 360), rng.uniform(-45, 45))
            size = 16
            got = perception.render_vision(world, eye, look, size=size, max_range=14.0)
            want = sampling_raycast_image(world, eye, look, size, 70.0, 14.0, step=0.005)
            diag = math.sqrt(3)
            for r in range(size):
                for c in range(size):
                    gb, gd = got[r][c]
                    wb, wd = want[r][c]
                    assert gb == wb, (scene, r, c, gb, wb)
                    assert abs(gd - wd) <= diag


class TestDirections:
    def test_left_of_forced_example(self):
        # speaker at origin facing +x: left is +z
        got = perception.resolve_relative_direction(
            (10, 0, 0), "LEFT", (0, 0, 0), 0.0,
            [("a", Location(10, 0, 5)), ("b", Location(10, 0, -5))],
        )
        assert got == "a"

    def test_behind_with_candidate_in_front(self):
        got = perception.resolve_relative_direction(
            (5, 0, 0), "BACK", (0, 0, 0), 0.0, [("a", Location(9, 0, 0))]
        )
        assert got is None

    def test_nearest_in_half_space_wins(self):
        got = perception.resolve_relative_direction(
            (0, 0, 0), "FRONT", (0, 0, 0), 0.0,
            [("far", Location(9, 0, 0)), ("near", Location(2, 0, 0))],
        )
        assert got == "near"

    def test_antisymmetry_left_right(self):
        rng = random.Random(11)
        for _ in range(200):
            yaw = rng.uniform(0, 360)
            a = Location(rng.randint(-9, 9), rng.randint(-9, 9), rng.randint(-9, 9))
            b = Location(rng.randint(-9, 9), rng.randint(-9, 9), rng.randint(-9, 9))
            if a == b:
                continue
            left = perception.direction_axis("LEFT", yaw)
            right = perception.direction_axis("RIGHT", yaw)
            dot = lambda v, w: sum(x * y for x, y in zip(v, w))
            rel = (a.x - b.x, a.y - b.y, a.z - b.z)
            if dot(rel, left) > 0:  # a left of b  => b right of a
                rel_ba = (b.x - a.x, b.y - a.y, b.z - a.z)
                assert dot(rel_ba, right) > 0

    def test_matches_exhaustive_filter_oracle(self):
        rng = random.Random(3)
        for _ in range(100):
            yaw = rng.uniform(0, 360)
            anchor = (rng.randint(-5, 5), rng.randint(-5, 5), rng.randint(-5, 5))
            speaker = (0, 0, 0)
            cands = [
                (i, Location(rng.randint(-9, 9), rng.randint(-9, 9), rng.randint(-9, 9)))
                for i in range(rng.randint(1, 6))
            ]
            direction = rng.choice(["LEFT", "RIGHT", "FRONT", "BACK", "UP", "DOWN"])
            got = perception.resolve_relative_direction(anchor, direction, speaker, yaw, cands)
            axis = perception.direction_axis(direction, yaw)
            inside = [
                (i, loc) for i, loc in cands
                if sum((loc[k] - anchor[k]) * axis[k] for k in range(3)) > 0
            ]
            if not inside:
                assert got is None
            else:
                from voxbot.world import euclidean
                best = min(inside, key=lambda c: (euclidean(c[1], anchor),
                                                  (c[1][1], c[1][2], c[1][0])))
                assert got == best[0]


class TestColourSize:
    def test_uniform_colour(self, registry):
        world = small_world()
        locs = [(4, 4, 4), (5, 4, 4)]
        for loc in locs:
            world.set_block(loc, BlockId(35, 11), "player")
        assert perception.infer_colour(world, [Location(*l) for l in locs], registry) == "blue"

    def test_majority_wins(self, registry):
        world = small_world()
        locs = []
        for i in range(5):
            world.set_block((i, 6, 0), BlockId(35, 11), "player")
            locs.append(Location(i, 6, 0))
        for i in range(3):
            world.set_block((i, 6, 2), BlockId(35, 14), "player")
            locs.append(Location(i, 6, 2))
        assert perception.infer_colour(world, locs, registry) == "blue"

    def test_matches_histogram_oracle(self, registry):
        rng = random.Random(17)
        options = [BlockId(35, m) for m in (0, 4, 11, 12, 13, 14, 15)] + [
            BlockId(1), BlockId(5), BlockId(45),
        ]
        for _ in range(50):
            world = VoxelWorld((10, 10, 10))
            counts = {}
            locs = []
            for i in range(rng.randint(1, 40)):
                loc = (i % 10, (i // 10) % 10, i % 7)
                b = rng.choice(options)
                world.set_block(loc, b, "player")
            seen = {}
            for loc, b in world.non_air_items():
                locs.append(loc)
                seen[b] = seen.get(b, 0) + 1
            got = perception.infer_colour(world, locs, registry)
            best = max(seen.items(), key=lambda kv: (kv[1], (-kv[0].id, -kv[0].meta)))[0]
            assert got == registry.color_of(best)

    def test_match_size_table(self):
        two = [Location(0, 0, 0), Location(1, 0, 0)]
        assert perception.match_size("tiny", two)
        assert not perception.match_size("huge", [Location(0, 0, 0)] )
        wide = [Location(0, 0, 0), Location(16, 0, 0)]
        assert perception.match_size("huge", wide)

    def test_unknown_adjective_raises(self):
        with pytest.raises(KeyError):
            perception.match_size("gigantic", [Location(0, 0, 0)])

    def test_lexicon_partitions_extents(self):
        for extent in range(1, 200):
            positions = [Location(0, 0, 0), Location(extent - 1, 0, 0)]
            matches = [
                adj for adj in perception.SIZE_LEXICON
                if perception.match_size(adj, positions)
            ]
            assert len(matches) == 1, (extent, matches)
