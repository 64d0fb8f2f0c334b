import json

import pytest

from voxbot import data_io
from voxbot.parser import Grammar, generate, parse

FIG_PAIR = [
    ["go to the blue house"],
    {
        "dialogue_type": "HUMAN_GIVE_COMMAND",
        "action": {
            "action_type": "MOVE",
            "location": {
                "location_type": "REFERENCE_OBJECT",
                "reference_object": {
                    "has_colour": [0, [3, 3]],
                    "has_name": [0, [4, 4]],
                },
            },
        },
    },
]


class TestParseDataset:
    def test_reference_pair_reads_back(self, tmp_path, grammar):
        path = tmp_path / "pairs.json"
        path.write_text(json.dumps([FIG_PAIR]), "utf-8")
        pairs = data_io.read_parse_dataset(path)
        assert len(pairs) == 1
        dialogue, d = pairs[0]
        assert dialogue == FIG_PAIR[0]
        assert d == FIG_PAIR[1]
        assert parse(dialogue, grammar) == d

    def test_empty_list_file(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("[]", "utf-8")
        assert data_io.read_parse_dataset(path) == []

    def test_jsonl_round_trip_on_generated(self, tmp_path, grammar):
        pairs = generate(grammar, seed=3, n=50)
        path = tmp_path / "gen.jsonl"
        data_io.write_parse_dataset(path, pairs, jsonl=True)
        again = data_io.read_parse_dataset(path)
        assert [(d, a) for d, a in again] == [(d, a) for d, a in pairs]
        # write(read(x)) is byte-identical once normalized through one cycle
        path2 = tmp_path / "gen2.jsonl"
        data_io.write_parse_dataset(path2, again, jsonl=True)
        assert path.read_bytes() == path2.read_bytes()

    def test_json_list_round_trip(self, tmp_path, grammar):
        pairs = generate(grammar, seed=5, n=20)
        path = tmp_path / "gen.json"
        data_io.write_parse_dataset(path, pairs, jsonl=False)
        assert [(d, a) for d, a in data_io.read_parse_dataset(path)] == pairs

    def test_single_line_jsonl_is_one_pair(self, tmp_path):
        path = tmp_path / "one.jsonl"
        path.write_text(json.dumps(FIG_PAIR) + "\n", "utf-8")
        pairs = data_io.read_parse_dataset(path)
        assert len(pairs) == 1

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(FIG_PAIR) + "\n{oops\n", "utf-8")
        with pytest.raises(data_io.DataError, match="line 2"):
            data_io.read_parse_dataset(path)

    def test_bad_pair_shape_reports_index(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps([FIG_PAIR, ["only-dialogue"]]), "utf-8")
        with pytest.raises(data_io.DataError, match="pair 1"):
            data_io.read_parse_dataset(path)

    def test_unknown_keys_flagged_not_fatal(self, tmp_path, caplog):
        import copy

        noisy = copy.deepcopy(FIG_PAIR)
        noisy[1]["mystery"] = 1
        path = tmp_path / "noisy.json"
        path.write_text(json.dumps([noisy]), "utf-8")
        with caplog.at_level("WARNING"):
            pairs = data_io.read_parse_dataset(path)
        assert len(pairs) == 1
        assert pairs[0][1]["mystery"] == 1  # preserved
        assert any("mystery" in r.message for r in caplog.records)
        flagged = data_io.validate_parse_pairs(pairs)
        assert flagged and flagged[0][0] == 0


class TestHouseLog:
    def test_single_place_line(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('[3, "user1", [1, 2, 3], [5, 0], "P"]\n', "utf-8")
        events = data_io.read_house_log(path)
        assert events == [[3, "user1", [1, 2, 3], [5, 0], "P"]]

    def test_round_trip(self, tmp_path):
        events = [
            [1, "u", [0, 4, 0], [5, 0], "P"],
            [2, "u", [0, 4, 0], [5, 0], "B"],
            [2, "u", [1, 4, 0], [35, 11], "P"],
        ]
        path = tmp_path / "log.jsonl"
        data_io.write_house_log(path, events)
        assert data_io.read_house_log(path) == events
        path2 = tmp_path / "log2.jsonl"
        data_io.write_house_log(path2, data_io.read_house_log(path))
        assert path.read_bytes() == path2.read_bytes()

    def test_decreasing_timestamp_reports_line(self, tmp_path):
        path = tmp_path / "log.jsonl"
        data_io.write_house_log(
            path,
            [[5, "u", [0, 4, 0], [5, 0], "P"], [4, "u", [1, 4, 0], [5, 0], "P"]],
        )
        with pytest.raises(data_io.DataError, match="line 2"):
            data_io.read_house_log(path)

    def test_bad_kind_rejected(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('[1, "u", [0, 0, 0], [5, 0], "X"]\n', "utf-8")
        with pytest.raises(data_io.DataError, match="'P' or 'B'"):
            data_io.read_house_log(path)

    def test_bad_block_rejected(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('[1, "u", [0, 0, 0], [500, 0], "P"]\n', "utf-8")
        with pytest.raises(data_io.DataError, match="line 1"):
            data_io.read_house_log(path)


def tiny_house():
    dims = [2, 2, 1]
    schematic = [5, 5, 0, 17]  # (y,z,x) scan
    annotated = [1, 1, 0, 2]
    labels = ["wall", "roof"]
    return (dims, schematic, annotated, labels, "tiny")


class TestSegmentation:
    def test_one_by_one_house(self, tmp_path):
        path = tmp_path / "seg.json"
        data_io.write_segmentation(path, [([1, 1, 1], [5], [1], ["wall"], "dot")])
        [(schematic, annotated, labels, name)] = data_io.read_segmentation(path)
        assert annotated == [1]
        assert labels[annotated[0] - 1] == "wall"  # ids are 1-indexed
        assert name == "dot"

    def test_round_trip(self, tmp_path):
        path = tmp_path / "seg.json"
        data_io.write_segmentation(path, [tiny_house()])
        [(schematic, annotated, labels, name)] = data_io.read_segmentation(path)
        assert (schematic, annotated, labels, name) == tiny_house()[1:]
        path2 = tmp_path / "seg2.json"
        data_io.write_segmentation(path2, [([2, 2, 1], schematic, annotated, labels, name)])
        assert path.read_bytes() == path2.read_bytes()

    def test_annotation_id_out_of_range(self, tmp_path):
        path = tmp_path / "seg.json"
        data_io.write_segmentation(path, [([1, 1, 1], [5], [3], ["wall"], "dot")])
        with pytest.raises(data_io.DataError, match="annotation id"):
            data_io.read_segmentation(path)

    def test_shape_mismatch(self, tmp_path):
        path = tmp_path / "seg.json"
        data_io.write_segmentation(path, [([2, 1, 1], [5], [1], ["wall"], "dot")])
        with pytest.raises(data_io.DataError, match="voxels"):
            data_io.read_segmentation(path)

    def test_native_pickle_import(self, tmp_path):
        np = pytest.importorskip("numpy")
        import pickle

        schematic = np.array([[[5, 0], [17, 5]]], dtype=np.int64)
        annotated = np.array([[[1, 0], [2, 1]]], dtype=np.int64)
        path = tmp_path / "seg.pkl"
        with open(path, "wb") as fh:
            pickle.dump([[schematic, annotated, ["wall", "roof"], "h1"]], fh)
        [(s, a, labels, name)] = data_io.read_segmentation_native(path)
        assert s == schematic.tolist()
        assert a == annotated.tolist()
        assert labels == ["wall", "roof"] and name == "h1"
