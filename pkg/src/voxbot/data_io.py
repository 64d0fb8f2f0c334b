"""Readers and writers for the released dataset shapes.

Three families:
  * parse datasets: (dialogue, action dictionary) pairs, either one JSON list
    for the whole file or one JSON pair per line (both are accepted; the
    writer can produce either);
  * building session logs: one `[t, userid, [x, y, z], [id, meta], "P"/"B"]`
    JSON array per line, timestamps non-decreasing;
  * instance segmentation: a portable JSON container holding, per house, the
    voxel grid, the per-voxel annotation ids (1-indexed into the annotation
    list, 0 for unlabeled), the annotation list, and the house name. A
    best-effort importer for the original pickled-array layout is included.

Every malformed input raises DataError naming the offending line or index.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

from . import parser as parsing

log = logging.getLogger(__name__)


class DataError(Exception):
    pass


# -- parse datasets ---------------------------------------------------------------

def read_parse_dataset(path) -> list[tuple[list[str], dict]]:
    """Load (dialogue, dictionary) pairs; schema problems are warned, not fatal."""
    text = Path(path).read_text("utf-8")
    if not text.strip():
        return []
    try:
        data = json.loads(text)
        if not isinstance(data, list):
            raise DataError("top level: expected a JSON list of pairs")
        # a one-line JSONL file is itself valid JSON: one pair, not a pair list
        pairs = [data] if _looks_like_pair(data) else data
    except json.JSONDecodeError:
        pairs = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                pairs.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataError(f"line {lineno}: malformed JSON ({e.msg})") from None
    out = []
    for i, pair in enumerate(pairs):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise DataError(f"pair {i}: expected [dialogue, dictionary]")
        dialogue, dictionary = pair
        if isinstance(dialogue, str):
            dialogue = [dialogue]
        if not isinstance(dialogue, list) or not all(isinstance(s, str) for s in dialogue):
            raise DataError(f"pair {i}: dialogue must be a list of sentences")
        if not isinstance(dictionary, dict):
            raise DataError(f"pair {i}: dictionary must be an object")
        problems = parsing.validate(dictionary, dialogue)
        if problems:
            log.warning("pair %d: schema flags: %s", i, "; ".join(problems))
        out.append((dialogue, dictionary))
    return out


def _looks_like_pair(data) -> bool:
    return (
        isinstance(data, list)
        and len(data) == 2
        and isinstance(data[1], dict)
        and (
            isinstance(data[0], str)
            or (isinstance(data[0], list) and all(isinstance(s, str) for s in data[0]))
        )
    )


def validate_parse_pairs(pairs) -> list[tuple[int, list[str]]]:
    """Schema violations per pair index (empty when everything checks out)."""
    found = []
    for i, (dialogue, dictionary) in enumerate(pairs):
        problems = parsing.validate(dictionary, dialogue)
        if problems:
            found.append((i, problems))
    return found


def write_parse_dataset(path, pairs, jsonl: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if jsonl:
            for dialogue, dictionary in pairs:
                fh.write(json.dumps([dialogue, dictionary]) + "\n")
        else:
            fh.write(json.dumps([[d, a] for d, a in pairs], indent=1) + "\n")


# -- building session logs -----------------------------------------------------------

def read_house_log(path) -> list[list]:
    """Events in order; raises on structure problems or decreasing timestamps."""
    events = []
    prev_t = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"line {lineno}: malformed JSON ({e.msg})") from None
            err = _check_event(event)
            if err:
                raise DataError(f"line {lineno}: {err}")
            if prev_t is not None and event[0] < prev_t:
                raise DataError(
                    f"line {lineno}: timestamp {event[0]} decreases (previous {prev_t})"
                )
            prev_t = event[0]
            events.append(event)
    return events


def _check_event(event) -> str | None:
    if not isinstance(event, list) or len(event) != 5:
        return "expected [t, userid, [x, y, z], [id, meta], kind]"
    t, userid, loc, block, kind = event
    if not isinstance(t, int):
        return "timestamp must be an integer"
    if not isinstance(userid, (str, int)):
        return "userid must be a string or integer"
    if not (isinstance(loc, list) and len(loc) == 3 and all(isinstance(v, int) for v in loc)):
        return "location must be [x, y, z] integers"
    if not (
        isinstance(block, list)
        and len(block) == 2
        and all(isinstance(v, int) for v in block)
        and 0 <= block[0] <= 255
        and 0 <= block[1] <= 15
    ):
        return "block must be [id, meta] within field widths"
    if kind not in ("P", "B"):
        return f"kind must be 'P' or 'B', not {kind!r}"
    return None


def write_house_log(path, events) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event) + "\n")


# -- instance segmentation ---------------------------------------------------------------

def read_segmentation(path) -> list[tuple[list, list, list, str]]:
    """Portable segmentation container.

    Each entry is {house_name, dims: [x, y, z], schematic: flat (y, z, x)
    scan of block ids, annotated_schematic: same shape of annotation ids,
    annotation_list: [label, ...]}. Returns (schematic, annotated, labels,
    name) tuples with the flat lists unchanged.
    """
    try:
        data = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"malformed JSON: {e.msg}") from None
    if not isinstance(data, list):
        raise DataError("top level: expected a JSON list of houses")
    out = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise DataError(f"house {i}: expected an object")
        try:
            dims = entry["dims"]
            schematic = entry["schematic"]
            annotated = entry["annotated_schematic"]
            labels = entry["annotation_list"]
            name = entry["house_name"]
        except KeyError as e:
            raise DataError(f"house {i}: missing key {e.args[0]!r}") from None
        if not (isinstance(dims, list) and len(dims) == 3 and all(isinstance(v, int) and v > 0 for v in dims)):
            raise DataError(f"house {i}: dims must be three positive integers")
        volume = dims[0] * dims[1] * dims[2]
        if len(schematic) != volume:
            raise DataError(f"house {i}: schematic has {len(schematic)} voxels, dims say {volume}")
        if len(annotated) != len(schematic):
            raise DataError(f"house {i}: annotated_schematic shape differs from schematic")
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise DataError(f"house {i}: annotation_list must be a list of strings")
        for j, ann in enumerate(annotated):
            if not isinstance(ann, int) or not 0 <= ann <= len(labels):
                raise DataError(
                    f"house {i}: annotation id {ann!r} at voxel {j} outside 1..{len(labels)}"
                )
        out.append((schematic, annotated, labels, name))
    return out


def write_segmentation(path, houses) -> None:
    """Inverse of read_segmentation; houses are (dims, schematic, annotated,
    labels, name) tuples."""
    data = []
    for dims, schematic, annotated, labels, name in houses:
        data.append(
            {
                "house_name": name,
                "dims": list(dims),
                "schematic": list(schematic),
                "annotated_schematic": list(annotated),
                "annotation_list": list(labels),
            }
        )
    Path(path).write_text(json.dumps(data, indent=1) + "\n", "utf-8")


def read_segmentation_native(path) -> list[tuple[list, list, list, str]]:
    """Best-effort import of the original pickled numpy layout."""
    import pickle

    with open(path, "rb") as fh:
        data = pickle.load(fh)
    out = []
    for i, entry in enumerate(data):
        try:
            schematic, annotated, labels, name = entry
            out.append((schematic.tolist(), annotated.tolist(), list(labels), str(name)))
        except (TypeError, ValueError, AttributeError) as e:
            raise DataError(f"house {i}: unrecognized native layout ({e})") from None
    return out
