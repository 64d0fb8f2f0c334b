"""Symbolic memory: typed memory objects plus a single triple store.

Every stored item (block objects, mobs, chats, tasks, and the triples
themselves) is a MemoryObject with a stable integer id, so any item can sit
on either side of a triple. Tag/relation queries are conjunctive over
(predicate, object) pairs and served from a secondary index; results are
ordered by memory id. Chat and task-transition rows are append-only.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

KIND_BLOCK_OBJECT = "BlockObject"
KIND_MOB = "Mob"
KIND_CHAT = "Chat"
KIND_TASK = "Task"
KIND_TRIPLE = "Triple"


class IntegrityError(Exception):
    pass


@dataclass
class MemoryObject:
    memory_id: int
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Triple:
    subject_id: int
    predicate: str
    obj: int | str  # memory id reference or literal string
    is_ref: bool


class MemoryStore:
    def __init__(self):
        self._objects: dict[int, MemoryObject] = {}
        self._next_id = 1
        self._triples: dict[int, Triple] = {}  # triple memory_id -> Triple
        self._triple_ids: dict[Triple, int] = {}
        self._by_subject: dict[int, set[int]] = {}
        self._by_pred_obj: dict[tuple[str, Any], set[int]] = {}

    # -- objects ---------------------------------------------------------

    def insert_object(self, kind: str, payload: dict | None = None) -> int:
        mid = self._next_id
        self._next_id += 1
        self._objects[mid] = MemoryObject(mid, kind, dict(payload or {}))
        return mid

    def get(self, memory_id: int) -> MemoryObject:
        try:
            return self._objects[memory_id]
        except KeyError:
            raise IntegrityError(f"unknown memory id {memory_id}") from None

    def __contains__(self, memory_id: int) -> bool:
        return memory_id in self._objects

    def objects_of_kind(self, kind: str) -> list[MemoryObject]:
        return [o for _, o in sorted(self._objects.items()) if o.kind == kind]

    # -- triples ----------------------------------------------------------

    def insert_triple(self, subject_id: int, predicate: str, obj: int | str) -> int:
        if subject_id not in self._objects:
            raise IntegrityError(f"triple subject {subject_id} does not exist")
        is_ref = isinstance(obj, int)
        if is_ref and obj not in self._objects:
            raise IntegrityError(f"triple object {obj} does not exist")
        triple = Triple(subject_id, predicate, obj, is_ref)
        existing = self._triple_ids.get(triple)
        if existing is not None:
            return existing
        mid = self.insert_object(KIND_TRIPLE, {"predicate": predicate})
        self._triples[mid] = triple
        self._triple_ids[triple] = mid
        self._by_subject.setdefault(subject_id, set()).add(mid)
        self._by_pred_obj.setdefault((predicate, obj), set()).add(mid)
        return mid

    def remove_triple(self, subject_id: int, predicate: str, obj: int | str) -> bool:
        """Drop one relation row (used when a heuristic relation changes)."""
        triple = Triple(subject_id, predicate, obj, isinstance(obj, int))
        mid = self._triple_ids.pop(triple, None)
        if mid is None:
            return False
        del self._triples[mid]
        del self._objects[mid]
        self._by_subject[subject_id].discard(mid)
        self._by_pred_obj[(predicate, obj)].discard(mid)
        return True

    def triples_of(self, subject_id: int, predicate: str | None = None) -> list[Triple]:
        out = [self._triples[mid] for mid in sorted(self._by_subject.get(subject_id, ()))]
        if predicate is not None:
            out = [t for t in out if t.predicate == predicate]
        return out

    def triple_id(self, subject_id: int, predicate: str, obj: int | str) -> int | None:
        return self._triple_ids.get(Triple(subject_id, predicate, obj, isinstance(obj, int)))

    def subjects_with(self, predicate: str, obj: int | str) -> set[int]:
        return {
            self._triples[mid].subject_id
            for mid in self._by_pred_obj.get((predicate, obj), ())
        }

    def query(self, filters: Iterable[tuple[str, Any]], kind: str | None = None) -> list[MemoryObject]:
        """Conjunctive (predicate, object) match, ordered by memory id.

        An empty filter list matches every object of the requested kind.
        """
        filters = list(filters)
        ids: set[int] | None = None
        for pred, obj in filters:
            subjects = self.subjects_with(pred, obj)
            ids = subjects if ids is None else ids & subjects
            if not ids:
                return []
        if ids is None:
            candidates = [o for _, o in sorted(self._objects.items())]
        else:
            candidates = [self._objects[i] for i in sorted(ids)]
        out = []
        for o in candidates:
            if kind is not None and o.kind != kind:
                continue
            if o.payload.get("archived"):
                continue
            out.append(o)
        return out

    # -- chats and tasks ----------------------------------------------------

    def record_chat(self, speaker: str, text: str, step: int) -> int:
        return self.insert_object(KIND_CHAT, {"speaker": speaker, "text": text, "step": step})

    def chats_by(self, speaker: str) -> list[MemoryObject]:
        return [o for o in self.objects_of_kind(KIND_CHAT) if o.payload["speaker"] == speaker]

    def record_task(self, task_kind: str, step: int) -> int:
        mid = self.insert_object(
            KIND_TASK,
            {"task_kind": task_kind, "transitions": [], "undo_log": None},
        )
        self.record_task_transition(mid, "created", step)
        return mid

    def record_task_transition(self, task_mid: int, status: str, step: int) -> None:
        obj = self.get(task_mid)
        if obj.kind != KIND_TASK:
            raise IntegrityError(f"memory id {task_mid} is not a task")
        obj.payload["transitions"].append((status, step))
        obj.payload["status"] = status

    def set_task_undo_log(self, task_mid: int, records: list) -> None:
        self.get(task_mid).payload["undo_log"] = list(records)

    def last_undoable_task(self) -> MemoryObject | None:
        """Most recent finished task with a non-empty undo log."""
        best = None
        best_step = None
        for o in self.objects_of_kind(KIND_TASK):
            if not o.payload.get("undo_log"):
                continue
            for status, step in o.payload["transitions"]:
                if status == "finished" and (best_step is None or step >= best_step):
                    best, best_step = o, step
        return best

    # -- block objects -------------------------------------------------------

    def upsert_block_object(self, positions: frozenset, provenance: str) -> tuple[int, bool]:
        """Register a connected component, keeping the old id when at least
        half of an existing object's voxels are still part of it.

        Returns (memory_id, is_new).
        """
        best_mid, best_overlap = None, 0
        for o in self.objects_of_kind(KIND_BLOCK_OBJECT):
            if o.payload.get("archived"):
                continue
            old_positions = o.payload["positions"]
            overlap = len(old_positions & positions)
            if overlap * 2 >= len(old_positions) and overlap > best_overlap:
                best_mid, best_overlap = o.memory_id, overlap
        if best_mid is not None:
            obj = self.get(best_mid)
            obj.payload["positions"] = positions
            obj.payload["provenance"] = provenance
            return best_mid, False
        mid = self.insert_object(
            KIND_BLOCK_OBJECT, {"positions": positions, "provenance": provenance}
        )
        return mid, True

    def archive_object(self, memory_id: int) -> None:
        self.get(memory_id).payload["archived"] = True

    # -- debugging ------------------------------------------------------------

    def dump(self, fh) -> int:
        """Write the full store as JSON lines; returns the row count."""
        n = 0
        for mid, obj in sorted(self._objects.items()):
            if obj.kind == KIND_TRIPLE:
                t = self._triples[mid]
                row = {
                    "memory_id": mid,
                    "kind": obj.kind,
                    "subject": t.subject_id,
                    "predicate": t.predicate,
                    "object": t.obj,
                    "object_is_ref": t.is_ref,
                }
            else:
                row = {"memory_id": mid, "kind": obj.kind, "payload": _jsonable(obj.payload)}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            n += 1
        return n


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted(_jsonable(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "to_json"):
        return value.to_json()
    return value
