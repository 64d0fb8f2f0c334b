"""Binary wire protocol shared by the server, agents, and scripted clients.

Framing: every message is `u32 length (big-endian)` followed by `length`
payload bytes, the first of which is the message tag. Strings are UTF-8 with
a u16 big-endian length prefix; block coordinates are i32 big-endian;
continuous positions and look angles are f64 big-endian. The full layout with
hex examples lives in PROTOCOL.md; that file and this module are the
normative wire contract.

The codec is pure and stateless. `decode_frame` either returns a message, or
None when the buffer does not yet hold a complete frame (consuming nothing),
or raises ProtocolError pointing at the offending offset. It never reads past
the declared frame length.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .world import BlockId, Location

MAX_FRAME = 16 * 1024 * 1024

TAG_LOGIN = 0x01
TAG_CHAT_SEND = 0x02
TAG_CHAT_BROADCAST = 0x03
TAG_BLOCK_CHANGE = 0x04
TAG_PLAYER_MOVE = 0x05
TAG_WORLD_SNAPSHOT = 0x06
TAG_SPAWN_MOB = 0x07
TAG_TICK = 0x08
TAG_DISCONNECT = 0x09

SOURCE_CODES = {"natural": 0, "player": 1, "agent": 2}
SOURCE_NAMES = {v: k for k, v in SOURCE_CODES.items()}


class ProtocolError(Exception):
    def __init__(self, reason: str, offset: int = 0):
        super().__init__(f"{reason} (offset {offset})")
        self.reason = reason
        self.offset = offset


class EncodeError(Exception):
    pass


@dataclass(frozen=True)
class Login:
    name: str
    version: int = 1


@dataclass(frozen=True)
class ChatSend:
    text: str


@dataclass(frozen=True)
class ChatBroadcast:
    speaker: str
    text: str


@dataclass(frozen=True)
class BlockChange:
    loc: Location
    block: BlockId
    source: str


@dataclass(frozen=True)
class PlayerMove:
    name: str
    position: tuple[float, float, float]
    look: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class MobState:
    kind: str
    position: tuple[float, float, float]
    look: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class PlayerState:
    name: str
    position: tuple[float, float, float]
    look: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class WorldSnapshot:
    bounds: tuple[int, int, int]
    runs: tuple[tuple[int, int, int], ...]  # (count, id, meta), (y, z, x) scan order
    mobs: tuple[MobState, ...] = ()
    players: tuple[PlayerState, ...] = ()


@dataclass(frozen=True)
class SpawnMob:
    kind: str
    loc: Location


@dataclass(frozen=True)
class Tick:
    seq: int


@dataclass(frozen=True)
class Disconnect:
    reason: str


WireMessage = (
    Login | ChatSend | ChatBroadcast | BlockChange | PlayerMove
    | WorldSnapshot | SpawnMob | Tick | Disconnect
)


# -- encoding -----------------------------------------------------------------

def _enc_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise EncodeError(f"string of {len(raw)} bytes exceeds u16 length prefix")
    return len(raw).to_bytes(2, "big") + raw


def _enc_i32(v: int) -> bytes:
    if not -(2**31) <= v < 2**31:
        raise EncodeError(f"value {v} out of i32 range")
    return v.to_bytes(4, "big", signed=True)


def _enc_u32(v: int) -> bytes:
    if not 0 <= v < 2**32:
        raise EncodeError(f"value {v} out of u32 range")
    return v.to_bytes(4, "big")


def _enc_f64(v: float) -> bytes:
    return struct.pack(">d", v)


def _enc_loc(loc) -> bytes:
    x, y, z = loc
    return _enc_i32(x) + _enc_i32(y) + _enc_i32(z)


def _enc_pos(pos) -> bytes:
    x, y, z = pos
    return _enc_f64(x) + _enc_f64(y) + _enc_f64(z)


def _enc_look(look) -> bytes:
    yaw, pitch = look
    return _enc_f64(yaw) + _enc_f64(pitch)


def encode_payload(msg: WireMessage) -> bytes:
    if isinstance(msg, Login):
        if not 0 <= msg.version <= 255:
            raise EncodeError("login version out of u8 range")
        return bytes([TAG_LOGIN, msg.version]) + _enc_str(msg.name)
    if isinstance(msg, ChatSend):
        return bytes([TAG_CHAT_SEND]) + _enc_str(msg.text)
    if isinstance(msg, ChatBroadcast):
        return bytes([TAG_CHAT_BROADCAST]) + _enc_str(msg.speaker) + _enc_str(msg.text)
    if isinstance(msg, BlockChange):
        if msg.source not in SOURCE_CODES:
            raise EncodeError(f"unknown block source {msg.source!r}")
        return (
            bytes([TAG_BLOCK_CHANGE])
            + _enc_loc(msg.loc)
            + bytes([msg.block.id, msg.block.meta, SOURCE_CODES[msg.source]])
        )
    if isinstance(msg, PlayerMove):
        return bytes([TAG_PLAYER_MOVE]) + _enc_str(msg.name) + _enc_pos(msg.position) + _enc_look(msg.look)
    if isinstance(msg, WorldSnapshot):
        out = [bytes([TAG_WORLD_SNAPSHOT]), _enc_loc(msg.bounds), _enc_u32(len(msg.runs))]
        for count, bid, meta in msg.runs:
            if not (0 <= bid <= 255 and 0 <= meta <= 15):
                raise EncodeError(f"run block ({bid}, {meta}) outside field widths")
            out.append(_enc_u32(count) + bytes([bid, meta]))
        if len(msg.mobs) > 0xFFFF or len(msg.players) > 0xFFFF:
            raise EncodeError("too many entities for u16 count")
        out.append(len(msg.mobs).to_bytes(2, "big"))
        for mob in msg.mobs:
            out.append(_enc_str(mob.kind) + _enc_pos(mob.position) + _enc_look(mob.look))
        out.append(len(msg.players).to_bytes(2, "big"))
        for pl in msg.players:
            out.append(_enc_str(pl.name) + _enc_pos(pl.position) + _enc_look(pl.look))
        return b"".join(out)
    if isinstance(msg, SpawnMob):
        return bytes([TAG_SPAWN_MOB]) + _enc_str(msg.kind) + _enc_loc(msg.loc)
    if isinstance(msg, Tick):
        return bytes([TAG_TICK]) + _enc_u32(msg.seq)
    if isinstance(msg, Disconnect):
        return bytes([TAG_DISCONNECT]) + _enc_str(msg.reason)
    raise EncodeError(f"not a wire message: {type(msg).__name__}")


def encode(msg: WireMessage) -> bytes:
    payload = encode_payload(msg)
    if len(payload) > MAX_FRAME:
        raise EncodeError(f"frame of {len(payload)} bytes exceeds MAX_FRAME")
    return len(payload).to_bytes(4, "big") + payload


# -- decoding -----------------------------------------------------------------

class _Reader:
    """Bounds-checked reader over one frame's payload."""

    __slots__ = ("data", "pos", "base")

    def __init__(self, data, base_offset: int):
        self.data = data
        self.pos = 0
        self.base = base_offset

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError("frame truncated mid-field", self.base + self.pos)
        chunk = bytes(self.data[self.pos : self.pos + n])
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self._take(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self._take(4), "big")

    def i32(self) -> int:
        return int.from_bytes(self._take(4), "big", signed=True)

    def f64(self) -> float:
        return struct.unpack(">d", self._take(8))[0]

    def string(self) -> str:
        start = self.base + self.pos
        n = self.u16()
        raw = self._take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("malformed UTF-8 string", start) from None

    def loc(self) -> Location:
        return Location(self.i32(), self.i32(), self.i32())

    def pos3(self) -> tuple[float, float, float]:
        return (self.f64(), self.f64(), self.f64())

    def look(self) -> tuple[float, float]:
        return (self.f64(), self.f64())

    def block(self) -> BlockId:
        at = self.base + self.pos
        bid, meta = self.u8(), self.u8()
        if meta > 15:
            raise ProtocolError(f"block meta {meta} outside 0..15", at)
        return BlockId(bid, meta)

    def done(self) -> bool:
        return self.pos == len(self.data)


def _dec_login(r: _Reader) -> Login:
    version = r.u8()
    return Login(name=r.string(), version=version)


def _dec_chat_send(r: _Reader) -> ChatSend:
    return ChatSend(r.string())


def _dec_chat_broadcast(r: _Reader) -> ChatBroadcast:
    return ChatBroadcast(r.string(), r.string())


def _dec_block_change(r: _Reader) -> BlockChange:
    loc = r.loc()
    block = r.block()
    at = r.base + r.pos
    code = r.u8()
    if code not in SOURCE_NAMES:
        raise ProtocolError(f"unknown block source code {code}", at)
    return BlockChange(loc, block, SOURCE_NAMES[code])


def _dec_player_move(r: _Reader) -> PlayerMove:
    return PlayerMove(r.string(), r.pos3(), r.look())


def _dec_world_snapshot(r: _Reader) -> WorldSnapshot:
    bounds = tuple(r.loc())
    runs = []
    for _ in range(r.u32()):
        count = r.u32()
        block = r.block()
        runs.append((count, block.id, block.meta))
    mobs = tuple(MobState(r.string(), r.pos3(), r.look()) for _ in range(r.u16()))
    players = tuple(PlayerState(r.string(), r.pos3(), r.look()) for _ in range(r.u16()))
    return WorldSnapshot(bounds, tuple(runs), mobs, players)


def _dec_spawn_mob(r: _Reader) -> SpawnMob:
    return SpawnMob(r.string(), r.loc())


def _dec_tick(r: _Reader) -> Tick:
    return Tick(r.u32())


def _dec_disconnect(r: _Reader) -> Disconnect:
    return Disconnect(r.string())


_DECODERS = {
    TAG_LOGIN: _dec_login,
    TAG_CHAT_SEND: _dec_chat_send,
    TAG_CHAT_BROADCAST: _dec_chat_broadcast,
    TAG_BLOCK_CHANGE: _dec_block_change,
    TAG_PLAYER_MOVE: _dec_player_move,
    TAG_WORLD_SNAPSHOT: _dec_world_snapshot,
    TAG_SPAWN_MOB: _dec_spawn_mob,
    TAG_TICK: _dec_tick,
    TAG_DISCONNECT: _dec_disconnect,
}


def decode_frame(buf, offset: int = 0):
    """Decode one frame starting at `offset`.

    Returns (message, next_offset), or None when the buffer holds less than
    one complete frame (nothing consumed). Raises ProtocolError on malformed
    input, identifying the byte offset of the problem.
    """
    view = memoryview(buf)
    if offset + 4 > len(view):
        return None
    length = int.from_bytes(view[offset : offset + 4], "big")
    if length < 1:
        raise ProtocolError("frame length must be at least 1", offset)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame length {length} exceeds MAX_FRAME", offset)
    start = offset + 4
    if start + length > len(view):
        return None
    payload = view[start : start + length]
    tag = payload[0]
    dec = _DECODERS.get(tag)
    if dec is None:
        raise ProtocolError(f"unknown message tag 0x{tag:02X}", start)
    r = _Reader(payload[1:], start + 1)
    msg = dec(r)
    if not r.done():
        raise ProtocolError(
            f"frame length mismatch: {len(payload) - 1 - r.pos} unread bytes",
            start + 1 + r.pos,
        )
    return msg, start + length


def decode_payload(payload: bytes) -> WireMessage:
    """Decode one unframed payload (tag + body), e.g. a base64 gateway frame."""
    if not payload:
        raise ProtocolError("empty payload", 0)
    tag = payload[0]
    dec = _DECODERS.get(tag)
    if dec is None:
        raise ProtocolError(f"unknown message tag 0x{tag:02X}", 0)
    r = _Reader(memoryview(payload)[1:], 1)
    msg = dec(r)
    if not r.done():
        raise ProtocolError("payload length mismatch", 1 + r.pos)
    return msg


def iter_frames(buf, offset: int = 0):
    """Decode as many complete frames as the buffer holds.

    Returns (messages, next_offset). Malformed input raises ProtocolError.
    """
    out = []
    while True:
        got = decode_frame(buf, offset)
        if got is None:
            return out, offset
        msg, offset = got
        out.append(msg)
