"""Client-side session: login, mirrored world, chat and entity tracking."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from . import protocol
from .protocol import (
    BlockChange,
    ChatBroadcast,
    ChatSend,
    Disconnect,
    Login,
    PlayerMove,
    SpawnMob,
    Tick,
    WorldSnapshot,
)
from .transport import MessageChannel, SocketEndpoint, TransportClosed
from .world import BlockId, Location, PlayerRecord, VoxelWorld

log = logging.getLogger(__name__)


@dataclass
class ChatLine:
    speaker: str
    text: str
    tick: int


class WorldClient:
    """Mirrors the server world from the snapshot plus ordered deltas."""

    def __init__(self, endpoint, name: str):
        self.channel = MessageChannel(endpoint)
        self.name = name
        self.world: VoxelWorld | None = None
        self.position: tuple[float, float, float] = (0.0, 0.0, 0.0)
        self.look: tuple[float, float] = (0.0, 0.0)
        self.tick = 0
        self.chats: list[ChatLine] = []
        self.disconnect_reason: str | None = None
        self.snapshot_count = 0
        # per-pump listeners: (kind, message) pairs appended by pump()
        self.events: list[tuple[str, protocol.WireMessage]] = []

    @classmethod
    def connect(cls, host: str, port: int, name: str, timeout: float = 5.0) -> "WorldClient":
        client = cls(SocketEndpoint.connect(host, port, timeout), name)
        client.login()
        return client

    @property
    def connected(self) -> bool:
        return not self.channel.closed and self.disconnect_reason is None

    def login(self) -> None:
        self.channel.send(Login(self.name))

    def pump(self) -> list[tuple[str, protocol.WireMessage]]:
        """Apply pending server messages to the mirror; returns typed events."""
        batch: list[tuple[str, protocol.WireMessage]] = []
        try:
            msgs = self.channel.poll()
        except (TransportClosed, OSError):
            msgs = []
        except protocol.ProtocolError as e:
            log.error("protocol error from server: %s", e)
            self.channel.close()
            return batch
        for msg in msgs:
            kind = self._apply(msg)
            if kind is not None:
                batch.append((kind, msg))
        self.events.extend(batch)
        return batch

    def _apply(self, msg) -> str | None:
        if isinstance(msg, WorldSnapshot):
            self.world = VoxelWorld.from_runs(msg.bounds, msg.runs)
            for mob in msg.mobs:
                self.world.spawn_mob(mob.kind, mob.position, mob.look)
            for pl in msg.players:
                self.world.players[pl.name] = PlayerRecord(pl.name, pl.position, pl.look)
                if pl.name == self.name:
                    self.position = pl.position
                    self.look = pl.look
            self.snapshot_count += 1
            return "snapshot"
        if isinstance(msg, BlockChange):
            if self.world is not None and self.world.in_bounds(msg.loc):
                self.world.set_block(msg.loc, msg.block, msg.source)
            return "block"
        if isinstance(msg, ChatBroadcast):
            self.chats.append(ChatLine(msg.speaker, msg.text, self.tick))
            return "chat"
        if isinstance(msg, PlayerMove):
            if self.world is not None:
                rec = self.world.players.get(msg.name)
                if rec is None:
                    self.world.players[msg.name] = PlayerRecord(msg.name, msg.position, msg.look)
                else:
                    rec.position = msg.position
                    rec.look = msg.look
            if msg.name == self.name:
                self.position = msg.position
                self.look = msg.look
            return "move"
        if isinstance(msg, SpawnMob):
            if self.world is not None:
                x, y, z = msg.loc
                self.world.spawn_mob(msg.kind, (x + 0.5, float(y), z + 0.5))
            return "mob"
        if isinstance(msg, Tick):
            self.tick = msg.seq
            return "tick"
        if isinstance(msg, Disconnect):
            self.disconnect_reason = msg.reason
            self.channel.close()
            return "disconnect"
        return None

    # -- outbound helpers ------------------------------------------------------

    def say(self, text: str) -> None:
        self.channel.send(ChatSend(text))

    def place_block(self, loc, block: BlockId, source: str = "player") -> None:
        self.channel.send(BlockChange(Location(*loc), block, source))

    def break_block(self, loc, source: str = "player") -> None:
        self.channel.send(BlockChange(Location(*loc), BlockId(0), source))

    def move_to(self, position, look=None) -> None:
        look = look if look is not None else self.look
        self.position = tuple(float(v) for v in position)
        self.look = tuple(look)
        self.channel.send(PlayerMove(self.name, self.position, self.look))

    def request_spawn(self, kind: str, loc) -> None:
        self.channel.send(SpawnMob(kind, Location(*loc)))

    def player_position(self, name: str):
        if self.world is None:
            return None
        rec = self.world.players.get(name)
        return rec.position if rec else None

    def close(self) -> None:
        self.channel.close()
