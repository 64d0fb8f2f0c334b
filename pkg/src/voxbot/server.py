"""Authoritative world server: tick loop, broadcast, recording, replay.

Connection I/O is drained in `poll()`, but every world mutation is applied
inside `tick()`, in arrival order, so the tick loop is the only writer and a
scripted session is fully deterministic. Tests drive `poll()`/`tick()` by
hand; the CLI runs them on a wall-clock cadence.

Clients may be TCP sockets, in-process loopback endpoints, or WebSocket
gateway sessions; all speak the same message registry.
"""
from __future__ import annotations

import json
import logging
import random
import selectors
import socket
import time
from collections import deque
from dataclasses import dataclass, field

from . import protocol
from .protocol import (
    BlockChange,
    ChatBroadcast,
    ChatSend,
    Disconnect,
    Login,
    MobState,
    PlayerMove,
    PlayerState,
    SpawnMob,
    Tick,
    WorldSnapshot,
)
from .transport import MessageChannel, TransportClosed, loopback_pair
from .world import (
    BlockId,
    BlockRegistry,
    Location,
    MOB_KINDS,
    PlayerRecord,
    VoxelWorld,
    make_flat_world,
    spawn_point,
)

log = logging.getLogger(__name__)


class StartupError(Exception):
    pass


class ReplayError(Exception):
    pass


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 0  # 0 picks a free port
    bounds: tuple[int, int, int] = (256, 128, 256)
    ground_height: int = 4
    seed: int = 0
    record_path: str | None = None
    gateway_port: int | None = None
    registry_path: str | None = None
    tick_rate: float = 20.0
    ui_dir: str | None = None


class SessionRecorder:
    """Appends place/break events as one JSON array per line.

    A sink failure disables recording with a warning; the server keeps going.
    """

    def __init__(self, path: str | None):
        self.events: list[list] = []
        self._fh = None
        self.enabled = True
        if path is not None:
            try:
                self._fh = open(path, "w", encoding="utf-8")
            except OSError as e:
                log.warning("recording disabled: cannot open %s (%s)", path, e)
                self.enabled = False

    def record(self, tick: int, userid: str, loc, old: BlockId, new: BlockId) -> None:
        if not self.enabled:
            return
        if new.is_air:
            if old.is_air:
                return
            event = [tick, userid, [loc[0], loc[1], loc[2]], [old.id, old.meta], "B"]
        else:
            event = [tick, userid, [loc[0], loc[1], loc[2]], [new.id, new.meta], "P"]
        self.events.append(event)
        if self._fh is not None:
            try:
                self._fh.write(json.dumps(event) + "\n")
            except OSError as e:
                log.warning("recording disabled: write failed (%s)", e)
                self.enabled = False
                self._fh = None

    def close(self) -> None:
        if self._fh is not None:
            try:
                self._fh.flush()
                self._fh.close()
            except OSError:
                pass
            self._fh = None


def replay(events, world: VoxelWorld) -> VoxelWorld:
    """Apply recorded place/break events to `world` in order.

    Timestamps must be non-decreasing; a break of an air voxel is an error.
    """
    prev_t = None
    for i, event in enumerate(events):
        try:
            t, userid, loc, block, kind = event
            loc = Location(int(loc[0]), int(loc[1]), int(loc[2]))
            block = BlockId(int(block[0]), int(block[1]))
        except (TypeError, ValueError, IndexError) as e:
            raise ReplayError(f"event {i}: malformed ({e})") from None
        if prev_t is not None and t < prev_t:
            raise ReplayError(f"event {i}: timestamp {t} decreases (previous {prev_t})")
        prev_t = t
        if kind == "P":
            world.set_block(loc, block, "player")
        elif kind == "B":
            if world.get_block(loc).is_air:
                raise ReplayError(f"event {i}: break on air voxel {tuple(loc)}")
            world.set_block(loc, BlockId(0), "player")
        else:
            raise ReplayError(f"event {i}: unknown kind {kind!r}")
    return world


class _Conn:
    def __init__(self, channel, kind: str):
        self.channel = channel
        self.kind = kind  # "tcp" | "local" | "ws"
        self.name: str | None = None
        self.alive = True

    def send(self, msg) -> None:
        if not self.alive:
            return
        try:
            self.channel.send(msg)
        except (TransportClosed, OSError):
            self.alive = False


class WorldServer:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.registry = (
            BlockRegistry.load(config.registry_path)
            if config.registry_path
            else BlockRegistry.default()
        )
        self.world = make_flat_world(config.bounds, config.ground_height)
        self.recorder = SessionRecorder(config.record_path)
        self.tick_no = 0
        self.rng = random.Random(config.seed)
        self._conns: list[_Conn] = []
        self._events: deque[tuple[_Conn, protocol.WireMessage]] = deque()
        self._sel = selectors.DefaultSelector()
        self._listener = self._listen(config.host, config.port, "server")
        self.port = self._listener.getsockname()[1]
        self.gateway = None
        self.gateway_port = None
        if config.gateway_port is not None:
            from .gateway import Gateway

            gw_sock = self._listen(config.host, config.gateway_port, "gateway")
            self.gateway = Gateway(self, gw_sock, config.ui_dir)
            self.gateway_port = gw_sock.getsockname()[1]

    def _listen(self, host: str, port: int, what: str) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as e:
            sock.close()
            raise StartupError(f"cannot bind {what} port {port}: {e}") from None
        sock.listen(16)
        sock.setblocking(False)
        self._sel.register(sock, selectors.EVENT_READ, ("listener", what))
        return sock

    # -- client attachment ---------------------------------------------------

    def connect_local(self):
        """In-process client endpoint; the returned side belongs to the caller."""
        ours, theirs = loopback_pair()
        self._conns.append(_Conn(MessageChannel(ours), "local"))
        return theirs

    def attach_channel(self, channel, kind: str) -> "_Conn":
        conn = _Conn(channel, kind)
        self._conns.append(conn)
        return conn

    # -- I/O pump -------------------------------------------------------------

    def poll(self, timeout: float = 0.0) -> None:
        """Move bytes: accept, read frames into the event queue, flush writes."""
        for key, _ in self._sel.select(timeout):
            tag = key.data
            if tag == ("listener", "server"):
                self._accept_tcp()
            elif tag == ("listener", "gateway"):
                self.gateway.accept()
            elif isinstance(tag, tuple) and tag[0] == "gwconn":
                self.gateway.on_readable(tag[1])
            # tcp conns are drained below regardless of readiness
        for conn in self._conns:
            if not conn.alive:
                continue
            try:
                msgs = conn.channel.poll()
            except protocol.ProtocolError as e:
                log.warning("disconnecting %s: %s", conn.name or "<pre-login>", e)
                conn.send(Disconnect(f"protocol error: {e.reason}"))
                self._drop(conn)
                continue
            except (TransportClosed, OSError):
                self._drop(conn)
                continue
            if conn.channel.closed:
                self._drop(conn)
                continue
            for msg in msgs:
                self._events.append((conn, msg))
        self._conns = [c for c in self._conns if c.alive]

    def _accept_tcp(self) -> None:
        from .transport import SocketEndpoint

        while True:
            try:
                sock, _ = self._listener.accept()
            except (BlockingIOError, InterruptedError):
                return
            self._conns.append(_Conn(MessageChannel(SocketEndpoint(sock)), "tcp"))

    def _drop(self, conn: _Conn) -> None:
        conn.alive = False
        conn.channel.close()
        if conn.name is not None and conn.name in self.world.players:
            del self.world.players[conn.name]

    # -- tick loop --------------------------------------------------------------

    def tick(self) -> None:
        """Apply queued events in order, wander mobs, then broadcast the tick."""
        self.tick_no += 1
        while self._events:
            conn, msg = self._events.popleft()
            if conn.alive:
                self._apply(conn, msg)
        if self.tick_no % 10 == 0:
            self._wander_mobs()
        self.broadcast(Tick(self.tick_no))

    def _apply(self, conn: _Conn, msg) -> None:
        if isinstance(msg, Login):
            self._apply_login(conn, msg)
            return
        if conn.name is None:
            conn.send(Disconnect("login required"))
            self._drop(conn)
            return
        if isinstance(msg, ChatSend):
            self.broadcast(ChatBroadcast(conn.name, msg.text))
        elif isinstance(msg, BlockChange):
            self._apply_block_change(conn, msg)
        elif isinstance(msg, PlayerMove):
            rec = self.world.players.get(conn.name)
            if rec is not None:
                rec.position = msg.position
                rec.look = msg.look
            self.broadcast(PlayerMove(conn.name, msg.position, msg.look))
        elif isinstance(msg, SpawnMob):
            if msg.kind in MOB_KINDS and self.world.in_bounds(msg.loc):
                x, y, z = msg.loc
                self.world.spawn_mob(msg.kind, (x + 0.5, float(y), z + 0.5))
                self.broadcast(SpawnMob(msg.kind, msg.loc))
            else:
                log.info("ignoring invalid spawn request %r", msg)
        elif isinstance(msg, Disconnect):
            self._drop(conn)
        else:
            log.info("ignoring unexpected %s from %s", type(msg).__name__, conn.name)

    def _apply_login(self, conn: _Conn, msg: Login) -> None:
        if conn.name is not None:
            return
        name = msg.name.strip()
        if not name or name in self.world.players:
            conn.send(Disconnect(f"duplicate or invalid name {name!r}"))
            self._drop(conn)
            return
        sp = spawn_point(self.world)
        pos = (sp.x + 0.0, sp.y + 0.0, sp.z + 0.0)
        self.world.players[name] = PlayerRecord(name, pos)
        conn.name = name
        conn.send(self.snapshot_message())
        self.broadcast(PlayerMove(name, pos, (0.0, 0.0)), exclude=conn)

    def _apply_block_change(self, conn: _Conn, msg: BlockChange) -> None:
        if not self.world.in_bounds(msg.loc):
            log.info("ignoring out-of-bounds block change at %s", tuple(msg.loc))
            return
        if msg.block not in self.registry:
            log.info("ignoring unregistered block (%d, %d)", msg.block.id, msg.block.meta)
            return
        source = msg.source if msg.source != "natural" else "player"
        record = self.world.set_block(msg.loc, msg.block, source)
        self.recorder.record(self.tick_no, conn.name, msg.loc, record.old, record.new)
        self.broadcast(BlockChange(Location(*msg.loc), msg.block, source))

    def _wander_mobs(self) -> None:
        sx, _, sz = self.world.bounds
        for mob_id in sorted(self.world.mobs):
            mob = self.world.mobs[mob_id]
            dx, dz = self.rng.choice(((1, 0), (-1, 0), (0, 1), (0, -1)))
            x = min(max(mob.position[0] + dx, 0.5), sx - 0.5)
            z = min(max(mob.position[2] + dz, 0.5), sz - 0.5)
            mob.position = (x, mob.position[1], z)

    def broadcast(self, msg, exclude: _Conn | None = None) -> None:
        for conn in self._conns:
            if conn.alive and conn.name is not None and conn is not exclude:
                conn.send(msg)

    def snapshot_message(self) -> WorldSnapshot:
        mobs = tuple(
            MobState(m.kind, m.position, m.look)
            for _, m in sorted(self.world.mobs.items())
        )
        players = tuple(
            PlayerState(p.name, p.position, p.look)
            for _, p in sorted(self.world.players.items())
        )
        return WorldSnapshot(self.world.bounds, tuple(self.world.to_runs()), mobs, players)

    # -- lifecycle ----------------------------------------------------------------

    def run(self, stop_check=None) -> None:
        """Wall-clock loop for the CLI: poll continuously, tick at tick_rate."""
        period = 1.0 / self.config.tick_rate
        next_tick = time.monotonic() + period
        while stop_check is None or not stop_check():
            self.poll(timeout=min(0.05, max(0.0, next_tick - time.monotonic())))
            now = time.monotonic()
            if now >= next_tick:
                self.tick()
                next_tick = now + period

    def stop(self) -> None:
        for conn in self._conns:
            conn.send(Disconnect("server shutting down"))
            conn.channel.close()
        self._conns.clear()
        self._sel.close()
        self._listener.close()
        if self.gateway is not None:
            self.gateway.close()
        self.recorder.close()
