"""Byte transports: TCP sockets and in-process loopback pairs.

Both sides of every transport speak the framed wire protocol; the loopback
pair exists so servers, agents, and tests can run deterministically in one
process while still exercising the real codec.
"""
from __future__ import annotations

import socket
from collections import deque

from . import protocol


class TransportClosed(Exception):
    pass


class LoopbackEndpoint:
    """One side of an in-process byte pipe."""

    def __init__(self):
        self._rx: deque[bytes] = deque()
        self.peer: "LoopbackEndpoint | None" = None
        self.closed = False

    def send_bytes(self, data: bytes) -> None:
        if self.closed or self.peer is None or self.peer.closed:
            raise TransportClosed("loopback endpoint closed")
        self.peer._rx.append(bytes(data))

    def recv_bytes(self) -> bytes:
        chunks = []
        while self._rx:
            chunks.append(self._rx.popleft())
        return b"".join(chunks)

    def close(self) -> None:
        self.closed = True


def loopback_pair() -> tuple[LoopbackEndpoint, LoopbackEndpoint]:
    a, b = LoopbackEndpoint(), LoopbackEndpoint()
    a.peer, b.peer = b, a
    return a, b


class SocketEndpoint:
    """Non-blocking TCP socket with the same send/recv surface."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.setblocking(False)
        self.closed = False
        self._out = b""

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 5.0) -> "SocketEndpoint":
        sock = socket.create_connection((host, port), timeout=timeout)
        return cls(sock)

    def send_bytes(self, data: bytes) -> None:
        if self.closed:
            raise TransportClosed("socket closed")
        self._out += data
        self.flush()

    def flush(self) -> None:
        while self._out:
            try:
                n = self.sock.send(self._out)
            except (BlockingIOError, InterruptedError):
                return
            except OSError:
                self.close()
                raise TransportClosed("send failed")
            if n == 0:
                self.close()
                raise TransportClosed("peer closed")
            self._out = self._out[n:]

    def recv_bytes(self) -> bytes:
        if self.closed:
            return b""
        chunks = []
        while True:
            try:
                data = self.sock.recv(65536)
            except (BlockingIOError, InterruptedError):
                break
            except OSError:
                self.close()
                break
            if not data:
                self.close()
                break
            chunks.append(data)
        return b"".join(chunks)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            try:
                self.sock.close()
            except OSError:
                pass


class MessageChannel:
    """Frame-aware wrapper over an endpoint."""

    def __init__(self, endpoint):
        self.endpoint = endpoint
        self._buf = b""

    @property
    def closed(self) -> bool:
        return self.endpoint.closed

    def send(self, msg: protocol.WireMessage) -> None:
        self.endpoint.send_bytes(protocol.encode(msg))

    def poll(self) -> list[protocol.WireMessage]:
        """Drain available bytes, returning every complete frame."""
        data = self.endpoint.recv_bytes()
        if data:
            self._buf += data
        if not self._buf:
            return []
        msgs, consumed = protocol.iter_frames(self._buf)
        self._buf = self._buf[consumed:]
        return msgs

    def close(self) -> None:
        self.endpoint.close()
