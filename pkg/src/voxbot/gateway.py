"""Browser gateway: the wire registry re-exposed over HTTP/WebSocket.

A WebSocket session at `/ws` is a first-class client: each text frame holds
one base64-encoded message payload (tag + body, no length prefix, since the
WebSocket frame already delimits it). Plain HTTP GETs serve the block
registry, a world-hash challenge, and the static UI bundle when one is
configured. The implementation covers the small slice of RFC 6455 the
browser client needs: unfragmented text frames, close, and ping/pong.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import selectors
import socket
from pathlib import Path

from . import protocol
from .transport import TransportClosed

log = logging.getLogger(__name__)

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
}


def build_ws_frame(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 0x10000:
        head += bytes([126]) + n.to_bytes(2, "big")
    else:
        head += bytes([127]) + n.to_bytes(8, "big")
    return head + payload


def parse_ws_frames(buf: bytes):
    """Parse complete client frames: returns (frames, remaining, error)."""
    frames = []
    while True:
        if len(buf) < 2:
            return frames, buf, None
        b0, b1 = buf[0], buf[1]
        fin = b0 & 0x80
        opcode = b0 & 0x0F
        masked = b1 & 0x80
        length = b1 & 0x7F
        pos = 2
        if length == 126:
            if len(buf) < pos + 2:
                return frames, buf, None
            length = int.from_bytes(buf[pos : pos + 2], "big")
            pos += 2
        elif length == 127:
            if len(buf) < pos + 8:
                return frames, buf, None
            length = int.from_bytes(buf[pos : pos + 8], "big")
            pos += 8
        if length > protocol.MAX_FRAME:
            return frames, buf, "frame too large"
        key = b""
        if masked:
            if len(buf) < pos + 4:
                return frames, buf, None
            key = buf[pos : pos + 4]
            pos += 4
        if len(buf) < pos + length:
            return frames, buf, None
        payload = buf[pos : pos + length]
        if masked:
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        buf = buf[pos + length :]
        if not fin:
            return frames, buf, "fragmented frames not supported"
        frames.append((opcode, payload))


class _GwConn:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.setblocking(False)
        self.state = "http"
        self.buf = b""
        self.out = b""
        self.inbox: list[protocol.WireMessage] = []
        self.closed = False
        self.server_conn = None  # set once upgraded and attached
        self.on_closing = None  # gateway cleanup hook, runs while the fd is valid

    # Channel surface used by WorldServer once upgraded to a WebSocket.

    def send(self, msg: protocol.WireMessage) -> None:
        payload = base64.b64encode(protocol.encode_payload(msg))
        self.queue(build_ws_frame(OP_TEXT, payload))

    def poll(self) -> list[protocol.WireMessage]:
        msgs, self.inbox = self.inbox, []
        return msgs

    def queue(self, data: bytes) -> None:
        if self.closed:
            raise TransportClosed("gateway connection closed")
        self.out += data
        self.flush()

    def flush(self) -> None:
        while self.out and not self.closed:
            try:
                n = self.sock.send(self.out)
            except (BlockingIOError, InterruptedError):
                return
            except OSError:
                self.close()
                return
            self.out = self.out[n:]

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        if self.on_closing is not None:
            self.on_closing(self)
        try:
            self.sock.close()
        except OSError:
            pass


class Gateway:
    def __init__(self, server, listener: socket.socket, ui_dir: str | None = None):
        self.server = server
        self.listener = listener
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.conns: list[_GwConn] = []

    def accept(self) -> None:
        while True:
            try:
                sock, _ = self.listener.accept()
            except (BlockingIOError, InterruptedError):
                return
            conn = _GwConn(sock)
            conn.on_closing = self._on_closing
            self.conns.append(conn)
            self.server._sel.register(sock, selectors.EVENT_READ, ("gwconn", conn))

    def on_readable(self, conn: _GwConn) -> None:
        if conn.closed:
            return
        try:
            data = conn.sock.recv(65536)
        except (BlockingIOError, InterruptedError):
            return
        except OSError:
            self._drop(conn)
            return
        if not data:
            self._drop(conn)
            return
        conn.buf += data
        if conn.state == "http":
            self._try_http(conn)
        if conn.state == "ws":
            self._pump_ws(conn)

    def _drop(self, conn: _GwConn) -> None:
        conn.close()

    def _on_closing(self, conn: _GwConn) -> None:
        try:
            self.server._sel.unregister(conn.sock)
        except (KeyError, ValueError, OSError):
            pass
        if conn in self.conns:
            self.conns.remove(conn)
        if conn.server_conn is not None:
            self.server._drop(conn.server_conn)

    # -- HTTP ------------------------------------------------------------------

    def _try_http(self, conn: _GwConn) -> None:
        if b"\r\n\r\n" not in conn.buf:
            if len(conn.buf) > 65536:
                self._drop(conn)
            return
        head, conn.buf = conn.buf.split(b"\r\n\r\n", 1)
        try:
            lines = head.decode("latin-1").split("\r\n")
            method, target, _ = lines[0].split(" ", 2)
        except ValueError:
            self._drop(conn)
            return
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()
        if method != "GET":
            self._respond(conn, 405, b"method not allowed", "text/plain")
            return
        path = target.split("?", 1)[0]
        if path == "/ws":
            self._upgrade(conn, headers)
            return
        self._serve_http(conn, path)

    def _respond(self, conn: _GwConn, status: int, body: bytes, ctype: str) -> None:
        reason = {200: "OK", 404: "Not Found", 405: "Method Not Allowed", 400: "Bad Request"}.get(
            status, "OK"
        )
        head = (
            f"HTTP/1.1 {status} {reason}\r\n"
            f"Content-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\n"
            "Access-Control-Allow-Origin: *\r\n"
            "Connection: close\r\n\r\n"
        )
        try:
            conn.queue(head.encode("latin-1") + body)
        except TransportClosed:
            pass
        conn.flush()
        self._drop(conn)

    def _serve_http(self, conn: _GwConn, path: str) -> None:
        if path == "/registry":
            rows = [
                {"id": i, "meta": m, "name": n, "color": c}
                for i, m, n, c in self.server.registry.entries()
            ]
            self._respond(conn, 200, json.dumps(rows).encode(), "application/json")
            return
        if path == "/hash":
            body = {
                "hash": f"{self.server.world.world_hash():016x}",
                "tick": self.server.tick_no,
                "non_air": self.server.world.non_air_count(),
            }
            self._respond(conn, 200, json.dumps(body).encode(), "application/json")
            return
        if self.ui_dir is not None:
            rel = "index.html" if path == "/" else path.lstrip("/")
            file = (self.ui_dir / rel).resolve()
            if file.is_file() and str(file).startswith(str(self.ui_dir.resolve())):
                ctype = CONTENT_TYPES.get(file.suffix, "application/octet-stream")
                self._respond(conn, 200, file.read_bytes(), ctype)
                return
        if path == "/":
            self._respond(conn, 200, b"voxbot gateway is up\n", "text/plain")
            return
        self._respond(conn, 404, b"not found", "text/plain")

    # -- WebSocket ---------------------------------------------------------------

    def _upgrade(self, conn: _GwConn, headers: dict) -> None:
        key = headers.get("sec-websocket-key")
        if headers.get("upgrade", "").lower() != "websocket" or not key:
            self._respond(conn, 400, b"expected websocket upgrade", "text/plain")
            return
        accept = base64.b64encode(hashlib.sha1((key + WS_GUID).encode()).digest()).decode()
        response = (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        )
        conn.queue(response.encode("latin-1"))
        conn.state = "ws"
        conn.server_conn = self.server.attach_channel(conn, "ws")

    def _pump_ws(self, conn: _GwConn) -> None:
        frames, conn.buf, error = parse_ws_frames(conn.buf)
        if error:
            log.warning("gateway websocket error: %s", error)
            self._drop(conn)
            return
        for opcode, payload in frames:
            if opcode == OP_CLOSE:
                try:
                    conn.queue(build_ws_frame(OP_CLOSE, payload[:2]))
                except TransportClosed:
                    pass
                self._drop(conn)
                return
            if opcode == OP_PING:
                conn.queue(build_ws_frame(OP_PONG, payload))
                continue
            if opcode != OP_TEXT:
                continue
            try:
                raw = base64.b64decode(payload, validate=True)
                conn.inbox.append(protocol.decode_payload(raw))
            except Exception as e:  # bad base64 or malformed payload
                log.warning("dropping bad gateway frame: %s", e)
                self._drop(conn)
                return

    def close(self) -> None:
        for conn in list(self.conns):
            conn.close()
        self.conns.clear()
        try:
            self.listener.close()
        except OSError:
            pass
