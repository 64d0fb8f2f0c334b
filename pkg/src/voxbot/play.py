"""Scripted human client: drive a live agent over chat and assert on the world.

Script lines (shlex rules, `#` comments):

    say <chat text>
    wait <ticks>
    assert_block <x> <y> <z> <id> <meta>
    assert_near <dist>                      # agent within dist of this player
    assert_agent_near <x> <y> <z> <dist>
    assert_reply_contains "<substring>"

The transcript records both chat directions, assertion outcomes, and a final
world-hash checkpoint; the run passes when every assertion held.
"""
from __future__ import annotations

import json
import shlex
import time

from .client import WorldClient
from .transport import SocketEndpoint
from .world import BlockId, euclidean

DEFAULT_TIMEOUT = 15.0


class ScriptError(Exception):
    pass


def parse_script(text: str) -> list[tuple[int, list[str]]]:
    """Returns (line_number, argv) pairs, skipping blanks and comments."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            argv = shlex.split(line)
        except ValueError as e:
            raise ScriptError(f"line {lineno}: {e}") from None
        out.append((lineno, argv))
    return out


class PlaySession:
    def __init__(self, endpoint, name: str = "player", agent_name: str = "bot",
                 timeout: float = DEFAULT_TIMEOUT):
        self.client = WorldClient(endpoint, name)
        self.agent_name = agent_name
        self.timeout = timeout
        self.transcript: list[dict] = []
        self.failures = 0
        self._chat_cursor = 0
        self.client.login()
        self._pump_until(lambda: self.client.world is not None, "login snapshot")

    @classmethod
    def connect(cls, host: str, port: int, **kwargs) -> "PlaySession":
        return cls(SocketEndpoint.connect(host, port), **kwargs)

    # -- plumbing ---------------------------------------------------------------

    def _pump_until(self, pred, what: str, timeout: float | None = None) -> bool:
        deadline = time.monotonic() + (timeout if timeout is not None else self.timeout)
        while time.monotonic() < deadline:
            for kind, msg in self.client.pump():
                if kind == "chat":
                    self.transcript.append(
                        {"kind": "chat", "dir": "recv", "speaker": msg.speaker,
                         "text": msg.text, "tick": self.client.tick}
                    )
            if pred():
                return True
            if not self.client.connected:
                break
            time.sleep(0.005)
        self.transcript.append({"kind": "timeout", "waiting_for": what})
        return False

    def _assert(self, lineno: int, ok: bool, detail: str) -> None:
        self.transcript.append({"kind": "assert", "line": lineno, "ok": bool(ok), "detail": detail})
        if not ok:
            self.failures += 1

    def _agent_position(self):
        return self.client.player_position(self.agent_name)

    # -- commands ----------------------------------------------------------------

    def run(self, script: list[tuple[int, list[str]]]) -> bool:
        for lineno, argv in script:
            cmd, args = argv[0], argv[1:]
            handler = getattr(self, f"_cmd_{cmd}", None)
            if handler is None:
                raise ScriptError(f"line {lineno}: unknown command {cmd!r}")
            handler(lineno, args)
            if not self.client.connected:
                self._assert(lineno, False, "connection lost")
                break
        self.transcript.append(
            {
                "kind": "hash",
                "tick": self.client.tick,
                "hash": f"{self.client.world.world_hash():016x}" if self.client.world else None,
            }
        )
        return self.failures == 0

    def _cmd_say(self, lineno: int, args: list[str]) -> None:
        text = " ".join(args)
        self.client.say(text)
        self.transcript.append({"kind": "chat", "dir": "send", "text": text, "tick": self.client.tick})

    def _cmd_wait(self, lineno: int, args: list[str]) -> None:
        ticks = int(args[0])
        target = self.client.tick + ticks
        self._pump_until(
            lambda: self.client.tick >= target,
            f"{ticks} ticks",
            timeout=max(self.timeout, ticks * 0.5),
        )

    def _cmd_assert_block(self, lineno: int, args: list[str]) -> None:
        x, y, z, bid, meta = (int(v) for v in args)
        want = BlockId(bid, meta)
        got = self.client.world.get_block((x, y, z)) if self.client.world else None
        self._assert(lineno, got == want, f"block at ({x},{y},{z}) is {got}, want {want}")

    def _cmd_assert_near(self, lineno: int, args: list[str]) -> None:
        dist = float(args[0])
        ok = self._pump_until(
            lambda: self._agent_position() is not None
            and euclidean(self._agent_position(), self.client.position) <= dist,
            f"agent within {dist}",
        )
        agent_pos = self._agent_position()
        detail = (
            f"agent at {agent_pos}, player at {self.client.position}, want within {dist}"
        )
        self._assert(lineno, ok, detail)

    def _cmd_assert_agent_near(self, lineno: int, args: list[str]) -> None:
        x, y, z, dist = float(args[0]), float(args[1]), float(args[2]), float(args[3])
        ok = self._pump_until(
            lambda: self._agent_position() is not None
            and euclidean(self._agent_position(), (x, y, z)) <= dist,
            f"agent within {dist} of ({x},{y},{z})",
        )
        self._assert(lineno, ok, f"agent at {self._agent_position()}, want within {dist} of ({x},{y},{z})")

    def _cmd_assert_reply_contains(self, lineno: int, args: list[str]) -> None:
        needle = " ".join(args)

        def found() -> bool:
            while self._chat_cursor < len(self.client.chats):
                line = self.client.chats[self._chat_cursor]
                self._chat_cursor += 1
                if line.speaker == self.agent_name and needle in line.text:
                    return True
            return False

        ok = self._pump_until(found, f"reply containing {needle!r}")
        self._assert(lineno, ok, f"looked for agent reply containing {needle!r}")

    def close(self) -> None:
        self.client.close()


def run_script_text(endpoint, text: str, transcript_fh=None, **kwargs) -> bool:
    session = PlaySession(endpoint, **kwargs)
    try:
        passed = session.run(parse_script(text))
    finally:
        session.close()
    if transcript_fh is not None:
        for row in session.transcript:
            transcript_fh.write(json.dumps(row) + "\n")
    return passed
