import json
import threading

import pytest

from voxbot import cli
from voxbot.agent import Agent, AgentConfig
from voxbot.play import PlaySession, ScriptError, parse_script
from voxbot.server import ServerConfig, WorldServer


class TestGenData:
    def test_deterministic_output_files(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert cli.main(["gen-data", "--seed", "9", "--n", "100", "--out", str(a)]) == 0
        assert cli.main(["gen-data", "--seed", "9", "--n", "100", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_output_validates(self, tmp_path):
        out = tmp_path / "gen.jsonl"
        assert cli.main(["gen-data", "--seed", "2", "--n", "50", "--out", str(out)]) == 0
        assert cli.main(["validate", "parse-data", str(out)]) == 0

    def test_validate_catches_bad_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('[["hi", {"dialogue_type": "NOPE"}]]', "utf-8")
        assert cli.main(["validate", "parse-data", str(bad)]) == 1


class TestValidateHouseLog:
    def test_ok_and_error_paths(self, tmp_path):
        good = tmp_path / "good.jsonl"
        good.write_text('[1, "u", [0, 1, 0], [5, 0], "P"]\n', "utf-8")
        assert cli.main(["validate", "house-log", str(good)]) == 0
        bad = tmp_path / "bad.jsonl"
        bad.write_text('[2, "u", [0, 1, 0], [5, 0], "P"]\n[1, "u", [0, 1, 0], [5, 0], "B"]\n', "utf-8")
        assert cli.main(["validate", "house-log", str(bad)]) == 1


class TestReplayCli:
    def test_replay_reports_hash(self, tmp_path, capsys):
        log = tmp_path / "rec.jsonl"
        log.write_text('[1, "u", [3, 4, 3], [5, 0], "P"]\n', "utf-8")
        rc = cli.main([
            "replay", "--record", str(log), "--bounds", "16,8,16", "--ground", "3",
        ])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["events"] == 1
        from voxbot.server import replay
        from voxbot.world import make_flat_world
        world = make_flat_world((16, 8, 16), 3)
        replay([[1, "u", [3, 4, 3], [5, 0], "P"]], world)
        assert int(out["hash"], 16) == world.world_hash()

    def test_expect_hash_mismatch_fails(self, tmp_path):
        log = tmp_path / "rec.jsonl"
        log.write_text('[1, "u", [3, 4, 3], [5, 0], "P"]\n', "utf-8")
        rc = cli.main([
            "replay", "--record", str(log), "--bounds", "16,8,16", "--ground", "3",
            "--expect-hash", "0" * 16,
        ])
        assert rc == 1


class TestDumpMemory:
    def test_dump_filter(self, tmp_path, capsys):
        from voxbot.memory import MemoryStore

        mem = MemoryStore()
        oid = mem.insert_object("BlockObject", {"positions": frozenset({(1, 2, 3)})})
        mem.insert_triple(oid, "has_tag", "hut")
        dump = tmp_path / "mem.jsonl"
        with open(dump, "w") as fh:
            mem.dump(fh)
        assert cli.main(["dump-memory", str(dump), "--kind", "Triple"]) == 0
        rows = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert len(rows) == 1 and rows[0]["predicate"] == "has_tag"


class TestScriptParsing:
    def test_comments_and_quotes(self):
        script = parse_script('# hey\nsay hello world\nassert_reply_contains "on my way"\n')
        assert script == [
            (2, ["say", "hello", "world"]),
            (3, ["assert_reply_contains", "on my way"]),
        ]

    def test_bad_quoting_reports_line(self):
        with pytest.raises(ScriptError, match="line 1"):
            parse_script('say "unterminated\n')


@pytest.fixture
def live_rig():
    """Real sockets: server + agent threads at a fast tick rate."""
    server = WorldServer(
        ServerConfig(bounds=(24, 12, 24), ground_height=3, port=0, tick_rate=100.0)
    )
    stop = threading.Event()
    server_thread = threading.Thread(
        target=lambda: server.run(stop_check=stop.is_set), daemon=True
    )
    server_thread.start()
    agent = Agent.connect("127.0.0.1", server.port, AgentConfig(name="bot"))
    agent_thread = threading.Thread(
        target=lambda: agent.run(stop_check=stop.is_set, delay=0.002), daemon=True
    )
    agent_thread.start()
    yield server
    stop.set()
    server_thread.join(timeout=5)
    agent_thread.join(timeout=5)
    server.stop()


class TestPlayEndToEnd:
    def test_empty_script_passes(self, live_rig):
        session = PlaySession.connect("127.0.0.1", live_rig.port, name="player")
        try:
            assert session.run([]) is True
            assert session.transcript[-1]["kind"] == "hash"
        finally:
            session.close()

    def test_script_with_assertions(self, live_rig):
        script = parse_script(
            "\n".join(
                [
                    "say come here",
                    'assert_reply_contains "on my way"',
                    "assert_near 2.5",
                    "say build a cube at 4 4 4",
                    "wait 20",
                    "assert_block 4 4 4 5 0",
                ]
            )
        )
        session = PlaySession.connect("127.0.0.1", live_rig.port, name="player", timeout=20)
        try:
            passed = session.run(script)
        finally:
            session.close()
        detail = json.dumps(session.transcript, indent=1)
        assert passed, detail

    def test_failing_assertion_reports(self, live_rig):
        script = parse_script("assert_block 1 8 1 5 0\n")  # air, definitely not planks
        session = PlaySession.connect("127.0.0.1", live_rig.port, name="checker", timeout=5)
        try:
            passed = session.run(script)
        finally:
            session.close()
        assert not passed and session.failures == 1

    def test_unreachable_server_exit_code(self, tmp_path):
        script = tmp_path / "s.txt"
        script.write_text("say hi\n", "utf-8")
        rc = cli.main([
            "play", "--server", "127.0.0.1:1", "--timeout", "2", str(script),
        ])
        assert rc == 1
