import json
import os

import pytest

from posemime.cli import dispatch
from posemime.gmm import load_model
from posemime.ingestion import read_recorded_sequence, write_recorded_sequence

from .synthetic import arm_raise_demos, arm_raise_frames

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


@pytest.fixture()
def demo_dir(tmp_path):
    d = tmp_path / "demos"
    d.mkdir()
    for i, frames in enumerate(arm_raise_demos(n_demos=5, n_frames=40)):
        write_recorded_sequence(d / f"demo{i}.ndjson", frames)
    return d


def run(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCoverage:
    def test_table1_fixture_json(self, capsys):
        code, out, _ = run(capsys, "coverage", "--input", os.path.join(FIXTURES, "table1.ndjson"))
        assert code == 0
        rows = json.loads(out)["rows"]
        assert [r["percent"] for r in rows] == [100, 100, 71, 79, 64, 93]

    def test_table1_fixture_table(self, capsys):
        code, out, _ = run(
            capsys, "coverage", "--format", "table",
            "--input", os.path.join(FIXTURES, "table1.ndjson"),
        )
        assert code == 0
        lines = [l for l in out.splitlines() if l.strip()][1:]
        percents = [int(l.split()[-1].rstrip("%")) for l in lines]
        assert percents == [100, 100, 71, 79, 64, 93]

    def test_estimator_input(self, capsys):
        code, out, _ = run(
            capsys, "coverage", "--input", os.path.join(FIXTURES, "estimator_sample.json")
        )
        assert code == 0
        rows = json.loads(out)["rows"]
        assert rows[0]["detected"] == 14
        assert rows[1]["detected"] == 10


class TestTrainScoreRoundtrip:
    def test_train_calibrate_score_pass(self, capsys, tmp_path, demo_dir):
        model_path = str(tmp_path / "wave.model.json")
        cal_path = str(tmp_path / "wave.cal.json")

        code, out, err = run(
            capsys, "train", "--demos", str(demo_dir), "--components", "5",
            "--out", model_path,
        )
        assert code == 0, err
        assert json.loads(out)["demos"] == 5
        assert os.path.exists(model_path)

        code, out, _ = run(
            capsys, "calibrate", "--model", model_path, "--demos", str(demo_dir),
            "--out", cal_path,
        )
        assert code == 0
        assert os.path.exists(cal_path)

        code, out, _ = run(
            capsys, "score", "--model", model_path, "--calibration", cal_path,
            "--input", str(demo_dir / "demo1.ndjson"),
        )
        assert code == 0
        report = json.loads(out)
        assert report["verdict"] == "pass"
        assert report["frame_count"] == 40

    def test_train_output_is_byte_identical(self, capsys, tmp_path, demo_dir):
        out_a = str(tmp_path / "a.model.json")
        out_b = str(tmp_path / "b.model.json")
        _, text_a, _ = run(capsys, "train", "--demos", str(demo_dir), "--out", out_a)
        _, text_b, _ = run(capsys, "train", "--demos", str(demo_dir), "--out", out_b)
        assert text_a.replace("a.model", "b.model") == text_b
        assert open(out_a).read() == open(out_b).read()

    def test_generate(self, capsys, tmp_path, demo_dir):
        model_path = str(tmp_path / "m.json")
        run(capsys, "train", "--demos", str(demo_dir), "--out", model_path)
        traj_path = str(tmp_path / "traj.ndjson")
        code, out, _ = run(
            capsys, "generate", "--model", model_path, "--frames", "50", "--out", traj_path
        )
        assert code == 0
        frames = read_recorded_sequence(traj_path)
        assert len(frames) == 50
        times = [f.timestamp for f in frames]
        assert times == sorted(times)
        assert all(f.detected_count() == 14 for f in frames)

    def test_score_table_format(self, capsys, tmp_path, demo_dir):
        model_path = str(tmp_path / "m.json")
        run(capsys, "train", "--demos", str(demo_dir), "--out", model_path)
        code, out, _ = run(
            capsys, "score", "--model", model_path, "--format", "table",
            "--input", str(demo_dir / "demo0.ndjson"),
        )
        assert code == 0
        assert "normalized" in out


class TestConvert:
    def test_convert_estimator(self, capsys, tmp_path):
        out_path = str(tmp_path / "frames.ndjson")
        code, out, _ = run(
            capsys, "convert", "--input", os.path.join(FIXTURES, "estimator_sample.json"),
            "--out", out_path,
        )
        assert code == 0
        assert json.loads(out)["frames"] == 2
        frames = read_recorded_sequence(out_path)
        assert frames[0].detected_count() == 14


class TestErrors:
    def test_missing_model_is_runtime_error(self, capsys, tmp_path):
        code, out, err = run(
            capsys, "score", "--model", str(tmp_path / "missing.json"),
            "--input", os.path.join(FIXTURES, "table1.ndjson"),
        )
        assert code == 1
        assert "missing.json" in err

    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "score", "--bogus")
        assert code == 2

    def test_unknown_subcommand_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 2

    def test_no_arguments_is_usage_error(self, capsys):
        code, _, _ = run(capsys)
        assert code == 2

    def test_bad_demo_dir(self, capsys, tmp_path):
        code, _, err = run(
            capsys, "train", "--demos", str(tmp_path / "nowhere"), "--out", str(tmp_path / "m.json")
        )
        assert code == 1


class TestReplayCommand:
    def test_replay_streams_into_live_service(self, capsys, tmp_path, demo_dir, gesture_library):
        import socket
        import threading
        import asyncio

        from posemime.service import SessionService, serve_ingest
        from posemime.session import CommandKind, SessionCommand, SessionConfig

        library, _ = gesture_library
        ready = {}
        done = threading.Event()

        async def server_side():
            service = SessionService(library, SessionConfig(reference_frames=4))
            runtime = service.create_session()
            for kind in (CommandKind.START, CommandKind.ADVANCE):
                await runtime.submit_command(SessionCommand(kind))
            server = await serve_ingest(service, "127.0.0.1", 0)
            ready["port"] = server.sockets[0].getsockname()[1]
            ready["runtime"] = runtime
            ready["event"].set()
            while runtime.session.state.frames_seen < 10:
                await asyncio.sleep(0.01)
            server.close()
            await server.wait_closed()
            await service.shutdown()
            done.set()

        ready["event"] = threading.Event()
        thread = threading.Thread(target=lambda: asyncio.run(server_side()), daemon=True)
        thread.start()
        assert ready["event"].wait(timeout=10)

        seq_path = tmp_path / "attempt.ndjson"
        write_recorded_sequence(seq_path, arm_raise_frames(n_frames=10, seed=77))
        code, out, err = run(
            capsys, "replay", "--input", str(seq_path),
            "--connect", f"127.0.0.1:{ready['port']}",
            "--session", ready["runtime"].id, "--rate", "0",
        )
        assert code == 0, err
        assert json.loads(out)["sent"] == 10
        assert done.wait(timeout=10)
        assert ready["runtime"].session.state.frames_seen == 10
