import json

import pytest

from landmark_extractor.backends import Shape68Backend
from landmark_extractor.cli import main
from landmark_extractor.errors import ExtractorError
from landmark_extractor.extract import extract_video

from conftest import blank_frame, draw_face, render_video


def read_stream(path):
    lines = path.read_text().splitlines()
    return json.loads(lines[0]), [json.loads(ln) for ln in lines[1:]]


class TestExtractVideo:
    def test_static_clip(self, static_face_clip, tmp_path):
        out = tmp_path / "P01.jsonl"
        summary = extract_video(static_face_clip, Shape68Backend(), "P01",
                                "TD", out, backend_name="shape68")
        assert summary.n_frames == 60
        assert summary.container_frame_count == 60
        assert summary.n_faceless == 0
        assert summary.fps == pytest.approx(30.0)

        header, frames = read_stream(out)
        assert header["participant_id"] == "P01"
        assert header["group"] == "TD"
        assert header["scheme"] == "FAN68"
        assert len(frames) == 60
        assert frames[0]["timestamp_ms"] == 0.0
        assert frames[1]["timestamp_ms"] == pytest.approx(1000.0 / 30.0)
        assert all(f["confidence"] > 0.6 for f in frames)

        log = json.loads(out.with_suffix(".log.json").read_text())
        assert log["n_frames"] == 60
        assert log["backend"] == "shape68"

    def test_blank_clip_all_faceless(self, blank_clip, tmp_path):
        out = tmp_path / "P02.jsonl"
        summary = extract_video(blank_clip, Shape68Backend(), "P02", "ASD", out)
        assert summary.n_frames == 30
        assert summary.n_faceless == 30
        _, frames = read_stream(out)
        assert all(f["bbox"] is None and f["confidence"] == 0.0
                   and f["landmarks"] == [] for f in frames)

    def test_intermittent_clip_counts(self, intermittent_clip, tmp_path):
        out = tmp_path / "P03.jsonl"
        summary = extract_video(intermittent_clip, Shape68Backend(), "P03",
                                "TD", out)
        assert summary.n_frames == 60
        assert summary.n_faceless == 20
        _, frames = read_stream(out)
        present = [f["bbox"] is not None for f in frames]
        assert present == [False] * 10 + [True] * 30 + [False] * 10 + [True] * 10

    def test_multi_face_largest_wins(self, tmp_path):
        frame = blank_frame(1280, 480)
        draw_face(frame, center=(300, 240), axes=(100, 140))
        draw_face(frame, center=(950, 240), axes=(60, 90))
        clip = render_video(tmp_path / "two.avi", [frame] * 12)
        out = tmp_path / "P04.jsonl"
        summary = extract_video(clip, Shape68Backend(), "P04", "TD", out)
        assert summary.n_multi_face_frames == 12
        assert summary.max_competing_faces == 2
        _, frames = read_stream(out)
        # the larger face sits left of x=600; the smaller one entirely right
        assert all(f["bbox"][2] < 600 for f in frames)

    def test_fps_override(self, static_face_clip, tmp_path):
        out = tmp_path / "P05.jsonl"
        summary = extract_video(static_face_clip, Shape68Backend(), "P05",
                                "TD", out, fps_override=25.0)
        assert summary.fps == 25.0
        _, frames = read_stream(out)
        assert frames[1]["timestamp_ms"] == pytest.approx(40.0)

    def test_custom_log_path(self, blank_clip, tmp_path):
        out = tmp_path / "P06.jsonl"
        log = tmp_path / "logs" / "P06.json"
        log.parent.mkdir()
        extract_video(blank_clip, Shape68Backend(), "P06", "TD", out,
                      log_path=log)
        assert json.loads(log.read_text())["n_faceless"] == 30

    def test_unopenable_video(self, tmp_path):
        bad = tmp_path / "missing.avi"
        with pytest.raises(ExtractorError, match="cannot open"):
            extract_video(bad, Shape68Backend(), "P07", "TD",
                          tmp_path / "out.jsonl")


class TestCli:
    def test_extract_ok(self, static_face_clip, tmp_path, capsys):
        out = tmp_path / "P01.jsonl"
        rc = main(["--backend", "shape68", "--video", str(static_face_clip),
                   "--participant", "P01", "--group", "TD",
                   "--out", str(out)])
        assert rc == 0
        assert out.exists()
        assert "60 frames" in capsys.readouterr().out

    def test_bad_group_rejected(self, static_face_clip, tmp_path):
        rc = main(["--backend", "shape68", "--video", str(static_face_clip),
                   "--participant", "P01", "--group", "XX",
                   "--out", str(tmp_path / "x.jsonl")])
        assert rc == 1

    def test_missing_video_rejected(self, tmp_path):
        rc = main(["--backend", "shape68", "--video",
                   str(tmp_path / "none.avi"), "--participant", "P01",
                   "--group", "TD", "--out", str(tmp_path / "x.jsonl")])
        assert rc == 1
