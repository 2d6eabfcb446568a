import io
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from landmark_extractor.backends import fan68_template
from landmark_extractor.errors import ExtractorError
from landmark_extractor.stream_writer import StreamWriter


def make_writer(fh, scheme="FAN68", group="TD"):
    return StreamWriter(fh, "P01", group, 30.0, scheme, "v.avi")


def marks(n=68):
    return np.arange(2 * n, dtype=np.float64).reshape(n, 2)


class TestStreamWriter:
    def test_header_and_frames(self):
        fh = io.StringIO()
        w = make_writer(fh)
        w.write_frame(0, 0.0, 0.9, (10.0, 20.0, 110.0, 140.0), marks())
        w.write_frame(1, 33.3, 0.0, None, None)
        lines = fh.getvalue().splitlines()
        header = json.loads(lines[0])
        assert header == {"participant_id": "P01", "group": "TD", "fps": 30.0,
                          "scheme": "FAN68", "source_video": "v.avi"}
        f0 = json.loads(lines[1])
        assert f0["frame_index"] == 0
        assert len(f0["landmarks"]) == 136
        f1 = json.loads(lines[2])
        assert f1["bbox"] is None
        assert f1["confidence"] == 0.0
        assert f1["landmarks"] == []
        assert w.frames_written == 2

    def test_out_of_order_frame(self):
        w = make_writer(io.StringIO())
        w.write_frame(0, 0.0, 0.0, None, None)
        with pytest.raises(ExtractorError, match="out of order"):
            w.write_frame(2, 66.6, 0.0, None, None)

    def test_non_increasing_timestamp(self):
        w = make_writer(io.StringIO())
        w.write_frame(0, 10.0, 0.0, None, None)
        with pytest.raises(ExtractorError, match="not increasing"):
            w.write_frame(1, 10.0, 0.0, None, None)

    def test_wrong_landmark_count(self):
        w = make_writer(io.StringIO())
        with pytest.raises(ExtractorError, match="68"):
            w.write_frame(0, 0.0, 0.9, (0.0, 0.0, 10.0, 10.0), marks(67))

    def test_degenerate_bbox(self):
        w = make_writer(io.StringIO())
        with pytest.raises(ExtractorError, match="degenerate"):
            w.write_frame(0, 0.0, 0.9, (5.0, 5.0, 5.0, 50.0), marks())

    def test_unknown_scheme(self):
        with pytest.raises(ExtractorError, match="scheme"):
            make_writer(io.StringIO(), scheme="DLIB5")

    def test_unknown_group(self):
        with pytest.raises(ExtractorError, match="group"):
            make_writer(io.StringIO(), group="XX")

    def test_mesh468_point_count(self):
        fh = io.StringIO()
        w = make_writer(fh, scheme="MESH468")
        w.write_frame(0, 0.0, 0.8, (0.0, 0.0, 10.0, 10.0), marks(468))
        assert len(json.loads(fh.getvalue().splitlines()[1])["landmarks"]) == 936


class TestTemplate:
    def test_eye_regions_have_open_ear(self):
        m = fan68_template((100.0, 100.0, 300.0, 340.0))
        for sl in (slice(36, 42), slice(42, 48)):
            p1, p2, p3, p4, p5, p6 = m[sl]
            ear = (math.dist(p2, p6) + math.dist(p3, p5)) / (2 * math.dist(p1, p4))
            assert ear == pytest.approx(0.30, abs=1e-9)

    def test_points_inside_bbox(self):
        bbox = (50.0, 60.0, 250.0, 320.0)
        m = fan68_template(bbox)
        assert (m[:, 0] >= bbox[0]).all() and (m[:, 0] <= bbox[2]).all()
        assert (m[:, 1] >= bbox[1]).all() and (m[:, 1] <= bbox[3]).all()


@pytest.mark.skipif(shutil.which("orientlab") is None,
                    reason="analysis engine CLI not on PATH")
def test_written_file_passes_engine_validation(tmp_path):
    path = tmp_path / "P01.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = make_writer(fh)
        for k in range(10):
            if k % 3 == 0:
                w.write_frame(k, k * 1000 / 30.0, 0.0, None, None)
            else:
                w.write_frame(k, k * 1000 / 30.0, 0.85,
                              (10.0, 20.0, 110.0, 140.0), marks())
    proc = subprocess.run(["orientlab", "validate", str(path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "ok" in proc.stdout
