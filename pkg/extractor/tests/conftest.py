import cv2
import numpy as np
import pytest


def draw_face(img, center=(320, 240), axes=(110, 150)):
    """Schematic head on a light background: skin ellipse, eyes, mouth."""
    cx, cy = center
    ax, ay = axes
    cv2.ellipse(img, (cx, cy), (ax, ay), 0, 0, 360, (120, 150, 180), -1)
    cv2.ellipse(img, (cx - int(0.4 * ax), cy - int(0.25 * ay)),
                (18, 10), 0, 0, 360, (60, 60, 60), -1)
    cv2.ellipse(img, (cx + int(0.4 * ax), cy - int(0.25 * ay)),
                (18, 10), 0, 0, 360, (60, 60, 60), -1)
    cv2.ellipse(img, (cx, cy + int(0.45 * ay)),
                (int(0.35 * ax), 12), 0, 0, 360, (90, 90, 120), -1)
    return img


def blank_frame(width=640, height=480):
    return np.full((height, width, 3), 200, np.uint8)


def render_video(path, frames, fps=30.0):
    h, w = frames[0].shape[:2]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"),
                             fps, (w, h))
    assert writer.isOpened(), "MJPG VideoWriter unavailable"
    for frame in frames:
        writer.write(frame)
    writer.release()
    return path


@pytest.fixture
def static_face_clip(tmp_path):
    frame = draw_face(blank_frame())
    return render_video(tmp_path / "static.avi", [frame] * 60)


@pytest.fixture
def blank_clip(tmp_path):
    return render_video(tmp_path / "blank.avi", [blank_frame()] * 30)


@pytest.fixture
def intermittent_clip(tmp_path):
    face = draw_face(blank_frame())
    empty = blank_frame()
    frames = [empty] * 10 + [face] * 30 + [empty] * 10 + [face] * 10
    return render_video(tmp_path / "intermittent.avi", frames)
