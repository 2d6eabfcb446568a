"""`extract` command-line entry point."""

from __future__ import annotations

import sys

import click

from .backends import BACKENDS, make_backend
from .errors import BackendUnavailableError, ExtractorError
from .extract import extract_video


@click.command()
@click.option("--backend", "backend_name", required=True,
              type=click.Choice(BACKENDS),
              help="mesh468 (MediaPipe), fan68 (S3FD+FAN), or the "
                   "dependency-light shape68 fallback.")
@click.option("--video", "video_path", required=True,
              type=click.Path(exists=True))
@click.option("--participant", "participant_id", required=True)
@click.option("--group", required=True, type=click.Choice(["TD", "ASD"]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--fps", "fps_override", type=float, default=None,
              help="Override the container-reported frame rate.")
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Sidecar log path (default: <out>.log.json).")
def extract(backend_name, video_path, participant_id, group, out_path,
            fps_override, log_path):
    """Convert one session video into a landmark-stream file."""
    backend = make_backend(backend_name)
    summary = extract_video(video_path, backend, participant_id, group,
                            out_path, backend_name=backend_name,
                            fps_override=fps_override, log_path=log_path)
    click.echo(
        f"{summary.n_frames} frames ({summary.n_faceless} faceless, "
        f"{summary.n_multi_face_frames} multi-face) -> {out_path}")


def main(argv=None) -> int:
    try:
        extract.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (BackendUnavailableError, ExtractorError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:
        click.echo(f"internal error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
