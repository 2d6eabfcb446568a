"""Command-line entry points.

Exit codes: 0 on success, 1 for input/configuration problems, 2 for
internal errors.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import pipeline, synth
from .errors import OrientLabError
from .geometry import GateProfile
from .model import GROUPS


def _apply_profile_overrides(config: pipeline.RunConfig, specs) -> None:
    """Apply ``GROUP:key=value`` overrides to the gate profiles."""
    for spec in specs:
        try:
            group, assignment = spec.split(":", 1)
            key, value = assignment.split("=", 1)
        except ValueError:
            raise OrientLabError(
                f"bad --profile {spec!r}; expected GROUP:key=value") from None
        group = group.upper()
        if group not in GROUPS:
            raise OrientLabError(f"unknown group {group!r} in --profile")
        base = config.profiles[group]
        fields = {"tau_c": float, "smooth_window": int,
                  "eop_low": float, "eop_range": float}
        if key not in fields:
            raise OrientLabError(f"unknown profile field {key!r}")
        kwargs = {f: getattr(base, f) for f in fields}
        kwargs[key] = fields[key](value)
        config.profiles[group] = GateProfile(**kwargs)


def _build_config(config_path, seed, out, workers, profile_specs,
                  streams=None, manifests=None, table=None) -> pipeline.RunConfig:
    if config_path:
        cfg = pipeline.load_config(Path(config_path))
    else:
        cfg = pipeline.RunConfig()
    if streams:
        cfg.streams_dir = Path(streams)
    if manifests:
        cfg.manifests_dir = Path(manifests)
    if table:
        cfg.ordinal_table = Path(table)
    if seed is not None:
        cfg.seed = seed
    if out:
        cfg.out_dir = Path(out)
    if workers is not None:
        cfg.workers = max(1, workers)
        cfg.__post_init__()  # re-apply the thread-cap environment variable
    _apply_profile_overrides(cfg, profile_specs or ())
    return cfg


@click.group()
def cli():
    """Batch analytics for name-calling response sessions."""


_common = [
    click.option("--config", "config_path", type=click.Path(exists=True),
                 help="JSON run-config file."),
    click.option("--seed", type=int, default=None, help="Override the RNG seed."),
    click.option("--out", type=click.Path(), default=None, help="Output directory."),
    click.option("--workers", type=int, default=None, help="Parallel workers."),
    click.option("--profile", "profile_specs", multiple=True,
                 help="Gate profile override, e.g. ASD:tau_c=0.7."),
]


def _with_common(f):
    for opt in reversed(_common):
        f = opt(f)
    return f


@cli.command()
@_with_common
@click.option("--streams", type=click.Path(exists=True), help="Stream directory.")
@click.option("--manifests", type=click.Path(exists=True), help="Manifest directory.")
@click.option("--table", type=click.Path(exists=True), help="Ordinal wide table CSV.")
def analyze(config_path, seed, out, workers, profile_specs, streams, manifests, table):
    """Run the full pipeline and write all CSV/SVG reports."""
    cfg = _build_config(config_path, seed, out, workers, profile_specs,
                        streams, manifests, table)
    summary = pipeline.run_pipeline(cfg)
    click.echo(
        f"analyzed {summary.n_streams} streams / {summary.n_participants} "
        f"participants -> {summary.n_trials} trials in {summary.wall_time_s:.1f}s")
    for name in sorted(summary.outputs):
        click.echo(f"  {name}  {summary.outputs[name][:12]}")


@cli.command()
@_with_common
@click.option("--streams", type=click.Path(exists=True), required=True)
@click.option("--manifests", type=click.Path(exists=True), required=True)
def geometry(config_path, seed, out, workers, profile_specs, streams, manifests):
    """Streams only: compute and write Trial_Metrics.csv."""
    cfg = _build_config(config_path, seed, out, workers, profile_specs,
                        streams, manifests)
    metrics = pipeline.compute_trial_table(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = pipeline._csv_bytes(
        ("participant", "group", "stimulus", "turn", "latency_s", "duration_s",
         "mean_eop", "responded", "valid_frame_fraction"),
        pipeline.trial_metric_rows(metrics))
    pipeline._atomic_write(out_dir / "Trial_Metrics.csv", data)
    click.echo(f"wrote {out_dir / 'Trial_Metrics.csv'} ({len(metrics)} trials)")


@cli.command()
@_with_common
@click.option("--table", type=click.Path(exists=True), required=True)
def coding(config_path, seed, out, workers, profile_specs, table):
    """Ordinal table only: descriptives, reliability, and slopes."""
    from . import coding as coding_mod
    cfg = _build_config(config_path, seed, out, workers, profile_specs, table=table)
    rows_in = coding_mod.read_wide_table(Path(cfg.ordinal_table).read_bytes())
    records, missing = coding_mod.wide_to_long(rows_in)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline._atomic_write(out_dir / "Descriptive_byStimulus.csv", pipeline._csv_bytes(
        ("group", "stimulus", "mu", "sigma", "pct_full", "pct_partial", "pct_none"),
        pipeline.descriptive_rows(records)))
    pipeline._atomic_write(out_dir / "Reliability_Alpha.csv", pipeline._csv_bytes(
        ("group", "stimulus", "variable", "alpha", "n"),
        pipeline.reliability_rows([], records)))
    slopes = pipeline.slope_records([], records)
    pipeline._atomic_write(out_dir / "Trend_Slopes_BySubject.csv", pipeline._csv_bytes(
        ("participant", "group", "stimulus", "variable", "beta1", "n_turns"),
        [[s.participant_id, s.group, s.stimulus, s.variable, s.beta1, s.n_turns]
         for s in slopes]))
    click.echo(f"{len(records)} records ({missing} missing cells) -> {out_dir}")


@cli.command()
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--n-td", type=int, default=4)
@click.option("--n-asd", type=int, default=4)
@click.option("--frames", type=int, default=1800, help="Frames per stream.")
@click.option("--fps", type=float, default=30.0)
def simulate(out, seed, n_td, n_asd, frames, fps):
    """Generate a synthetic dataset (streams, manifests, ordinal table)."""
    info = synth.write_synthetic_dataset(out, n_td=n_td, n_asd=n_asd,
                                         frames_per_stream=frames, fps=fps, seed=seed)
    click.echo(f"wrote {info['n_streams']} streams under {out}")


@cli.command()
@click.argument("paths", nargs=-1, required=True,
                type=click.Path(exists=True))
def validate(paths):
    """Format-check stream files; nonzero exit if any file is malformed."""
    results = pipeline.validate_inputs([Path(p) for p in paths])
    bad = 0
    for name, error, report in results:
        if error is not None:
            bad += 1
            click.echo(f"{name}: ERROR {error}")
        else:
            click.echo(
                f"{name}: ok frames={report.n_frames} faceless={report.faceless_frames} "
                f"low_conf={report.low_confidence_frames} drift={report.drift_frames} "
                f"max_drift_ms={report.max_drift_ms:.3f}")
    if bad:
        raise OrientLabError(f"{bad} of {len(results)} files failed validation")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except OrientLabError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # internal failure
        click.echo(f"internal error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
