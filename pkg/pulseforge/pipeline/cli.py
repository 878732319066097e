#!/usr/bin/env python3
"""
Command-line entry point: ``pulseforge <subcommand>``.

Each subcommand wraps one pipeline step. Library errors and config validation
errors are printed and exit with status 2.
"""

import functools
import json
import logging
import sys
from pathlib import Path

import click
import torch
from pydantic import ValidationError

from ..align.fcp import apply_fcp, estimate_fcp_filter
from ..align.wiener import apply_td_filter, estimate_td_wiener
from ..config import (
    AlignConfig,
    LossFlags,
    ModelConfig,
    PipelineConfig,
    Settings,
)
from ..dsp.stft import istft, spectral_energy, stft
from ..dsp.wavio import read_mono, write_wav
from ..errors import ConfigurationError, PulseforgeError
from ..log import configure_logging
from .manifest import CorpusManifest
from .simulate import simulate_corpus
from .steps import (
    derive_pseudo_labels,
    evaluate,
    run_all,
    run_sync,
    sync_report,
    train_ctpulse,
    train_ctse,
)

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 2


def _common_options(fn):
    """Options every subcommand accepts."""

    @click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="Pipeline config JSON (schema_version 1).",
    )
    @click.option("--seed", type=int, default=None, help="Seed for every random stream.")
    @click.option("-v", "--verbose", is_flag=True, help="Enable verbose (DEBUG) logging")
    @click.option(
        "--log-level",
        type=click.Choice(
            ["debug", "info", "warning", "error", "critical"], case_sensitive=False
        ),
        default=None,
    )
    @click.option("--json-logs", is_flag=True, default=None, help="Log one JSON object per line.")
    @functools.wraps(fn)
    def wrapper(
        config_path: Path | None,
        seed: int | None,
        verbose: bool,
        log_level: str | None,
        json_logs: bool | None,
        **kwargs,
    ):
        settings = Settings()
        level = "DEBUG" if verbose else (log_level or settings.log_level)
        configure_logging(level, json_logs if json_logs else settings.json_logs)
        torch.set_num_threads(settings.torch_threads)
        try:
            config = (
                PipelineConfig.from_json_file(config_path)
                if config_path is not None
                else PipelineConfig()
            )
            if seed is not None:
                config = config.with_seed(seed)
            elif config_path is None:
                config = config.with_seed(settings.seed)
            return fn(config=config, **kwargs)
        except (PulseforgeError, ValidationError) as e:
            click.secho(f"Error: {e}", fg="red", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


def _override_ctpulse(
    config: PipelineConfig,
    channels: int | None,
    loss_flags: str | None,
    align: str | None,
    alpha: float | None,
) -> PipelineConfig:
    """Apply command-line overrides to the far-field model and training config."""
    model = config.ctpulse_model
    if channels is not None:
        model = ModelConfig.for_channels(
            channels,
            **model.model_dump(exclude={"input_channels", "reference_channel"}),
        )
    train_update: dict = {}
    if loss_flags is not None:
        train_update["loss_flags"] = LossFlags.parse(loss_flags)
    if align is not None:
        train_update["align"] = AlignConfig.parse(align)
    if alpha is not None:
        train_update["alpha"] = alpha
    train = config.ctpulse_train.model_copy(update=train_update)
    # Round-trip through validation so overrides obey the model validators.
    return PipelineConfig.model_validate(
        config.model_copy(update={"ctpulse_model": model, "ctpulse_train": train}).model_dump()
    )


def _echo_json(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@click.group()
@click.version_option(package_name="pulseforge")
def cli() -> None:
    """Close-talk pseudo-label speech enhancement pipeline."""


@cli.command()
@_common_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def simulate(config: PipelineConfig, out: Path) -> None:
    """Generate the synthetic paired corpus (train/val/test manifests)."""
    manifests = simulate_corpus(config.corpus, out)
    _echo_json({split: str(out / split / "manifest.jsonl") for split in manifests})


@cli.command()
@_common_options
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def sync(config: PipelineConfig, manifest: Path, out: Path) -> None:
    """Synchronize close-talk files to the far-field array with GCC-PHAT."""
    synced = run_sync(CorpusManifest.read(manifest), config.sync, out)
    synced.write(out / "manifest.jsonl")
    report = sync_report(synced, config.sync)
    (out / "sync_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    _echo_json({"manifest": str(out / "manifest.jsonl"), "within_1ms": report["within_1ms"]})


@cli.command("train-ctse")
@_common_options
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--val-manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def train_ctse_command(
    config: PipelineConfig, manifest: Path, val_manifest: Path | None, out: Path
) -> None:
    """Train the close-talk enhancement model on simulated mixtures."""
    val = CorpusManifest.read(val_manifest).by_domain("simu") if val_manifest else None
    path = train_ctse(
        CorpusManifest.read(manifest).by_domain("simu"),
        config.ctse_model,
        config.ctse_train,
        out / "ctse.pfck",
        val,
    )
    _echo_json({"checkpoint": str(path)})


@cli.command("derive-labels")
@_common_options
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
def derive_labels(config: PipelineConfig, checkpoint: Path, manifest: Path, out: Path) -> None:
    """Enhance real close-talk mixtures into pseudo-labels."""
    derived = derive_pseudo_labels(checkpoint, CorpusManifest.read(manifest), out, config.sync)
    derived.manifest.write(out / "manifest.jsonl")
    _echo_json(
        {
            "manifest": str(out / "manifest.jsonl"),
            "pseudo_label_si_sdr_db": derived.mean_quality_db,
        }
    )


@cli.command("train-ctpulse")
@_common_options
@click.option("--simu-manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--real-manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--val-manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--channels", type=click.Choice(["1", "2", "6"]), default=None)
@click.option("--loss-flags", default=None, help="Row name (1a..3c) or simu=X+V+Y,real=X+Y.")
@click.option("--align", default=None, help="fcp, fcp:<I>,<J> or td:<K>.")
@click.option("--alpha", type=float, default=None, help="Weight of simulated mini-batches.")
@click.option("--baseline", is_flag=True, help="Ignore real data (supervised baseline).")
def train_ctpulse_command(
    config: PipelineConfig,
    simu_manifest: Path,
    real_manifest: Path | None,
    val_manifest: Path | None,
    out: Path,
    channels: str | None,
    loss_flags: str | None,
    align: str | None,
    alpha: float | None,
    baseline: bool,
) -> None:
    """Co-learn the far-field model on simulated data and pseudo-labelled real data."""
    try:
        config = _override_ctpulse(
            config, int(channels) if channels else None, loss_flags, align, alpha
        )
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    real = None
    if real_manifest is not None and not baseline:
        real = CorpusManifest.read(real_manifest).by_domain("real")
    val = CorpusManifest.read(val_manifest) if val_manifest else None
    if val is not None and real is None:
        val = val.by_domain("simu")
    name = "baseline.pfck" if real is None else "ctpulse.pfck"
    path = train_ctpulse(
        CorpusManifest.read(simu_manifest).by_domain("simu"),
        real,
        config.ctpulse_model,
        config.ctpulse_train,
        out / name,
        val,
    )
    _echo_json({"checkpoint": str(path)})


@cli.command("eval")
@_common_options
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--gamma", type=float, default=None, help="Speaker reinforcement level in dB.")
def eval_command(
    config: PipelineConfig, checkpoint: Path, manifest: Path, out: Path, gamma: float | None
) -> None:
    """Score a checkpoint on a manifest (SI-SDR, filtered SDR, reinforcement)."""
    report = evaluate(
        checkpoint,
        CorpusManifest.read(manifest),
        gamma if gamma is not None else config.gamma_db,
        config.sdr_filter_taps,
    )
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report.system}_metrics.json"
    path.write_text(report.model_dump_json(indent=2))
    _echo_json({"report": str(path), "mean": report.mean})


@cli.command("align")
@_common_options
@click.option("--est", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--target", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--align", "mode", default="td:64", help="fcp, fcp:<I>,<J> or td:<K>.")
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Write aligned.wav and align_report.json here.",
)
def align_command(
    config: PipelineConfig, est: Path, target: Path, mode: str, out: Path | None
) -> None:
    """Print residual energy of est vs target before and after filter alignment."""
    try:
        align = AlignConfig.parse(mode)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    estimate, reference = read_mono(est), read_mono(target)
    if estimate.sample_rate != reference.sample_rate:
        raise ConfigurationError(
            f"sample rates differ: {estimate.sample_rate} Hz vs {reference.sample_rate} Hz"
        )
    stft_config = config.ctpulse_model.stft
    target_spec = stft(reference, stft_config)
    est_spec = stft(estimate, stft_config)
    if align.mode == "fcp":
        filt = estimate_fcp_filter(est_spec, target_spec, align.geometry, align.ridge, align.relative_ridge)
        aligned = apply_fcp(est_spec, filt)
        aligned_wave = istft(aligned)
    else:
        wiener = estimate_td_wiener(estimate, reference, align.td_taps, align.ridge, align.relative_ridge)
        aligned_wave = apply_td_filter(estimate, wiener)
        aligned = stft(aligned_wave, stft_config)
        logger.info(f"Dominant Wiener lag {wiener.dominant_lag} samples")
    before = spectral_energy(target_spec.with_data(target_spec.data - est_spec.data))
    after = spectral_energy(target_spec.with_data(target_spec.data - aligned.data))
    report = {
        "mode": mode,
        "target_energy": spectral_energy(target_spec),
        "residual_before": before,
        "residual_after": after,
    }
    if out is not None:
        report["aligned"] = str(write_wav(out / "aligned.wav", aligned_wave))
        (out / "align_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True), encoding="utf-8"
        )
    _echo_json(report)


@cli.command("run-all")
@_common_options
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Run directory; defaults to PULSEFORGE_ARTIFACTS_ROOT.",
)
@click.option("--channels", type=click.Choice(["1", "2", "6"]), default=None)
@click.option("--loss-flags", default=None, help="Row name (1a..3c) or simu=X+V+Y,real=X+Y.")
@click.option("--align", default=None, help="fcp, fcp:<I>,<J> or td:<K>.")
@click.option("--alpha", type=float, default=None)
@click.option("--gamma", type=float, default=None, help="Speaker reinforcement level in dB.")
def run_all_command(
    config: PipelineConfig,
    out: Path | None,
    channels: str | None,
    loss_flags: str | None,
    align: str | None,
    alpha: float | None,
    gamma: float | None,
) -> None:
    """Run simulate, sync, train-ctse, derive-labels, train-ctpulse and eval."""
    try:
        config = _override_ctpulse(
            config, int(channels) if channels else None, loss_flags, align, alpha
        )
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    if gamma is not None:
        config = config.model_copy(update={"gamma_db": gamma})
    summary = run_all(config, out if out is not None else Settings().artifacts_root)
    _echo_json(summary)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
