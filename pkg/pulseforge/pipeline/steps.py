"""
The three-step pipeline: sync, close-talk enhancement and pseudo-labels,
far-field co-learning, plus evaluation and the one-shot ``run_all``.

Every step reads and writes manifests and WAV files so it can be run on its own
from the CLI; ``run_all`` chains them inside one artifacts directory.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import (
    SCHEMA_VERSION,
    ModelConfig,
    PipelineConfig,
    SyncConfig,
    TrainConfig,
    config_hash,
)
from ..dsp.stft import istft, stft
from ..dsp.types import Waveform
from ..dsp.wavio import read_mono, write_wav
from ..errors import ConfigurationError, ManifestError
from ..losses.metrics import (
    MetricsReport,
    UtteranceMetrics,
    filtered_sdr,
    si_sdr,
    speaker_reinforcement,
)
from ..model.checkpoint import load_checkpoint, save_checkpoint
from ..model.network import SpectralMappingNet, enhance
from ..model.training import Trainer, TrainingExample, evaluation_channel_sets
from ..sync.gcc_phat import apply_frame_shift, synchronize_pair
from .manifest import CorpusManifest, MixtureRecord
from .simulate import simulate_corpus

logger = logging.getLogger(__name__)


def _read_channels(manifest: CorpusManifest, paths: list[str]) -> np.ndarray:
    waves = [read_mono(manifest.resolve(p)) for p in paths]
    for wave in waves:
        if wave.sample_rate != manifest.sample_rate:
            raise ManifestError(
                f"{paths[0]}: sample rate {wave.sample_rate}, manifest says "
                f"{manifest.sample_rate}"
            )
    return np.stack([w.samples for w in waves])


def _check_rate(manifest: CorpusManifest, model_config: ModelConfig) -> None:
    if manifest.sample_rate != model_config.sample_rate:
        raise ConfigurationError(
            f"manifest is {manifest.sample_rate} Hz but the model expects "
            f"{model_config.sample_rate} Hz"
        )


def load_simu_examples(manifest: CorpusManifest) -> list[TrainingExample]:
    """Far-field mixtures with their oracle speech and noise images."""
    examples = []
    for record in manifest.by_domain("simu").records:
        assert record.oracle is not None
        examples.append(
            TrainingExample(
                id=record.id,
                domain="simu",
                mixtures=_read_channels(manifest, record.far_field_paths),
                sample_rate=manifest.sample_rate,
                speech=_read_channels(manifest, record.oracle.clean_paths),
                noise=_read_channels(manifest, record.oracle.noise_paths),
            )
        )
    return examples


def load_real_examples(manifest: CorpusManifest) -> list[TrainingExample]:
    """Far-field mixtures paired with pseudo-labels; oracle data is not read."""
    examples = []
    for record in manifest.by_domain("real").records:
        if record.pseudo_label_path is None:
            raise ManifestError(f"{record.id}: no pseudo-label; run derive-labels first")
        examples.append(
            TrainingExample(
                id=record.id,
                domain="real",
                mixtures=_read_channels(manifest, record.far_field_paths),
                sample_rate=manifest.sample_rate,
                pseudo=read_mono(manifest.resolve(record.pseudo_label_path)).samples,
            )
        )
    return examples


def run_sync(manifest: CorpusManifest, config: SyncConfig, out_dir: str | Path) -> CorpusManifest:
    """Align every close-talk file to its far-field channels.

    Aligned files are written under ``out_dir/<id>/``; the returned manifest
    (rooted at ``out_dir``) points at them and records the frame delay.
    """
    out_dir = Path(out_dir)
    records = []
    for record in manifest.records:
        if record.close_talk_path is None:
            records.append(record)
            continue
        close = read_mono(manifest.resolve(record.close_talk_path))
        far = [read_mono(manifest.resolve(p)) for p in record.far_field_paths]
        result = synchronize_pair(close, far, config)
        target = write_wav(out_dir / record.id / "close_talk_synced.wav", result.aligned)
        expected = record.oracle.expected_delay_ms if record.oracle else None
        logger.info(
            f"{record.id}: delay {result.delay_frames} frames"
            + (f" (oracle {expected:.1f} ms)" if expected is not None else "")
        )
        records.append(
            record.model_copy(
                update={
                    "close_talk_path": manifest.relative(target),
                    "sync_delay_frames": result.delay_frames,
                }
            )
        )
    return manifest.with_records(records).rebased(out_dir)


def sync_report(manifest: CorpusManifest, config: SyncConfig) -> dict:
    """Per-record delays and, where known, their error against the oracle."""
    hop_ms = config.stft.hop_ms
    entries = []
    for record in manifest.records:
        if record.sync_delay_frames is None:
            continue
        entry = {"id": record.id, "delay_frames": record.sync_delay_frames}
        if record.oracle is not None:
            error = record.sync_delay_frames * hop_ms - record.oracle.expected_delay_ms
            entry["expected_delay_ms"] = record.oracle.expected_delay_ms
            entry["error_ms"] = error
        entries.append(entry)
    errors = [abs(e["error_ms"]) for e in entries if "error_ms" in e]
    return {
        "records": entries,
        "within_1ms": float(np.mean([e <= 1.0 for e in errors])) if errors else None,
    }


def _train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    simu: list[TrainingExample],
    real: list[TrainingExample],
    val: list[TrainingExample],
    out_path: Path,
) -> Path:
    model = SpectralMappingNet(model_config, seed=train_config.seed)
    trainer = Trainer(model, train_config)
    trainer.fit(simu, real, val)
    return save_checkpoint(out_path, model, trainer)


def train_ctse(
    simu_manifest: CorpusManifest,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_path: str | Path,
    val_manifest: CorpusManifest | None = None,
) -> Path:
    """Train the close-talk model on simulated mixtures, every channel as a mono input."""
    if model_config.input_channels != 1:
        raise ConfigurationError("the close-talk model takes a single channel")
    _check_rate(simu_manifest, model_config)
    simu = load_simu_examples(simu_manifest)
    if not simu:
        raise ManifestError("close-talk training needs simulated records")
    val = load_simu_examples(val_manifest) if val_manifest is not None else []
    logger.info(f"Training close-talk model on {len(simu)} simulated utterances")
    return _train(model_config, train_config, simu, [], val, Path(out_path))


@dataclass(frozen=True)
class DerivedLabels:
    manifest: CorpusManifest
    quality_db: dict[str, float]

    @property
    def mean_quality_db(self) -> float | None:
        return float(np.mean(list(self.quality_db.values()))) if self.quality_db else None


def _pseudo_label_quality(
    manifest: CorpusManifest, record: MixtureRecord, label: Waveform, sync: SyncConfig
) -> float | None:
    """SI-SDR of a pseudo-label against the oracle close-talk speech, shifted like the mixture."""
    if record.oracle is None or record.oracle.close_talk_clean_path is None:
        return None
    clean = read_mono(manifest.resolve(record.oracle.close_talk_clean_path))
    if record.sync_delay_frames:
        clean = apply_frame_shift(clean, record.sync_delay_frames, sync)
    if clean.energy <= 0:
        return None
    return si_sdr(label, clean)


def derive_pseudo_labels(
    checkpoint_path: str | Path,
    manifest: CorpusManifest,
    out_dir: str | Path,
    sync: SyncConfig | None = None,
) -> DerivedLabels:
    """Enhance each real close-talk mixture into a pseudo-label WAV."""
    checkpoint = load_checkpoint(checkpoint_path)
    _check_rate(manifest, checkpoint.config)
    sync = sync or SyncConfig()
    out_dir = Path(out_dir)
    records, quality = [], {}
    for record in manifest.records:
        if record.domain != "real":
            records.append(record)
            continue
        assert record.close_talk_path is not None
        close = read_mono(manifest.resolve(record.close_talk_path))
        speech, _ = enhance(checkpoint.model, [stft(close, checkpoint.config.stft)])
        label = istft(speech)
        target = write_wav(out_dir / record.id / "pseudo_label.wav", label)
        score = _pseudo_label_quality(manifest, record, label, sync)
        if score is not None:
            quality[record.id] = score
            logger.info(f"{record.id}: pseudo-label SI-SDR {score:.2f} dB")
        records.append(record.model_copy(update={"pseudo_label_path": manifest.relative(target)}))
    derived = manifest.with_records(records).rebased(out_dir)
    if quality:
        logger.info(f"Mean pseudo-label SI-SDR {np.mean(list(quality.values())):.2f} dB")
    return DerivedLabels(derived, quality)


def train_ctpulse(
    simu_manifest: CorpusManifest,
    real_manifest: CorpusManifest | None,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_path: str | Path,
    val_manifest: CorpusManifest | None = None,
) -> Path:
    """Co-learn the far-field model; without real data this is the supervised baseline."""
    _check_rate(simu_manifest, model_config)
    simu = load_simu_examples(simu_manifest)
    real = load_real_examples(real_manifest) if real_manifest is not None else []
    val: list[TrainingExample] = []
    if val_manifest is not None:
        val = load_simu_examples(val_manifest)
        if real:
            val += load_real_examples(val_manifest)
    label = "co-learning" if real else "supervised baseline"
    logger.info(f"Training far-field model ({label}): {len(simu)} simu, {len(real)} real")
    return _train(model_config, train_config, simu, real, val, Path(out_path))


def _score(
    model: SpectralMappingNet,
    mixtures: np.ndarray,
    references: np.ndarray,
    channels: list[int],
    rate: int,
    gamma_db: float | None,
    sdr_taps: int,
) -> tuple[float, float, float, float | None]:
    config = model.config
    spectra = [stft(Waveform(mixtures[c], rate), config.stft) for c in channels]
    speech, _ = enhance(model, spectra)
    estimate = istft(speech)
    reference = channels[config.reference_channel - 1]
    clean = Waveform(references[reference], rate)
    mixture = Waveform(mixtures[reference], rate)
    reinforced = (
        si_sdr(speaker_reinforcement(estimate, mixture, gamma_db), clean)
        if gamma_db is not None and estimate.energy > 0
        else None
    )
    return (
        si_sdr(mixture, clean),
        si_sdr(estimate, clean),
        filtered_sdr(estimate, clean, sdr_taps),
        reinforced,
    )


def evaluate(
    checkpoint_path: str | Path,
    manifest: CorpusManifest,
    gamma_db: float | None = 10.0,
    sdr_taps: int = 256,
    system: str | None = None,
) -> MetricsReport:
    """Score far-field enhancement against the oracle speech image at the reference mic.

    Single-channel models are applied to every channel and the scores averaged.
    """
    checkpoint = load_checkpoint(checkpoint_path)
    _check_rate(manifest, checkpoint.config)
    utterances = []
    for record in manifest.records:
        if record.oracle is None:
            logger.warning(f"{record.id}: no oracle speech, skipped")
            continue
        mixtures = _read_channels(manifest, record.far_field_paths)
        clean = _read_channels(manifest, record.oracle.clean_paths)
        rows = [
            _score(checkpoint.model, mixtures, clean, channels, manifest.sample_rate, gamma_db, sdr_taps)
            for channels in evaluation_channel_sets(checkpoint.config, mixtures.shape[0])
        ]
        reinforced = [r[3] for r in rows if r[3] is not None]
        utterances.append(
            UtteranceMetrics(
                id=record.id,
                domain=record.domain,
                mixture_si_sdr_db=float(np.mean([r[0] for r in rows])),
                si_sdr_db=float(np.mean([r[1] for r in rows])),
                sdr_db=float(np.mean([r[2] for r in rows])),
                si_sdr_reinforced_db=float(np.mean(reinforced)) if reinforced else None,
            )
        )
    report = MetricsReport(
        system=system or Path(checkpoint_path).stem, gamma_db=gamma_db, utterances=utterances
    )
    for domain, row in report.mean.items():
        logger.info(f"{report.system} [{domain}]: SI-SDR {row['si_sdr_db']:.2f} dB "
                    f"(mixture {row['mixture_si_sdr_db']:.2f} dB)")
    return report


def evaluate_close_talk(
    checkpoint_path: str | Path, manifest: CorpusManifest, sdr_taps: int = 256
) -> MetricsReport:
    """Score the close-talk model on close-talk mixtures against their clean speech."""
    checkpoint = load_checkpoint(checkpoint_path)
    _check_rate(manifest, checkpoint.config)
    utterances = []
    for record in manifest.records:
        oracle = record.oracle
        if record.close_talk_path is None or oracle is None or oracle.close_talk_clean_path is None:
            continue
        mixture = read_mono(manifest.resolve(record.close_talk_path))
        clean = read_mono(manifest.resolve(oracle.close_talk_clean_path))
        speech, _ = enhance(checkpoint.model, [stft(mixture, checkpoint.config.stft)])
        estimate = istft(speech)
        utterances.append(
            UtteranceMetrics(
                id=record.id,
                domain=record.domain,
                mixture_si_sdr_db=si_sdr(mixture, clean),
                si_sdr_db=si_sdr(estimate, clean),
                sdr_db=filtered_sdr(estimate, clean, sdr_taps),
            )
        )
    return MetricsReport(system="ctse-close-talk", utterances=utterances)


def _write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


def run_all(config: PipelineConfig, out_dir: str | Path) -> dict:
    """Simulate, sync, train both models, derive labels, evaluate; write summary.json."""
    out_dir = Path(out_dir)
    logger.info(f"Running full pipeline into {out_dir} (seed {config.seed})")
    corpus = simulate_corpus(config.corpus, out_dir / "corpus")

    synced = {
        split: run_sync(manifest, config.sync, out_dir / "sync" / split)
        for split, manifest in corpus.items()
    }
    for split, manifest in synced.items():
        manifest.write(out_dir / "sync" / split / "manifest.jsonl")

    models = out_dir / "models"
    ctse = train_ctse(
        synced["train"].by_domain("simu"),
        config.ctse_model,
        config.ctse_train,
        models / "ctse.pfck",
        synced["val"].by_domain("simu"),
    )

    labelled = {}
    for split in ("train", "val"):
        derived = derive_pseudo_labels(ctse, synced[split], out_dir / "labels" / split, config.sync)
        derived.manifest.write(out_dir / "labels" / split / "manifest.jsonl")
        labelled[split] = derived
    real_train = labelled["train"].manifest.by_domain("real")

    ctpulse = train_ctpulse(
        synced["train"].by_domain("simu"),
        real_train if len(real_train) else None,
        config.ctpulse_model,
        config.ctpulse_train,
        models / "ctpulse.pfck",
        labelled["val"].manifest,
    )
    systems = {"ctpulse": ctpulse}
    if config.run_baseline:
        systems["baseline"] = train_ctpulse(
            synced["train"].by_domain("simu"),
            None,
            config.ctpulse_model,
            config.ctpulse_train,
            models / "baseline.pfck",
            labelled["val"].manifest.by_domain("simu"),
        )

    test = synced["test"]
    reports = {}
    for name, checkpoint in systems.items():
        report = evaluate(checkpoint, test, config.gamma_db, config.sdr_filter_taps, system=name)
        _write_json(out_dir / "metrics" / f"{name}.json", report.model_dump(mode="json"))
        reports[name] = report.mean
    close_talk = evaluate_close_talk(ctse, corpus["test"], config.sdr_filter_taps)
    _write_json(out_dir / "metrics" / "ctse_close_talk.json", close_talk.model_dump(mode="json"))
    reports["ctse_close_talk"] = close_talk.mean

    summary = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "sync": {split: sync_report(m, config.sync)["within_1ms"] for split, m in synced.items()},
        "pseudo_label_si_sdr_db": labelled["train"].mean_quality_db,
        "metrics": reports,
    }
    real_means = {name: r.get("real") for name, r in reports.items() if name in systems}
    if real_means.get("ctpulse") and real_means.get("baseline"):
        summary["real_test_gain_db"] = {
            "over_mixture": real_means["ctpulse"]["si_sdr_improvement_db"],
            "over_baseline": real_means["ctpulse"]["si_sdr_db"] - real_means["baseline"]["si_sdr_db"],
        }
    _write_json(out_dir / "summary.json", summary)
    logger.info(f"Pipeline finished; summary at {out_dir / 'summary.json'}")
    return summary
