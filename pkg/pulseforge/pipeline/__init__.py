"""Corpus simulation, manifests and the pipeline steps behind the CLI."""

from .manifest import CorpusManifest, MixtureRecord, OracleInfo
from .simulate import simulate_corpus, simulate_record
from .steps import (
    DerivedLabels,
    derive_pseudo_labels,
    evaluate,
    evaluate_close_talk,
    load_real_examples,
    load_simu_examples,
    run_all,
    run_sync,
    sync_report,
    train_ctpulse,
    train_ctse,
)

__all__ = [
    "CorpusManifest",
    "MixtureRecord",
    "OracleInfo",
    "simulate_corpus",
    "simulate_record",
    "run_sync",
    "sync_report",
    "train_ctse",
    "DerivedLabels",
    "derive_pseudo_labels",
    "train_ctpulse",
    "evaluate",
    "evaluate_close_talk",
    "load_simu_examples",
    "load_real_examples",
    "run_all",
]
