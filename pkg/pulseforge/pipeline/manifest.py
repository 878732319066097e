"""
JSON Lines corpus manifests.

The first line is a header object (``kind = "header"``) carrying the schema
version, sample rate and split; every following line is one MixtureRecord.
File paths are stored relative to the manifest's directory, so a corpus
directory can be moved as a whole.
"""

import json
import logging
import os
from collections.abc import Iterator
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError, model_validator

from ..config import SCHEMA_VERSION, Domain, Split
from ..errors import ManifestError

logger = logging.getLogger(__name__)


class OracleInfo(BaseModel):
    """Simulator ground truth; used for supervision (simu) or scoring only (real)."""

    clean_paths: list[str]
    noise_paths: list[str]
    close_talk_clean_path: str | None = None
    injected_offset_ms: float = 0.0
    injected_gain: float = 1.0
    true_snr_db: float
    close_talk_snr_db: float | None = None
    propagation_delay_ms: list[float] = Field(default_factory=list)
    propagation_gain: list[float] = Field(default_factory=list)
    expected_delay_ms: float = 0.0


class MixtureRecord(BaseModel):
    """One paired utterance: P far-field channels and an optional close-talk file."""

    id: str
    domain: Domain
    far_field_paths: list[str]
    close_talk_path: str | None = None
    oracle: OracleInfo | None = None
    pseudo_label_path: str | None = None
    sync_delay_frames: int | None = None

    @model_validator(mode="after")
    def _domain_fields(self) -> "MixtureRecord":
        if not self.far_field_paths:
            raise ValueError(f"{self.id}: no far-field channels")
        if self.domain == "real" and self.close_talk_path is None:
            raise ValueError(f"{self.id}: real records need a close-talk path")
        if self.domain == "simu":
            if self.oracle is None:
                raise ValueError(f"{self.id}: simulated records need oracle clean/noise")
            channels = len(self.far_field_paths)
            if len(self.oracle.clean_paths) != channels or len(self.oracle.noise_paths) != channels:
                raise ValueError(
                    f"{self.id}: oracle clean/noise must list {channels} channels"
                )
        return self

    def paths(self) -> Iterator[str]:
        yield from self.far_field_paths
        for path in (self.close_talk_path, self.pseudo_label_path):
            if path is not None:
                yield path
        if self.oracle is not None:
            yield from self.oracle.clean_paths
            yield from self.oracle.noise_paths
            if self.oracle.close_talk_clean_path is not None:
                yield self.oracle.close_talk_clean_path

    def map_paths(self, fn) -> "MixtureRecord":
        """Copy with every stored path passed through ``fn``."""
        update: dict = {"far_field_paths": [fn(p) for p in self.far_field_paths]}
        if self.close_talk_path is not None:
            update["close_talk_path"] = fn(self.close_talk_path)
        if self.pseudo_label_path is not None:
            update["pseudo_label_path"] = fn(self.pseudo_label_path)
        if self.oracle is not None:
            oracle_update: dict = {
                "clean_paths": [fn(p) for p in self.oracle.clean_paths],
                "noise_paths": [fn(p) for p in self.oracle.noise_paths],
            }
            if self.oracle.close_talk_clean_path is not None:
                oracle_update["close_talk_clean_path"] = fn(self.oracle.close_talk_clean_path)
            update["oracle"] = self.oracle.model_copy(update=oracle_update)
        return self.model_copy(update=update)


class CorpusManifest(BaseModel):
    """Records of one split, with paths relative to ``root``."""

    records: list[MixtureRecord] = Field(default_factory=list)
    sample_rate: int = Field(default=16000, gt=0)
    split: Split = "train"
    root: Path = Field(default=Path("."), exclude=True)

    @model_validator(mode="after")
    def _unique_ids(self) -> "CorpusManifest":
        seen: set[str] = set()
        for record in self.records:
            if record.id in seen:
                raise ValueError(f"duplicate record id {record.id!r}")
            seen.add(record.id)
        return self

    def __len__(self) -> int:
        return len(self.records)

    def resolve(self, relative: str) -> Path:
        return self.root / relative

    def relative(self, path: str | Path) -> str:
        return Path(os.path.relpath(Path(path), self.root)).as_posix()

    def by_domain(self, domain: Domain) -> "CorpusManifest":
        return self.with_records([r for r in self.records if r.domain == domain])

    def with_records(self, records: list[MixtureRecord]) -> "CorpusManifest":
        return CorpusManifest(
            records=records, sample_rate=self.sample_rate, split=self.split, root=self.root
        )

    def rebased(self, root: str | Path) -> "CorpusManifest":
        """Same files, paths rewritten relative to a new directory."""
        root = Path(root)
        if root.resolve() == self.root.resolve():
            return self

        def move(path: str) -> str:
            return Path(os.path.relpath(self.resolve(path), root)).as_posix()

        return CorpusManifest(
            records=[r.map_paths(move) for r in self.records],
            sample_rate=self.sample_rate,
            split=self.split,
            root=root,
        )

    def check_paths(self) -> None:
        for record in self.records:
            for path in record.paths():
                if not self.resolve(path).exists():
                    raise ManifestError(f"{record.id}: missing file {path}")

    def to_jsonl(self) -> str:
        header = {
            "kind": "header",
            "schema_version": SCHEMA_VERSION,
            "sample_rate": self.sample_rate,
            "split": self.split,
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(
            json.dumps(record.model_dump(mode="json"), sort_keys=True)
            for record in self.records
        )
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        """Write as JSON Lines; paths are rebased onto the file's directory."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rebased = self.rebased(path.parent)
        path.write_text(rebased.to_jsonl(), encoding="utf-8")
        logger.info(f"Wrote manifest {path} ({len(self)} records, split={self.split})")
        return path

    @classmethod
    def read(cls, path: str | Path, check_paths: bool = True) -> "CorpusManifest":
        path = Path(path)
        try:
            lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        except OSError as e:
            logger.error(f"Cannot read manifest {path}: {e}")
            raise ManifestError(f"{path}: {e}") from e
        if not lines:
            raise ManifestError(f"{path}: empty manifest (no header line)")

        try:
            header = json.loads(lines[0])
            if header.get("kind") != "header":
                raise ManifestError(f"{path}: first line is not a header")
            if header.get("schema_version") != SCHEMA_VERSION:
                raise ManifestError(
                    f"{path}: schema version {header.get('schema_version')!r}, "
                    f"expected {SCHEMA_VERSION!r}"
                )
            records = [MixtureRecord.model_validate_json(line) for line in lines[1:]]
            manifest = cls(
                records=records,
                sample_rate=header["sample_rate"],
                split=header["split"],
                root=path.parent,
            )
        except (json.JSONDecodeError, KeyError, ValidationError) as e:
            raise ManifestError(f"{path}: {e}") from e

        if check_paths:
            manifest.check_paths()
        return manifest
