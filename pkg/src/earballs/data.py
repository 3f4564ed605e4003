"""Feature-table and audio-corpus ingestion, splitting, and synthesis.

Feature tables are UTF-8 CSV files with header ``id,label,v0,...,v{d-1}``;
lines starting with ``#`` are comments, two of which are meaningful
directives: ``# provenance: <text>`` and ``# unit-norm`` (declares that every
vector must be unit length).  Audio corpora are directories of 16 kHz mono
16-bit PCM WAV files, preprocessed by random shift + truncation to a fixed
clip length.

Synthetic desk-scale generators stand in for the upstream face-embedding
table and speech corpus so the full pipeline runs on commodity hardware.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioClip, read_clip
from .errors import ConfigurationError, FormatError, ParseError
from .geometry import sample_unit_sphere

log = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-5


@dataclass
class FeatureRecord:
    """One source sample: identifier, label, and feature vector."""

    id: str
    label: str
    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float32).reshape(-1)
        if not np.all(np.isfinite(self.vector)):
            raise ParseError(f"record {self.id!r} has non-finite vector entries")


@dataclass
class FeatureTable:
    records: list[FeatureRecord]
    dimension: int
    provenance: str = ""
    unit_norm: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def vectors(self) -> np.ndarray:
        return np.stack([r.vector for r in self.records])

    def labels(self) -> list[str]:
        return [r.label for r in self.records]

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def label_set(self) -> list[str]:
        return sorted(set(self.labels()))


@dataclass
class AudioCorpus:
    clips: list[AudioClip]
    source_paths: list[str] = field(default_factory=list)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.clips)

    def waveforms(self) -> np.ndarray:
        return np.stack([c.samples for c in self.clips])


def make_table(vectors: np.ndarray, labels, ids=None, provenance: str = "", unit_norm: bool = False) -> FeatureTable:
    vectors = np.asarray(vectors, dtype=np.float32)
    ids = list(ids) if ids is not None else [f"r{i:05d}" for i in range(len(vectors))]
    records = [FeatureRecord(i, str(l), v) for i, l, v in zip(ids, labels, vectors)]
    return FeatureTable(records, dimension=vectors.shape[1], provenance=provenance, unit_norm=unit_norm)


def load_feature_table(path) -> FeatureTable:
    """Parse a feature-table CSV, validating dimensions, ids, and unit norms."""
    path = Path(path)
    records: list[FeatureRecord] = []
    seen_ids: set[str] = set()
    dimension: int | None = None
    provenance = ""
    unit_norm = False
    header_seen = False
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.lower().startswith("provenance:"):
                    provenance = body.split(":", 1)[1].strip()
                elif body.lower().replace("_", "-") == "unit-norm":
                    unit_norm = True
                continue
            fields = [f.strip() for f in line.split(",")]
            if not header_seen:
                if len(fields) < 3 or fields[0] != "id" or fields[1] != "label":
                    raise ParseError(f"{path.name}:{lineno}: expected header id,label,v0,...")
                dimension = len(fields) - 2
                expected = [f"v{i}" for i in range(dimension)]
                if fields[2:] != expected:
                    raise ParseError(f"{path.name}:{lineno}: malformed vector column names")
                header_seen = True
                continue
            if len(fields) != dimension + 2:
                raise ParseError(
                    f"{path.name}:{lineno}: row has {len(fields) - 2} vector entries, expected {dimension}"
                )
            rec_id, label = fields[0], fields[1]
            if rec_id in seen_ids:
                raise ParseError(f"{path.name}:{lineno}: duplicate id {rec_id!r}")
            seen_ids.add(rec_id)
            try:
                vec = np.array([float(v) for v in fields[2:]], dtype=np.float32)
            except ValueError as exc:
                raise ParseError(f"{path.name}:{lineno}: non-numeric vector entry ({exc})") from exc
            if not np.all(np.isfinite(vec)):
                raise ParseError(f"{path.name}:{lineno}: non-finite vector entry")
            if unit_norm and abs(float(np.linalg.norm(vec.astype(np.float64))) - 1.0) > UNIT_NORM_TOL:
                raise ParseError(f"{path.name}:{lineno}: vector not unit length in a unit-norm table")
            records.append(FeatureRecord(rec_id, label, vec))
    if not header_seen:
        raise ParseError(f"{path.name}: missing header row")
    if not records:
        raise ParseError(f"{path.name}: table has no records")
    return FeatureTable(records, dimension=int(dimension), provenance=provenance, unit_norm=unit_norm)


def save_feature_table(table: FeatureTable, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if table.provenance:
            fh.write(f"# provenance: {table.provenance}\n")
        if table.unit_norm:
            fh.write("# unit-norm\n")
        cols = ",".join(f"v{i}" for i in range(table.dimension))
        fh.write(f"id,label,{cols}\n")
        for rec in table.records:
            vals = ",".join(repr(float(v)) for v in rec.vector)
            fh.write(f"{rec.id},{rec.label},{vals}\n")


def _subtable(table: FeatureTable, keep_labels: set[str]) -> FeatureTable:
    recs = [r for r in table.records if r.label in keep_labels]
    return FeatureTable(recs, table.dimension, table.provenance, table.unit_norm)


def split_by_label(
    table: FeatureTable,
    rng: np.random.Generator,
    fractions: tuple[float, float, float] | None = None,
    reserve: int | tuple[int, int] | None = None,
) -> tuple[FeatureTable, FeatureTable, FeatureTable]:
    """Label-disjoint (train, val, test) partition.

    Either ``fractions`` (train/val/test label proportions) or ``reserve``
    (validation label count, or a (validation, test) pair) selects the split;
    no label ever appears in two splits.
    """
    labels = table.label_set()
    n = len(labels)
    if (fractions is None) == (reserve is None):
        raise ConfigurationError("give exactly one of fractions= or reserve=")
    if fractions is not None:
        if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigurationError(f"fractions must be 3 nonnegative values summing to 1, got {fractions}")
        n_val = round(n * fractions[1])
        n_test = round(n * fractions[2])
    else:
        n_val, n_test = (reserve, 0) if isinstance(reserve, int) else reserve
    if n_val + n_test >= n:
        raise ConfigurationError(f"cannot reserve {n_val}+{n_test} of {n} labels: none left for training")
    order = list(rng.permutation(labels))
    val_labels = set(order[:n_val])
    test_labels = set(order[n_val:n_val + n_test])
    train_labels = set(order[n_val + n_test:])
    return (
        _subtable(table, train_labels),
        _subtable(table, val_labels),
        _subtable(table, test_labels),
    )


def load_audio_corpus(
    directory,
    clip_len: int,
    rng: np.random.Generator,
    sample_rate: int = 16000,
) -> AudioCorpus:
    """Load WAVs under a directory, randomly shift, and truncate to clip_len.

    A uniform start offset in [0, file_len - clip_len] is drawn per file;
    shorter files are zero-padded at the end.  Unreadable files are skipped
    with a warning and counted.
    """
    directory = Path(directory)
    paths = sorted(p for p in directory.rglob("*.wav") if p.is_file())
    clips: list[AudioClip] = []
    sources: list[str] = []
    skipped = 0
    for p in paths:
        try:
            clip = read_clip(p, expected_rate=sample_rate)
        except FormatError as exc:
            log.warning("skipping %s: %s", p, exc)
            skipped += 1
            continue
        samples = clip.samples
        offset = int(rng.integers(0, max(1, len(samples) - clip_len + 1)))
        if len(samples) < clip_len:
            samples = np.pad(samples, (0, clip_len - len(samples)))
        else:
            samples = samples[offset:offset + clip_len]
        clips.append(AudioClip(samples, sample_rate))
        sources.append(str(p))
    if not clips:
        raise ConfigurationError(f"no usable WAV files under {directory}")
    return AudioCorpus(clips, sources, skipped)


def synth_source(
    n_clusters: int,
    per_cluster: int,
    d: int,
    spread: float,
    rng: np.random.Generator,
) -> FeatureTable:
    """Clustered unit vectors standing in for an upstream embedding table.

    Cluster centers are uniform on the sphere; members are centers plus
    isotropic Gaussian noise of scale ``spread``, re-normalized to unit
    length.  Labels are cluster ids.
    """
    if spread <= 0:
        raise ConfigurationError(f"spread must be positive, got {spread}")
    centers = sample_unit_sphere(n_clusters, d, rng)
    vectors, labels, ids = [], [], []
    for c in range(n_clusters):
        members = centers[c] + spread * rng.standard_normal((per_cluster, d))
        members /= np.linalg.norm(members, axis=1, keepdims=True)
        vectors.append(members)
        labels += [f"c{c:03d}"] * per_cluster
        ids += [f"c{c:03d}-{i:04d}" for i in range(per_cluster)]
    return make_table(
        np.concatenate(vectors).astype(np.float32), labels, ids,
        provenance=f"synthetic clusters (k={n_clusters}, per={per_cluster}, d={d}, spread={spread})",
        unit_norm=True,
    )


def synth_audio(n: int, clip_len: int, rng: np.random.Generator, sample_rate: int = 16000) -> AudioCorpus:
    """Synthetic target corpus: enveloped sinusoid mixtures plus light noise."""
    if n < 1:
        raise ConfigurationError(f"need n >= 1 clips, got {n}")
    t = np.arange(clip_len) / sample_rate
    clips = []
    for _ in range(n):
        voices = int(rng.integers(2, 6))
        wave = np.zeros(clip_len)
        for _ in range(voices):
            freq = float(np.exp(rng.uniform(np.log(100.0), np.log(4000.0))))
            phase = rng.uniform(0.0, 2.0 * np.pi)
            decay = rng.uniform(1.0, 12.0)
            peak_at = rng.uniform(0.0, t[-1])
            envelope = np.exp(-decay * np.abs(t - peak_at))
            wave += envelope * np.sin(2.0 * np.pi * freq * t + phase)
        wave += 0.01 * rng.standard_normal(clip_len)
        wave *= 0.9 / np.max(np.abs(wave))
        clips.append(AudioClip(wave.astype(np.float32), sample_rate))
    return AudioCorpus(clips, [])
