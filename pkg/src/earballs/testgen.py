"""Listening-test generation, package emission, and response grading.

A test package holds three reference sonifications (A, B, C; one source
identity each) and eight query sonifications (0-7), each of whose identity is
one of the three references.  Category sizes come from a uniform draw over
the compositions of 8 into three nonnegative parts, and a candidate identity
triple is accepted only if its feature vectors are mutually L2-separated.
One clip is additionally designated for the memorability check and shipped
as an anonymous "intro sound" copy.

On disk a package is split into ``participant/`` (clips, offline test page,
blinded manifest) and ``admin/`` (answer key, generation log); grading takes
participant response JSON files plus admin keys and produces per-participant
and per-model-variant accuracy/memorability scores.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .audio import AudioClip, read_clip, write_clip
from .data import FeatureTable
from .errors import GenerationError, ParseError
from .geometry import l2_separates
from .models import ModelState, generate_waveforms

CHOICES = ("A", "B", "C")
QUERY_COUNT = 8
RESPONSE_SCHEMA_VERSION = 1
KEY_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1

# all (a, b, c) with a + b + c = QUERY_COUNT, sampled uniformly
COMPOSITIONS = [
    (a, b, QUERY_COUNT - a - b)
    for a in range(QUERY_COUNT + 1)
    for b in range(QUERY_COUNT + 1 - a)
]

UI_ASSETS = ("index.html", "app.js", "style.css")


@dataclass
class TestPackage:
    package_id: str
    model_id: str
    references: dict[str, AudioClip]
    reference_ids: dict[str, str]
    queries: list[AudioClip]
    query_ids: list[str]
    answer_key: dict[str, str]
    memorability_choice: str
    labels: dict[str, str]
    counts: tuple[int, int, int]
    attempts: int
    seed: int | None = None


@dataclass
class ResponseRecord:
    package_id: str
    answers: dict[str, str]
    memorability: str | None
    participant_id: str
    started_at: str = ""
    submitted_at: str = ""

    def is_complete(self) -> bool:
        have_all = all(self.answers.get(str(q)) in CHOICES for q in range(QUERY_COUNT))
        return have_all and self.memorability in CHOICES and bool(self.participant_id)


@dataclass
class ParticipantScore:
    participant_id: str
    package_id: str
    model_id: str
    correct: int
    hsa: float
    hsm: float


@dataclass
class ModelScore:
    n: int
    mean_hsa: float
    hsa_min: int  # correct counts out of 8
    hsa_max: int
    mean_hsm: float


@dataclass
class GradeReport:
    participants: list[ParticipantScore]
    per_model: dict[str, ModelScore]
    excluded: int


@dataclass
class PackageCheck:
    valid: bool
    problems: list[str] = field(default_factory=list)


def generate_test(
    state: ModelState | None,
    test_table: FeatureTable,
    rng: np.random.Generator,
    sonifier=None,
    model_id: str = "",
    seed: int | None = None,
) -> TestPackage:
    """Draw one listening test: composition, separated identity triple, clips.

    Loops until the sampled identity triple is L2-separated over all of its
    test-set examples; the attempt count is recorded.  ``sonifier`` (vectors
    -> waveform array) substitutes for the model's generator when given.
    """
    by_label: dict[str, list[int]] = {}
    for i, label in enumerate(test_table.labels()):
        by_label.setdefault(label, []).append(i)
    # weakest composition has max part ceil(8/3) = 3, so 5 examples is the floor
    min_feasible = 2 + min(max(comp) for comp in COMPOSITIONS)
    if sum(len(v) >= min_feasible for v in by_label.values()) < 3:
        raise GenerationError(
            f"need at least 3 labels with {min_feasible}+ examples, table has "
            f"{sum(len(v) >= min_feasible for v in by_label.values())}"
        )

    package_id = "pkg-" + "".join(f"{b:02x}" for b in rng.integers(0, 256, size=6))
    vectors = test_table.vectors()

    attempts = 0
    while True:
        attempts += 1
        a, b, c = COMPOSITIONS[int(rng.integers(0, len(COMPOSITIONS)))]
        need = 1 + max(a, b, c)
        eligible = sorted(label for label, idx in by_label.items() if len(idx) > need)
        if len(eligible) < 3:
            continue
        triple = [eligible[k] for k in rng.choice(len(eligible), size=3, replace=False)]
        groups = {label: vectors[by_label[label]] for label in triple}
        if not l2_separates([groups[label] for label in triple]):
            continue

        counts = (a, b, c)
        picked: dict[str, list[int]] = {}
        for label, extra in zip(triple, counts):
            pool = by_label[label]
            sel = rng.choice(len(pool), size=extra + 1, replace=False)
            picked[label] = [pool[s] for s in sel]
        break

    references: dict[str, AudioClip] = {}
    reference_ids: dict[str, str] = {}
    labels: dict[str, str] = {}
    query_rows: list[tuple[str, int]] = []  # (choice letter, record index)
    for letter, label in zip(CHOICES, triple):
        ref_idx, *rest = picked[label]
        reference_ids[letter] = test_table.records[ref_idx].id
        labels[letter] = label
        query_rows.extend((letter, i) for i in rest)

    order = rng.permutation(len(query_rows))
    query_rows = [query_rows[i] for i in order]
    answer_key = {str(q): letter for q, (letter, _) in enumerate(query_rows)}
    query_ids = [test_table.records[i].id for _, i in query_rows]
    memorability_choice = CHOICES[int(rng.integers(0, 3))]

    ref_indices = {letter: picked[label][0] for letter, label in zip(CHOICES, triple)}
    idx_order = [ref_indices[letter] for letter in CHOICES] + [i for _, i in query_rows]
    batch = vectors[idx_order]
    if sonifier is not None:
        waves = np.asarray(sonifier(batch), dtype=np.float32)
        sample_rate = state.sample_rate if state is not None else 16000
    else:
        waves = generate_waveforms(state, batch).numpy()
        sample_rate = state.sample_rate
    clips = [AudioClip(w, sample_rate) for w in waves]

    return TestPackage(
        package_id=package_id,
        model_id=model_id,
        references=dict(zip(CHOICES, clips[:3])),
        reference_ids=reference_ids,
        queries=clips[3:],
        query_ids=query_ids,
        answer_key=answer_key,
        memorability_choice=memorability_choice,
        labels=labels,
        counts=(a, b, c),
        attempts=attempts,
        seed=seed,
    )


def ui_manifest(pkg: TestPackage) -> dict:
    """Participant-facing manifest; never contains key material."""
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "package_id": pkg.package_id,
        "references": [f"{letter}.wav" for letter in CHOICES],
        "queries": [f"{q}.wav" for q in range(QUERY_COUNT)],
        "intro": "intro.wav",
    }


def admin_key(pkg: TestPackage) -> dict:
    return {
        "schema_version": KEY_SCHEMA_VERSION,
        "package_id": pkg.package_id,
        "model_id": pkg.model_id,
        "seed": pkg.seed,
        "answer_key": pkg.answer_key,
        "memorability_choice": pkg.memorability_choice,
        "labels": pkg.labels,
        "reference_ids": pkg.reference_ids,
        "query_ids": pkg.query_ids,
        "counts": list(pkg.counts),
        "attempts": pkg.attempts,
    }


def _ui_source_dir() -> Path | None:
    base = resources.files("earballs") / "ui"
    path = Path(str(base))
    return path if path.is_dir() else None


def write_package(pkg: TestPackage, out_dir, ui_assets: bool = True) -> Path:
    """Emit the on-disk package layout: participant/ and admin/ areas."""
    out_dir = Path(out_dir)
    participant = out_dir / "participant"
    admin = out_dir / "admin"
    participant.mkdir(parents=True, exist_ok=True)
    admin.mkdir(parents=True, exist_ok=True)

    for letter, clip in pkg.references.items():
        write_clip(clip, participant / f"{letter}.wav")
    for q, clip in enumerate(pkg.queries):
        write_clip(clip, participant / f"{q}.wav")
    write_clip(pkg.references[pkg.memorability_choice], participant / "intro.wav")

    manifest = ui_manifest(pkg)
    (participant / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    (participant / "manifest.js").write_text(
        "window.EARBALLS_MANIFEST = " + json.dumps(manifest) + ";\n", encoding="utf-8"
    )
    if ui_assets:
        src = _ui_source_dir()
        if src is not None:
            for name in UI_ASSETS:
                asset = src / name
                if asset.is_file():
                    shutil.copyfile(asset, participant / name)

    (admin / "key.json").write_text(json.dumps(admin_key(pkg), indent=2) + "\n", encoding="utf-8")
    (admin / "generation_log.txt").write_text(
        f"package_id: {pkg.package_id}\n"
        f"model_id: {pkg.model_id}\n"
        f"seed: {pkg.seed}\n"
        f"attempts: {pkg.attempts}\n"
        f"counts: {pkg.counts[0]},{pkg.counts[1]},{pkg.counts[2]}\n",
        encoding="utf-8",
    )
    return out_dir


KEY_MARKERS = (b"answer_key", b"memorability_choice")


def check_package(path, expected_rate: int = 16000) -> PackageCheck:
    """Validate an emitted package: layout, WAV contract, key placement, blinding."""
    problems: list[str] = []
    root = Path(path)
    participant = root / "participant"
    admin = root / "admin"
    if not participant.is_dir():
        return PackageCheck(False, ["missing participant/ directory"])
    if not admin.is_dir():
        return PackageCheck(False, ["missing admin/ directory"])

    manifest_path = participant / "manifest.json"
    manifest = None
    if not manifest_path.is_file():
        problems.append("missing participant/manifest.json")
    else:
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            problems.append(f"manifest.json unparseable: {exc}")

    key_path = admin / "key.json"
    key = None
    if not key_path.is_file():
        problems.append("answer key must live in the admin-only area (admin/key.json missing)")
    else:
        try:
            key = json.loads(key_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            problems.append(f"key.json unparseable: {exc}")

    clip_names = []
    if manifest is not None:
        refs = manifest.get("references", [])
        queries = manifest.get("queries", [])
        if len(refs) != 3:
            problems.append(f"manifest lists {len(refs)} reference clips, expected 3")
        if len(queries) != QUERY_COUNT:
            problems.append(f"manifest lists {len(queries)} query clips, expected {QUERY_COUNT}")
        clip_names = list(refs) + list(queries)
        lengths = set()
        for name in clip_names + ([manifest["intro"]] if manifest.get("intro") else []):
            clip_path = participant / name
            if not clip_path.is_file():
                problems.append(f"missing clip {name}")
                continue
            try:
                clip = read_clip(clip_path, expected_rate=expected_rate)
                lengths.add(len(clip))
            except Exception as exc:  # noqa: BLE001 - collect every violation
                problems.append(f"{name}: {exc}")
        if len(lengths) > 1:
            problems.append(f"clip lengths are not uniform: {sorted(lengths)}")
        for name in ("index.html", "app.js"):
            if not (participant / name).is_file():
                problems.append(f"missing UI asset {name}")

    if key is not None and manifest is not None:
        if key.get("package_id") != manifest.get("package_id"):
            problems.append("package_id differs between manifest and key")
        answer_key = key.get("answer_key", {})
        if sorted(answer_key.keys()) != [str(q) for q in range(QUERY_COUNT)]:
            problems.append("answer key must cover queries 0..7 exactly")
        if not all(v in CHOICES for v in answer_key.values()):
            problems.append("answer key values must be A, B, or C")
        if key.get("memorability_choice") not in CHOICES:
            problems.append("memorability_choice must be A, B, or C")
        else:
            intro = participant / "intro.wav"
            chosen = participant / f"{key['memorability_choice']}.wav"
            if intro.is_file() and chosen.is_file() and intro.read_bytes() != chosen.read_bytes():
                problems.append("intro.wav does not match the designated memorability clip")

    markers = list(KEY_MARKERS)
    if key is not None and key.get("answer_key"):
        markers.append(json.dumps(key["answer_key"]).encode())
        markers.append(json.dumps(key["answer_key"], indent=2).encode())
    for file in sorted(participant.rglob("*")):
        if not file.is_file():
            continue
        data = file.read_bytes()
        if any(marker in data for marker in markers):
            problems.append(f"blinding violation: key material found in participant/{file.name}")

    return PackageCheck(not problems, problems)


def parse_response(source) -> ResponseRecord:
    """Parse a participant response (dict, JSON text, or path to a JSON file)."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        raw = Path(source).read_text(encoding="utf-8")
        data = json.loads(raw)
    elif isinstance(source, str):
        data = json.loads(source)
    else:
        data = source
    if not isinstance(data, dict):
        raise ParseError("response must be a JSON object")
    for fld in ("package_id", "participant_id"):
        if not isinstance(data.get(fld), str) or not data.get(fld):
            raise ParseError(f"response missing {fld}")
    answers = data.get("answers", {})
    if not isinstance(answers, dict):
        raise ParseError("answers must be an object mapping query ids to choices")
    clean: dict[str, str] = {}
    for q, choice in answers.items():
        if str(q) not in {str(i) for i in range(QUERY_COUNT)}:
            raise ParseError(f"unknown query id {q!r}")
        if choice not in CHOICES:
            raise ParseError(f"invalid choice {choice!r} for query {q}")
        clean[str(q)] = choice
    memorability = data.get("memorability")
    if memorability is not None and memorability not in CHOICES:
        raise ParseError(f"invalid memorability answer {memorability!r}")
    return ResponseRecord(
        package_id=data["package_id"],
        answers=clean,
        memorability=memorability,
        participant_id=data["participant_id"],
        started_at=str(data.get("started_at", "")),
        submitted_at=str(data.get("submitted_at", "")),
    )


def load_key(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "answer_key" not in data or "package_id" not in data:
        raise ParseError(f"{path}: not a package key file")
    return data


def grade_responses(responses, keys) -> GradeReport:
    """Score responses against their package keys.

    HSA is the fraction of the 8 queries answered correctly; HSM is 1 when
    the memorability answer names the designated clip.  Incomplete responses
    are excluded and counted, never graded.  Aggregates are grouped per model
    variant: mean HSA, HSA range (correct counts out of 8), and mean HSM.
    """
    if isinstance(keys, dict) and "answer_key" in keys:
        keys = [keys]
    if not isinstance(keys, dict):
        keys = {k["package_id"]: k for k in keys}

    participants: list[ParticipantScore] = []
    excluded = 0
    for response in responses:
        if isinstance(response, dict):
            response = parse_response(response)
        if not response.is_complete():
            excluded += 1
            continue
        key = keys.get(response.package_id)
        if key is None:
            raise ParseError(f"response references unknown package {response.package_id!r}")
        correct = sum(
            1 for q in range(QUERY_COUNT) if response.answers[str(q)] == key["answer_key"][str(q)]
        )
        participants.append(
            ParticipantScore(
                participant_id=response.participant_id,
                package_id=response.package_id,
                model_id=key.get("model_id", ""),
                correct=correct,
                hsa=correct / QUERY_COUNT,
                hsm=1.0 if response.memorability == key["memorability_choice"] else 0.0,
            )
        )

    per_model: dict[str, ModelScore] = {}
    for model_id in sorted({p.model_id for p in participants}):
        scores = [p for p in participants if p.model_id == model_id]
        per_model[model_id] = ModelScore(
            n=len(scores),
            mean_hsa=sum(p.hsa for p in scores) / len(scores),
            hsa_min=min(p.correct for p in scores),
            hsa_max=max(p.correct for p in scores),
            mean_hsm=sum(p.hsm for p in scores) / len(scores),
        )
    return GradeReport(participants, per_model, excluded)
