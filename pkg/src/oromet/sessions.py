"""Subjects, tasks, functional-rating scoring, and the session manifest.

A session binds one subject to the battery of elicited utterances (held
vowel, six readings of graded-length sentences, one passage reading, one
rapid syllable-repetition task, optionally a picture description).  The
manifest is a JSON file; its schema is documented in the README.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateTask,
    ItemOutOfRange,
    MissingAlsfrs,
    MissingFile,
    ParseError,
    WrongItemCount,
)

BAMBOO_WORDS = 99

# Words per sentence index for the graded reading sentences (5 to 15 words).
# Deployments with different sentence material override this via RunConfig.
DEFAULT_SIT_WORDS = {1: 5, 2: 7, 3: 9, 4: 11, 5: 13, 6: 15}

DDK_SYLLABLES = "pataka"


class Sex(str, enum.Enum):
    FEMALE = "female"
    MALE = "male"


class Cohort(str, enum.Enum):
    CON = "CON"  # healthy control
    BUL = "BUL"  # patient, bulbar subscore below 12
    PRE = "PRE"  # patient, bulbar subscore exactly 12


@dataclass(frozen=True)
class TaskKind:
    """One of: held_vowel, sit (with sentence index 1..6), bamboo, ddk, picture."""

    kind: str
    sit_index: int | None = None

    _KINDS = ("held_vowel", "sit", "bamboo", "ddk", "picture")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ParseError(f"unknown task kind: {self.kind!r}")
        if self.kind == "sit":
            if self.sit_index is None or not 1 <= self.sit_index <= 6:
                raise ParseError(f"sit index must be 1..6, got {self.sit_index}")
        elif self.sit_index is not None:
            raise ParseError(f"sit_index only valid for sit tasks, got kind={self.kind}")

    @classmethod
    def parse(cls, label: str) -> "TaskKind":
        label = label.strip().lower()
        if label.startswith("sit") and len(label) == 4 and label[3].isdigit():
            return cls("sit", int(label[3]))
        if label in ("held_vowel", "bamboo", "ddk", "picture"):
            return cls(label)
        raise ParseError(f"unknown task label: {label!r}")

    @property
    def label(self) -> str:
        if self.kind == "sit":
            return f"sit{self.sit_index}"
        return self.kind

    @property
    def task_type(self) -> str:
        """Task family used when averaging metrics across task type."""
        return self.kind

    def expected_words(self, sit_words: dict[int, int] | None = None) -> int | None:
        """Expected word count, defined for reading tasks only."""
        if self.kind == "bamboo":
            return BAMBOO_WORDS
        if self.kind == "sit":
            table = sit_words or DEFAULT_SIT_WORDS
            return table[self.sit_index]
        return None

    @property
    def expected_syllables(self) -> str | None:
        return DDK_SYLLABLES if self.kind == "ddk" else None


@dataclass(frozen=True)
class AlsfrsR:
    """12-item functional rating, each item 0..4, total 0..48.

    Items 1-3 form the bulbar subscore (0..12).
    """

    items: tuple[int, ...]
    total: int
    bulbar_subscore: int


def score_alsfrs(items) -> AlsfrsR:
    """Validate and score a 12-item questionnaire response."""
    items = tuple(int(v) for v in items)
    if len(items) != 12:
        raise WrongItemCount(f"expected 12 items, got {len(items)}")
    for i, v in enumerate(items, start=1):
        if not 0 <= v <= 4:
            raise ItemOutOfRange(f"item {i} out of range 0..4: {v}")
    return AlsfrsR(items=items, total=sum(items), bulbar_subscore=sum(items[:3]))


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    sex: Sex
    age: float
    is_control: bool
    alsfrs: AlsfrsR | None = None

    @property
    def cohort(self) -> Cohort:
        return stratify(self)


def stratify(profile: SubjectProfile) -> Cohort:
    """Cohort label from the control flag and the bulbar subscore.

    Controls are CON regardless of scores; patients split on whether the
    bulbar subscore is below 12 (BUL) or exactly 12 (PRE).
    """
    if profile.is_control:
        return Cohort.CON
    if profile.alsfrs is None:
        raise MissingAlsfrs(f"patient {profile.subject_id} has no ALSFRS-R scores")
    if profile.alsfrs.bulbar_subscore < 12:
        return Cohort.BUL
    return Cohort.PRE


@dataclass(frozen=True)
class Utterance:
    task: TaskKind
    audio_path: str
    utterance_id: str
    landmark_path: str | None = None


@dataclass(frozen=True)
class SessionManifest:
    subject: SubjectProfile
    utterances: tuple[Utterance, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        subj = {
            "subject_id": self.subject.subject_id,
            "sex": self.subject.sex.value,
            "age": self.subject.age,
            "is_control": self.subject.is_control,
            "alsfrs_items": list(self.subject.alsfrs.items) if self.subject.alsfrs else None,
        }
        utts = [
            {
                "utterance_id": u.utterance_id,
                "task": u.task.label,
                "audio": u.audio_path,
                "landmarks": u.landmark_path,
            }
            for u in self.utterances
        ]
        return {"subject": subj, "utterances": utts}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse_manifest(data: dict, base_dir: str | os.PathLike | None = None,
                   check_files: bool = True) -> SessionManifest:
    """Build a validated manifest from parsed JSON.

    Relative paths resolve against base_dir.  Per-session invariants: at most
    one held vowel, one passage, one syllable-repetition task, and one
    reading sentence per index; all referenced files must exist.
    """
    try:
        subj = data["subject"]
        alsfrs_items = subj.get("alsfrs_items")
        profile = SubjectProfile(
            subject_id=str(subj["subject_id"]),
            sex=Sex(subj["sex"]),
            age=float(subj["age"]),
            is_control=bool(subj["is_control"]),
            alsfrs=score_alsfrs(alsfrs_items) if alsfrs_items is not None else None,
        )
        raw_utts = data["utterances"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed manifest: {exc}") from exc

    if not profile.is_control and profile.alsfrs is None:
        raise MissingAlsfrs(f"patient {profile.subject_id} requires alsfrs_items")

    base = Path(base_dir) if base_dir is not None else None

    def resolve(p: str) -> str:
        path = Path(p)
        if base is not None and not path.is_absolute():
            path = base / path
        return str(path)

    utterances = []
    seen_tasks: set[str] = set()
    seen_ids: set[str] = set()
    for raw in raw_utts:
        try:
            task = TaskKind.parse(raw["task"])
            utt = Utterance(
                task=task,
                audio_path=resolve(raw["audio"]),
                utterance_id=str(raw["utterance_id"]),
                landmark_path=resolve(raw["landmarks"]) if raw.get("landmarks") else None,
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed utterance entry: {exc}") from exc
        if task.label in seen_tasks:
            raise DuplicateTask(f"duplicate task {task.label} in session")
        seen_tasks.add(task.label)
        if utt.utterance_id in seen_ids:
            raise ParseError(f"duplicate utterance id {utt.utterance_id}")
        seen_ids.add(utt.utterance_id)
        if check_files:
            if not os.path.isfile(utt.audio_path):
                raise MissingFile(f"audio file missing: {utt.audio_path}")
            if utt.landmark_path and not os.path.isfile(utt.landmark_path):
                raise MissingFile(f"landmark file missing: {utt.landmark_path}")
        utterances.append(utt)

    return SessionManifest(subject=profile, utterances=tuple(utterances))


def load_manifest(path: str | os.PathLike) -> SessionManifest:
    """Load and validate a session manifest JSON file."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest {path} is not valid JSON: {exc}") from exc
    return parse_manifest(data, base_dir=path.parent)


def save_manifest(path: str | os.PathLike, manifest: SessionManifest) -> None:
    Path(path).write_text(manifest.to_json())
