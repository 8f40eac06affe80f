"""Record schema, JSONL ingestion/validation, corpus statistics, split checks.

Canonical serialization is one UTF-8 JSON object per line with alphabetized
keys, so corpora are diff-able and streamable. Validation never drops a
record silently: every rejected line lands in the error list with its line
number, and derived-field mismatches (see ``multiplicity``) are warnings.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .categories import CATEGORY_SET
from .errors import EmptyMask, EmptyInstruction, RleError
from .masks import BBox, RleMask, mask_to_bbox, rle_decode

__all__ = [
    "GRANULARITY_LABELS",
    "MULTIPLICITY_LABELS",
    "REASONING_LABELS",
    "LINGUISTIC_LABELS",
    "SPLIT_LABELS",
    "DEFAULT_LINGUISTIC_THRESHOLD",
    "DatasetRecord",
    "ValidationIssue",
    "ValidationResult",
    "DatasetStats",
    "validate",
    "stats",
    "classify_linguistic",
    "split_check",
]

GRANULARITY_LABELS = ("semantic", "instance", "part")
MULTIPLICITY_LABELS = ("single", "multiple")
REASONING_LABELS = ("explicit", "implicit")
LINGUISTIC_LABELS = ("short", "long")
SPLIT_LABELS = ("train", "test")

DEFAULT_LINGUISTIC_THRESHOLD = 20  # words; stored in stats so reports self-describe

_REQUIRED_FIELDS = (
    "id", "image_path", "instruction", "answer", "masks", "bboxes",
    "category", "granularity", "multiplicity", "reasoning", "linguistic", "split",
)


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    image_path: str
    instruction: str
    answer: str
    masks: tuple[RleMask, ...]
    bboxes: tuple[BBox, ...]
    category: str
    granularity: str
    multiplicity: str
    reasoning: str
    linguistic: str
    split: str

    def to_json(self) -> dict:
        return {
            "answer": self.answer,
            "bboxes": [b.to_json() for b in self.bboxes],
            "category": self.category,
            "granularity": self.granularity,
            "id": self.id,
            "image_path": self.image_path,
            "instruction": self.instruction,
            "linguistic": self.linguistic,
            "masks": [m.to_json() for m in self.masks],
            "multiplicity": self.multiplicity,
            "reasoning": self.reasoning,
            "split": self.split,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False,
                          separators=(",", ":"))


@dataclass(frozen=True)
class ValidationIssue:
    line: int
    record_id: str | None
    code: str
    message: str

    def to_json(self) -> dict:
        return {"line": self.line, "id": self.record_id, "code": self.code,
                "message": self.message}


@dataclass
class ValidationResult:
    records: list[DatasetRecord] = field(default_factory=list)
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _check_labels(obj: dict) -> str | None:
    for name, vocab in (
        ("granularity", GRANULARITY_LABELS),
        ("multiplicity", MULTIPLICITY_LABELS),
        ("reasoning", REASONING_LABELS),
        ("linguistic", LINGUISTIC_LABELS),
        ("split", SPLIT_LABELS),
    ):
        if obj[name] not in vocab:
            return f"{name}={obj[name]!r} not in {vocab}"
    return None


def _parse_record(obj: dict, line: int, result: ValidationResult) -> DatasetRecord | None:
    rid = obj.get("id") if isinstance(obj.get("id"), str) else None

    def err(code: str, message: str) -> None:
        result.errors.append(ValidationIssue(line, rid, code, message))

    missing = [f for f in _REQUIRED_FIELDS if f not in obj]
    if missing:
        err("MissingField", f"missing fields: {missing}")
        return None
    if rid is None:
        err("MissingField", "id must be a string")
        return None

    label_problem = _check_labels(obj)
    if label_problem:
        err("UnknownLabel", label_problem)
        return None
    if obj["category"] not in CATEGORY_SET:
        err("UnknownCategory", f"category {obj['category']!r} not in the vocabulary")
        return None

    try:
        masks = tuple(RleMask.from_json(m) for m in obj["masks"])
        decoded = [rle_decode(m) for m in masks]
    except RleError as exc:
        err("BadRle", str(exc))
        return None
    if not masks:
        err("BadRle", "record must carry at least one mask")
        return None

    if len(obj["bboxes"]) != len(masks):
        err("BboxMismatch", f"{len(obj['bboxes'])} bboxes for {len(masks)} masks")
        return None
    try:
        bboxes = tuple(BBox.from_json(b) for b in obj["bboxes"])
    except (TypeError, ValueError) as exc:
        err("BboxMismatch", f"malformed bbox: {exc}")
        return None
    for i, (mask, box) in enumerate(zip(decoded, bboxes)):
        try:
            derived = mask_to_bbox(mask)
        except EmptyMask:
            err("BboxMismatch", f"mask {i} is empty, no bbox derivable")
            return None
        if derived != box:
            err("BboxMismatch", f"bbox {i} is {box.to_json()}, expected {derived.to_json()}")
            return None

    # multiplicity is derived from the mask count, never trusted
    derived_multiplicity = "multiple" if len(masks) >= 2 else "single"
    if obj["multiplicity"] != derived_multiplicity:
        result.warnings.append(ValidationIssue(
            line, rid, "MultiplicityMismatch",
            f"declared {obj['multiplicity']!r}, derived {derived_multiplicity!r} "
            f"from {len(masks)} masks (corrected)",
        ))

    return DatasetRecord(
        id=rid,
        image_path=str(obj["image_path"]),
        instruction=str(obj["instruction"]),
        answer=str(obj["answer"]),
        masks=masks,
        bboxes=bboxes,
        category=obj["category"],
        granularity=obj["granularity"],
        multiplicity=derived_multiplicity,
        reasoning=obj["reasoning"],
        linguistic=obj["linguistic"],
        split=obj["split"],
    )


def validate(lines) -> ValidationResult:
    """Validate a JSONL record stream (any iterable of strings)."""
    result = ValidationResult()
    seen_ids: set[str] = set()
    for line_no, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            result.errors.append(ValidationIssue(line_no, None, "BadJson", str(exc)))
            continue
        record = _parse_record(obj, line_no, result)
        if record is None:
            continue
        if record.id in seen_ids:
            result.errors.append(ValidationIssue(
                line_no, record.id, "DuplicateId", f"id {record.id!r} already seen"))
            continue
        seen_ids.add(record.id)
        result.records.append(record)
    return result


@dataclass(frozen=True)
class DatasetStats:
    mask_count: int
    qa_count: int
    class_count: int
    test_mask_count: int
    category_histogram: dict[str, int]
    instruction_length_histogram: dict[int, int]  # word count -> records
    mask_area_ratio_histogram: dict[str, int]  # "0-5%" style 5% bins -> masks
    linguistic_threshold: int = DEFAULT_LINGUISTIC_THRESHOLD

    def to_json(self) -> dict:
        return {
            "mask_count": self.mask_count,
            "qa_count": self.qa_count,
            "class_count": self.class_count,
            "test_mask_count": self.test_mask_count,
            "category_histogram": dict(sorted(self.category_histogram.items())),
            "instruction_length_histogram": {
                str(k): v for k, v in sorted(self.instruction_length_histogram.items())
            },
            "mask_area_ratio_histogram": dict(sorted(
                self.mask_area_ratio_histogram.items(),
                key=lambda kv: int(kv[0].split("-")[0]),
            )),
            "linguistic_threshold": self.linguistic_threshold,
        }


def _area_bin(ratio: float) -> str:
    lo = min(int(ratio * 20), 19) * 5  # 5% bins, 100% folds into the last bin
    return f"{lo}-{lo + 5}%"


def stats(records: list[DatasetRecord]) -> DatasetStats:
    categories: Counter = Counter()
    lengths: Counter = Counter()
    area_bins: Counter = Counter()
    mask_count = 0
    test_mask_count = 0
    for rec in records:
        categories[rec.category] += 1
        lengths[len(rec.instruction.split())] += 1
        mask_count += len(rec.masks)
        if rec.split == "test":
            test_mask_count += len(rec.masks)
        for rle in rec.masks:
            area = sum(rle.runs[1::2])
            area_bins[_area_bin(area / (rle.height * rle.width))] += 1
    return DatasetStats(
        mask_count=mask_count,
        qa_count=len(records),
        class_count=len(categories),
        test_mask_count=test_mask_count,
        category_histogram=dict(categories),
        instruction_length_histogram=dict(lengths),
        mask_area_ratio_histogram=dict(area_bins),
    )


def classify_linguistic(instruction: str, threshold: int = DEFAULT_LINGUISTIC_THRESHOLD) -> str:
    """short iff the whitespace-token count is below the threshold."""
    words = instruction.split()
    if not words:
        raise EmptyInstruction("instruction has no words")
    return "short" if len(words) < threshold else "long"


def split_check(records: list[DatasetRecord]) -> dict:
    """Train/test leakage report: shared ids or image paths across splits."""
    ids: dict[str, set[str]] = {"train": set(), "test": set()}
    paths: dict[str, set[str]] = {"train": set(), "test": set()}
    for rec in records:
        ids[rec.split].add(rec.id)
        paths[rec.split].add(rec.image_path)
    leaked_ids = sorted(ids["train"] & ids["test"])
    leaked_paths = sorted(paths["train"] & paths["test"])
    return {
        "train_records": sum(1 for r in records if r.split == "train"),
        "test_records": sum(1 for r in records if r.split == "test"),
        "leaked_ids": leaked_ids,
        "leaked_image_paths": leaked_paths,
        "clean": not leaked_ids and not leaked_paths,
    }
