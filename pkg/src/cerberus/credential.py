"""Student records, their canonical byte encoding, and batch Merkle trees.

A student's data is split into two disclosure tiers. Each tier is hashed on
its own and the leaf of the batch tree is ``H(H(degree) || H(id/transcript))``,
so a degree can be checked against the batch root with only the hash of the
other tier.

Canonical encoding: fields in declaration order, UTF-8, separated by 0x1F;
list items separated by 0x1E; decimals with exactly two fractional digits.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EncodingError, ParseError, ValidationError

FIELD_SEP = b"\x1f"
ITEM_SEP = b"\x1e"
DIGEST_SIZE = 32
MAX_GRADE_SCALE = Decimal("4.00")
_CENTS = Decimal("0.01")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


hash_part = sha256


def _check_text(name: str, value: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{name} must be a non-empty string")
    if "\x1f" in value or "\x1e" in value:
        raise EncodingError(f"{name} contains a reserved separator byte")
    return value


def to_decimal(value, name: str = "value") -> Decimal:
    """Coerce to a two-place Decimal, rejecting anything that would round."""
    if isinstance(value, float):
        value = repr(value)
    try:
        d = Decimal(value)
    except (InvalidOperation, TypeError, ValueError):
        raise ValidationError(f"{name} is not a decimal: {value!r}") from None
    if not d.is_finite():
        raise ValidationError(f"{name} is not finite")
    q = d.quantize(_CENTS)
    if q != d:
        raise EncodingError(f"{name} has more than two fractional digits: {value!r}")
    return q


def _fmt(d: Decimal) -> str:
    return f"{d:.2f}"


@dataclass(frozen=True)
class DegreeInfo:
    student_name: str
    degree_serial: str
    degree_title: str
    award_year: int
    university_name: str

    def __post_init__(self):
        _check_text("student_name", self.student_name)
        _check_text("degree_serial", self.degree_serial)
        _check_text("degree_title", self.degree_title)
        _check_text("university_name", self.university_name)
        if isinstance(self.award_year, bool) or not isinstance(self.award_year, int):
            raise ValidationError("award_year must be an integer")
        if not 1900 <= self.award_year <= 2200:
            raise ValidationError(f"award_year out of range: {self.award_year}")


@dataclass(frozen=True)
class Course:
    code: str
    title: str
    credit_hours: Decimal

    def __post_init__(self):
        _check_text("course_code", self.code)
        _check_text("course_title", self.title)
        credits = to_decimal(self.credit_hours, "credit_hours")
        if credits <= 0:
            raise ValidationError("credit_hours must be positive")
        object.__setattr__(self, "credit_hours", credits)


@dataclass(frozen=True)
class IdTranscriptInfo:
    id_document_number: str
    courses: tuple[Course, ...]
    grades: tuple[str, ...]
    gpa: Decimal
    cgpa: Decimal

    def __post_init__(self):
        _check_text("id_document_number", self.id_document_number)
        object.__setattr__(self, "courses", tuple(self.courses))
        object.__setattr__(self, "grades", tuple(self.grades))
        if len(self.courses) != len(self.grades):
            raise ValidationError(
                f"{len(self.courses)} courses but {len(self.grades)} grades")
        for g in self.grades:
            _check_text("grade", g)
        for name in ("gpa", "cgpa"):
            d = to_decimal(getattr(self, name), name)
            if not Decimal(0) <= d <= MAX_GRADE_SCALE:
                raise ValidationError(f"{name} outside [0, {MAX_GRADE_SCALE}]")
            object.__setattr__(self, name, d)


@dataclass(frozen=True)
class StudentRecord:
    degree: DegreeInfo
    id_transcript: IdTranscriptInfo

    @property
    def serial(self) -> str:
        return self.degree.degree_serial


# -- canonical encoding -------------------------------------------------------

def _join_fields(fields: Iterable[bytes]) -> bytes:
    return FIELD_SEP.join(fields)


def _join_items(items: Iterable[str]) -> bytes:
    return ITEM_SEP.join(s.encode("utf-8") for s in items)


def _transcript_fields(info: IdTranscriptInfo) -> list[bytes]:
    flat = []
    for c in info.courses:
        flat += [c.code, c.title, _fmt(c.credit_hours)]
    return [_join_items(flat), _join_items(info.grades), _fmt(info.gpa).encode(),
            _fmt(info.cgpa).encode()]


def canonical_serialize(part: DegreeInfo | IdTranscriptInfo) -> bytes:
    if isinstance(part, DegreeInfo):
        return _join_fields([
            part.student_name.encode("utf-8"),
            part.degree_serial.encode("utf-8"),
            part.degree_title.encode("utf-8"),
            str(part.award_year).encode("ascii"),
            part.university_name.encode("utf-8"),
        ])
    if isinstance(part, IdTranscriptInfo):
        return _join_fields([part.id_document_number.encode("utf-8"),
                             *_transcript_fields(part)])
    raise TypeError(f"cannot serialize {type(part).__name__}")


def transcript_bytes(info: IdTranscriptInfo) -> bytes:
    """Canonical encoding of the transcript tier without the id document number."""
    return _join_fields(_transcript_fields(info))


def _split_fields(data: bytes, n: int, what: str) -> list[str]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"{what}: invalid UTF-8", e.start) from None
    parts = text.split("\x1f")
    if len(parts) != n:
        raise ParseError(f"{what}: expected {n} fields, found {len(parts)}")
    return parts


def _split_items(text: str) -> list[str]:
    return text.split("\x1e") if text else []


def parse_degree_info(data: bytes) -> DegreeInfo:
    name, serial, title, year, uni = _split_fields(data, 5, "degree_info")
    if not (year.isascii() and year.isdigit()) or str(int(year)) != year:
        raise ParseError(f"degree_info: bad award year {year!r}")
    try:
        return DegreeInfo(name, serial, title, int(year), uni)
    except ValidationError as e:
        raise ParseError(f"degree_info: {e}") from None


def _parse_dec(text: str) -> Decimal:
    try:
        d = Decimal(text)
    except InvalidOperation:
        raise ParseError(f"bad decimal {text!r}") from None
    if _fmt(d) != text:
        raise ParseError(f"non-canonical decimal {text!r}")
    return d


def _transcript_from_fields(id_number: str, courses_t: str, grades_t: str,
                            gpa: str, cgpa: str) -> IdTranscriptInfo:
    flat = _split_items(courses_t)
    if len(flat) % 3:
        raise ParseError("course list is not a sequence of (code, title, credits)")
    try:
        courses = tuple(Course(flat[i], flat[i + 1], _parse_dec(flat[i + 2]))
                        for i in range(0, len(flat), 3))
        return IdTranscriptInfo(id_number, courses, tuple(_split_items(grades_t)),
                                _parse_dec(gpa), _parse_dec(cgpa))
    except ValidationError as e:
        raise ParseError(f"id/transcript: {e}") from None


def parse_id_transcript(data: bytes) -> IdTranscriptInfo:
    return _transcript_from_fields(*_split_fields(data, 5, "id/transcript"))


def parse_transcript_only(data: bytes, id_document_number: str) -> IdTranscriptInfo:
    return _transcript_from_fields(id_document_number,
                                   *_split_fields(data, 4, "transcript"))


# -- hashing and the batch tree ----------------------------------------------

def make_leaf(degree_hash: bytes, id_transcript_hash: bytes) -> bytes:
    if len(degree_hash) != DIGEST_SIZE or len(id_transcript_hash) != DIGEST_SIZE:
        raise ValidationError("leaf inputs must be 32-byte digests")
    return sha256(degree_hash + id_transcript_hash)


def degree_hash(record: StudentRecord | DegreeInfo) -> bytes:
    info = record.degree if isinstance(record, StudentRecord) else record
    return sha256(canonical_serialize(info))


def id_transcript_hash(record: StudentRecord | IdTranscriptInfo) -> bytes:
    info = record.id_transcript if isinstance(record, StudentRecord) else record
    return sha256(canonical_serialize(info))


def student_leaf(record: StudentRecord) -> bytes:
    return make_leaf(degree_hash(record), id_transcript_hash(record))


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class AuthPath:
    entries: tuple[tuple[bytes, Side], ...]
    leaf_index: int

    def __len__(self):
        return len(self.entries)

    @property
    def siblings(self) -> list[bytes]:
        return [s for s, _ in self.entries]

    @property
    def nbytes(self) -> int:
        """Size of the sibling hashes alone."""
        return DIGEST_SIZE * len(self.entries)


@dataclass(frozen=True)
class BatchTree:
    levels: tuple[tuple[bytes, ...], ...]

    @property
    def leaves(self) -> tuple[bytes, ...]:
        return self.levels[0]

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def __len__(self):
        return len(self.leaves)


def tree_from_leaves(leaves: Sequence[bytes]) -> BatchTree:
    if not leaves:
        raise ValidationError("cannot build a tree over an empty batch")
    level = tuple(leaves)
    levels = [level]
    # Always hash at least once so a lone leaf gets a root distinct from itself.
    while len(level) > 1 or len(levels) == 1:
        if len(level) % 2:
            level = level + (level[-1],)
        level = tuple(sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2))
        levels.append(level)
    return BatchTree(tuple(levels))


def build_batch_tree(records: Sequence[StudentRecord]) -> BatchTree:
    if not records:
        raise ValidationError("cannot build a tree over an empty batch")
    seen = set()
    for r in records:
        if r.serial in seen:
            raise ValidationError(f"duplicate degree serial {r.serial!r}")
        seen.add(r.serial)
    return tree_from_leaves([student_leaf(r) for r in records])


def auth_path(tree: BatchTree, leaf_index: int) -> AuthPath:
    if not 0 <= leaf_index < len(tree):
        raise IndexError(f"leaf index {leaf_index} out of range for {len(tree)} leaves")
    entries = []
    i = leaf_index
    for level in tree.levels[:-1]:
        if i % 2:
            entries.append((level[i - 1], Side.LEFT))
        else:
            sib = level[i + 1] if i + 1 < len(level) else level[i]
            entries.append((sib, Side.RIGHT))
        i //= 2
    return AuthPath(tuple(entries), leaf_index)


def fold_path(leaf: bytes, path: AuthPath) -> bytes:
    node = leaf
    for sibling, side in path.entries:
        node = sha256(sibling + node) if side is Side.LEFT else sha256(node + sibling)
    return node


def verify_path(leaf: bytes, path: AuthPath, root: bytes) -> bool:
    return fold_path(leaf, path) == root


# -- JSON batch input ---------------------------------------------------------

def record_from_json(obj: dict) -> StudentRecord:
    try:
        degree = DegreeInfo(obj["name"], obj["serial"], obj["title"], obj["year"],
                            obj["university"])
        courses = tuple(Course(c["code"], c["title"], c["credits"]) for c in obj["courses"])
        transcript = IdTranscriptInfo(obj["id_number"], courses, tuple(obj["grades"]),
                                      obj["gpa"], obj["cgpa"])
    except KeyError as e:
        raise ValidationError(f"student entry missing key {e.args[0]!r}") from None
    return StudentRecord(degree, transcript)


def record_to_json(record: StudentRecord) -> dict:
    d, t = record.degree, record.id_transcript
    return {
        "name": d.student_name,
        "serial": d.degree_serial,
        "title": d.degree_title,
        "year": d.award_year,
        "university": d.university_name,
        "id_number": t.id_document_number,
        "courses": [{"code": c.code, "title": c.title, "credits": _fmt(c.credit_hours)}
                    for c in t.courses],
        "grades": list(t.grades),
        "gpa": _fmt(t.gpa),
        "cgpa": _fmt(t.cgpa),
    }


def load_batch(path: str | Path) -> list[StudentRecord]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f, parse_float=Decimal)
    if not isinstance(data, list):
        raise ValidationError("batch file must hold a JSON array of students")
    return [record_from_json(o) for o in data]


def dump_batch(records: Sequence[StudentRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump([record_to_json(r) for r in records], f, indent=2, ensure_ascii=False)
        f.write("\n")
