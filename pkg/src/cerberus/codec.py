"""Byte-exact QR payloads and QR symbol sizing.

degree_code layout (all integers big-endian)::

    u8   format version (1)
    u8   h = number of sibling hashes
    ...  degree_info, canonical 0x1F-separated UTF-8 (length implied)
    32   H(id/transcript_info)
    u64  block number
    32   issuance transaction id
    u32  leaf index (bit k gives the side of sibling k: 1 = left)
    32*h sibling hashes, leaf level first

The fixed overhead is 78 bytes, so a payload is ``78 + len(degree_info) + 32*h``.

id/transcript_code layout::

    u8   format version (1)
    ...  courses, grades, gpa, cgpa in canonical encoding (no id number)
"""
from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass
from decimal import Decimal

from . import qrtables
from .credential import (
    DIGEST_SIZE,
    AuthPath,
    Course,
    DegreeInfo,
    IdTranscriptInfo,
    Side,
    canonical_serialize,
    parse_degree_info,
    parse_transcript_only,
    transcript_bytes,
)
from .errors import EncodingError, ParseError, ValidationError
from .wire import Reader, Writer

FORMAT_VERSION = 1
DEGREE_CODE_OVERHEAD = 1 + 1 + DIGEST_SIZE + 8 + DIGEST_SIZE + 4
MAX_PATH_LEN = 32
DEFAULT_ECC = "Q"
DISTANCE_FACTOR = Decimal(10)


@dataclass(frozen=True)
class DegreeCodePayload:
    degree_info: DegreeInfo
    id_transcript_hash: bytes
    block_number: int
    tx_id: bytes
    auth_path: AuthPath


@dataclass(frozen=True)
class IdTranscriptCodePayload:
    courses: tuple[Course, ...]
    grades: tuple[str, ...]
    gpa: Decimal
    cgpa: Decimal

    @classmethod
    def from_info(cls, info: IdTranscriptInfo) -> "IdTranscriptCodePayload":
        return cls(info.courses, info.grades, info.gpa, info.cgpa)

    def with_id(self, id_document_number: str) -> IdTranscriptInfo:
        return IdTranscriptInfo(id_document_number, self.courses, self.grades,
                                self.gpa, self.cgpa)


def _sides_match_index(path: AuthPath) -> bool:
    for k, (_, side) in enumerate(path.entries):
        left = (path.leaf_index >> k) & 1
        if (side is Side.LEFT) != bool(left):
            return False
    return path.leaf_index < (1 << len(path.entries))


def _check_fits(data: bytes, ecc: str) -> bytes:
    cap = qrtables.byte_capacity(qrtables.MAX_VERSION, ecc)
    if len(data) > cap:
        raise EncodingError(f"payload of {len(data)} bytes exceeds QR version 40 ({cap} bytes)")
    return data


def encode_degree_code(payload: DegreeCodePayload, ecc: str = DEFAULT_ECC) -> bytes:
    path = payload.auth_path
    if not 1 <= len(path) <= MAX_PATH_LEN:
        raise EncodingError(f"authentication path length {len(path)} not in 1..{MAX_PATH_LEN}")
    if not _sides_match_index(path):
        raise EncodingError("authentication path sides disagree with its leaf index")
    w = (Writer()
         .u8(FORMAT_VERSION)
         .u8(len(path))
         .raw(canonical_serialize(payload.degree_info))
         .raw(payload.id_transcript_hash, DIGEST_SIZE)
         .u64(payload.block_number)
         .raw(payload.tx_id, DIGEST_SIZE)
         .u32(path.leaf_index))
    for sibling in path.siblings:
        w.raw(sibling, DIGEST_SIZE)
    return _check_fits(w.getvalue(), ecc)


def decode_degree_code(data: bytes) -> DegreeCodePayload:
    r = Reader(data, "degree_code")
    version = r.u8()
    if version != FORMAT_VERSION:
        raise ParseError(f"degree_code: unsupported format version {version}", 0)
    h = r.u8()
    if not 1 <= h <= MAX_PATH_LEN:
        raise ParseError(f"degree_code: bad path length {h}", 1)
    text_len = len(data) - DEGREE_CODE_OVERHEAD - DIGEST_SIZE * h
    if text_len <= 0:
        raise ParseError("degree_code: too short for its declared path length", len(data))
    try:
        info = parse_degree_info(r.raw(text_len))
    except ParseError as e:
        raise ParseError(str(e), 2) from None
    id_hash = r.raw(DIGEST_SIZE)
    block = r.u64()
    tx_id = r.raw(DIGEST_SIZE)
    index_at = r.pos
    leaf_index = r.u32()
    if leaf_index >= 1 << h:
        raise ParseError(f"degree_code: leaf index {leaf_index} too large for height {h}",
                         index_at)
    entries = tuple(
        (r.raw(DIGEST_SIZE), Side.LEFT if (leaf_index >> k) & 1 else Side.RIGHT)
        for k in range(h))
    r.expect_end()
    return DegreeCodePayload(info, id_hash, block, tx_id, AuthPath(entries, leaf_index))


def encode_id_transcript_code(payload: IdTranscriptCodePayload | IdTranscriptInfo,
                              ecc: str = DEFAULT_ECC) -> bytes:
    if isinstance(payload, IdTranscriptCodePayload):
        if len(payload.courses) != len(payload.grades):
            raise EncodingError(
                f"{len(payload.courses)} courses but {len(payload.grades)} grades")
        # placeholder id only to reuse field validation; it is not encoded
        try:
            info = payload.with_id("-")
        except ValidationError as e:
            raise EncodingError(str(e)) from None
    else:
        info = payload
    return _check_fits(bytes([FORMAT_VERSION]) + transcript_bytes(info), ecc)


def decode_id_transcript_code(data: bytes) -> IdTranscriptCodePayload:
    if not data:
        raise ParseError("id/transcript_code: empty", 0)
    if data[0] != FORMAT_VERSION:
        raise ParseError(f"id/transcript_code: unsupported format version {data[0]}", 0)
    try:
        info = parse_transcript_only(data[1:], "-")
    except ParseError as e:
        raise ParseError(str(e), 1) from None
    return IdTranscriptCodePayload.from_info(info)


def to_text(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def from_text(text: str) -> bytes:
    try:
        return base64.b64decode(text.strip(), validate=True)
    except (binascii.Error, ValueError) as e:
        raise ParseError(f"invalid Base64 text: {e}") from None


# -- sizing --------------------------------------------------------------------

@dataclass(frozen=True)
class QrSpec:
    version: int
    ecc_level: str
    modules_per_side: int
    min_size_inches: Decimal
    payload_len: int
    capacity: int

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "ecc_level": self.ecc_level,
            "modules_per_side": self.modules_per_side,
            "min_size_inches": str(self.min_size_inches),
            "payload_len": self.payload_len,
            "capacity": self.capacity,
        }


def min_size_inches(modules: int, scan_distance_inches) -> Decimal:
    """(scan distance / distance factor) x (module count / 25)."""
    return Decimal(scan_distance_inches) / DISTANCE_FACTOR * Decimal(modules) / 25


def qr_spec(payload_len: int, scan_distance_inches, ecc: str = DEFAULT_ECC) -> QrSpec:
    if payload_len < 0:
        raise ValueError("payload length must be non-negative")
    version = qrtables.smallest_version(payload_len, ecc)
    modules = qrtables.modules_per_side(version)
    return QrSpec(version, ecc, modules, min_size_inches(modules, scan_distance_inches),
                  payload_len, qrtables.byte_capacity(version, ecc))
