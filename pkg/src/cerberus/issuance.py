"""Glue between a prepared batch tree and the QR payloads handed to students."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .codec import (
    DegreeCodePayload,
    IdTranscriptCodePayload,
    encode_degree_code,
    encode_id_transcript_code,
)
from .credential import (
    BatchTree,
    StudentRecord,
    auth_path,
    build_batch_tree,
    id_transcript_hash,
)


@dataclass(frozen=True)
class StudentCredential:
    record: StudentRecord
    leaf_index: int
    leaf: bytes
    degree_payload: DegreeCodePayload
    transcript_payload: IdTranscriptCodePayload

    @property
    def serial(self) -> str:
        return self.record.serial

    @property
    def degree_code(self) -> bytes:
        return encode_degree_code(self.degree_payload)

    @property
    def transcript_code(self) -> bytes:
        return encode_id_transcript_code(self.transcript_payload)


@dataclass(frozen=True)
class PreparedBatch:
    records: tuple[StudentRecord, ...]
    tree: BatchTree

    @property
    def root(self) -> bytes:
        return self.tree.root

    def index_of(self, serial: str) -> int:
        for i, r in enumerate(self.records):
            if r.serial == serial:
                return i
        raise KeyError(serial)

    def credential(self, index: int, block_number: int, tx_id: bytes) -> StudentCredential:
        rec = self.records[index]
        payload = DegreeCodePayload(rec.degree, id_transcript_hash(rec), block_number, tx_id,
                                    auth_path(self.tree, index))
        return StudentCredential(rec, index, self.tree.leaves[index], payload,
                                 IdTranscriptCodePayload.from_info(rec.id_transcript))

    def credentials(self, block_number: int, tx_id: bytes) -> list[StudentCredential]:
        return [self.credential(i, block_number, tx_id) for i in range(len(self.records))]


def prepare_batch(records: Sequence[StudentRecord]) -> PreparedBatch:
    return PreparedBatch(tuple(records), build_batch_tree(records))
