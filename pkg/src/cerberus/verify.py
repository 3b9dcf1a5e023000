"""Third-party verification of degree and transcript codes against the ledger.

Verifiers hold no keys: everything needed comes from the QR payloads and
read access to a chain replica.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .codec import IdTranscriptCodePayload, decode_degree_code, from_text
from .credential import canonical_serialize, degree_hash, fold_path, make_leaf, sha256
from .errors import NotFoundError, ParseError, ValidationError
from .ledger import Chain, TxKind
from .ledger.records import IssueBatch
from .revocation import RevocationState


class Verdict(str, enum.Enum):
    VERIFIED = "Verified"
    CONTENT_MISMATCH = "ContentMismatch"
    NOT_FOUND = "NotFound"
    REVOKED = "Revoked"
    UNIVERSITY_BLACKLISTED = "UniversityBlacklisted"


@dataclass
class VerificationResult:
    verdict: Verdict
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.VERIFIED

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "details": dict(sorted(self.details.items()))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def verify_degree(payload, chain: Chain,
                  revocation_state: RevocationState | None = None) -> VerificationResult:
    rev = revocation_state if revocation_state is not None else chain.revocation
    leaf = make_leaf(degree_hash(payload.degree_info), payload.id_transcript_hash)
    recomputed = fold_path(leaf, payload.auth_path)
    details = {
        "student_name": payload.degree_info.student_name,
        "degree_serial": payload.degree_info.degree_serial,
        "block_number": payload.block_number,
        "tx_id": payload.tx_id.hex(),
        "leaf": leaf.hex(),
        "id_transcript_hash": payload.id_transcript_hash.hex(),
        "recomputed_root": recomputed.hex(),
    }
    try:
        tx = chain.query_tx(payload.block_number, payload.tx_id)
    except NotFoundError as e:
        details["reason"] = str(e)
        return VerificationResult(Verdict.NOT_FOUND, details)
    if tx.kind is not TxKind.ISSUE_BATCH:
        details["reason"] = "transaction is not a batch issuance"
        return VerificationResult(Verdict.NOT_FOUND, details)
    issue: IssueBatch = tx.decoded()
    details["onchain_root"] = issue.root.hex()
    details["issuer"] = tx.sender.hex()
    if issue.root != recomputed:
        return VerificationResult(Verdict.CONTENT_MISMATCH, details)

    source = rev.revocation_source(leaf, issue.root)
    if source is not None:
        details["revocation_source"] = source
        return VerificationResult(Verdict.REVOKED, details)

    if not tx.signatures_valid(chain.state.public_key_of):
        details["reason"] = "issuer signature does not verify"
        return VerificationResult(Verdict.NOT_FOUND, details)
    blacklisted_at = chain.state.blacklist.get(tx.sender)
    if blacklisted_at is not None and blacklisted_at <= payload.block_number:
        details["blacklisted_at"] = blacklisted_at
        return VerificationResult(Verdict.UNIVERSITY_BLACKLISTED, details)
    return VerificationResult(Verdict.VERIFIED, details)


def verify_transcript(payload: IdTranscriptCodePayload, id_number_entered: str,
                      expected_hash: bytes) -> bool:
    """True iff id number + transcript hash to the value committed in the degree code."""
    try:
        info = payload.with_id(id_number_entered)
    except ValidationError:
        return False
    return sha256(canonical_serialize(info)) == expected_hash


def verify_resume_code(payload_text: str, chain: Chain,
                       revocation_state: RevocationState | None = None) -> VerificationResult:
    try:
        payload = decode_degree_code(from_text(payload_text))
    except ParseError as e:
        return VerificationResult(Verdict.NOT_FOUND, {"parse_error": str(e)})
    return verify_degree(payload, chain, revocation_state)
