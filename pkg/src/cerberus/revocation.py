"""Two-phase, multi-party revocation as a deterministic state machine.

``RevocationState`` combines the rules contract (who may approve, and at most
once per document) with the implementation contract (initiate with
``revoke_document``, finish with ``confirm_revocation``). The ledger drives it
by applying RevocationCall transactions in block order.

Approvals are tracked per public key, not per organisation, so the two keys
held by one organisation count as two approvals.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .credential import AuthPath, sha256, verify_path
from .errors import CerberusError, RevocationError, ValidationError

PROCESS_TAG = b"CERBERUS-REVOKE-V1"
REQUIRED_COUNT = 2
KEYS_PER_ENTRY = 2


class Terminated(CerberusError):
    """The rules check failed; the call has no effect."""


def process_hash(document_hash: bytes, initiator_key: bytes) -> bytes:
    return sha256(document_hash + initiator_key + PROCESS_TAG)


@dataclass(frozen=True)
class AuthorityListEntry:
    org: bytes
    keys: tuple[bytes, ...]

    def __post_init__(self):
        object.__setattr__(self, "keys", tuple(self.keys))
        if len(self.keys) != KEYS_PER_ENTRY:
            raise ValidationError(
                f"a revoking authority holds exactly {KEYS_PER_ENTRY} keys, got {len(self.keys)}")
        if self.keys[0] == self.keys[1]:
            raise ValidationError("the two keys of a revoking authority must differ")


@dataclass
class PendingRevocation:
    document_hash: bytes
    process_hash: bytes
    approvals: list[bytes] = field(default_factory=list)

    @property
    def revoke_count(self) -> int:
        return len(self.approvals)


@dataclass
class RevocationState:
    authority_list: list[AuthorityListEntry] = field(default_factory=list)
    pending: dict[bytes, PendingRevocation] = field(default_factory=dict)
    # dict used as an insertion-ordered set
    revoke_list: dict[bytes, None] = field(default_factory=dict)
    history: set[tuple[bytes, bytes]] = field(default_factory=set)
    issued_roots: set[bytes] = field(default_factory=set)
    required_count: int = REQUIRED_COUNT

    def copy(self) -> "RevocationState":
        return copy.deepcopy(self)

    # -- rules contract ---------------------------------------------------------

    def org_of(self, key: bytes) -> bytes | None:
        for entry in self.authority_list:
            if key in entry.keys:
                return entry.org
        return None

    def is_listed(self, key: bytes) -> bool:
        return self.org_of(key) is not None

    def add_revoking_authority(self, caller_key: bytes, new_entry: AuthorityListEntry) -> bool:
        """Append ``new_entry`` if the caller already belongs to the list.

        Returns False and leaves the state untouched when the caller is not
        listed, when the org is already present, or when one of the new keys
        is already held by another listed org.
        """
        if not self.is_listed(caller_key):
            return False
        if any(e.org == new_entry.org for e in self.authority_list):
            return False
        if any(self.is_listed(k) for k in new_entry.keys):
            return False
        self.authority_list.append(new_entry)
        return True

    def rules_check(self, key: bytes, document_hash: bytes,
                    pending: PendingRevocation | None = None) -> bool:
        if not self.is_listed(key) or (key, document_hash) in self.history:
            return False
        self.history.add((key, document_hash))
        if pending is not None:
            pending.approvals.append(key)
        return True

    # -- implementation contract ------------------------------------------------

    def is_known_document(self, document_hash: bytes,
                          proof: tuple[AuthPath, bytes] | None = None) -> bool:
        if document_hash in self.issued_roots:
            return True
        if proof is None:
            return False
        path, root = proof
        return root in self.issued_roots and verify_path(document_hash, path, root)

    def revoke_document(self, key: bytes, document_hash: bytes,
                        proof: tuple[AuthPath, bytes] | None = None) -> bytes:
        """Open a revocation process and return its process hash.

        ``document_hash`` is either an issued batch root or a student leaf; a
        leaf needs ``proof`` = (auth path, issued root) since leaves are never
        stored on the ledger.
        """
        if not self.is_known_document(document_hash, proof):
            raise RevocationError("document does not match any issued credential")
        if document_hash in self.revoke_list:
            raise Terminated("document already revoked")
        ph = process_hash(document_hash, key)
        pending = PendingRevocation(document_hash, ph)
        if not self.rules_check(key, document_hash, pending):
            raise Terminated("rules check failed")
        self.pending[ph] = pending
        return ph

    def confirm_revocation(self, key: bytes, process_hash: bytes) -> bool:
        """Add an approval; returns True once the document lands on the revoke list."""
        pending = self.pending.get(process_hash)
        if pending is None:
            raise RevocationError("unknown process hash")
        if not self.rules_check(key, pending.document_hash, pending):
            raise Terminated("rules check failed")
        if pending.revoke_count == self.required_count:
            self.revoke_list[pending.document_hash] = None
            del self.pending[process_hash]
            return True
        return False

    # -- queries ----------------------------------------------------------------

    def revocation_source(self, leaf_digest: bytes, batch_root: bytes) -> str | None:
        if leaf_digest in self.revoke_list:
            return "individual"
        if batch_root in self.revoke_list:
            return "batch"
        return None

    def is_revoked(self, leaf_digest: bytes, batch_root: bytes) -> bool:
        return self.revocation_source(leaf_digest, batch_root) is not None

    def digest(self) -> bytes:
        """Order-independent fingerprint of the full contract state."""
        parts = [b"rev", self.required_count.to_bytes(4, "big")]
        for e in self.authority_list:
            parts += [b"A", e.org, *e.keys]
        for ph in sorted(self.pending):
            p = self.pending[ph]
            parts += [b"P", ph, p.document_hash, *p.approvals]
        parts += [b"R", *sorted(self.revoke_list)]
        parts += [b"H", *(k + d for k, d in sorted(self.history))]
        parts += [b"I", *sorted(self.issued_roots)]
        return sha256(b"".join(parts))
