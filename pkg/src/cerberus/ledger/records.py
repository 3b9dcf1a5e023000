"""Transactions, their payloads, and blocks, with canonical byte encodings."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

from ..credential import DIGEST_SIZE, AuthPath, Side, sha256
from ..errors import ParseError
from ..keys import (
    ADDRESS_SIZE,
    PUBKEY_SIZE,
    SIGNATURE_SIZE,
    KeyPair,
    address_of,
    verify_signature,
)
from ..wire import Reader, Writer

ZERO_ADDRESS = bytes(ADDRESS_SIZE)
ZERO_HASH = bytes(DIGEST_SIZE)
ZERO_SIGNATURE = bytes(SIGNATURE_SIZE)

RULES_ENGINE_ID = sha256(b"cerberus/contract/rules-engine/v1")[:ADDRESS_SIZE]
IMPLEMENTATION_ENGINE_ID = sha256(b"cerberus/contract/implementation-engine/v1")[:ADDRESS_SIZE]


@lru_cache(maxsize=65536)
def _verify_cached(public_key: bytes, message: bytes, signature: bytes) -> bool:
    return verify_signature(public_key, message, signature)


class TxKind(enum.IntEnum):
    ISSUE_BATCH = 1
    REVOCATION_CALL = 2
    ADMIN_OP = 3


class Role(str, enum.Enum):
    AUTHORITY = "authority"
    UNIVERSITY = "university"
    OBSERVER = "observer"


# -- payloads ------------------------------------------------------------------

@dataclass(frozen=True)
class IssueBatch:
    root: bytes
    rules_engine: bytes = RULES_ENGINE_ID
    implementation_engine: bytes = IMPLEMENTATION_ENGINE_ID

    def to_bytes(self) -> bytes:
        return (Writer().raw(self.root, DIGEST_SIZE).raw(self.rules_engine, ADDRESS_SIZE)
                .raw(self.implementation_engine, ADDRESS_SIZE).getvalue())

    @classmethod
    def read(cls, r: Reader) -> "IssueBatch":
        return cls(r.raw(DIGEST_SIZE), r.raw(ADDRESS_SIZE), r.raw(ADDRESS_SIZE))


@dataclass(frozen=True)
class RegisterUniversity:
    TAG = 1
    org_key: bytes
    threshold: int
    signer_keys: tuple[bytes, ...]

    @property
    def address(self) -> bytes:
        return address_of(self.org_key)

    def to_bytes(self) -> bytes:
        w = Writer().u8(self.TAG).raw(self.org_key, PUBKEY_SIZE).u8(self.threshold)
        w.u8(len(self.signer_keys))
        for k in self.signer_keys:
            w.raw(k, PUBKEY_SIZE)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "RegisterUniversity":
        org, m, n = r.raw(PUBKEY_SIZE), r.u8(), r.u8()
        return cls(org, m, tuple(r.raw(PUBKEY_SIZE) for _ in range(n)))


@dataclass(frozen=True)
class Blacklist:
    TAG = 2
    target: bytes

    def to_bytes(self) -> bytes:
        return Writer().u8(self.TAG).raw(self.target, ADDRESS_SIZE).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "Blacklist":
        return cls(r.raw(ADDRESS_SIZE))


@dataclass(frozen=True)
class AddAuthority:
    TAG = 1
    org: bytes
    keys: tuple[bytes, bytes]

    def to_bytes(self) -> bytes:
        w = Writer().u8(self.TAG).raw(self.org, ADDRESS_SIZE).u8(len(self.keys))
        for k in self.keys:
            w.raw(k, PUBKEY_SIZE)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "AddAuthority":
        org, n = r.raw(ADDRESS_SIZE), r.u8()
        return cls(org, tuple(r.raw(PUBKEY_SIZE) for _ in range(n)))


def _write_path(w: Writer, path: AuthPath) -> None:
    w.u32(path.leaf_index).u8(len(path))
    for s in path.siblings:
        w.raw(s, DIGEST_SIZE)


def _read_path(r: Reader) -> AuthPath:
    index, h = r.u32(), r.u8()
    entries = tuple((r.raw(DIGEST_SIZE), Side.LEFT if (index >> k) & 1 else Side.RIGHT)
                    for k in range(h))
    return AuthPath(entries, index)


@dataclass(frozen=True)
class RevokeDocument:
    TAG = 2
    document_hash: bytes
    proof: tuple[AuthPath, bytes] | None = None

    def to_bytes(self) -> bytes:
        w = Writer().u8(self.TAG).raw(self.document_hash, DIGEST_SIZE)
        if self.proof is None:
            w.u8(0)
        else:
            path, root = self.proof
            w.u8(1).raw(root, DIGEST_SIZE)
            _write_path(w, path)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "RevokeDocument":
        doc, flag = r.raw(DIGEST_SIZE), r.u8()
        if flag == 0:
            return cls(doc)
        if flag != 1:
            raise ParseError("revoke call: bad proof flag", r.pos - 1)
        root = r.raw(DIGEST_SIZE)
        return cls(doc, (_read_path(r), root))


@dataclass(frozen=True)
class ConfirmRevocation:
    TAG = 3
    process_hash: bytes

    def to_bytes(self) -> bytes:
        return Writer().u8(self.TAG).raw(self.process_hash, DIGEST_SIZE).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "ConfirmRevocation":
        return cls(r.raw(DIGEST_SIZE))


AdminOp = Union[RegisterUniversity, Blacklist]
RevocationCall = Union[AddAuthority, RevokeDocument, ConfirmRevocation]
Payload = Union[IssueBatch, AdminOp, RevocationCall]

_ADMIN_OPS = {c.TAG: c for c in (RegisterUniversity, Blacklist)}
_REVOCATION_CALLS = {c.TAG: c for c in (AddAuthority, RevokeDocument, ConfirmRevocation)}


def kind_of(payload: Payload) -> TxKind:
    if isinstance(payload, IssueBatch):
        return TxKind.ISSUE_BATCH
    if isinstance(payload, (RegisterUniversity, Blacklist)):
        return TxKind.ADMIN_OP
    return TxKind.REVOCATION_CALL


def decode_payload(kind: TxKind, data: bytes) -> Payload:
    r = Reader(data, f"{kind.name} payload")
    if kind is TxKind.ISSUE_BATCH:
        out = IssueBatch.read(r)
    else:
        table = _ADMIN_OPS if kind is TxKind.ADMIN_OP else _REVOCATION_CALLS
        tag = r.u8()
        if tag not in table:
            raise ParseError(f"{kind.name}: unknown function tag {tag}", 0)
        out = table[tag].read(r)
    r.expect_end()
    return out


# -- transactions ----------------------------------------------------------------

TX_MAGIC = b"CTX1"


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    sender: bytes
    nonce: int
    signers: tuple[bytes, ...]
    payload: bytes
    signatures: tuple[bytes, ...] = ()

    def body(self) -> bytes:
        w = (Writer().raw(TX_MAGIC).u8(int(self.kind)).raw(self.sender, ADDRESS_SIZE)
             .u64(self.nonce).u8(len(self.signers)))
        for a in self.signers:
            w.raw(a, ADDRESS_SIZE)
        return w.var(self.payload).getvalue()

    @property
    def tx_id(self) -> bytes:
        return sha256(self.body())

    @property
    def signature_pairs(self) -> list[tuple[bytes, bytes]]:
        return list(zip(self.signers, self.signatures))

    def decoded(self) -> Payload:
        return decode_payload(self.kind, self.payload)

    def to_bytes(self) -> bytes:
        w = Writer().raw(self.body()).u8(len(self.signatures))
        for s in self.signatures:
            w.raw(s, SIGNATURE_SIZE)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "Transaction":
        start = r.pos
        if r.raw(4) != TX_MAGIC:
            raise ParseError("transaction: bad magic", start)
        kind_at = r.pos
        try:
            kind = TxKind(r.u8())
        except ValueError:
            raise ParseError("transaction: unknown kind", kind_at) from None
        sender, nonce = r.raw(ADDRESS_SIZE), r.u64()
        signers = tuple(r.raw(ADDRESS_SIZE) for _ in range(r.u8()))
        payload = r.var()
        sigs = tuple(r.raw(SIGNATURE_SIZE) for _ in range(r.u8()))
        return cls(kind, sender, nonce, signers, payload, sigs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transaction":
        r = Reader(data, "transaction")
        tx = cls.read(r)
        r.expect_end()
        return tx

    def signatures_valid(self, public_key_of) -> bool:
        """Every declared signer has a verifying signature over the tx id."""
        if len(self.signatures) != len(self.signers):
            return False
        tid = self.tx_id
        for addr, sig in self.signature_pairs:
            pk = public_key_of(addr)
            if pk is None or not _verify_cached(pk, tid, sig):
                return False
        return True


def make_tx(payload: Payload, sender: bytes, keys: Sequence[KeyPair], nonce: int = 0) -> Transaction:
    unsigned = Transaction(kind_of(payload), sender, nonce,
                           tuple(k.address for k in keys), payload.to_bytes())
    tid = unsigned.tx_id
    return Transaction(unsigned.kind, sender, nonce, unsigned.signers, unsigned.payload,
                       tuple(k.sign(tid) for k in keys))


# -- genesis configuration --------------------------------------------------------

GENESIS_MAGIC = b"CGN1"


@dataclass(frozen=True)
class GenesisConfig:
    network_id: str
    authority_keys: tuple[bytes, ...]
    accreditor_org: bytes
    accreditor_keys: tuple[bytes, bytes]
    block_interval: int = 5
    rules_engine: bytes = RULES_ENGINE_ID
    implementation_engine: bytes = IMPLEMENTATION_ENGINE_ID

    def to_bytes(self) -> bytes:
        w = (Writer().raw(GENESIS_MAGIC).text(self.network_id).u32(self.block_interval)
             .raw(self.rules_engine, ADDRESS_SIZE).raw(self.implementation_engine, ADDRESS_SIZE)
             .u8(len(self.authority_keys)))
        for k in self.authority_keys:
            w.raw(k, PUBKEY_SIZE)
        w.raw(self.accreditor_org, ADDRESS_SIZE).u8(len(self.accreditor_keys))
        for k in self.accreditor_keys:
            w.raw(k, PUBKEY_SIZE)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GenesisConfig":
        r = Reader(data, "genesis config")
        if r.raw(4) != GENESIS_MAGIC:
            raise ParseError("genesis config: bad magic", 0)
        network_id, interval = r.text(), r.u32()
        rules, impl = r.raw(ADDRESS_SIZE), r.raw(ADDRESS_SIZE)
        auth = tuple(r.raw(PUBKEY_SIZE) for _ in range(r.u8()))
        org = r.raw(ADDRESS_SIZE)
        acc = tuple(r.raw(PUBKEY_SIZE) for _ in range(r.u8()))
        r.expect_end()
        return cls(network_id, auth, org, acc, interval, rules, impl)


# -- blocks -------------------------------------------------------------------------

BLOCK_MAGIC = b"CBK1"


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: int
    producer: bytes
    txs: tuple[Transaction, ...]
    extra: bytes = b""
    block_hash: bytes = field(default=ZERO_HASH)
    signature: bytes = field(default=ZERO_SIGNATURE)

    def content(self) -> bytes:
        w = (Writer().raw(BLOCK_MAGIC).u64(self.height).raw(self.prev_hash, DIGEST_SIZE)
             .u64(self.timestamp).raw(self.producer, ADDRESS_SIZE).var(self.extra)
             .u32(len(self.txs)))
        for tx in self.txs:
            w.var(tx.to_bytes())
        return w.getvalue()

    def compute_hash(self) -> bytes:
        return sha256(self.content())

    def to_record(self) -> bytes:
        return self.content() + self.block_hash + self.signature

    @classmethod
    def from_record(cls, data: bytes) -> "Block":
        r = Reader(data, "block")
        if r.raw(4) != BLOCK_MAGIC:
            raise ParseError("block: bad magic", 0)
        height, prev, ts, producer = r.u64(), r.raw(DIGEST_SIZE), r.u64(), r.raw(ADDRESS_SIZE)
        extra = r.var()
        txs = []
        for _ in range(r.u32()):
            sub = Reader(r.var(), "transaction")
            txs.append(Transaction.read(sub))
            sub.expect_end()
        block_hash, sig = r.raw(DIGEST_SIZE), r.raw(SIGNATURE_SIZE)
        r.expect_end()
        return cls(height, prev, ts, producer, tuple(txs), extra, block_hash, sig)

    @classmethod
    def create(cls, height: int, prev_hash: bytes, timestamp: int, key: KeyPair | None,
               txs: Sequence[Transaction], extra: bytes = b"") -> "Block":
        producer = key.address if key else ZERO_ADDRESS
        b = cls(height, prev_hash, timestamp, producer, tuple(txs), extra)
        h = b.compute_hash()
        sig = key.sign(h) if key else ZERO_SIGNATURE
        return cls(height, prev_hash, timestamp, producer, tuple(txs), extra, h, sig)

    def signature_valid(self, public_key: bytes) -> bool:
        return _verify_cached(public_key, self.block_hash, self.signature)
