"""Proof-of-authority chain: state, transaction and block validation, builders.

Blocks are produced round-robin: the producer of height ``h`` (h >= 1) is
``authorities[(h - 1) % len(authorities)]``. There are no forks; a block that
is not the exact scheduled successor of the current head is rejected.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..credential import AuthPath, sha256
from ..errors import NotFoundError, ParseError, PolicyError, RevocationError, ValidationError
from ..keys import KeyPair, address_of
from ..revocation import AuthorityListEntry, RevocationState, Terminated
from .records import (
    ZERO_ADDRESS,
    ZERO_HASH,
    ZERO_SIGNATURE,
    AddAuthority,
    Blacklist,
    Block,
    GenesisConfig,
    IssueBatch,
    RegisterUniversity,
    RevokeDocument,
    Role,
    Transaction,
    TxKind,
    make_tx,
)

log = logging.getLogger(__name__)

# reject reasons
BAD_SIGNATURE = "bad-signature"
UNKNOWN_SENDER = "unknown-sender"
BLACKLISTED = "blacklisted"
POLICY_UNMET = "policy-unmet"
MALFORMED = "malformed"
DUPLICATE = "duplicate"
ALREADY_REGISTERED = "already-registered"
BAD_CONTRACT = "bad-contract"
KEY_CONFLICT = "key-conflict"


@dataclass(frozen=True)
class Account:
    public_key: bytes
    role: Role

    @property
    def address(self) -> bytes:
        return address_of(self.public_key)


@dataclass(frozen=True)
class SigningPolicy:
    threshold: int
    keys: tuple[bytes, ...]

    def __post_init__(self):
        if not 1 <= self.threshold <= len(self.keys):
            raise ValidationError(
                f"policy {self.threshold}-of-{len(self.keys)} is not satisfiable")
        if len(set(self.keys)) != len(self.keys):
            raise ValidationError("policy keys must be distinct")

    @classmethod
    def parse(cls, text: str, keys: Sequence[bytes]) -> "SigningPolicy":
        """Build from 'm-of-n' text; ``keys`` must hold exactly n keys."""
        try:
            m, n = (int(x) for x in text.lower().split("-of-"))
        except ValueError:
            raise ValidationError(f"policy must look like 'm-of-n', got {text!r}") from None
        if n != len(keys):
            raise ValidationError(f"policy {text} needs {n} keys, got {len(keys)}")
        return cls(m, tuple(keys))

    def __str__(self):
        return f"{self.threshold}-of-{len(self.keys)}"


@dataclass(frozen=True)
class University:
    account: Account
    policy: SigningPolicy
    registered_at: int


@dataclass(frozen=True)
class IssueRecord:
    root: bytes
    block_number: int
    tx_id: bytes
    university: bytes


@dataclass(frozen=True)
class Receipt:
    status: str   # "ok" | "terminated" | "error"
    detail: str = ""
    output: bytes = b""


@dataclass(frozen=True)
class TxVerdict:
    accepted: bool
    reason: str = ""
    detail: str = ""

    def __bool__(self):
        return self.accepted


ACCEPT = TxVerdict(True)


def _reject(reason: str, detail: str = "") -> TxVerdict:
    return TxVerdict(False, reason, detail)


@dataclass
class ChainState:
    """Everything derived from replaying the blocks."""

    config: GenesisConfig
    authorities: tuple[Account, ...]
    orgs: dict[bytes, Role] = field(default_factory=dict)
    # key address -> (public key, owning org address)
    keys: dict[bytes, tuple[bytes, bytes]] = field(default_factory=dict)
    universities: dict[bytes, University] = field(default_factory=dict)
    blacklist: dict[bytes, int] = field(default_factory=dict)
    issued: dict[bytes, IssueRecord] = field(default_factory=dict)
    tx_heights: dict[bytes, int] = field(default_factory=dict)
    receipts: dict[bytes, Receipt] = field(default_factory=dict)
    sent: dict[bytes, int] = field(default_factory=dict)
    revocation: RevocationState = field(default_factory=RevocationState)

    @classmethod
    def from_config(cls, config: GenesisConfig) -> "ChainState":
        if not config.authority_keys:
            raise ValidationError("genesis needs at least one authority")
        auths = tuple(Account(k, Role.AUTHORITY) for k in config.authority_keys)
        if len({a.address for a in auths}) != len(auths):
            raise ValidationError("duplicate authority key")
        st = cls(config, auths)
        for a in auths:
            st.orgs[a.address] = Role.AUTHORITY
            st.keys[a.address] = (a.public_key, a.address)
        entry = AuthorityListEntry(config.accreditor_org, config.accreditor_keys)
        st.orgs.setdefault(config.accreditor_org, Role.AUTHORITY)
        for k in entry.keys:
            st.keys[address_of(k)] = (k, config.accreditor_org)
        st.revocation.authority_list.append(entry)
        return st

    def copy(self) -> "ChainState":
        return copy.deepcopy(self)

    # -- lookups ----------------------------------------------------------------

    @property
    def authority_addresses(self) -> list[bytes]:
        return [a.address for a in self.authorities]

    def is_authority(self, address: bytes) -> bool:
        return address in self.authority_addresses

    def scheduled_producer(self, height: int) -> bytes:
        if height < 1:
            raise ValueError("genesis has no producer")
        return self.authorities[(height - 1) % len(self.authorities)].address

    def public_key_of(self, address: bytes) -> bytes | None:
        entry = self.keys.get(address)
        return entry[0] if entry else None

    def is_blacklisted(self, address: bytes) -> bool:
        return address in self.blacklist

    def nonce_for(self, sender: bytes) -> int:
        return self.sent.get(sender, 0)

    # -- validation ---------------------------------------------------------------

    def validate_tx(self, tx: Transaction) -> TxVerdict:
        try:
            payload = tx.decoded()
        except ParseError as e:
            return _reject(MALFORMED, str(e))
        if tx.tx_id in self.tx_heights:
            return _reject(DUPLICATE, "transaction already on chain")
        if self.is_blacklisted(tx.sender):
            return _reject(BLACKLISTED, "sender is blacklisted")

        role = self.orgs.get(tx.sender)
        if tx.kind is TxKind.ISSUE_BATCH and tx.sender not in self.universities:
            return _reject(UNKNOWN_SENDER, "issuer is not a registered university")
        if tx.kind is TxKind.ADMIN_OP and not self.is_authority(tx.sender):
            return _reject(UNKNOWN_SENDER, "admin operations need an authority")
        if tx.kind is TxKind.REVOCATION_CALL and role is None:
            return _reject(UNKNOWN_SENDER, "sender is not a network participant")

        if not tx.signers or len(set(tx.signers)) != len(tx.signers):
            return _reject(POLICY_UNMET, "signer list empty or repeated")
        for signer in tx.signers:
            entry = self.keys.get(signer)
            if entry is None or entry[1] != tx.sender:
                return _reject(BAD_SIGNATURE, "signer key is not certified for the sender")
            if self.is_blacklisted(signer):
                return _reject(BLACKLISTED, "signer key is blacklisted")
        if not tx.signatures_valid(self.public_key_of):
            return _reject(BAD_SIGNATURE, "signature does not verify")

        if tx.kind is TxKind.ISSUE_BATCH:
            return self._check_issue(tx, payload)
        if tx.kind is TxKind.ADMIN_OP:
            if tx.signers != (tx.sender,):
                return _reject(POLICY_UNMET, "admin operations are signed by the authority key")
            if isinstance(payload, RegisterUniversity):
                return self._check_register(payload)
            return ACCEPT
        if len(tx.signers) != 1:
            return _reject(POLICY_UNMET, "revocation calls carry exactly one caller key")
        return ACCEPT

    def _check_issue(self, tx: Transaction, payload: IssueBatch) -> TxVerdict:
        policy = self.universities[tx.sender].policy
        policy_addrs = {address_of(k) for k in policy.keys}
        count = sum(1 for s in tx.signers if s in policy_addrs)
        if count < policy.threshold:
            return _reject(POLICY_UNMET, f"{count} of {policy} signatures")
        if (payload.rules_engine != self.config.rules_engine
                or payload.implementation_engine != self.config.implementation_engine):
            return _reject(BAD_CONTRACT, "unknown revocation contract ids")
        if payload.root in self.issued:
            return _reject(DUPLICATE, "batch root already issued")
        return ACCEPT

    def _check_register(self, op: RegisterUniversity) -> TxVerdict:
        addr = op.address
        if self.is_blacklisted(addr):
            return _reject(BLACKLISTED, "university address is blacklisted")
        if addr in self.orgs:
            return _reject(ALREADY_REGISTERED, "address already registered")
        try:
            SigningPolicy(op.threshold, op.signer_keys)
        except ValidationError as e:
            return _reject(MALFORMED, str(e))
        for k in (op.org_key, *op.signer_keys):
            a = address_of(k)
            if self.is_blacklisted(a):
                return _reject(BLACKLISTED, "policy key is blacklisted")
            if a in self.keys and self.keys[a][1] != addr:
                return _reject(KEY_CONFLICT, "key already certified for another party")
        return ACCEPT

    # -- state transitions --------------------------------------------------------

    def apply_tx(self, tx: Transaction, height: int) -> Receipt:
        """Apply an already validated transaction."""
        payload = tx.decoded()
        tid = tx.tx_id
        receipt = Receipt("ok")
        if isinstance(payload, IssueBatch):
            self.issued[payload.root] = IssueRecord(payload.root, height, tid, tx.sender)
            self.revocation.issued_roots.add(payload.root)
        elif isinstance(payload, RegisterUniversity):
            addr = payload.address
            acct = Account(payload.org_key, Role.UNIVERSITY)
            policy = SigningPolicy(payload.threshold, payload.signer_keys)
            self.universities[addr] = University(acct, policy, height)
            self.orgs[addr] = Role.UNIVERSITY
            for k in (payload.org_key, *payload.signer_keys):
                self.keys[address_of(k)] = (k, addr)
        elif isinstance(payload, Blacklist):
            self.blacklist.setdefault(payload.target, height)
        else:
            receipt = self._run_revocation(tx, payload)
        self.tx_heights[tid] = height
        self.receipts[tid] = receipt
        self.sent[tx.sender] = self.sent.get(tx.sender, 0) + 1
        return receipt

    def _run_revocation(self, tx: Transaction, call) -> Receipt:
        caller = self.public_key_of(tx.signers[0])
        rev = self.revocation
        try:
            if isinstance(call, AddAuthority):
                try:
                    entry = AuthorityListEntry(call.org, call.keys)
                except ValidationError as e:
                    return Receipt("error", str(e))
                if call.org not in self.orgs:
                    return Receipt("error", "organisation is not registered")
                for k in entry.keys:
                    owner = self.keys.get(address_of(k))
                    if owner is not None and owner[1] != call.org:
                        return Receipt("error", "key certified for another party")
                if not rev.add_revoking_authority(caller, entry):
                    return Receipt("terminated", "caller not on the authority list")
                for k in entry.keys:
                    self.keys.setdefault(address_of(k), (k, call.org))
                return Receipt("ok")
            if isinstance(call, RevokeDocument):
                ph = rev.revoke_document(caller, call.document_hash, call.proof)
                return Receipt("ok", "pending", ph)
            done = rev.confirm_revocation(caller, call.process_hash)
            return Receipt("ok", "revoked" if done else "pending", call.process_hash)
        except Terminated as e:
            return Receipt("terminated", str(e))
        except RevocationError as e:
            return Receipt("error", str(e))

    def digest(self) -> bytes:
        parts = [self.config.to_bytes()]
        for addr in sorted(self.blacklist):
            parts.append(addr + self.blacklist[addr].to_bytes(8, "big"))
        parts += sorted(self.universities)
        parts += sorted(self.issued)
        parts.append(self.revocation.digest())
        return sha256(b"".join(parts))


class BlockRejected(ValidationError):
    def __init__(self, height: int, problems: list[str]):
        self.height = height
        self.problems = problems
        super().__init__(f"block {height} rejected: " + "; ".join(problems))


def check_block(state: ChainState, prev: Block | None,
                block: Block) -> tuple[list[str], ChainState]:
    """Validate ``block`` as the successor of ``prev``.

    Returns the list of problems and the state after applying the block's
    valid transactions.
    """
    problems = []
    height = 0 if prev is None else prev.height + 1
    parent_hash = prev.block_hash if prev is not None else ZERO_HASH
    if block.height != height:
        problems.append(f"height {block.height} where {height} expected")
    if block.prev_hash != parent_hash:
        problems.append("hash link broken: prev_hash does not match parent")
    if block.compute_hash() != block.block_hash:
        problems.append("block hash does not match block contents")
    if block.timestamp != block.height * state.config.block_interval:
        problems.append("timestamp off the logical schedule")

    new_state = state.copy()
    if block.height == 0:
        if block.producer != ZERO_ADDRESS:
            problems.append("genesis must not name a producer")
        if block.txs:
            problems.append("genesis carries no transactions")
        # not covered by the block hash, so pin it explicitly
        if block.signature != ZERO_SIGNATURE:
            problems.append("genesis signature field must be zero")
        return problems, new_state

    if block.extra:
        problems.append("non-genesis block carries extra data")
    if not state.is_authority(block.producer):
        problems.append("producer is not an authority")
    elif block.producer != state.scheduled_producer(block.height):
        problems.append("producer out of turn")
    pk = state.public_key_of(block.producer) if state.is_authority(block.producer) else None
    if pk is None or not block.signature_valid(pk):
        problems.append("producer signature invalid")
    for i, tx in enumerate(block.txs):
        verdict = new_state.validate_tx(tx)
        if not verdict:
            problems.append(f"tx {i} ({tx.tx_id.hex()[:12]}) rejected: {verdict.reason}"
                            + (f" ({verdict.detail})" if verdict.detail else ""))
            continue
        new_state.apply_tx(tx, block.height)
    return problems, new_state


class Chain:
    """A validated chain replica. Mutated only through :meth:`append`."""

    def __init__(self, genesis_block: Block):
        config = GenesisConfig.from_bytes(genesis_block.extra)
        state = ChainState.from_config(config)
        problems, state = check_block(state, None, genesis_block)
        if problems:
            raise BlockRejected(0, problems)
        self.blocks: list[Block] = [genesis_block]
        self.state = state

    @classmethod
    def genesis(cls, authorities: Sequence[Account | bytes], config: GenesisConfig | None = None,
                *, accreditor_org: bytes | None = None, accreditor_keys=None,
                network_id: str = "cerberus", block_interval: int = 5) -> "Chain":
        keys = tuple(a.public_key if isinstance(a, Account) else a for a in authorities)
        if not keys:
            raise ValidationError("genesis needs at least one authority")
        if config is None:
            if accreditor_keys is None:
                raise ValidationError("genesis needs the accreditation body's two revocation keys")
            config = GenesisConfig(network_id, keys, accreditor_org or address_of(accreditor_keys[0]),
                                   tuple(accreditor_keys), block_interval)
        block = Block.create(0, ZERO_HASH, 0, None, (), config.to_bytes())
        return cls(block)

    # -- read side ----------------------------------------------------------------

    @property
    def config(self) -> GenesisConfig:
        return self.state.config

    @property
    def height(self) -> int:
        return self.blocks[-1].height

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def genesis_hash(self) -> bytes:
        return self.blocks[0].block_hash

    @property
    def revocation(self) -> RevocationState:
        return self.state.revocation

    def scheduled_producer(self, height: int | None = None) -> bytes:
        return self.state.scheduled_producer(self.height + 1 if height is None else height)

    def validate_tx(self, tx: Transaction) -> TxVerdict:
        return self.state.validate_tx(tx)

    def query_tx(self, block_number: int, tx_id: bytes) -> Transaction:
        """Look up a transaction in one specific block; no global scan."""
        if not 0 <= block_number <= self.height:
            raise NotFoundError(f"no block {block_number}")
        for tx in self.blocks[block_number].txs:
            if tx.tx_id == tx_id:
                return tx
        raise NotFoundError(f"transaction {tx_id.hex()} not in block {block_number}")

    def receipt(self, tx_id: bytes) -> Receipt | None:
        return self.state.receipts.get(tx_id)

    def issue_record(self, root: bytes) -> IssueRecord | None:
        return self.state.issued.get(root)

    # -- write side ---------------------------------------------------------------

    def check(self, block: Block) -> tuple[list[str], ChainState]:
        return check_block(self.state, self.head, block)

    def append(self, block: Block) -> None:
        problems, new_state = self.check(block)
        if problems:
            raise BlockRejected(block.height, problems)
        self.blocks.append(block)
        self.state = new_state

    def build_block(self, key: KeyPair, pending: Iterable[Transaction]) -> Block:
        """Assemble and sign the next block from ``pending``, skipping invalid txs."""
        height = self.height + 1
        if not self.state.is_authority(key.address):
            raise PolicyError("only authorities produce blocks")
        if key.address != self.scheduled_producer(height):
            raise PolicyError(f"not this authority's turn at height {height}")
        trial = self.state.copy()
        included = []
        for tx in pending:
            if trial.validate_tx(tx):
                trial.apply_tx(tx, height)
                included.append(tx)
            else:
                log.debug("dropping invalid tx %s", tx.tx_id.hex())
        return Block.create(height, self.head.block_hash,
                            height * self.config.block_interval, key, included)

    def produce_block(self, key: KeyPair, pending: Iterable[Transaction]) -> Block:
        block = self.build_block(key, pending)
        self.append(block)
        return block

    def digest(self) -> bytes:
        return sha256(self.head.block_hash + self.state.digest())


# -- transaction builders -------------------------------------------------------------

def register_university(chain: Chain, admin: KeyPair, org_key: bytes,
                        policy: SigningPolicy) -> Transaction:
    if not chain.state.is_authority(admin.address):
        raise PolicyError("only an authority may register universities")
    addr = address_of(org_key)
    if chain.state.is_blacklisted(addr):
        raise PolicyError("university address is blacklisted")
    if addr in chain.state.orgs:
        raise PolicyError("university already registered")
    op = RegisterUniversity(org_key, policy.threshold, policy.keys)
    return make_tx(op, admin.address, [admin], chain.state.nonce_for(admin.address))


def blacklist_key(chain: Chain, admin: KeyPair, address: bytes, nonce: int | None = None) -> Transaction:
    if not chain.state.is_authority(admin.address):
        raise PolicyError("only an authority may blacklist")
    if nonce is None:
        nonce = chain.state.nonce_for(admin.address)
    return make_tx(Blacklist(address), admin.address, [admin], nonce)


def create_issue_tx(root: bytes, contracts: tuple[bytes, bytes] | None,
                    signers: Sequence[KeyPair], *, university: bytes,
                    policy: SigningPolicy | None = None, chain: Chain | None = None,
                    nonce: int | None = None) -> Transaction:
    """Issue-batch transaction for ``root``, signed by ``signers``.

    The university's signing policy comes from ``policy`` or from the chain.
    """
    if policy is None:
        if chain is None or university not in chain.state.universities:
            raise PolicyError("unknown university")
        policy = chain.state.universities[university].policy
    if contracts is None:
        contracts = ((chain.config.rules_engine, chain.config.implementation_engine)
                     if chain is not None else (IssueBatch(root).rules_engine,
                                                IssueBatch(root).implementation_engine))
    valid = {k.public_key for k in signers} & set(policy.keys)
    if len(valid) < policy.threshold:
        raise PolicyError(f"{len(valid)} signatures do not satisfy policy {policy}")
    if nonce is None:
        nonce = chain.state.nonce_for(university) if chain is not None else 0
    return make_tx(IssueBatch(root, *contracts), university, list(signers), nonce)


def revocation_call(call, org: bytes, key: KeyPair, nonce: int = 0) -> Transaction:
    return make_tx(call, org, [key], nonce)


def revoke_leaf_call(leaf: bytes, path: AuthPath, root: bytes) -> RevokeDocument:
    return RevokeDocument(leaf, (path, root))
