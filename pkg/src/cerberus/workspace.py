"""File-based operator workspace: key files, the ledger store and emitted payloads.

Layout::

    workspace.json           seed, universities, issued batches
    ledger.bin, ledger.json  the chain (re-validated on every open)
    keys/<actor>/<name>.key  hex Ed25519 seeds, one file per key
    payloads/<serial>/       degree_code.{bin,b64}, transcript_code.{bin,b64}

All keys live here, on the institutional side. Nothing in this module is
needed to verify a credential.
"""
from __future__ import annotations

import json
import os
import re
from contextlib import contextmanager
from copy import deepcopy
from pathlib import Path

from filelock import FileLock

from .codec import decode_degree_code, from_text, to_text
from .credential import StudentRecord, degree_hash, fold_path, make_leaf
from .errors import CerberusError, NotFoundError, ParseError, PolicyError, ValidationError
from .issuance import prepare_batch
from .keys import KeyPair, address_of
from .ledger import (
    AddAuthority,
    Block,
    Chain,
    ConfirmRevocation,
    GenesisConfig,
    LedgerStore,
    RevokeDocument,
    SigningPolicy,
    Transaction,
    blacklist_key,
    create_issue_tx,
    make_tx,
    register_university,
)

STATE_FILE = "workspace.json"
LOCK_FILE = ".lock"
DEGREE_FILE = "degree_code"
TRANSCRIPT_FILE = "transcript_code"
ACCREDITOR = "accreditor"
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


class WorkspaceError(CerberusError, ValueError):
    pass


def _check_name(kind: str, name: str) -> str:
    if not _NAME_RE.match(name):
        raise WorkspaceError(f"{kind} {name!r} must be letters, digits, '.', '_' or '-'")
    return name


def read_payload(path: str | os.PathLike) -> bytes:
    """Raw payload bytes from a .bin file or its Base64 text form."""
    data = Path(path).read_bytes()
    if Path(path).suffix == ".b64":
        return from_text(data.decode("ascii", errors="replace"))
    return data


def write_payload(directory: Path, stem: str, data: bytes) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{stem}.bin").write_bytes(data)
    (directory / f"{stem}.b64").write_text(to_text(data) + "\n")
    return directory / f"{stem}.bin"


class Workspace:
    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)
        self.store = LedgerStore(self.dir)
        self._chain: Chain | None = None
        self._state: dict | None = None

    # -- paths and state ----------------------------------------------------------------

    @property
    def state_path(self) -> Path:
        return self.dir / STATE_FILE

    @property
    def payload_dir(self) -> Path:
        return self.dir / "payloads"

    def exists(self) -> bool:
        return self.state_path.exists() and self.store.exists()

    @contextmanager
    def locked(self):
        """Advisory lock held by commands that write to the workspace."""
        self.dir.mkdir(parents=True, exist_ok=True)
        with FileLock(str(self.dir / LOCK_FILE)):
            yield self

    @property
    def state(self) -> dict:
        if self._state is None:
            if not self.state_path.exists():
                raise WorkspaceError(f"no workspace at {self.dir} (run `cerberus init`)")
            self._state = json.loads(self.state_path.read_text())
        return self._state

    def save_state(self) -> None:
        self.state_path.write_text(json.dumps(self.state, indent=2, sort_keys=True) + "\n")

    @property
    def chain(self) -> Chain:
        if self._chain is None:
            if not self.exists():
                raise WorkspaceError(f"no workspace at {self.dir} (run `cerberus init`)")
            self._chain = self.store.load()
        return self._chain

    # -- keys -----------------------------------------------------------------------

    def key_path(self, label: str) -> Path:
        parts = label.split("/")
        for p in parts:
            _check_name("key label part", p)
        return self.dir / "keys" / Path(*parts[:-1]) / f"{parts[-1]}.key"

    def new_key(self, label: str) -> KeyPair:
        path = self.key_path(label)
        if path.exists():
            raise WorkspaceError(f"key {label!r} already exists")
        key = KeyPair.derive(label, self.state["seed"])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(key.seed.hex() + "\n")
        os.chmod(path, 0o600)
        return key

    def key(self, label: str) -> KeyPair:
        path = self.key_path(label)
        if not path.exists():
            raise WorkspaceError(f"no key {label!r} in this workspace")
        try:
            return KeyPair(bytes.fromhex(path.read_text().strip()))
        except ValueError as e:
            raise WorkspaceError(f"key file {path} is corrupt: {e}") from None

    def org_of_key(self, label: str) -> bytes:
        owner = label.split("/", 1)[0]
        if owner == ACCREDITOR:
            return self.chain.config.accreditor_org
        if owner in self.state["universities"]:
            return address_of(self.key(f"{owner}/org").public_key)
        if owner.startswith("authority-"):
            return self.key(owner).address
        raise WorkspaceError(f"cannot tell which organisation holds key {label!r}")

    # -- lifecycle ------------------------------------------------------------------------

    @classmethod
    def init(cls, directory, authorities: int = 3, seed: int = 0,
             network_id: str = "cerberus", block_interval: int = 5) -> "Workspace":
        ws = cls(directory)
        if ws.state_path.exists() or ws.store.exists():
            raise WorkspaceError(f"{ws.dir} already holds a workspace")
        if authorities < 1:
            raise WorkspaceError("need at least one authority")
        ws.dir.mkdir(parents=True, exist_ok=True)
        ws._state = {"seed": seed, "universities": {}, "batches": {}}
        auth = [ws.new_key(f"authority-{i}") for i in range(authorities)]
        org = ws.new_key(f"{ACCREDITOR}/org")
        acc = [ws.new_key(f"{ACCREDITOR}/key-1"), ws.new_key(f"{ACCREDITOR}/key-2")]
        config = GenesisConfig(network_id, tuple(k.public_key for k in auth), org.address,
                               (acc[0].public_key, acc[1].public_key), block_interval)
        chain = Chain(Block.create(0, bytes(32), 0, None, (), config.to_bytes()))
        ws.store.create(chain)
        ws._chain = chain
        ws.save_state()
        return ws

    def authority_key_for(self, height: int) -> KeyPair:
        producer = self.chain.scheduled_producer(height)
        for i in range(len(self.chain.config.authority_keys)):
            k = self.key(f"authority-{i}")
            if k.address == producer:
                return k
        raise WorkspaceError("scheduled authority key is not held in this workspace")

    def commit(self, tx: Transaction) -> Block:
        """Validate ``tx`` and seal it in the next block from the scheduled authority."""
        verdict = self.chain.validate_tx(tx)
        if not verdict:
            raise PolicyError(f"transaction rejected: {verdict.reason}: {verdict.detail}")
        block = self.chain.build_block(self.authority_key_for(self.chain.height + 1), [tx])
        self.chain.append(block)
        self.store.append(block)
        return block

    def dry_run(self, tx: Transaction):
        """Receipt ``tx`` would get, without touching the chain."""
        verdict = self.chain.validate_tx(tx)
        if not verdict:
            raise PolicyError(f"transaction rejected: {verdict.reason}: {verdict.detail}")
        trial = deepcopy(self.chain.state)
        return trial.apply_tx(tx, self.chain.height + 1)

    # -- operations -----------------------------------------------------------------------

    def register_university(self, name: str, policy: str, signers: list[str] | None = None,
                            by: str = "authority-0") -> tuple[Block, dict]:
        _check_name("university name", name)
        if name in self.state["universities"] or name == ACCREDITOR:
            raise PolicyError(f"university {name!r} already registered")
        m, _, n = policy.partition("-of-")
        try:
            total = int(n)
        except ValueError:
            raise ValidationError(f"policy must look like m-of-n, got {policy!r}") from None
        signers = signers or [f"signer-{i + 1}" for i in range(total)]
        if len(signers) != total:
            raise ValidationError(f"policy {policy} needs {total} signer names")
        for s in signers:
            _check_name("signer name", s)
        admin = self.key(by)
        org = KeyPair.derive(f"{name}/org", self.state["seed"])
        skeys = [KeyPair.derive(f"{name}/{s}", self.state["seed"]) for s in signers]
        parsed = SigningPolicy.parse(policy, [k.public_key for k in skeys])
        block = self.commit(register_university(self.chain, admin, org.public_key, parsed))
        self.new_key(f"{name}/org")
        for s in signers:
            self.new_key(f"{name}/{s}")
        info = {"address": org.address.hex(), "policy": policy,
                "signers": [f"{name}/{s}" for s in signers], "registered_at": block.height}
        self.state["universities"][name] = info
        self.save_state()
        return block, info

    def _signer_label(self, university: str, name: str) -> str:
        return name if "/" in name else f"{university}/{name}"

    def issue(self, records: list[StudentRecord], university: str, sign: list[str],
              label: str | None = None) -> dict:
        if university not in self.state["universities"]:
            raise PolicyError(f"university {university!r} is not registered here")
        prepared = prepare_batch(records)
        org = address_of(self.key(f"{university}/org").public_key)
        signers = [self.key(self._signer_label(university, s)) for s in sign]
        tx = create_issue_tx(prepared.root, None, signers, university=org, chain=self.chain)
        block = self.commit(tx)
        label = label or prepared.root.hex()[:16]
        written = []
        for cred in prepared.credentials(block.height, tx.tx_id):
            d = self.payload_dir / _check_name("degree serial", cred.serial)
            write_payload(d, DEGREE_FILE, cred.degree_code)
            write_payload(d, TRANSCRIPT_FILE, cred.transcript_code)
            written.append(cred.serial)
        summary = {"batch": label, "university": university, "root": prepared.root.hex(),
                   "block": block.height, "tx_id": tx.tx_id.hex(), "students": len(written),
                   "height": prepared.tree.height}
        self.state["batches"][label] = {k: summary[k] for k in
                                        ("university", "root", "block", "tx_id", "students")}
        self.save_state()
        return summary

    def student_files(self, serial: str) -> tuple[Path, Path]:
        d = self.payload_dir / _check_name("degree serial", serial)
        deg, tr = d / f"{DEGREE_FILE}.bin", d / f"{TRANSCRIPT_FILE}.bin"
        if not deg.exists():
            raise NotFoundError(f"no payloads for student {serial!r}")
        return deg, tr

    def _find_proof(self, document: bytes):
        """Inclusion proof for a student leaf emitted from this workspace, if any."""
        if not self.payload_dir.exists():
            return None
        for d in sorted(self.payload_dir.iterdir()):
            f = d / f"{DEGREE_FILE}.bin"
            if not f.exists():
                continue
            try:
                p = decode_degree_code(f.read_bytes())
            except ParseError:
                continue
            leaf = make_leaf(degree_hash(p.degree_info), p.id_transcript_hash)
            if leaf == document:
                return p.auth_path, fold_path(leaf, p.auth_path)
        return None

    def _revocation_tx(self, call, key_label: str) -> Transaction:
        org = self.org_of_key(key_label)
        return make_tx(call, org, [self.key(key_label)], self.chain.state.nonce_for(org))

    def _run_call(self, call, key_label: str):
        tx = self._revocation_tx(call, key_label)
        receipt = self.dry_run(tx)
        if receipt.status != "ok":
            raise PolicyError(f"revocation call {receipt.status}: {receipt.detail}")
        block = self.commit(tx)
        return block, self.chain.receipt(tx.tx_id)

    def revoke_init(self, document: bytes, key_label: str) -> tuple[bytes, Block]:
        proof = None if document in self.chain.state.issued else self._find_proof(document)
        block, receipt = self._run_call(RevokeDocument(document, proof), key_label)
        return receipt.output, block

    def revoke_confirm(self, process_hash: bytes, key_label: str) -> tuple[bool, Block]:
        block, receipt = self._run_call(ConfirmRevocation(process_hash), key_label)
        return receipt.detail == "revoked", block

    def add_revoking_authority(self, university: str, key_label: str,
                               signers: list[str] | None = None) -> Block:
        """List two of ``university``'s keys as a revoking authority."""
        info = self.state["universities"].get(university)
        if info is None:
            raise PolicyError(f"university {university!r} is not registered here")
        labels = ([self._signer_label(university, s) for s in signers] if signers
                  else info["signers"])
        if len(labels) != 2:
            raise ValidationError(f"pick exactly two of {', '.join(info['signers'])}")
        keys = tuple(self.key(s).public_key for s in labels)
        org = address_of(self.key(f"{university}/org").public_key)
        block, _ = self._run_call(AddAuthority(org, keys), key_label)
        return block

    def blacklist(self, target: str, by: str = "authority-0") -> Block:
        if target in self.state["universities"]:
            addr = bytes.fromhex(self.state["universities"][target]["address"])
        elif self.key_path(target).exists():
            addr = self.key(target).address
        else:
            try:
                addr = bytes.fromhex(target)
            except ValueError:
                raise ValidationError(f"unknown blacklist target {target!r}") from None
        return self.commit(blacklist_key(self.chain, self.key(by), addr))

