"""Deterministic in-process network of authority, university and observer nodes.

Time advances in discrete ticks. Messages travel over a seeded bus with
per-link latency and an optional drop probability; every random choice comes
from the bus RNG, so the same script and seed always give the same run.

Scenario scripts are JSON::

    {"network": {"authorities": 3, "observers": 1, "seed": 7,
                 "universities": [{"name": "NUST", "signers": ["registrar", "exam"],
                                   "policy": "2-of-2"}]},
     "actions": [{"at": 1, "action": "register_university", "by": "authority-0",
                  "university": "NUST"}, ...]}

A bare list of actions is accepted too and runs on the default network.
"""
from __future__ import annotations

import hashlib
import heapq
import itertools
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Iterable

from .credential import record_from_json
from .errors import CerberusError, PolicyError, ValidationError
from .fixtures import make_batch
from .issuance import PreparedBatch, prepare_batch
from .keys import KeyPair, address_of
from .ledger import (
    AddAuthority,
    Block,
    Chain,
    ConfirmRevocation,
    GenesisConfig,
    RevokeDocument,
    Role,
    SigningPolicy,
    Transaction,
    audit_chain,
    blacklist_key,
    create_issue_tx,
    make_tx,
    register_university,
)
from .ledger.chain import check_block
from .ledger.records import IssueBatch, TxKind
from .verify import verify_degree, verify_transcript

log = logging.getLogger(__name__)

DEFAULT_AUTHORITIES = 3
DEFAULT_BLOCK_INTERVAL = 5
DEFAULT_GOSSIP_INTERVAL = 5
SETTLE_TICKS = 400


class ScenarioError(CerberusError, ValueError):
    pass


@dataclass
class BusConfig:
    seed: int = 0
    latency_ticks: int = 1
    drop_rate: float = 0.0
    link_latency: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.drop_rate < 1.0:
            raise ValidationError("drop_rate must be in [0, 1)")
        if self.latency_ticks < 1:
            raise ValidationError("latency must be at least one tick")

    def latency(self, src: str, dst: str) -> int:
        return self.link_latency.get((src, dst), self.latency_ticks)


@dataclass(order=True)
class Message:
    deliver_at: int
    seq: int
    src: str = field(compare=False)
    dst: str = field(compare=False)
    kind: str = field(compare=False)
    body: Any = field(compare=False)


class Bus:
    def __init__(self, config: BusConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.queue: list[Message] = []
        self._seq = itertools.count()
        self.dropped = 0

    def send(self, now: int, src: str, dst: str, kind: str, body) -> int | None:
        """Queue a message; returns its delivery tick or None if dropped."""
        if self.config.drop_rate and self.rng.random() < self.config.drop_rate:
            self.dropped += 1
            return None
        at = now + self.config.latency(src, dst)
        heapq.heappush(self.queue, Message(at, next(self._seq), src, dst, kind, body))
        return at

    def due(self, now: int) -> Iterable[Message]:
        while self.queue and self.queue[0].deliver_at <= now:
            yield heapq.heappop(self.queue)


@dataclass
class Node:
    name: str
    role: Role
    chain: Chain
    key: KeyPair | None = None
    pending: dict[bytes, Transaction] = field(default_factory=dict)
    failed: bool = False
    seen_conflicts: set = field(default_factory=set)

    @property
    def is_authority(self) -> bool:
        return self.role is Role.AUTHORITY


class World:
    """The simulated network plus the script-facing actor registry."""

    def __init__(self, *, authorities: int = DEFAULT_AUTHORITIES, observers: int = 1,
                 universities: Iterable[dict] = (), bus: BusConfig | None = None,
                 block_interval: int = DEFAULT_BLOCK_INTERVAL,
                 gossip_interval: int = DEFAULT_GOSSIP_INTERVAL, network_id: str = "cerberus-sim"):
        if authorities < 1:
            raise ValidationError("need at least one authority node")
        self.bus_config = bus or BusConfig()
        self.bus = Bus(self.bus_config)
        self.seed = self.bus_config.seed
        self.now = 0
        self.block_interval = block_interval
        self.gossip_interval = gossip_interval
        self.transcript: list[dict] = []
        self.keys: dict[str, KeyPair] = {}
        self.batches: dict[str, dict] = {}
        self.university_info: dict[str, dict] = {}
        self._logged_rejections: set[tuple[str, bytes]] = set()
        self._included: set[bytes] = set()

        auth_keys = [self._key(f"authority-{i}") for i in range(authorities)]
        acc = [self._key("accreditor/key-1"), self._key("accreditor/key-2")]
        self.accreditor_org = address_of(self._key("accreditor/org").public_key)
        config = GenesisConfig(network_id, tuple(k.public_key for k in auth_keys),
                               self.accreditor_org, (acc[0].public_key, acc[1].public_key),
                               block_interval)
        self.genesis = Block.create(0, bytes(32), 0, None, (), config.to_bytes())

        self.nodes: dict[str, Node] = {}
        for i, k in enumerate(auth_keys):
            self._add_node(f"authority-{i}", Role.AUTHORITY, k)
        for u in universities:
            self.add_university(u)
        for i in range(observers):
            self._add_node(f"observer-{i}", Role.OBSERVER, None)

    # -- setup ----------------------------------------------------------------------

    def _key(self, label: str) -> KeyPair:
        if label not in self.keys:
            self.keys[label] = KeyPair.derive(label, self.seed)
        return self.keys[label]

    def _add_node(self, name, role, key) -> Node:
        node = Node(name, role, Chain(self.genesis), key)
        self.nodes[name] = node
        return node

    def add_university(self, spec: dict) -> None:
        name = spec["name"]
        signers = spec.get("signers", ["registrar", "exam-office"])
        policy = spec.get("policy", f"{len(signers)}-of-{len(signers)}")
        org = self._key(f"{name}/org")
        skeys = [self._key(f"{name}/{s}") for s in signers]
        self.university_info[name] = {
            "org": org, "signers": dict(zip(signers, skeys)),
            "policy": SigningPolicy.parse(policy, [k.public_key for k in skeys]),
        }
        self._add_node(name, Role.UNIVERSITY, org)

    def node(self, name: str) -> Node:
        try:
            return self.nodes[name]
        except KeyError:
            raise ScenarioError(f"unknown actor {name!r}") from None

    def key(self, label: str) -> KeyPair:
        if label not in self.keys:
            raise ScenarioError(f"unknown key {label!r}")
        return self.keys[label]

    def org_of_key(self, label: str) -> tuple[bytes, str]:
        """(org address, name of the node that submits for it)."""
        owner = label.split("/", 1)[0]
        if owner == "accreditor":
            return self.accreditor_org, "authority-0"
        if owner in self.university_info:
            return self.university_info[owner]["org"].address, owner
        if owner in self.nodes and self.nodes[owner].is_authority:
            return self.nodes[owner].key.address, owner
        raise ScenarioError(f"cannot tell which organisation holds key {label!r}")

    # -- transcript -----------------------------------------------------------------

    def emit(self, event: str, **fields) -> dict:
        ev = {"tick": self.now, "event": event, **fields}
        self.transcript.append(ev)
        return ev

    def transcript_lines(self) -> str:
        return "".join(json.dumps(ev) + "\n" for ev in self.transcript)

    # -- messaging ------------------------------------------------------------------

    def _peers(self, src: str) -> list[str]:
        return [n for n in self.nodes if n != src]

    def broadcast(self, src: str, kind: str, body, targets=None) -> dict[str, int | None]:
        targets = self._peers(src) if targets is None else targets
        return {dst: self.bus.send(self.now, src, dst, kind, body) for dst in targets}

    def broadcast_tx(self, origin: str, tx: Transaction) -> dict[str, int | None]:
        """Submit ``tx`` from ``origin`` to every other node; returns the delivery schedule."""
        node = self.node(origin)
        if node.role is Role.OBSERVER:
            self.emit("tx_rejected", node=origin, tx_id=tx.tx_id.hex(),
                      reason="observers cannot originate transactions")
            raise PolicyError("observers cannot originate transactions")
        verdict = node.chain.validate_tx(tx)
        if not verdict:
            self.emit("tx_rejected", node=origin, tx_id=tx.tx_id.hex(), reason=verdict.reason)
            return {}
        self.emit("tx_submitted", node=origin, tx_id=tx.tx_id.hex(), kind=tx.kind.name)
        if node.is_authority:
            node.pending[tx.tx_id] = tx
        return self.broadcast(origin, "tx", tx)

    def inject_raw_tx(self, origin: str, tx: Transaction) -> None:
        """Byzantine path: push a transaction without local checks."""
        self.emit("tx_submitted", node=origin, tx_id=tx.tx_id.hex(), kind=tx.kind.name,
                  unchecked=True)
        self.broadcast(origin, "tx", tx)

    def _deliver(self, msg: Message) -> None:
        node = self.nodes[msg.dst]
        if node.failed:
            return
        if msg.kind == "tx":
            self._on_tx(node, msg.body)
        elif msg.kind == "block":
            self._on_block(node, msg.body, msg.src)
        elif msg.kind == "status":
            height = msg.body
            if height > node.chain.height:
                self.bus.send(self.now, node.name, msg.src, "sync", node.chain.height + 1)
        elif msg.kind == "sync":
            src = self.nodes[msg.src]
            for b in node.chain.blocks[msg.body:]:
                self.bus.send(self.now, node.name, src.name, "block", b)

    def _on_tx(self, node: Node, tx: Transaction) -> None:
        if not node.is_authority or tx.tx_id in node.pending:
            return
        verdict = node.chain.validate_tx(tx)
        if verdict:
            node.pending[tx.tx_id] = tx
        elif verdict.reason != "duplicate":
            key = ("tx", tx.tx_id)
            if key not in self._logged_rejections:
                self._logged_rejections.add(key)
                self.emit("tx_rejected", node=node.name, tx_id=tx.tx_id.hex(),
                          reason=verdict.reason)

    def _on_block(self, node: Node, block: Block, src: str) -> None:
        chain = node.chain
        if block.height <= chain.height:
            mine = chain.blocks[block.height]
            if mine.block_hash != block.block_hash and block.block_hash not in node.seen_conflicts:
                node.seen_conflicts.add(block.block_hash)
                problems = ["conflicting genesis"]
                if block.height > 0:
                    problems, _ = check_block(_state_at(chain, block.height - 1),
                                              chain.blocks[block.height - 1], block)
                # a second valid block for a taken height means its producer signed twice
                event = "block_rejected" if problems else "equivocation_detected"
                self.emit(event, node=node.name, height=block.height,
                          producer=block.producer.hex(), problems=problems)
            return
        if block.height > chain.height + 1:
            self.bus.send(self.now, node.name, src, "sync", chain.height + 1)
            return
        problems, _ = chain.check(block)
        if problems:
            key = (node.name, block.block_hash)
            if key not in self._logged_rejections:
                self._logged_rejections.add(key)
                self.emit("block_rejected", node=node.name, height=block.height,
                          producer=block.producer.hex(), problems=problems)
            return
        chain.append(block)
        for tx in block.txs:
            node.pending.pop(tx.tx_id, None)
        # drop pending txs the new state makes invalid
        for tid, tx in list(node.pending.items()):
            if not chain.validate_tx(tx):
                del node.pending[tid]

    # -- time -----------------------------------------------------------------------

    def tick(self) -> None:
        self.now += 1
        for msg in self.bus.due(self.now):
            self._deliver(msg)
        if self.now % self.block_interval == 0:
            self._produce()
        if self.now % self.gossip_interval == 0:
            self._gossip()

    def _produce(self) -> None:
        for node in self.nodes.values():
            if not node.is_authority or node.failed or not node.pending:
                continue
            if node.chain.scheduled_producer() != node.key.address:
                continue
            block = node.chain.build_block(node.key, list(node.pending.values()))
            if not block.txs:
                node.pending.clear()
                continue
            node.chain.append(block)
            for tx in block.txs:
                node.pending.pop(tx.tx_id, None)
            self.emit("block_produced", node=node.name, height=block.height,
                      block_hash=block.block_hash.hex(), txs=len(block.txs))
            for tx in block.txs:
                self._on_included(node, tx, block.height)
            self.broadcast(node.name, "block", block)

    def _on_included(self, node: Node, tx: Transaction, height: int) -> None:
        tid = tx.tx_id
        if tid in self._included:
            return
        self._included.add(tid)
        receipt = node.chain.receipt(tid)
        fields = {"height": height, "tx_id": tid.hex(), "kind": tx.kind.name}
        if tx.kind is TxKind.REVOCATION_CALL:
            fields["status"] = receipt.status
            fields["detail"] = receipt.detail
            if receipt.output:
                fields["process_hash"] = receipt.output.hex()
        self.emit("tx_included", **fields)
        if tx.kind is TxKind.ISSUE_BATCH:
            root = tx.decoded().root
            for label, b in self.batches.items():
                if b["prepared"].root == root:
                    b["block"], b["tx_id"] = height, tid
                    self.emit("batch_issued", batch=label, root=root.hex(), height=height)

    def _gossip(self) -> None:
        for node in self.nodes.values():
            if node.failed:
                continue
            self.broadcast(node.name, "status", node.chain.height)
            if node.is_authority and node.pending:
                others = [n for n, x in self.nodes.items() if x.is_authority and n != node.name]
                for tx in list(node.pending.values()):
                    self.broadcast(node.name, "tx", tx, others)

    def run(self, ticks: int) -> None:
        for _ in range(ticks):
            self.tick()

    def quiescent(self) -> bool:
        live = [n for n in self.nodes.values() if not n.failed]
        if any(n.pending for n in live):
            return False
        heads = {n.chain.head.block_hash for n in live}
        return len(heads) == 1 and not self.bus.queue

    def settle(self, max_ticks: int = SETTLE_TICKS) -> bool:
        for _ in range(max_ticks):
            if self.quiescent():
                return True
            self.tick()
        return self.quiescent()

    def heads(self) -> dict[str, str]:
        return {n: node.chain.head.block_hash.hex() for n, node in self.nodes.items()}

    def state_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.now.to_bytes(8, "big"))
        for name in sorted(self.nodes):
            node = self.nodes[name]
            h.update(name.encode())
            h.update(node.chain.digest())
            for tid in sorted(node.pending):
                h.update(tid)
        h.update(self.transcript_lines().encode())
        return h.hexdigest()

    # -- script actions -----------------------------------------------------------------

    def observer_node(self, name: str | None = None) -> Node:
        if name:
            return self.node(name)
        for n in self.nodes.values():
            if n.role is Role.OBSERVER:
                return n
        return next(iter(self.nodes.values()))

    def do(self, action: dict) -> None:
        kind = action.get("action")
        handler = getattr(self, f"_act_{kind}", None)
        if handler is None:
            raise ScenarioError(f"unknown action {kind!r}")
        handler(action)

    def _act_register_university(self, a):
        by = self.node(a["by"])
        name = a["university"]
        if name not in self.university_info:
            raise ScenarioError(f"unknown actor {name!r}")
        info = self.university_info[name]
        if not by.is_authority:
            self.emit("tx_rejected", node=by.name, reason="only authorities register universities")
            return
        try:
            tx = register_university(by.chain, by.key, info["org"].public_key, info["policy"])
        except PolicyError as e:
            self.emit("tx_rejected", node=by.name, reason=str(e))
            return
        self.broadcast_tx(by.name, tx)

    def _act_issue_batch(self, a):
        uni = a["university"]
        node = self.node(uni)
        info = self.university_info[uni]
        label = a.get("batch", f"{uni}-{len(self.batches)}")
        if "students" in a:
            records = [record_from_json(s) for s in a["students"]]
        else:
            records = make_batch(a.get("size", 4), seed=a.get("seed", self.seed),
                                 university=uni, fixed_width=False)
        prepared = prepare_batch(records)
        self.batches[label] = {"prepared": prepared, "university": uni, "block": None,
                               "tx_id": None}
        names = a.get("signers", list(info["signers"]))
        signers = [info["signers"][s] for s in names]
        try:
            tx = create_issue_tx(prepared.root, None, signers, university=info["org"].address,
                                 policy=info["policy"], chain=node.chain)
        except PolicyError as e:
            self.emit("tx_rejected", node=uni, batch=label, reason=str(e))
            return
        if a.get("force"):
            self.inject_raw_tx(uni, tx)
        else:
            self.broadcast_tx(uni, tx)

    def _batch(self, label: str) -> dict:
        if label not in self.batches:
            raise ScenarioError(f"unknown batch {label!r}")
        return self.batches[label]

    def _document(self, a) -> tuple[bytes, Any]:
        b = self._batch(a["batch"])
        prepared: PreparedBatch = b["prepared"]
        if "student" in a:
            idx = prepared.index_of(a["student"])
            cred = prepared.credential(idx, 0, bytes(32))
            return cred.leaf, (cred.degree_payload.auth_path, prepared.root)
        return prepared.root, None

    def _submit_call(self, label: str, call) -> None:
        key = self.key(label)
        org, via = self.org_of_key(label)
        node = self.node(via)
        tx = make_tx(call, org, [key], node.chain.state.nonce_for(org))
        self.broadcast_tx(via, tx)

    def _act_revoke(self, a):
        doc, proof = self._document(a)
        self._submit_call(a["key"], RevokeDocument(doc, proof))

    def _act_confirm(self, a):
        doc, _ = self._document(a)
        _, via = self.org_of_key(a["key"])
        rev = self.node(via).chain.revocation
        ph = next((p for p, pend in rev.pending.items() if pend.document_hash == doc), None)
        if ph is None:
            self.emit("confirm_skipped", key=a["key"], reason="no pending revocation seen")
            return
        self._submit_call(a["key"], ConfirmRevocation(ph))

    def _act_add_revoking_authority(self, a):
        uni = a["university"]
        info = self.university_info[uni]
        keys = tuple(k.public_key for k in info["signers"].values())
        self._submit_call(a["key"], AddAuthority(info["org"].address, keys))

    def _act_blacklist(self, a):
        by = self.node(a["by"])
        target = a["target"]
        if target in self.university_info:
            addr = self.university_info[target]["org"].address
        elif target in self.keys:
            addr = self.keys[target].address
        else:
            addr = bytes.fromhex(target)
        try:
            tx = blacklist_key(by.chain, by.key, addr)
        except PolicyError as e:
            self.emit("tx_rejected", node=by.name, reason=str(e))
            return
        self.broadcast_tx(by.name, tx)

    def _act_verify(self, a):
        node = self.observer_node(a.get("via"))
        b = self._batch(a["batch"])
        if b["block"] is None:
            self.emit("verification", student=a["student"], verdict="NotFound",
                      reason="batch not yet on chain", via=node.name)
            return
        prepared: PreparedBatch = b["prepared"]
        cred = prepared.credential(prepared.index_of(a["student"]), b["block"], b["tx_id"])
        result = verify_degree(cred.degree_payload, node.chain)
        transcript_ok = verify_transcript(cred.transcript_payload,
                                          cred.record.id_transcript.id_document_number,
                                          cred.degree_payload.id_transcript_hash)
        fields = {"student": a["student"], "name": cred.record.degree.student_name,
                  "verdict": result.verdict.value, "transcript": transcript_ok, "via": node.name}
        if "revocation_source" in result.details:
            fields["revocation_source"] = result.details["revocation_source"]
        self.emit("verification", **fields)

    def _act_audit(self, a):
        obs = self.observer_node(a.get("observer"))
        source = self.node(a.get("source", obs.name))
        report = audit_chain(source.chain.blocks, obs.chain.genesis_hash)
        # an observer also cross-checks the source against its own replica
        mismatched = [b.height for b, mine in zip(source.chain.blocks, obs.chain.blocks)
                      if b.block_hash != mine.block_hash]
        self.emit("audit", observer=obs.name, source=source.name, ok=report.ok and not mismatched,
                  violations=[{"height": v.height, "kind": v.kind} for v in report.violations],
                  diverges_at=mismatched[:1])

    def _act_crash(self, a):
        self.node(a["node"]).failed = True
        self.emit("node_crashed", node=a["node"])

    def _act_recover(self, a):
        self.node(a["node"]).failed = False
        self.emit("node_recovered", node=a["node"])

    def _act_unsigned_tx(self, a):
        uni = a.get("node")
        node = self.node(uni)
        sender = node.key.address if node.key else bytes(20)
        tx = Transaction(TxKind.ISSUE_BATCH, sender, 0, (sender,),
                         IssueBatch(hashlib.sha256(b"forged").digest()).to_bytes(), ())
        self.inject_raw_tx(node.name, tx)

    def _act_bad_block(self, a):
        """A node pushes a block it has no right to produce, or a malformed one."""
        node = self.node(a["node"])
        chain = node.chain
        height = chain.height + 1
        key = node.key or self._key(f"{node.name}/rogue")
        style = a.get("style", "out_of_turn")
        if style == "out_of_turn" and chain.scheduled_producer(height) == key.address:
            raise ScenarioError(f"{node.name} is scheduled at height {height}; not out of turn")
        txs: list[Transaction] = list(node.pending.values())
        prev = chain.head.block_hash
        if style == "unsigned_tx":
            txs = [Transaction(TxKind.ISSUE_BATCH, bytes(20), 0, (bytes(20),),
                               IssueBatch(hashlib.sha256(b"rogue").digest()).to_bytes(), ())]
        elif style == "wrong_prev":
            prev = hashlib.sha256(b"elsewhere").digest()
        block = Block.create(height, prev, height * self.block_interval, key, txs)
        self.emit("bad_block_sent", node=node.name, height=height, style=style)
        self.broadcast(node.name, "block", block)

    def _act_equivocate(self, a):
        node = self.node(a["node"])
        chain = node.chain
        height = chain.height + 1
        if chain.scheduled_producer(height) != node.key.address:
            raise ScenarioError(f"{node.name} is not scheduled at height {height}")
        pend = list(node.pending.values())
        b1 = chain.build_block(node.key, pend)
        b2 = chain.build_block(node.key, pend[:-1] if pend else [])
        if b1.block_hash == b2.block_hash:
            raise ScenarioError("equivocation needs at least one pending transaction")
        peers = self._peers(node.name)
        half = len(peers) // 2
        self.emit("equivocation_sent", node=node.name, height=height)
        self.broadcast(node.name, "block", b1, peers[:half])
        self.broadcast(node.name, "block", b2, peers[half:])

    def _act_tamper(self, a):
        """Colluding nodes rewrite a historical block in their own replicas."""
        height = a["height"]
        for name in a["nodes"]:
            node = self.node(name)
            old = node.chain.blocks[height]
            if not old.txs:
                raise ScenarioError(f"block {height} has no transaction to tamper with")
            tx = old.txs[0]
            payload = bytearray(tx.payload)
            payload[-1] ^= 0x01
            forged_tx = Transaction(tx.kind, tx.sender, tx.nonce, tx.signers, bytes(payload),
                                    tx.signatures)
            key = node.key or self._key(f"{name}/rogue")
            forged = Block.create(old.height, old.prev_hash, old.timestamp, key,
                                  (forged_tx, *old.txs[1:]))
            node.chain.blocks[height] = forged
        self.emit("tampered", nodes=list(a["nodes"]), height=height)

    def _act_tick(self, a):
        self.run(a.get("ticks", 1))


def _state_at(chain: Chain, height: int):
    """Chain state after ``height`` (replayed; used only for conflict diagnosis)."""
    replica = Chain(chain.blocks[0])
    for b in chain.blocks[1:height + 1]:
        replica.append(b)
    return replica.state


def with_seed(script, seed: int | None):
    """Copy of ``script`` with its bus seed overridden (None leaves it alone)."""
    if seed is None:
        return script
    if isinstance(script, list):
        script = {"actions": script}
    return {**script, "network": {**script.get("network", {}), "seed": seed}}


def world_from_script(script) -> tuple[World, list[dict]]:
    if isinstance(script, list):
        net, actions = {}, script
    else:
        net, actions = script.get("network", {}), script.get("actions", [])
    bus = BusConfig(seed=net.get("seed", 0), latency_ticks=net.get("latency_ticks", 1),
                    drop_rate=net.get("drop_rate", 0.0))
    unis = net.get("universities", [{"name": "NUST"}])
    world = World(authorities=net.get("authorities", DEFAULT_AUTHORITIES),
                  observers=net.get("observers", 1), universities=unis, bus=bus,
                  block_interval=net.get("block_interval", DEFAULT_BLOCK_INTERVAL),
                  gossip_interval=net.get("gossip_interval", DEFAULT_GOSSIP_INTERVAL))
    return world, actions


def _check_actors(world: World, actions: list[dict]) -> None:
    for a in actions:
        for field_name in ("by", "university", "node", "observer", "source", "via"):
            if field_name in a and a[field_name] not in world.nodes:
                raise ScenarioError(f"action at tick {a.get('at')} references unknown actor "
                                    f"{a[field_name]!r}")
        for n in a.get("nodes", []):
            if n not in world.nodes:
                raise ScenarioError(f"unknown actor {n!r}")
        if "key" in a and a["key"] not in world.keys:
            raise ScenarioError(f"unknown key {a['key']!r}")


def run_scenario(script, seed: int | None = None, settle: bool = True) -> list[dict]:
    """Run a scenario script and return its transcript (list of events)."""
    world, actions = world_from_script(with_seed(script, seed))
    return run_world(world, actions, settle=settle).transcript


def run_world(world: World, actions: list[dict], settle: bool = True) -> World:
    _check_actors(world, actions)
    ordered = sorted(enumerate(actions), key=lambda p: (p[1].get("at", 0), p[0]))
    for _, action in ordered:
        at = action.get("at", world.now)
        if action.get("after_settle"):
            world.settle()
        while world.now < at:
            world.tick()
        world.do(action)
    if settle:
        converged = world.settle()
        world.emit("end", converged=converged, heads=sorted(set(world.heads().values())),
                   state_hash=_state_digest(world))
    return world


def _state_digest(world: World) -> str:
    h = hashlib.sha256()
    for name in sorted(world.nodes):
        h.update(name.encode())
        h.update(world.nodes[name].chain.digest())
    return h.hexdigest()
