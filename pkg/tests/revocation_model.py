"""Exhaustive small-model check of the revocation state machine.

The oracle below restates the two-approval rules from scratch over plain
Python sets. ``explore`` walks every call sequence up to a given length,
running the real state machine and the oracle side by side. Revisits of an
(oracle state, remaining depth) pair are pruned: what can happen next depends
only on the state, so pruning loses no sequence.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cerberus.credential import auth_path, tree_from_leaves
from cerberus.errors import RevocationError
from cerberus.revocation import (
    AuthorityListEntry,
    RevocationState,
    Terminated,
    process_hash,
)


def _h(b: bytes) -> bytes:
    return hashlib.sha256(b).digest()


@dataclass(frozen=True)
class Oracle:
    used: frozenset = frozenset()        # (key, doc) pairs that have signed
    processes: tuple = ()                # sorted (ph, doc, frozenset(approvers))
    revoked: frozenset = frozenset()

    def proc(self, ph):
        for p, d, a in self.processes:
            if p == ph:
                return d, a
        return None

    def with_proc(self, ph, doc, approvers):
        rest = [x for x in self.processes if x[0] != ph]
        if approvers is not None:
            rest.append((ph, doc, frozenset(approvers)))
        return tuple(sorted(rest))


class Model:
    def __init__(self, orgs=2, keys_per_org=2, extra_unlisted=0):
        self.keys = [_h(f"key-{o}-{k}".encode()) for o in range(orgs)
                     for k in range(keys_per_org)]
        self.listed = set(self.keys)
        self.keys += [_h(f"outsider-{i}".encode()) for i in range(extra_unlisted)]
        leaves = [_h(bytes([i])) for i in range(4)]
        tree = tree_from_leaves(leaves)
        self.root = tree.root
        self.leaf = leaves[1]
        self.proofs = {self.root: None, self.leaf: (auth_path(tree, 1), tree.root)}
        self.docs = [self.root, self.leaf]
        self.unknown = _h(b"never issued")
        self.state = RevocationState()
        self.state.issued_roots.add(self.root)
        for o in range(orgs):
            org_keys = tuple(self.keys[o * keys_per_org:(o + 1) * keys_per_org])
            self.state.authority_list.append(AuthorityListEntry(_h(f"org{o}".encode()), org_keys))
        self.process_hashes = sorted({process_hash(d, k) for d in self.docs for k in self.keys})
        self.process_hashes.append(_h(b"bogus process"))

    def actions(self):
        for k in self.keys:
            for d in self.docs + [self.unknown]:
                yield ("revoke", k, d)
            for ph in self.process_hashes:
                yield ("confirm", k, ph)

    def oracle_step(self, o: Oracle, action):
        kind, key, arg = action
        if kind == "revoke":
            doc = arg
            if doc not in self.proofs:
                return o, "error"
            if doc in o.revoked or key not in self.listed or (key, doc) in o.used:
                return o, "terminated"
            ph = process_hash(doc, key)
            return Oracle(o.used | {(key, doc)}, o.with_proc(ph, doc, {key}), o.revoked), "pending"
        found = o.proc(arg)
        if found is None:
            return o, "error"
        doc, approvers = found
        if key not in self.listed or (key, doc) in o.used:
            return o, "terminated"
        approvers = approvers | {key}
        used = o.used | {(key, doc)}
        if len(approvers) == 2:
            return Oracle(used, o.with_proc(arg, doc, None), o.revoked | {doc}), "revoked"
        return Oracle(used, o.with_proc(arg, doc, approvers), o.revoked), "pending"

    @staticmethod
    def impl_step(state: RevocationState, action, proofs):
        kind, key, arg = action
        try:
            if kind == "revoke":
                state.revoke_document(key, arg, proofs.get(arg))
                return "pending"
            return "revoked" if state.confirm_revocation(key, arg) else "pending"
        except Terminated:
            return "terminated"
        except RevocationError:
            return "error"


@dataclass
class ExploreStats:
    transitions: int = 0
    states: int = 0
    sequences: int = 0
    revocations: int = 0


def explore(model: Model, depth: int) -> ExploreStats:
    """Check every sequence of up to ``depth`` calls; raises AssertionError on divergence."""
    actions = list(model.actions())
    stats = ExploreStats(sequences=sum(len(actions) ** i for i in range(depth + 1)))
    best: dict[Oracle, int] = {}

    def visit(state: RevocationState, o: Oracle, remaining: int):
        if best.get(o, -1) >= remaining:
            return
        best[o] = remaining
        if remaining == 0:
            return
        for action in actions:
            nxt = state.copy()
            got = model.impl_step(nxt, action, model.proofs)
            o2, want = model.oracle_step(o, action)
            stats.transitions += 1
            assert got == want, (action, got, want)
            # revoke list grows only through a confirm that completes two distinct approvals
            assert set(nxt.revoke_list) == set(o2.revoked), action
            assert set(state.revoke_list) <= set(nxt.revoke_list)
            if set(nxt.revoke_list) != set(state.revoke_list):
                assert action[0] == "confirm" and got == "revoked"
                _, approvers = o.proc(action[2])
                assert len(approvers | {action[1]}) == 2 and action[1] not in approvers
                stats.revocations += 1
            # each key signs a given document at most once, ever
            assert nxt.history == {(k, d) for k, d in o2.used}
            for p in nxt.pending.values():
                assert len(set(p.approvals)) == len(p.approvals) == p.revoke_count
            # the oracle mirrors the whole mutable state, which is what makes pruning sound
            assert {(ph, p.document_hash, frozenset(p.approvals))
                    for ph, p in nxt.pending.items()} == set(o2.processes)
            visit(nxt, o2, remaining - 1)

    visit(model.state, Oracle(), depth)
    stats.states = len(best)
    return stats
