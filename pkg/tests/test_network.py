import json
from pathlib import Path

import pytest

from cerberus.errors import PolicyError
from cerberus.ledger import blacklist_key
from cerberus.network import BusConfig, ScenarioError, World, run_scenario, run_world, world_from_script

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def load(name):
    return json.loads((SCENARIOS / f"{name}.json").read_text())


def events(transcript, kind):
    return [e for e in transcript if e["event"] == kind]


def admin_tx(world, by="authority-0", target=b"\x01" * 20):
    node = world.node(by)
    return blacklist_key(node.chain, node.key, target)


def test_broadcast_reaches_everyone_without_drops():
    w = World(universities=[{"name": "NUST"}])
    schedule = w.broadcast_tx("authority-0", admin_tx(w))
    assert set(schedule) == set(w.nodes) - {"authority-0"}
    assert all(at == 1 for at in schedule.values())


def test_lossy_schedule_is_seed_deterministic():
    def schedule(seed):
        w = World(authorities=5, observers=4, bus=BusConfig(seed=seed, drop_rate=0.2))
        return [w.broadcast_tx("authority-0", admin_tx(w, target=bytes([i]) * 20))
                for i in range(20)]
    a, b = schedule(3), schedule(3)
    assert a == b
    assert any(None in s.values() for s in a)
    assert schedule(4) != a


def test_per_link_latency():
    w = World(bus=BusConfig(link_latency={("authority-0", "observer-0"): 4}))
    s = w.broadcast("authority-0", "status", 0)
    assert s["observer-0"] == 4 and s["authority-1"] == 1


def test_bus_config_bounds():
    with pytest.raises(ValueError):
        BusConfig(drop_rate=1.0)
    with pytest.raises(ValueError):
        BusConfig(latency_ticks=0)


def test_observer_cannot_originate():
    w = World()
    with pytest.raises(PolicyError):
        w.broadcast_tx("observer-0", admin_tx(w))
    assert events(w.transcript, "tx_rejected")[0]["node"] == "observer-0"
    assert not w.bus.queue


def test_convergence_and_no_empty_blocks():
    w = World(universities=[{"name": "NUST"}])
    w.run(20)
    assert not events(w.transcript, "block_produced")
    assert all(n.chain.height == 0 for n in w.nodes.values())
    w.broadcast_tx("authority-0", admin_tx(w))
    assert w.settle()
    assert len(set(w.heads().values())) == 1
    assert len(events(w.transcript, "block_produced")) == 1


def test_convergence_under_drops():
    w = World(authorities=4, observers=2, bus=BusConfig(seed=9, drop_rate=0.3))
    for i in range(5):
        w.broadcast_tx("authority-0", admin_tx(w, target=bytes([i + 1]) * 20))
    assert w.settle()
    assert len(set(w.heads().values())) == 1
    assert all(len(n.chain.state.blacklist) == 5 for n in w.nodes.values())
    assert w.bus.dropped


@pytest.mark.parametrize("node,style", [
    ("observer-0", "out_of_turn"), ("NUST", "out_of_turn"), ("authority-2", "out_of_turn"),
    ("authority-1", "unsigned_tx"), ("authority-1", "wrong_prev"),
])
def test_bad_block_leaves_honest_heads_unchanged(node, style):
    w = World(universities=[{"name": "NUST"}])
    w.broadcast_tx("authority-0", admin_tx(w))
    w.settle()
    before = w.heads()
    w.do({"action": "bad_block", "node": node, "style": style})
    w.run(10)
    honest = {n for n in w.nodes if n != node}
    assert {n: w.heads()[n] for n in honest} == {n: before[n] for n in honest}
    rejected = {e["node"] for e in events(w.transcript, "block_rejected")}
    assert rejected == honest


def test_bad_block_by_scheduled_node_is_a_script_error():
    w = World()
    with pytest.raises(ScenarioError):
        w.do({"action": "bad_block", "node": "authority-0", "style": "out_of_turn"})


def test_unsigned_tx_rejected_everywhere():
    t = run_scenario([{"at": 1, "action": "register_university", "by": "authority-0",
                       "university": "NUST"},
                      {"at": 10, "action": "unsigned_tx", "node": "NUST"}])
    assert len(events(t, "block_produced")) == 1
    assert {e["reason"] for e in events(t, "tx_rejected")} == {"bad-signature"}


def test_equivocation_detected():
    w = World(universities=[{"name": "NUST"}])
    for i in range(2):
        w.broadcast_tx("authority-0", admin_tx(w, target=bytes([i + 1]) * 20))
    w.run(1)
    w.do({"action": "equivocate", "node": "authority-0"})
    w.run(10)
    assert events(w.transcript, "equivocation_detected")


def test_issuance_scenario_ends_verified():
    t = run_scenario(load("issue_revoke"))
    first = events(t, "verification")[0]
    assert first["verdict"] == "Verified" and first["transcript"] is True
    assert t[-1]["event"] == "end" and t[-1]["converged"]


def test_revocation_scenario_two_approvals_then_revoked():
    t = run_scenario(load("issue_revoke"))
    calls = [e for e in events(t, "tx_included") if e["kind"] == "REVOCATION_CALL"]
    assert [c["detail"] for c in calls] == ["", "pending", "revoked"]
    assert calls[1]["process_hash"] == calls[2]["process_hash"]
    after = events(t, "verification")[1:]
    assert after[0]["verdict"] == "Revoked" and after[0]["revocation_source"] == "individual"
    assert after[1]["verdict"] == "Verified"


@pytest.mark.parametrize("name", ["issue_revoke", "byzantine"])
def test_same_seed_same_transcript(name):
    script = load(name)
    a, b = run_scenario(script), run_scenario(script)
    assert json.dumps(a) == json.dumps(b)
    assert a != run_scenario(script, seed=1234)


def test_role_separation_across_scenarios():
    for name in ("issue_revoke", "byzantine"):
        w, actions = world_from_script(load(name))
        run_world(w, actions)
        authorities = {n for n, x in w.nodes.items() if x.is_authority}
        auth_addrs = {w.nodes[n].key.address for n in authorities}
        assert {e["node"] for e in events(w.transcript, "block_produced")} <= authorities
        observers = {n for n, x in w.nodes.items() if x.role.name == "OBSERVER"}
        assert not {e["node"] for e in events(w.transcript, "tx_submitted")} & observers
        for n, node in w.nodes.items():
            if n in ("authority-1", "authority-2") and name == "byzantine":
                continue  # tampered replicas
            assert all(b.producer in auth_addrs for b in node.chain.blocks[1:])


def test_honest_observer_detects_collusion():
    t = run_scenario(load("byzantine"))
    audits = events(t, "audit")
    assert audits[0]["source"] == "authority-1" and not audits[0]["ok"]
    assert audits[0]["diverges_at"] == [2]
    assert audits[1]["ok"]


def test_tamper_even_with_honest_resign_is_flagged():
    # every authority but one colludes; the observer still sees it
    t = run_scenario({"network": {"authorities": 4},
                      "actions": [{"at": 1, "action": "register_university", "by": "authority-0",
                                   "university": "NUST"},
                                  {"at": 20, "action": "tamper", "height": 1,
                                   "nodes": ["authority-0", "authority-1", "authority-2"]},
                                  {"at": 21, "action": "audit", "source": "authority-0"}]},
                     settle=False)
    assert not events(t, "audit")[0]["ok"]


@pytest.mark.parametrize("action", [
    {"action": "register_university", "by": "authority-9", "university": "NUST"},
    {"action": "issue_batch", "university": "MIT"},
    {"action": "revoke", "key": "nobody/key", "batch": "b"},
    {"action": "tamper", "nodes": ["ghost"], "height": 1},
])
def test_unknown_actor_is_an_error(action):
    with pytest.raises(ScenarioError):
        run_scenario([action])


def test_unknown_action_is_an_error():
    with pytest.raises(ScenarioError):
        run_scenario([{"action": "teleport"}])


def test_crash_and_recover_catch_up():
    w = World(universities=[{"name": "NUST"}])
    w.do({"action": "crash", "node": "observer-0"})
    w.broadcast_tx("authority-0", admin_tx(w))
    w.run(10)
    assert w.node("observer-0").chain.height == 0
    w.do({"action": "recover", "node": "observer-0"})
    assert w.settle()
    assert w.node("observer-0").chain.height == 1
