"""Subprocess goldens for the ``cerberus`` command line."""
import importlib.util
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
STUDENTS = ROOT / "samples" / "students.json"
SERIAL = "D2020-000002"


def cli(*args, ws=None, env=None, check=None):
    full_env = {k: v for k, v in os.environ.items() if k != "CERBERUS_WORKSPACE"}
    full_env.update(env or {})
    cmd = [sys.executable, "-m", "cerberus.cli"]
    if ws is not None:
        cmd += ["-w", str(ws)]
    p = subprocess.run(cmd + [str(a) for a in args], capture_output=True, text=True,
                       env=full_env)
    if check is not None:
        assert p.returncode == check, (args, p.returncode, p.stdout, p.stderr)
    return p


def out(p):
    return json.loads(p.stdout)


def setup_workspace(ws, policy="2-of-3"):
    cli("init", "--authorities", 3, "--seed", 4, ws=ws, check=0)
    cli("university", "register", "--name", "NUST", "--policy", policy, ws=ws, check=0)
    return out(cli("issue", "--batch", STUDENTS, "--university", "NUST",
                   "--sign", "signer-1,signer-3", "--label", "class-2020", ws=ws, check=0))


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    d = tmp_path_factory.mktemp("ws")
    setup_workspace(d)
    return d


def degree_file(ws, serial=SERIAL):
    return ws / "payloads" / serial / "degree_code.bin"


def test_issue_summary(tmp_path):
    s = setup_workspace(tmp_path)
    assert s["students"] == 6 and s["height"] == 3 and s["block"] == 2
    assert sorted(p.name for p in (tmp_path / "payloads").iterdir())[0] == "D2020-000000"


def test_sub_threshold_issue_exits_3(ws):
    p = cli("issue", "--batch", STUDENTS, "--university", "NUST", "--sign", "signer-2", ws=ws)
    assert p.returncode == 3 and "policy" in p.stderr.lower()


def test_verify_round_trip(ws):
    p = cli("verify", "degree", "--code", degree_file(ws), ws=ws, check=0)
    r = out(p)
    assert r["verdict"] == "Verified"
    b64 = degree_file(ws).with_suffix(".b64")
    assert out(cli("verify", "degree", "--code", b64, ws=ws, check=0))["verdict"] == "Verified"
    record = next(r for r in json.loads(STUDENTS.read_text()) if r["serial"] == SERIAL)
    tr = ws / "payloads" / SERIAL / "transcript_code.b64"
    ok = cli("verify", "transcript", "--code", tr, "--id", record["id_number"],
             "--expect", r["details"]["id_transcript_hash"], check=0)
    assert out(ok) == {"match": True}
    bad = cli("verify", "transcript", "--code", tr, "--id", "0000000000000",
              "--expect", r["details"]["id_transcript_hash"], check=1)
    assert out(bad) == {"match": False}


def test_tampered_payload_exits_1(ws, tmp_path):
    data = bytearray(degree_file(ws).read_bytes())
    data[3] ^= 0x01  # inside the student name
    f = tmp_path / "tampered.bin"
    f.write_bytes(bytes(data))
    p = cli("verify", "degree", "--code", f, ws=ws, check=1)
    assert out(p)["verdict"] == "ContentMismatch"


@pytest.mark.parametrize("content", [b"", b"\x07garbage", b"not base64 at all!!"])
def test_malformed_payload_exits_2(ws, tmp_path, content):
    f = tmp_path / "junk.bin"
    f.write_bytes(content)
    assert cli("verify", "degree", "--code", f, ws=ws).returncode == 2


def test_malformed_arguments_exit_2(ws, tmp_path):
    assert cli("revoke", "init", "--document", "xyz", "--key", "accreditor/key-1",
               ws=ws).returncode == 2
    assert cli("verify", "transcript", "--code", degree_file(ws), "--id", "1",
               "--expect", "00" * 32).returncode == 2
    assert cli("issue", "--batch", tmp_path / "missing.json", "--university", "NUST",
               "--sign", "signer-1", ws=ws).returncode == 2
    assert cli("university", "register", "--name", "X", "--policy", "two", ws=ws).returncode == 2


def test_unlisted_key_revoke_exits_3(ws):
    root = json.loads((ws / "workspace.json").read_text())["batches"]["class-2020"]["root"]
    p = cli("revoke", "init", "--document", root, "--key", "NUST/signer-1", ws=ws)
    assert p.returncode == 3


def test_full_revocation_flow(tmp_path):
    setup_workspace(tmp_path)
    v = out(cli("verify", "degree", "--code", degree_file(tmp_path), ws=tmp_path, check=0))
    leaf = v["details"]["leaf"]
    # NUST has three signers; a revoking authority lists exactly two
    assert cli("revoke", "add-authority", "--university", "NUST", "--key", "accreditor/key-1",
               ws=tmp_path).returncode == 2
    cli("revoke", "add-authority", "--university", "NUST", "--key", "accreditor/key-1",
        "--signers", "signer-1,signer-2", ws=tmp_path, check=0)
    init = out(cli("revoke", "init", "--document", leaf, "--key", "NUST/signer-1",
                   ws=tmp_path, check=0))
    assert init["status"] == "pending"
    ph = init["process_hash"]
    # the same key cannot approve twice
    assert cli("revoke", "confirm", "--process", ph, "--key", "NUST/signer-1",
               ws=tmp_path).returncode == 3
    done = out(cli("revoke", "confirm", "--process", ph, "--key", "accreditor/key-2",
                   ws=tmp_path, check=0))
    assert done["status"] == "revoked"
    r = out(cli("verify", "degree", "--code", degree_file(tmp_path), ws=tmp_path, check=1))
    assert r["verdict"] == "Revoked" and r["details"]["revocation_source"] == "individual"
    other = degree_file(tmp_path, "D2020-000001")
    assert out(cli("verify", "degree", "--code", other, ws=tmp_path, check=0))["verdict"] == \
        "Verified"
    assert out(cli("audit", ws=tmp_path, check=0))["ok"]


def test_batch_revocation_and_blacklist(tmp_path):
    s = setup_workspace(tmp_path)
    ph = out(cli("revoke", "init", "--document", s["root"], "--key", "accreditor/key-1",
                 ws=tmp_path, check=0))["process_hash"]
    cli("revoke", "confirm", "--process", ph, "--key", "accreditor/key-2", ws=tmp_path, check=0)
    for d in sorted((tmp_path / "payloads").iterdir()):
        p = cli("verify", "degree", "--code", d / "degree_code.bin", ws=tmp_path, check=1)
        assert out(p)["details"]["revocation_source"] == "batch"
    cli("blacklist", "--target", "NUST", ws=tmp_path, check=0)
    assert cli("issue", "--batch", STUDENTS, "--university", "NUST",
               "--sign", "signer-1,signer-2", ws=tmp_path).returncode == 3
    assert cli("blacklist", "--target", "NUST", "--by", "NUST/org", ws=tmp_path).returncode == 3


def test_code_emit(ws, tmp_path):
    r = out(cli("code", "emit", "--student", SERIAL, "--out", tmp_path, ws=ws, check=0))
    assert (tmp_path / "degree_code.bin").read_bytes() == degree_file(ws).read_bytes()
    assert r["degree_code"]["version"] >= 1 and r["degree_code"]["ecc_level"] == "Q"
    assert cli("code", "emit", "--student", "D1999-0", ws=ws).returncode == 2


def test_qr_image_without_renderer(ws, tmp_path):
    if importlib.util.find_spec("segno"):
        pytest.skip("segno installed")
    p = cli("code", "emit", "--student", SERIAL, "--out", tmp_path, "--qr-image", ws=ws)
    assert p.returncode == 2 and "segno" in p.stderr


def test_audit_detects_tampered_ledger_file(tmp_path):
    setup_workspace(tmp_path)
    f = tmp_path / "ledger.bin"
    data = bytearray(f.read_bytes())
    data[len(data) // 2] ^= 0x04
    f.write_bytes(bytes(data))
    p = cli("audit", ws=tmp_path)
    assert p.returncode == 1 and not out(p)["ok"]
    # commands that open the ledger refuse it
    assert cli("blacklist", "--target", "NUST", ws=tmp_path).returncode == 2


def test_env_var_overrides_flag(tmp_path):
    real, decoy = tmp_path / "real", tmp_path / "decoy"
    cli("init", ws=decoy, env={"CERBERUS_WORKSPACE": str(real)}, check=0)
    assert (real / "ledger.bin").exists() and not decoy.exists()


def test_init_twice_refused(tmp_path):
    cli("init", ws=tmp_path, check=0)
    assert cli("init", ws=tmp_path).returncode == 2


def test_sim_run(tmp_path):
    f = tmp_path / "t.jsonl"
    p = cli("sim", "run", "--scenario", ROOT / "scenarios" / "issue_revoke.json", "--seed", 3,
            "--out", f, check=0)
    lines = [json.loads(x) for x in p.stdout.splitlines()]
    assert lines[-1]["event"] == "end" and f.read_text() == p.stdout
    again = cli("sim", "run", "--scenario", ROOT / "scenarios" / "issue_revoke.json",
                "--seed", 3, check=0)
    assert again.stdout == p.stdout
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"action": "verify", "via": "nobody", "batch": "x"}]))
    assert cli("sim", "run", "--scenario", bad).returncode == 2


def test_report(tmp_path):
    p = cli("report", "--out", tmp_path, check=0)
    assert p.stdout.splitlines()[0].startswith("students,height,sibling_bytes,degree_code_bytes,")
    assert (tmp_path / "sizing.csv").exists() and (tmp_path / "sizing.png").exists()


def test_two_runs_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        setup_workspace(d)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name != ".lock")
    assert files == sorted(p.relative_to(b) for p in b.rglob("*")
                           if p.is_file() and p.name != ".lock")
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
