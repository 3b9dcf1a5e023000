"""``cerberus`` command line.

Exit codes: 0 success, 1 verification negative (or audit violations),
2 malformed input, 3 policy or authorisation failure.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import network, report
from .codec import (
    decode_degree_code,
    decode_id_transcript_code,
    qr_spec,
)
from .credential import load_batch
from .errors import CerberusError, ParseError, PolicyError, RevocationError, ValidationError
from .ledger import audit_chain
from .revocation import Terminated
from .verify import verify_degree, verify_transcript
from .workspace import DEGREE_FILE, TRANSCRIPT_FILE, Workspace, read_payload, write_payload

EXIT_OK, EXIT_NEGATIVE, EXIT_MALFORMED, EXIT_POLICY = 0, 1, 2, 3


class Failure(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2))


def _run(fn):
    """Map library exceptions onto the exit-code contract."""
    try:
        return fn()
    except (PolicyError, RevocationError, Terminated) as e:
        raise Failure(str(e), EXIT_POLICY) from None
    except (ParseError, ValidationError, CerberusError, ValueError, KeyError, OSError) as e:
        raise Failure(f"{type(e).__name__}: {e}", EXIT_MALFORMED) from None


def _hex(value: str, what: str, size: int = 32) -> bytes:
    try:
        raw = bytes.fromhex(value)
    except ValueError:
        raise Failure(f"{what} must be hex", EXIT_MALFORMED) from None
    if len(raw) != size:
        raise Failure(f"{what} must be {size} bytes", EXIT_MALFORMED)
    return raw


@click.group()
@click.option("--workspace", "-w", type=click.Path(file_okay=False), default=None,
              help="Workspace directory (CERBERUS_WORKSPACE takes precedence).")
@click.pass_context
def main(ctx, workspace):
    """Issue, verify and revoke academic credentials on a permissioned ledger."""
    path = os.environ.get("CERBERUS_WORKSPACE") or workspace or "."
    ctx.obj = Workspace(path)


pass_ws = click.make_pass_decorator(Workspace)


@main.command()
@click.option("--authorities", "-n", type=click.IntRange(1, 255), default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for deterministic key derivation.")
@click.option("--network-id", default="cerberus", show_default=True)
@click.option("--block-interval", type=click.IntRange(1), default=5, show_default=True)
@pass_ws
def init(ws, authorities, seed, network_id, block_interval):
    """Create a workspace with a genesis block."""
    def go():
        with ws.locked():
            new = Workspace.init(ws.dir, authorities, seed, network_id, block_interval)
            _emit({"workspace": str(new.dir), "genesis_hash": new.chain.genesis_hash.hex(),
                   "authorities": authorities})
    _run(go)


@main.group()
def university():
    """University onboarding."""


@university.command("register")
@click.option("--name", required=True)
@click.option("--policy", required=True, help="Signing policy, e.g. 2-of-3.")
@click.option("--signers", default=None, help="Comma-separated signer key names.")
@click.option("--by", default="authority-0", show_default=True, help="Registering authority.")
@pass_ws
def university_register(ws, name, policy, signers, by):
    """Register a university and certify its signing keys."""
    def go():
        with ws.locked():
            names = signers.split(",") if signers else None
            block, info = ws.register_university(name, policy, names, by)
            _emit({"university": name, "block": block.height, **info})
    _run(go)


@main.command()
@click.option("--batch", "batch_file", required=True, type=click.Path(dir_okay=False))
@click.option("--university", required=True)
@click.option("--sign", required=True, help="Comma-separated signer keys.")
@click.option("--label", default=None)
@pass_ws
def issue(ws, batch_file, university, sign, label):
    """Anchor a batch root on the ledger and write per-student payloads."""
    def go():
        records = load_batch(batch_file)
        with ws.locked():
            summary = ws.issue(records, university, [s for s in sign.split(",") if s], label)
            summary["payloads"] = str(ws.payload_dir)
            _emit(summary)
    _run(go)


@main.group()
def code():
    """QR payload files."""


@code.command("emit")
@click.option("--student", required=True, help="Degree serial.")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--distance", type=float, default=2.0, show_default=True,
              help="Scanning distance in inches.")
@click.option("--qr-image", is_flag=True, help="Also render PNG QR symbols.")
@pass_ws
def code_emit(ws, student, out, distance, qr_image):
    """Copy a student's payloads out and report the QR symbol size."""
    def go():
        deg_path, tr_path = ws.student_files(student)
        deg, tr = deg_path.read_bytes(), tr_path.read_bytes()
        target = Path(out) if out else deg_path.parent
        result = {"student": student, "directory": str(target)}
        for stem, data in ((DEGREE_FILE, deg), (TRANSCRIPT_FILE, tr)):
            write_payload(target, stem, data)
            result[stem] = qr_spec(len(data), str(distance)).as_dict()
        if qr_image:
            result["images"] = [str(_render_qr(data, target / f"{stem}.png"))
                                for stem, data in ((DEGREE_FILE, deg), (TRANSCRIPT_FILE, tr))]
        _emit(result)
    _run(go)


def _render_qr(data: bytes, path: Path) -> Path:
    try:
        import segno
    except ImportError:
        raise Failure("--qr-image needs the optional 'segno' package, which is not installed",
                      EXIT_MALFORMED) from None
    segno.make(data, error="q", mode="byte", boost_error=False).save(str(path), scale=4)
    return path


@main.group()
def verify():
    """Check credentials; needs no keys."""


@verify.command("degree")
@click.option("--code", "code_file", required=True, type=click.Path(dir_okay=False))
@pass_ws
def verify_degree_cmd(ws, code_file):
    """Verify a degree_code (.bin or .b64) against the ledger."""
    payload = _run(lambda: decode_degree_code(read_payload(code_file)))
    result = _run(lambda: verify_degree(payload, ws.chain))
    click.echo(result.to_json())
    sys.exit(EXIT_OK if result.ok else EXIT_NEGATIVE)


@verify.command("transcript")
@click.option("--code", "code_file", required=True, type=click.Path(dir_okay=False))
@click.option("--id", "id_number", required=True, help="Id document number, entered by hand.")
@click.option("--expect", required=True, help="id/transcript hash from the degree code.")
def verify_transcript_cmd(code_file, id_number, expect):
    """Check an id/transcript_code against the hash committed in the degree code."""
    payload = _run(lambda: decode_id_transcript_code(read_payload(code_file)))
    expected = _hex(expect, "--expect")
    ok = verify_transcript(payload, id_number, expected)
    click.echo(json.dumps({"match": ok}))
    sys.exit(EXIT_OK if ok else EXIT_NEGATIVE)


@main.group()
def revoke():
    """Two-approval revocation of a student leaf or a whole batch root."""


@revoke.command("init")
@click.option("--document", required=True, help="Leaf digest or batch root (hex).")
@click.option("--key", "key_label", required=True)
@pass_ws
def revoke_init(ws, document, key_label):
    doc = _hex(document, "--document")

    def go():
        with ws.locked():
            ph, block = ws.revoke_init(doc, key_label)
            _emit({"process_hash": ph.hex(), "block": block.height, "status": "pending"})
    _run(go)


@revoke.command("confirm")
@click.option("--process", "process_hash", required=True, help="P_H printed by `revoke init`.")
@click.option("--key", "key_label", required=True)
@pass_ws
def revoke_confirm(ws, process_hash, key_label):
    ph = _hex(process_hash, "--process")

    def go():
        with ws.locked():
            done, block = ws.revoke_confirm(ph, key_label)
            _emit({"process_hash": ph.hex(), "block": block.height,
                   "status": "revoked" if done else "pending"})
    _run(go)


@revoke.command("add-authority")
@click.option("--university", required=True)
@click.option("--key", "key_label", required=True, help="A key already on the authority list.")
@click.option("--signers", default=None,
              help="The two university keys to list (needed when it has more than two).")
@pass_ws
def revoke_add_authority(ws, university, key_label, signers):
    """Put two of a university's signer keys on the revocation authority list."""
    def go():
        names = signers.split(",") if signers else None
        with ws.locked():
            block = ws.add_revoking_authority(university, key_label, names)
            _emit({"university": university, "block": block.height})
    _run(go)


@main.command()
@click.option("--target", required=True, help="University name, key label or hex address.")
@click.option("--by", default="authority-0", show_default=True)
@pass_ws
def blacklist(ws, target, by):
    """Blacklist a university or key from the next block on."""
    def go():
        with ws.locked():
            block = ws.blacklist(target, by)
            _emit({"target": target, "block": block.height})
    _run(go)


@main.command()
@pass_ws
def audit(ws):
    """Re-check every block of the persisted ledger."""
    rep = _run(lambda: audit_chain(ws.dir))
    _emit(rep.to_dict())
    sys.exit(EXIT_OK if rep.ok else EXIT_NEGATIVE)


@main.group()
def sim():
    """Multi-node simulation."""


@sim.command("run")
@click.option("--scenario", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Also write the transcript here.")
def sim_run(scenario, seed, out):
    """Run a scenario script; prints the transcript as JSON lines."""
    def go():
        script = json.loads(Path(scenario).read_text())
        world, actions = network.world_from_script(network.with_seed(script, seed))
        return network.run_world(world, actions)
    world = _run(go)
    text = world.transcript_lines()
    if out:
        Path(out).write_text(text)
    click.echo(text, nl=False)


@main.command("report")
@click.option("--out", type=click.Path(file_okay=False), default="report", show_default=True)
@click.option("--ecc", type=click.Choice(["L", "M", "Q", "H"]), default="Q", show_default=True)
@click.option("--tsv", is_flag=True, help="Tab-delimited instead of CSV.")
def report_cmd(out, ecc, tsv):
    """Batch size versus payload and QR size; writes a table and a figure."""
    delim = "\t" if tsv else ","
    table, fig, rows = _run(lambda: report.write_report(Path(out), ecc=ecc, delimiter=delim))
    click.echo(table.read_text(), nl=False)
    click.echo(f"wrote {table} and {fig}", err=True)


if __name__ == "__main__":
    main()
