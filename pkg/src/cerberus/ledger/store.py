"""Append-only ledger file plus a JSON manifest.

``ledger.bin`` holds one record per block: a 4-byte big-endian length followed
by the block's canonical bytes. ``ledger.json`` names the network, the genesis
hash and the authority roster. Opening a store replays and re-validates every
block.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

from ..errors import ParseError
from ..keys import address_of
from .chain import BlockRejected, Chain
from .records import Block

LEDGER_FILE = "ledger.bin"
MANIFEST_FILE = "ledger.json"


def manifest_for(chain: Chain) -> dict:
    cfg = chain.config
    return {
        "network_id": cfg.network_id,
        "genesis_hash": chain.genesis_hash.hex(),
        "block_interval": cfg.block_interval,
        "authorities": [
            {"address": address_of(k).hex(), "public_key": k.hex()} for k in cfg.authority_keys
        ],
    }


def split_records(data: bytes) -> list[bytes]:
    records, pos = [], 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ParseError("ledger file: truncated length prefix", pos)
        (n,) = struct.unpack_from(">I", data, pos)
        if pos + 4 + n > len(data):
            raise ParseError(f"ledger file: record of {n} bytes runs past end of file", pos)
        records.append(data[pos + 4:pos + 4 + n])
        pos += 4 + n
    return records


def frame(block: Block) -> bytes:
    rec = block.to_record()
    return struct.pack(">I", len(rec)) + rec


class LedgerStore:
    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)

    @property
    def ledger_path(self) -> Path:
        return self.dir / LEDGER_FILE

    @property
    def manifest_path(self) -> Path:
        return self.dir / MANIFEST_FILE

    def exists(self) -> bool:
        return self.ledger_path.exists()

    def create(self, chain: Chain) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        with open(self.ledger_path, "wb") as f:
            for b in chain.blocks:
                f.write(frame(b))
        self.manifest_path.write_text(json.dumps(manifest_for(chain), indent=2) + "\n")

    def append(self, block: Block) -> None:
        with open(self.ledger_path, "ab") as f:
            f.write(frame(block))
            f.flush()
            os.fsync(f.fileno())

    def read_manifest(self) -> dict:
        return json.loads(self.manifest_path.read_text())

    def load(self) -> Chain:
        """Replay the file; raises on any parse error or invalid block."""
        manifest = self.read_manifest()
        records = split_records(self.ledger_path.read_bytes())
        if not records:
            raise ParseError("ledger file is empty")
        blocks = [Block.from_record(r) for r in records]
        chain = Chain(blocks[0])
        if chain.genesis_hash.hex() != manifest["genesis_hash"]:
            raise BlockRejected(0, ["genesis hash differs from manifest"])
        for b in blocks[1:]:
            chain.append(b)
        return chain

    def save_all(self, chain: Chain) -> None:
        self.create(chain)
