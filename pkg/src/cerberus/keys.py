"""Ed25519 signing keys and address derivation."""
from __future__ import annotations

import hashlib
import os

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

ADDRESS_SIZE = 20
PUBKEY_SIZE = 32
SIGNATURE_SIZE = 64


def address_of(public_key: bytes) -> bytes:
    return hashlib.sha256(public_key).digest()[:ADDRESS_SIZE]


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


class KeyPair:
    def __init__(self, seed: bytes):
        if len(seed) != 32:
            raise ValueError("key seed must be 32 bytes")
        self.seed = bytes(seed)
        self._sk = Ed25519PrivateKey.from_private_bytes(self.seed)
        self.public_key = self._sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        self.address = address_of(self.public_key)

    @classmethod
    def generate(cls) -> "KeyPair":
        return cls(os.urandom(32))

    @classmethod
    def derive(cls, label: str, seed: int | str = 0) -> "KeyPair":
        """Deterministic key for simulations and reproducible workspaces."""
        material = f"cerberus-key/{seed}/{label}".encode("utf-8")
        return cls(hashlib.sha256(material).digest())

    def sign(self, message: bytes) -> bytes:
        return self._sk.sign(message)

    def __repr__(self):
        return f"KeyPair(address={self.address.hex()})"
