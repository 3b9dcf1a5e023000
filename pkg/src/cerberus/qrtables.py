"""QR symbol capacity, derived from the ISO/IEC 18004 error-correction tables.

Only the per-version block structure is transcribed; data capacities are
computed from it the same way an encoder would.
"""
from __future__ import annotations

from functools import lru_cache

MIN_VERSION, MAX_VERSION = 1, 40
ECC_LEVELS = ("L", "M", "Q", "H")

# EC codewords per block, index = version (index 0 unused).
_EC_PER_BLOCK = {
    "L": (0, 7, 10, 15, 20, 26, 18, 20, 24, 30, 18, 20, 24, 26, 30, 22, 24, 28, 30, 28, 28,
          28, 28, 30, 30, 26, 28, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30),
    "M": (0, 10, 16, 26, 18, 24, 16, 18, 22, 22, 26, 30, 22, 22, 24, 24, 28, 28, 26, 26, 26,
          26, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28),
    "Q": (0, 13, 22, 18, 26, 18, 24, 18, 22, 20, 24, 28, 26, 24, 20, 30, 24, 28, 28, 26, 30,
          28, 30, 30, 30, 30, 28, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30),
    "H": (0, 17, 28, 22, 16, 22, 28, 26, 26, 24, 28, 24, 28, 22, 24, 24, 30, 28, 28, 26, 28,
          30, 24, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30),
}

# Number of EC blocks, index = version.
_NUM_BLOCKS = {
    "L": (0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 4, 4, 4, 4, 4, 6, 6, 6, 6, 7, 8,
          8, 9, 9, 10, 12, 12, 12, 13, 14, 15, 16, 17, 18, 19, 19, 20, 21, 22, 24, 25),
    "M": (0, 1, 1, 1, 2, 2, 4, 4, 4, 5, 5, 5, 8, 9, 9, 10, 10, 11, 13, 14, 16,
          17, 17, 18, 20, 21, 23, 25, 26, 28, 29, 31, 33, 35, 37, 38, 40, 43, 45, 47, 49),
    "Q": (0, 1, 1, 2, 2, 4, 4, 6, 6, 8, 8, 8, 10, 12, 16, 12, 17, 16, 18, 21, 20,
          23, 23, 25, 27, 29, 34, 34, 35, 38, 40, 43, 45, 48, 51, 53, 56, 59, 62, 65, 68),
    "H": (0, 1, 1, 2, 4, 4, 4, 5, 6, 8, 8, 11, 11, 16, 16, 18, 16, 19, 21, 25, 25,
          25, 34, 30, 32, 35, 37, 40, 42, 45, 48, 51, 54, 57, 60, 63, 66, 70, 74, 77, 81),
}


def modules_per_side(version: int) -> int:
    return 17 + 4 * version


def _check(version: int, ecc: str) -> None:
    if not MIN_VERSION <= version <= MAX_VERSION:
        raise ValueError(f"QR version must be 1..40, got {version}")
    if ecc not in ECC_LEVELS:
        raise ValueError(f"unknown ECC level {ecc!r}")


def raw_data_modules(version: int) -> int:
    """Modules left for codewords after finder, timing, alignment and version patterns."""
    n = (16 * version + 128) * version + 64
    if version >= 2:
        align = version // 7 + 2
        n -= (25 * align - 10) * align - 55
        if version >= 7:
            n -= 36
    return n


def total_codewords(version: int) -> int:
    return raw_data_modules(version) // 8


def data_codewords(version: int, ecc: str) -> int:
    _check(version, ecc)
    return total_codewords(version) - _EC_PER_BLOCK[ecc][version] * _NUM_BLOCKS[ecc][version]


@lru_cache(maxsize=None)
def byte_capacity(version: int, ecc: str) -> int:
    """Maximum payload bytes in byte mode (4-bit mode indicator + count field)."""
    count_bits = 8 if version <= 9 else 16
    return (data_codewords(version, ecc) * 8 - 4 - count_bits) // 8


def smallest_version(payload_len: int, ecc: str = "Q") -> int:
    for v in range(MIN_VERSION, MAX_VERSION + 1):
        if byte_capacity(v, ecc) >= payload_len:
            return v
    raise ValueError(
        f"{payload_len} bytes exceed QR version 40 byte capacity at ECC {ecc} "
        f"({byte_capacity(MAX_VERSION, ecc)} bytes)")
