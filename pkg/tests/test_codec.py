from dataclasses import replace
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cerberus import qrtables
from cerberus.codec import (
    DEGREE_CODE_OVERHEAD,
    IdTranscriptCodePayload,
    decode_degree_code,
    decode_id_transcript_code,
    encode_degree_code,
    encode_id_transcript_code,
    from_text,
    min_size_inches,
    qr_spec,
    to_text,
)
from cerberus.credential import Course, DegreeInfo, canonical_serialize
from cerberus.errors import EncodingError, ParseError
from cerberus.fixtures import make_batch
from cerberus.issuance import prepare_batch
from published_capacity import PUBLISHED_BYTE_CAPACITY


def creds(n, **kw):
    return prepare_batch(make_batch(n, **kw)).credentials(9, bytes(range(32)))


def test_capacity_table_matches_published_table():
    for version, row in PUBLISHED_BYTE_CAPACITY.items():
        for ecc, expected in zip("LMQH", row):
            assert qrtables.byte_capacity(version, ecc) == expected, (version, ecc)


def test_modules_per_side():
    assert qrtables.modules_per_side(1) == 21
    assert qrtables.modules_per_side(21) == 101
    assert qrtables.modules_per_side(40) == 177


@pytest.mark.parametrize("n,expected", [(200, 8), (1000, 10)])
def test_degree_code_size_law(n, expected):
    c = creds(n)[0]
    data = encode_degree_code(c.degree_payload)
    assert len(c.degree_payload.auth_path) == expected
    assert len(data) == 214 + 32 * expected


def test_degree_code_layout():
    c = creds(5, fixed_width=False)[3]
    p = c.degree_payload
    data = encode_degree_code(p)
    text = canonical_serialize(p.degree_info)
    assert data[0] == 1 and data[1] == len(p.auth_path)
    assert data[2:2 + len(text)] == text
    off = 2 + len(text)
    assert data[off:off + 32] == p.id_transcript_hash
    assert int.from_bytes(data[off + 32:off + 40], "big") == 9
    assert data[off + 40:off + 72] == bytes(range(32))
    assert int.from_bytes(data[off + 72:off + 76], "big") == 3
    assert data[off + 76:] == b"".join(p.auth_path.siblings)
    assert len(data) == DEGREE_CODE_OVERHEAD + len(text) + 32 * len(p.auth_path)


def test_round_trips():
    for c in creds(13, fixed_width=False):
        assert decode_degree_code(encode_degree_code(c.degree_payload)) == c.degree_payload
        t = encode_id_transcript_code(c.transcript_payload)
        assert decode_id_transcript_code(t) == c.transcript_payload
        assert from_text(to_text(t)) == t


def test_transcript_code_omits_id_number():
    c = creds(1, fixed_width=False)[0]
    data = encode_id_transcript_code(c.transcript_payload)
    assert c.record.id_transcript.id_document_number.encode() not in data


def test_grades_courses_mismatch_is_encode_error():
    p = IdTranscriptCodePayload((Course("c", "t", 3),), (), Decimal(3), Decimal(3))
    with pytest.raises(EncodingError):
        encode_id_transcript_code(p)


@pytest.mark.parametrize("mutate", [
    lambda d: b"",
    lambda d: b"\x02" + d[1:],
    lambda d: d[:1] + b"\x00" + d[2:],
    lambda d: d[:-1],
    lambda d: d + b"\x00",
    lambda d: d[:1] + b"\x21" + d[2:],
])
def test_malformed_degree_code(mutate):
    data = encode_degree_code(creds(4, fixed_width=False)[0].degree_payload)
    with pytest.raises(ParseError):
        decode_degree_code(mutate(data))


def test_parse_error_reports_offset():
    data = bytearray(encode_degree_code(creds(4, fixed_width=False)[0].degree_payload))
    data[0] = 7
    with pytest.raises(ParseError) as e:
        decode_degree_code(bytes(data))
    assert e.value.offset == 0


def test_oversized_payload_rejected():
    p = creds(2, fixed_width=False)[0].degree_payload
    big = replace(p, degree_info=DegreeInfo("x" * 2000, "s", "t", 2000, "u"))
    with pytest.raises(EncodingError):
        encode_degree_code(big)


def test_bad_base64():
    with pytest.raises(ParseError):
        from_text("not base64!!")


def test_qr_spec_examples():
    s = qr_spec(406, 2)
    assert s.capacity >= 406
    assert qrtables.byte_capacity(s.version - 1, "Q") < 406
    assert s.min_size_inches == Decimal(2) / 10 * s.modules_per_side / 25
    assert min_size_inches(101, 2) == Decimal("0.808")
    assert min_size_inches(117, 4) == Decimal("1.872")


def test_qr_spec_too_large():
    with pytest.raises(ValueError):
        qr_spec(1664, 2)
    assert qr_spec(1663, 2).version == 40


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1662), st.integers(0, 1663), st.integers(1, 40))
def test_qr_spec_monotone_and_linear(a, b, dist):
    lo, hi = sorted((a, b))
    assert qr_spec(lo, dist).min_size_inches <= qr_spec(hi, dist).min_size_inches
    assert qr_spec(a, 2 * dist).min_size_inches == 2 * qr_spec(a, dist).min_size_inches
