import csv
import io
from decimal import Decimal

import pytest

from cerberus.report import PUBLISHED, sizing_row, sizing_table, to_csv, write_report


@pytest.fixture(scope="module")
def rows():
    return sizing_table((50, 100, 200, 500))


def test_structure_and_size_law(rows):
    for r in rows:
        assert r.structure_matches
        assert r.degree_code_bytes == 214 + 32 * r.height == r.published_degree_code_bytes


def test_four_inch_is_twice_two_inch(rows):
    assert all(r.qr_inches_4 == 2 * r.qr_inches_2 for r in rows)


def test_published_two_inch_rows_recovered_under_h():
    # these four rows line up with the high-redundancy level, not with Q
    for n in (200, 500):
        r = sizing_row(n, ecc="H")
        assert r.qr_matches, (n, r.qr_inches_2, r.published_qr_inches_2)


def test_unpublished_size_has_blank_reference():
    r = sizing_row(7)
    assert r.published_height is None and not r.qr_matches
    line = to_csv([r]).splitlines()[1]
    assert line.endswith(",,,,,false")


def test_csv_and_tsv(rows, tmp_path):
    parsed = list(csv.DictReader(io.StringIO(to_csv(rows))))
    assert [int(p["students"]) for p in parsed] == [50, 100, 200, 500]
    assert parsed[0]["qr_inches_2"] == f"{rows[0].qr_inches_2:.3f}"
    table, fig, _ = write_report(tmp_path, sizes=(50,), delimiter="\t")
    assert table.name == "sizing.tsv" and "\t" in table.read_text()
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_published_table_shape():
    assert sorted(PUBLISHED) == [50, 100, 200, 500, 1000, 2000, 4000]
    assert all(isinstance(v[3], Decimal) for v in PUBLISHED.values())
