"""Batch-size versus payload and QR size: the numbers behind the sizing table.

Each row builds a real fixture batch, encodes one degree code, and sizes the
QR symbol at 2 and 4 inch scanning distance. The published figures are kept
alongside so deviations are visible row by row.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from decimal import Decimal
from pathlib import Path

from .codec import DEFAULT_ECC, encode_degree_code, qr_spec
from .fixtures import make_batch
from .issuance import prepare_batch

BATCH_SIZES = (50, 100, 200, 500, 1000, 2000, 4000)

# batch size -> (height, sibling bytes, degree_code bytes, QR inches at 2", QR inches at 4")
PUBLISHED = {
    50: (6, 192, 406, Decimal("0.808"), Decimal("1.616")),
    100: (7, 224, 438, Decimal("0.832"), Decimal("1.664")),
    200: (8, 256, 470, Decimal("0.904"), Decimal("1.808")),
    500: (9, 288, 502, Decimal("0.904"), Decimal("1.808")),
    1000: (10, 320, 534, Decimal("0.936"), Decimal("1.872")),
    2000: (11, 352, 566, Decimal("0.968"), Decimal("1.965")),
    4000: (12, 384, 596, Decimal("0.968"), Decimal("1.965")),
}


@dataclass(frozen=True)
class SizingRow:
    students: int
    height: int
    sibling_bytes: int
    degree_code_bytes: int
    qr_version: int
    qr_modules: int
    qr_capacity: int
    qr_inches_2: Decimal
    qr_inches_4: Decimal
    published_height: int
    published_sibling_bytes: int
    published_degree_code_bytes: int
    published_qr_inches_2: Decimal
    published_qr_inches_4: Decimal

    @property
    def structure_matches(self) -> bool:
        return (self.height, self.sibling_bytes) == (self.published_height,
                                                      self.published_sibling_bytes)

    @property
    def qr_matches(self) -> bool:
        return self.qr_inches_2 == self.published_qr_inches_2


def sizing_row(n: int, ecc: str = DEFAULT_ECC, seed: int = 0) -> SizingRow:
    batch = prepare_batch(make_batch(n, seed=seed))
    cred = batch.credential(0, 1, bytes(32))
    size = len(encode_degree_code(cred.degree_payload, ecc))
    at2, at4 = qr_spec(size, 2, ecc), qr_spec(size, 4, ecc)
    pub = PUBLISHED.get(n, (None, None, None, None, None))
    path = cred.degree_payload.auth_path
    return SizingRow(n, batch.tree.height, path.nbytes, size, at2.version, at2.modules_per_side,
                     at2.capacity, at2.min_size_inches, at4.min_size_inches, *pub)


def sizing_table(sizes=BATCH_SIZES, ecc: str = DEFAULT_ECC, seed: int = 0) -> list[SizingRow]:
    return [sizing_row(n, ecc, seed) for n in sizes]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Decimal):
        return f"{v:.3f}"
    return str(v)


def to_csv(rows: list[SizingRow], delimiter: str = ",") -> str:
    buf = io.StringIO()
    fields = list(asdict(rows[0]).keys()) + ["qr_matches"]
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(v) for v in asdict(r).values()] + [str(r.qr_matches).lower()])
    return buf.getvalue()


def plot(rows: list[SizingRow], path: Path, ecc: str = DEFAULT_ECC) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [r.students for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.plot(xs, [r.degree_code_bytes for r in rows], "o-", label="encoded")
    pub = [(r.students, r.published_degree_code_bytes) for r in rows
           if r.published_degree_code_bytes]
    if pub:
        ax1.plot(*zip(*pub), "x", color="k", label="published")
    ax1.set_xscale("log")
    ax1.set_xlabel("students in batch")
    ax1.set_ylabel("degree_code bytes")
    ax1.legend(frameon=False)

    ax2.step(xs, [float(r.qr_inches_2) for r in rows], where="post", label=f'ECC {ecc}, 2"')
    pub = [(r.students, float(r.published_qr_inches_2)) for r in rows if r.published_qr_inches_2]
    if pub:
        ax2.plot(*zip(*pub), "x", color="k", label='published, 2"')
    ax2.set_xscale("log")
    ax2.set_xlabel("students in batch")
    ax2.set_ylabel("minimum QR side (in)")
    ax2.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report(out_dir: Path, sizes=BATCH_SIZES, ecc: str = DEFAULT_ECC,
                 delimiter: str = ",") -> tuple[Path, Path, list[SizingRow]]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = sizing_table(sizes, ecc)
    csv_path = out_dir / ("sizing.tsv" if delimiter == "\t" else "sizing.csv")
    csv_path.write_text(to_csv(rows, delimiter))
    fig_path = plot(rows, out_dir / "sizing.png", ecc)
    return csv_path, fig_path, rows
