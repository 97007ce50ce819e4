"""Deterministic downloadable-file generation (PDF, XLSX, DOCX).

The statistics site serves audited-report files whose values never appear in
any HTML page - the file-download path is the only way to those answers.
Office files are written as minimal OOXML zips with frozen timestamps so the
same database always yields byte-identical downloads.
"""

from __future__ import annotations

import io
import zipfile
from xml.sax.saxutils import escape

from .db import SimDatabase

_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def _zip_bytes(entries: list[tuple[str, bytes]]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, data in entries:
            info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o600 << 16
            zf.writestr(info, data)
    return buf.getvalue()


def make_pdf(pages: list[list[str]], title: str = "report") -> bytes:
    """One PDF page per list of text lines; reproducible output."""
    from reportlab.lib.pagesizes import LETTER
    from reportlab.pdfgen import canvas

    buf = io.BytesIO()
    c = canvas.Canvas(buf, pagesize=LETTER, invariant=1, pageCompression=0)
    c.setTitle(title)
    for lines in pages:
        y = 750
        c.setFont("Helvetica", 11)
        for line in lines:
            c.drawString(72, y, line)
            y -= 16
        c.showPage()
    c.save()
    return buf.getvalue()


def make_xlsx(sheets: list[tuple[str, list[list[object]]]]) -> bytes:
    """Minimal OOXML workbook: inline strings, numeric cells for numbers."""
    overrides = [
        '<Override PartName="/xl/workbook.xml" ContentType="application/vnd.'
        'openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/>'
    ]
    sheet_tags = []
    rel_tags = []
    entries: list[tuple[str, bytes]] = []
    for i, (name, rows) in enumerate(sheets, start=1):
        overrides.append(
            f'<Override PartName="/xl/worksheets/sheet{i}.xml" ContentType="application/'
            'vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/>'
        )
        sheet_tags.append(f'<sheet name="{escape(name)}" sheetId="{i}" r:id="rId{i}"/>')
        rel_tags.append(
            f'<Relationship Id="rId{i}" Type="http://schemas.openxmlformats.org/'
            f'officeDocument/2006/relationships/worksheet" Target="worksheets/sheet{i}.xml"/>'
        )
        row_xml = []
        for r, row in enumerate(rows, start=1):
            cells = []
            for value in row:
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    cells.append(f"<c><v>{value}</v></c>")
                else:
                    cells.append(f"<c t=\"inlineStr\"><is><t>{escape(str(value))}</t></is></c>")
            row_xml.append(f'<row r="{r}">{"".join(cells)}</row>')
        sheet_xml = (
            '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
            '<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main">'
            f'<sheetData>{"".join(row_xml)}</sheetData></worksheet>'
        )
        entries.append((f"xl/worksheets/sheet{i}.xml", sheet_xml.encode("utf-8")))

    content_types = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
        '<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
        '<Default Extension="xml" ContentType="application/xml"/>'
        f'{"".join(overrides)}</Types>'
    )
    root_rels = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
        '<Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/'
        'relationships/officeDocument" Target="xl/workbook.xml"/></Relationships>'
    )
    workbook = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" '
        'xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships">'
        f'<sheets>{"".join(sheet_tags)}</sheets></workbook>'
    )
    workbook_rels = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
        f'{"".join(rel_tags)}</Relationships>'
    )
    return _zip_bytes(
        [
            ("[Content_Types].xml", content_types.encode("utf-8")),
            ("_rels/.rels", root_rels.encode("utf-8")),
            ("xl/workbook.xml", workbook.encode("utf-8")),
            ("xl/_rels/workbook.xml.rels", workbook_rels.encode("utf-8")),
            *entries,
        ]
    )


def make_docx(paragraphs: list[str]) -> bytes:
    body = "".join(
        f"<w:p><w:r><w:t xml:space=\"preserve\">{escape(p)}</w:t></w:r></w:p>" for p in paragraphs
    )
    document = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<w:document xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main">'
        f"<w:body>{body}</w:body></w:document>"
    )
    content_types = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
        '<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
        '<Default Extension="xml" ContentType="application/xml"/>'
        '<Override PartName="/word/document.xml" ContentType="application/vnd.'
        'openxmlformats-officedocument.wordprocessingml.document.main+xml"/></Types>'
    )
    root_rels = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
        '<Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/'
        'relationships/officeDocument" Target="word/document.xml"/></Relationships>'
    )
    return _zip_bytes(
        [
            ("[Content_Types].xml", content_types.encode("utf-8")),
            ("_rels/.rels", root_rels.encode("utf-8")),
            ("word/document.xml", document.encode("utf-8")),
        ]
    )


def _slug(text: str) -> str:
    return text.lower().replace(" ", "-").replace("_", "-")


def region_report_pdf(db: SimDatabase, region: str) -> bytes:
    """Audited values for one region, one page per metric."""
    metrics = sorted({r["metric"] for r in db.records if r["region"] == region})
    pages = []
    for metric in metrics:
        lines = [f"Audited report for {region} / {metric}", ""]
        for row in db.records:
            if row["region"] == region and row["metric"] == metric:
                lines.append(f"AUDITED {metric} {row['period']}: {row['audited_value']}")
        pages.append(lines)
    return make_pdf(pages or [[f"Audited report for {region}", "(no data)"]], title=f"audited-{_slug(region)}")


def metric_workbook_xlsx(db: SimDatabase, metric: str) -> bytes:
    """Audited values for one metric, one sheet per year."""
    years = sorted({r["period"].split("-")[0] for r in db.records if r["metric"] == metric})
    sheets = []
    for year in years:
        rows: list[list[object]] = [["region", "period", "audited_value"]]
        for row in db.records:
            if row["metric"] == metric and row["period"].startswith(year):
                rows.append([row["region"], row["period"], row["audited_value"]])
        sheets.append((year, rows))
    return make_xlsx(sheets or [("empty", [["region", "period", "audited_value"]])])
