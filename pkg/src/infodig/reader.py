"""Downloaded-file ingestion and incremental chunked reading.

Extraction is deterministic and format-aware: PDFs are walked through their
page tree and text-show operators, OOXML workbooks and documents are read
straight from their zip parts (no office suite involved), and oversized
extractions are fed to the model window by window with carried-over notes.
"""

from __future__ import annotations

import hashlib
import re
import zipfile
import zlib
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path
from typing import Optional
from xml.etree import ElementTree

from .errors import DocumentError, EngineError, UnsupportedFormatError
from .gateway import ModelProfile, SamplingParams

MEDIA_KINDS = ("pdf", "xlsx", "docx", "text", "unknown")
_EXT = {"pdf": "pdf", "xlsx": "xlsx", "docx": "docx", "text": "txt", "unknown": "bin"}

DEFAULT_WINDOW_CHARS = 24_000


def sniff_media_kind(data: bytes) -> str:
    """Detect media kind from content, never from the file extension."""
    if data.startswith(b"%PDF-"):
        return "pdf"
    if data.startswith(b"PK\x03\x04"):
        try:
            names = zipfile.ZipFile(BytesIO(data)).namelist()
        except zipfile.BadZipFile:
            return "unknown"
        if any(n.startswith("xl/") for n in names):
            return "xlsx"
        if any(n.startswith("word/") for n in names):
            return "docx"
        return "unknown"
    if not data:
        return "text"
    if b"\x00" in data:
        return "unknown"
    try:
        data.decode("utf-8")
        return "text"
    except UnicodeDecodeError:
        return "unknown"


@dataclass(frozen=True)
class DownloadedFile:
    file_id: str  # sha256 of the bytes
    origin_url: str
    media_kind: str
    byte_size: int
    local_ref: str

    def read_bytes(self) -> bytes:
        return Path(self.local_ref).read_bytes()


class DownloadStore:
    """Run-scoped download directory; files dedupe by content hash."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._by_id: dict[str, DownloadedFile] = {}

    def add(self, data: bytes, origin_url: str) -> DownloadedFile:
        file_id = hashlib.sha256(data).hexdigest()
        if file_id in self._by_id:
            return self._by_id[file_id]
        kind = sniff_media_kind(data)
        path = self.directory / f"{file_id}.{_EXT[kind]}"
        path.write_bytes(data)
        record = DownloadedFile(
            file_id=file_id,
            origin_url=origin_url,
            media_kind=kind,
            byte_size=len(data),
            local_ref=str(path),
        )
        self._by_id[file_id] = record
        return record

    def get(self, file_id: str) -> DownloadedFile:
        if file_id in self._by_id:
            return self._by_id[file_id]
        if len(file_id) >= 12:  # rendered observations may truncate the hash
            matches = [f for fid, f in self._by_id.items() if fid.startswith(file_id)]
            if len(matches) == 1:
                return matches[0]
        raise EngineError(f"no downloaded file with id {file_id[:12]}...")

    def all(self) -> list[DownloadedFile]:
        return list(self._by_id.values())


@dataclass(frozen=True)
class DocumentText:
    file_id: str
    units: tuple[tuple[int, str], ...]  # pages / sheet headers+rows / paragraphs
    char_total: int

    def full_text(self) -> str:
        return "\n".join(text for _, text in self.units)


@dataclass
class Digest:
    question: str
    running_notes: str = ""
    chunks_read: int = 0
    answer: Optional[str] = None
    error: bool = False


# -- PDF ---------------------------------------------------------------------

_OBJ_RE = re.compile(rb"(\d+)\s+\d+\s+obj\b(.*?)endobj", re.DOTALL)
_STRING_SHOW_RE = re.compile(rb"\((?:\\.|[^\\()])*\)\s*(?:Tj|')")
_TJ_ARRAY_RE = re.compile(rb"\[((?:\((?:\\.|[^\\()])*\)|[^\]])*)\]\s*TJ")
_LITERAL_RE = re.compile(rb"\((?:\\.|[^\\()])*\)")

_PDF_ESCAPES = {b"n": b"\n", b"r": b"\r", b"t": b"\t", b"b": b"\b", b"f": b"\f",
                b"(": b"(", b")": b")", b"\\": b"\\"}


def _unescape_pdf_string(raw: bytes) -> str:
    out = bytearray()
    i = 1  # skip opening paren
    end = len(raw) - 1
    while i < end:
        ch = raw[i:i + 1]
        if ch == b"\\" and i + 1 < end:
            nxt = raw[i + 1:i + 2]
            if nxt in _PDF_ESCAPES:
                out += _PDF_ESCAPES[nxt]
                i += 2
                continue
            digits = b""
            j = i + 1
            while j < end and len(digits) < 3 and raw[j:j + 1] in b"01234567":
                digits += raw[j:j + 1]
                j += 1
            if digits:
                out.append(int(digits, 8) & 0xFF)
                i = j
                continue
            i += 1  # lone backslash before an ordinary char: drop it
            continue
        out += ch
        i += 1
    return out.decode("latin-1")


def _pdf_objects(data: bytes) -> dict[int, bytes]:
    return {int(m.group(1)): m.group(2) for m in _OBJ_RE.finditer(data)}


def _ref_in(body: bytes, key: bytes) -> Optional[int]:
    m = re.search(re.escape(key) + rb"\s+(\d+)\s+\d+\s+R", body)
    return int(m.group(1)) if m else None


def _stream_of(body: bytes) -> Optional[bytes]:
    m = re.search(rb"stream\r?\n(.*?)endstream", body, re.DOTALL)
    if not m:
        return None
    payload = m.group(1)
    if payload.endswith(b"\r\n"):
        payload = payload[:-2]
    elif payload.endswith(b"\n"):
        payload = payload[:-1]
    if b"FlateDecode" in body[: m.start()]:
        try:
            payload = zlib.decompress(payload)
        except zlib.error as exc:
            raise DocumentError(f"pdf stream decompression failed: {exc}") from exc
    return payload


def _page_text(stream: bytes) -> str:
    lines = []
    for m in _STRING_SHOW_RE.finditer(stream):
        literal = _LITERAL_RE.match(m.group(0))
        lines.append(_unescape_pdf_string(literal.group(0)))
    for m in _TJ_ARRAY_RE.finditer(stream):
        parts = [_unescape_pdf_string(lit.group(0)) for lit in _LITERAL_RE.finditer(m.group(1))]
        if parts:
            lines.append("".join(parts))
    return "\n".join(lines)


def extract_pdf_pages(data: bytes) -> list[str]:
    objects = _pdf_objects(data)
    if not objects:
        raise DocumentError("pdf: no objects found (corrupt file?)")
    catalog = next((body for body in objects.values() if b"/Type" in body and b"/Catalog" in body), None)
    if catalog is None:
        raise DocumentError("pdf: no catalog object")
    pages_ref = _ref_in(catalog, b"/Pages")
    if pages_ref is None or pages_ref not in objects:
        raise DocumentError("pdf: catalog has no page tree")

    page_ids: list[int] = []

    def walk(node_id: int):
        body = objects.get(node_id, b"")
        if re.search(rb"/Type\s*/Page\b(?!s)", body):
            page_ids.append(node_id)
            return
        kids = re.search(rb"/Kids\s*\[(.*?)\]", body, re.DOTALL)
        if kids:
            for ref in re.finditer(rb"(\d+)\s+\d+\s+R", kids.group(1)):
                walk(int(ref.group(1)))

    walk(pages_ref)
    texts = []
    for pid in page_ids:
        body = objects[pid]
        content_ids = []
        single = _ref_in(body, b"/Contents")
        if single is not None:
            content_ids.append(single)
        else:
            arr = re.search(rb"/Contents\s*\[(.*?)\]", body, re.DOTALL)
            if arr:
                content_ids = [int(r.group(1)) for r in re.finditer(rb"(\d+)\s+\d+\s+R", arr.group(1))]
        chunks = []
        for cid in content_ids:
            stream = _stream_of(objects.get(cid, b""))
            if stream:
                chunks.append(_page_text(stream))
        texts.append("\n".join(c for c in chunks if c))
    return texts


# -- OOXML --------------------------------------------------------------------

def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def extract_xlsx_units(data: bytes) -> list[str]:
    """Sheet header unit per sheet, then one tab-separated unit per row."""
    try:
        zf = zipfile.ZipFile(BytesIO(data))
        workbook = ElementTree.fromstring(zf.read("xl/workbook.xml"))
        rels = ElementTree.fromstring(zf.read("xl/_rels/workbook.xml.rels"))
    except (zipfile.BadZipFile, KeyError, ElementTree.ParseError) as exc:
        raise DocumentError(f"xlsx: cannot read workbook: {exc}") from exc
    targets = {}
    for rel in rels:
        targets[rel.get("Id")] = rel.get("Target", "")
    shared: list[str] = []
    if "xl/sharedStrings.xml" in zf.namelist():
        root = ElementTree.fromstring(zf.read("xl/sharedStrings.xml"))
        for si in root:
            shared.append("".join(t.text or "" for t in si.iter() if _local(t.tag) == "t"))
    units: list[str] = []
    sheets = [el for el in workbook.iter() if _local(el.tag) == "sheet"]
    for sheet in sheets:
        rid = next((v for k, v in sheet.attrib.items() if k.endswith("}id") or k == "id"), None)
        target = targets.get(rid, "")
        if target.startswith("/"):
            part = target.lstrip("/")
        else:
            part = "xl/" + target
        try:
            ws = ElementTree.fromstring(zf.read(part))
        except (KeyError, ElementTree.ParseError) as exc:
            raise DocumentError(f"xlsx: bad worksheet part {part!r}: {exc}") from exc
        units.append(f"# Sheet: {sheet.get('name', part)}")
        for row in (el for el in ws.iter() if _local(el.tag) == "row"):
            cells = []
            for cell in (el for el in row if _local(el.tag) == "c"):
                kind = cell.get("t", "n")
                value = ""
                for child in cell:
                    if _local(child.tag) == "v":
                        value = child.text or ""
                    elif _local(child.tag) == "is":
                        value = "".join(t.text or "" for t in child.iter() if _local(t.tag) == "t")
                if kind == "s" and value != "":
                    value = shared[int(value)] if int(value) < len(shared) else ""
                cells.append(value)
            if any(c != "" for c in cells):
                units.append("\t".join(cells))
    return units


def extract_docx_paragraphs(data: bytes) -> list[str]:
    try:
        zf = zipfile.ZipFile(BytesIO(data))
        root = ElementTree.fromstring(zf.read("word/document.xml"))
    except (zipfile.BadZipFile, KeyError, ElementTree.ParseError) as exc:
        raise DocumentError(f"docx: cannot read document: {exc}") from exc
    paragraphs = []
    for p in (el for el in root.iter() if _local(el.tag) == "p"):
        text = "".join(t.text or "" for t in p.iter() if _local(t.tag) == "t")
        if text.strip():
            paragraphs.append(text)
    return paragraphs


# -- parse + chunked reading ---------------------------------------------------


def parse(file: DownloadedFile) -> DocumentText:
    """Deterministic extraction into ordered units (pages / rows / paragraphs)."""
    data = file.read_bytes()
    if file.media_kind == "pdf":
        try:
            texts = extract_pdf_pages(data)
        except DocumentError:
            raise
        except Exception as exc:
            raise DocumentError(f"pdf parse failed: {exc}") from exc
    elif file.media_kind == "xlsx":
        texts = extract_xlsx_units(data)
    elif file.media_kind == "docx":
        texts = extract_docx_paragraphs(data)
    elif file.media_kind == "text":
        decoded = data.decode("utf-8")
        texts = [decoded] if decoded else []
    else:
        raise UnsupportedFormatError(f"unsupported media kind: {file.media_kind}")
    units = tuple((i, t) for i, t in enumerate(texts))
    return DocumentText(file_id=file.file_id, units=units, char_total=len("\n".join(texts)))


def iter_chunks(doc: DocumentText, window_chars: int):
    text = doc.full_text()
    for start in range(0, len(text), window_chars):
        yield text[start: start + window_chars]


def read_chunked(
    doc: DocumentText,
    window_chars: int,
    question: str,
    profile: ModelProfile,
    prompt_template: str = None,
) -> Digest:
    """Feed the document window by window, carrying bounded notes between
    chunks; the model may stop early by emitting an answer."""
    if window_chars < 1:
        raise EngineError("window_chars must be >= 1")
    if prompt_template is None:
        from .prompts import load_prompt

        prompt_template = load_prompt("read_chunk")
    digest = Digest(question=question)
    client = profile.client()
    for chunk in iter_chunks(doc, window_chars):
        prompt = prompt_template.format(question=question, notes=digest.running_notes or "(none)", chunk=chunk)
        try:
            turn = client.complete([{"role": "user", "content": prompt}], SamplingParams(temperature=0.0))[0]
        except EngineError:
            digest.error = True
            return digest
        digest.chunks_read += 1
        notes_match = re.search(r"NOTES:\s*(.*?)(?=\nANSWER:|\Z)", turn.text, re.DOTALL)
        answer_match = re.search(r"ANSWER:\s*(.+)", turn.text, re.DOTALL)
        if notes_match:
            digest.running_notes = notes_match.group(1).strip()[:window_chars]
        else:
            digest.running_notes = turn.text.strip()[:window_chars]
        if answer_match and answer_match.group(1).strip():
            digest.answer = answer_match.group(1).strip()
            break
    return digest
