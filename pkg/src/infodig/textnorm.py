"""Answer normalization shared by the verifier, filters, and classifier."""

from __future__ import annotations

import re
import unicodedata

_WS_RE = re.compile(r"\s+")
# Everything that is not a letter, digit, or CJK character.
_PUNCT_RE = re.compile(r"[^\w一-鿿]+", re.UNICODE)
_NUMBER_RE = re.compile(r"-?\d+(?:,\d{3})*(?:\.\d+)?")


def normalize_answer(text: str) -> str:
    """Comparison form: NFKC (folds full-width digits/punctuation), casefold,
    trim, collapse whitespace, drop a trailing percent sign."""
    text = unicodedata.normalize("NFKC", text or "")
    text = text.casefold().strip()
    text = _WS_RE.sub(" ", text)
    if text.endswith("%"):
        text = text[:-1].rstrip()
    return text


def normalize_compact(text: str) -> str:
    """Containment form: like normalize_answer but with all whitespace and
    punctuation removed, for substring checks against long spans."""
    text = unicodedata.normalize("NFKC", text or "").casefold()
    return _PUNCT_RE.sub("", text)


_STANDALONE_NUMBER_RE = re.compile(r"(?<![\d.])-?\d+(?:\.\d+)?(?![\d.])")


def contains_answer(span: str, answer: str) -> bool:
    """True if the span contains the answer. Purely numeric answers only
    match standalone numbers of equal value (so "3" does not hide inside
    "2025-03-01", while "34" does match a rendered "34.0"); everything else
    uses compact normalized containment."""
    answer_norm = normalize_answer(answer)
    if re.fullmatch(r"-?\d+(?:\.\d+)?", answer_norm):
        want = float(answer_norm)
        span_norm = unicodedata.normalize("NFKC", span or "")
        return any(float(m.group(0)) == want for m in _STANDALONE_NUMBER_RE.finditer(span_norm))
    needle = normalize_compact(answer)
    return bool(needle) and needle in normalize_compact(span)


def parse_number(text: str):
    """First numeric value in the text, or None. Thousands separators and
    full-width digits are tolerated; a trailing percent sign is ignored."""
    text = unicodedata.normalize("NFKC", text or "")
    m = _NUMBER_RE.search(text)
    if not m:
        return None
    return float(m.group(0).replace(",", ""))
