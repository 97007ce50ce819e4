"""A small real-HTML browser driven over HTTP.

Pages are parsed with the stdlib HTML parser into a node tree, then
linearized: visible text in document order, interactive elements rendered as
``[n] <tag> label`` with numbering stable for an unchanged page.  Forms keep
working state (typed text, selected options) until submitted.  This backend
covers everything a scripting-free page can do, which is exactly the
form-tier contract of the simulated sites; a remote-debugging backend with
the same surface lives in :mod:`infodig.cdp`.
"""

from __future__ import annotations

import difflib
import html
import io
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Optional
from urllib.parse import urlencode, urljoin, urlsplit

import httpx

from .errors import LocatorError, TransportError

VIEWPORT_CHARS = 20_000
SCROLL_STEP = 4_000

_SKIP_TAGS = {"script", "style", "head", "meta", "link"}
_INTERACTIVE_TAGS = {"a", "button", "input", "select", "textarea"}
_BLOCK_TAGS = {
    "p", "div", "section", "article", "header", "footer", "li", "ul", "ol",
    "table", "tr", "h1", "h2", "h3", "h4", "h5", "h6", "form", "br", "nav",
    "title", "option", "label", "noscript", "canvas",
}


class _Node:
    __slots__ = ("tag", "attrs", "children", "parent")

    def __init__(self, tag: str, attrs: dict, parent=None):
        self.tag = tag
        self.attrs = attrs
        self.children: list = []
        self.parent = parent


class _TreeBuilder(HTMLParser):
    _VOID = {"br", "hr", "img", "input", "meta", "link", "area", "base", "col", "embed", "source", "wbr"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Node("document", {})
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        node = _Node(tag, dict(attrs), self.stack[-1])
        self.stack[-1].children.append(node)
        if tag not in self._VOID:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self.stack[-1].children.append(_Node(tag, dict(attrs), self.stack[-1]))

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                break

    def handle_data(self, data):
        if data:
            self.stack[-1].children.append(data)


@dataclass
class PageElement:
    number: int
    tag: str
    attrs: dict
    label: str
    form_index: Optional[int] = None
    options: list[tuple[str, str]] = field(default_factory=list)  # (value, label)


@dataclass
class PageForm:
    index: int
    action: str
    method: str
    fields: dict[str, str]  # working values, radio groups collapse to one entry
    field_kinds: dict[str, str]


@dataclass
class Page:
    url: str
    title: str
    text: str  # linearized, with [n] markers
    plain_text: str  # markup-free text, whitespace-normalized
    elements: list[PageElement]
    forms: list[PageForm]
    outlinks: list[str]
    status: int


def _node_text(node) -> str:
    if isinstance(node, str):
        return node
    if node.tag in _SKIP_TAGS:
        return ""
    return "".join(_node_text(c) for c in node.children)


def _clean(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def parse_page(page_html: str, url: str, status: int = 200) -> Page:
    builder = _TreeBuilder()
    builder.feed(page_html)
    root = builder.root

    lines: list[str] = []
    buf: list[str] = []
    elements: list[PageElement] = []
    forms: list[PageForm] = []
    outlinks: list[str] = []
    title = ""
    form_stack: list[int] = []

    def flush():
        text = _clean("".join(buf))
        buf.clear()
        if text:
            lines.append(text)

    def element_label(node) -> str:
        if node.tag == "a":
            return _clean(_node_text(node)) or node.attrs.get("href", "")
        if node.tag == "button":
            return _clean(_node_text(node)) or node.attrs.get("value", "submit")
        if node.tag == "input":
            kind = node.attrs.get("type", "text")
            name = node.attrs.get("name", "")
            if kind in ("submit", "button"):
                return node.attrs.get("value", "submit")
            if kind == "radio":
                return f"{name}={node.attrs.get('value', '')}"
            return name or node.attrs.get("placeholder", kind)
        if node.tag in ("select", "textarea"):
            return node.attrs.get("name", node.tag)
        return node.tag

    def find_title(node) -> str:
        if isinstance(node, str):
            return ""
        if node.tag == "title":
            return _clean(_node_text(node))
        for child in node.children:
            found = find_title(child)
            if found:
                return found
        return ""

    def walk(node):
        if isinstance(node, str):
            buf.append(node)
            return
        if node.tag in _SKIP_TAGS:
            return
        if node.tag == "form":
            flush()
            form = PageForm(
                index=len(forms),
                action=node.attrs.get("action", ""),
                method=node.attrs.get("method", "get").lower(),
                fields={},
                field_kinds={},
            )
            forms.append(form)
            form_stack.append(form.index)

        if node.tag in _INTERACTIVE_TAGS:
            flush()
            el = PageElement(
                number=len(elements) + 1,
                tag=node.tag,
                attrs=node.attrs,
                label=element_label(node),
                form_index=form_stack[-1] if form_stack else None,
            )
            elements.append(el)
            if node.tag == "a" and node.attrs.get("href"):
                outlinks.append(urljoin(url, node.attrs["href"]))
            selected_value = ""
            if node.tag == "select":
                for child in node.children:
                    if not isinstance(child, str) and child.tag == "option":
                        value = child.attrs.get("value", _clean(_node_text(child)))
                        el.options.append((value, _clean(_node_text(child))))
                        if "selected" in child.attrs:
                            selected_value = value
                rendered = " | ".join(lbl or val for val, lbl in el.options)
                lines.append(f"[{el.number}] <select> {el.label} (options: {rendered})")
            else:
                lines.append(f"[{el.number}] <{node.tag}> {el.label}")
            if form_stack:
                form = forms[form_stack[-1]]
                name = node.attrs.get("name")
                if node.tag == "select" and name:
                    form.field_kinds[name] = "select"
                    default = selected_value or (el.options[0][0] if el.options else "")
                    form.fields.setdefault(name, default)
                elif node.tag == "input" and name:
                    kind = node.attrs.get("type", "text")
                    if kind == "radio":
                        form.field_kinds[name] = "radio"
                        if "checked" in node.attrs:
                            form.fields[name] = node.attrs.get("value", "")
                        else:
                            form.fields.setdefault(name, "")
                    elif kind not in ("submit", "button"):
                        form.field_kinds[name] = kind
                        form.fields.setdefault(name, node.attrs.get("value", ""))
                elif node.tag == "textarea" and name:
                    form.field_kinds[name] = "textarea"
                    form.fields.setdefault(name, _clean(_node_text(node)))
            return  # the label line already carries the element's text
        for child in node.children:
            walk(child)
        if node.tag in _BLOCK_TAGS:
            flush()
        if node.tag == "form" and form_stack:
            form_stack.pop()

    title = find_title(root)
    walk(root)
    flush()
    text = "\n".join(lines)
    plain = _clean(_node_text(root))
    return Page(
        url=url,
        title=title,
        text=text,
        plain_text=plain,
        elements=elements,
        forms=forms,
        outlinks=outlinks,
        status=status,
    )


def extract_text_and_links(page_html: str, url: str) -> tuple[str, list[str]]:
    """Crawl-style extraction: markup stripped, whitespace normalized,
    outlinks absolutized against the base URL."""
    page = parse_page(page_html, url)
    return page.plain_text, page.outlinks


class HtmlBrowser:
    """Stateful browser over httpx. One instance per surfing session."""

    def __init__(self, timeout_s: float = 30.0):
        self._client = httpx.Client(follow_redirects=True, timeout=timeout_s)
        self.current_url: str = ""
        self.history: list[str] = []
        self.page: Optional[Page] = None
        self.scroll_pos: int = 0

    def close(self):
        self._client.close()

    # -- navigation -------------------------------------------------------

    def _fetch(self, url: str) -> httpx.Response:
        parts = urlsplit(url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise TransportError(f"not an absolute http(s) URL: {url!r}", retriable=False)
        try:
            return self._client.get(url)
        except httpx.HTTPError as exc:
            raise TransportError(f"fetch failed for {url}: {exc}") from exc

    def _load(self, resp: httpx.Response):
        for hop in resp.history:
            self.history.append(str(hop.url))
        self.current_url = str(resp.url)
        self.history.append(self.current_url)
        self.page = parse_page(resp.text, self.current_url, status=resp.status_code)
        self.scroll_pos = 0

    def navigate(self, url: str):
        target = urljoin(self.current_url, url) if self.current_url else url
        self._load(self._fetch(target))

    # -- locators ---------------------------------------------------------

    def resolve(self, target) -> PageElement:
        if self.page is None:
            raise LocatorError("no page loaded")
        if isinstance(target, int) or (isinstance(target, str) and target.strip("[]").isdigit()):
            number = int(str(target).strip("[]"))
            for el in self.page.elements:
                if el.number == number:
                    return el
            raise LocatorError(
                f"no element numbered {number}",
                candidates=[f"[{e.number}] {e.label}" for e in self.page.elements[:5]],
            )
        want = str(target).strip().lower()
        for el in self.page.elements:
            if want in (el.attrs.get("name", "").lower(), el.attrs.get("id", "").lower()):
                return el
        for el in self.page.elements:
            if want and want in el.label.lower():
                return el
        labels = [e.label for e in self.page.elements]
        near = difflib.get_close_matches(str(target), labels, n=3, cutoff=0.3)
        raise LocatorError(f"no element matches {target!r}", candidates=near)

    def locate(self, text: str) -> list[PageElement]:
        if self.page is None:
            return []
        want = text.strip().lower()
        return [el for el in self.page.elements if want in el.label.lower()
                or want == el.attrs.get("name", "").lower()]

    # -- interactions ------------------------------------------------------

    def click(self, target):
        el = self.resolve(target)
        if el.tag == "a" and el.attrs.get("href"):
            self.navigate(el.attrs["href"])
        elif el.tag == "input" and el.attrs.get("type") == "radio":
            self._set_field(el, el.attrs.get("value", ""))
        elif el.tag == "button" or (el.tag == "input" and el.attrs.get("type") in ("submit", "button")):
            if el.form_index is not None:
                self.submit(el.form_index)
            # a free-standing button without a form is inert on a scripting-free page
        else:
            raise LocatorError(f"element [{el.number}] <{el.tag}> is not clickable")

    def type(self, target, value: str):
        el = self.resolve(target)
        if el.tag not in ("input", "textarea"):
            raise LocatorError(f"cannot type into <{el.tag}>")
        self._set_field(el, value)

    def select(self, target, value: str):
        el = self.resolve(target)
        if el.tag == "select":
            for opt_value, opt_label in el.options:
                if value in (opt_value, opt_label):
                    self._set_field(el, opt_value)
                    return
            raise LocatorError(
                f"select {el.label!r} has no option {value!r}",
                candidates=[v for v, _ in el.options],
            )
        if el.tag == "input" and el.attrs.get("type") == "radio":
            self._set_field(el, value or el.attrs.get("value", ""))
            return
        raise LocatorError(f"cannot select on <{el.tag}>")

    def _set_field(self, el: PageElement, value: str):
        name = el.attrs.get("name")
        if el.form_index is None or not name:
            raise LocatorError(f"element [{el.number}] is not a named form field")
        self.page.forms[el.form_index].fields[name] = value

    def submit(self, target=None):
        if self.page is None or not self.page.forms:
            raise LocatorError("no form on this page")
        if isinstance(target, str) and target.strip().isdigit():
            target = int(target)
        if target is None:
            form = self.page.forms[0]
        elif isinstance(target, int):
            if target >= len(self.page.forms):
                raise LocatorError(f"no form index {target}")
            form = self.page.forms[target]
        else:
            el = None
            try:
                el = self.resolve(target)
            except LocatorError:
                pass
            if el is not None and el.form_index is not None:
                form = self.page.forms[el.form_index]
            else:
                raise LocatorError(f"cannot find a form for {target!r}")
        action = urljoin(self.current_url, form.action or self.current_url)
        data = {k: v for k, v in form.fields.items() if v != "" or form.field_kinds.get(k) != "radio"}
        try:
            if form.method == "post":
                resp = self._client.post(action, data=data)
            else:
                query = urlencode(sorted(data.items()))
                sep = "&" if urlsplit(action).query else "?"
                resp = self._client.get(action + (sep + query if query else ""))
        except httpx.HTTPError as exc:
            raise TransportError(f"form submit failed: {exc}") from exc
        self._load(resp)

    def scroll(self, direction: str = "down"):
        if direction == "up":
            self.scroll_pos = max(0, self.scroll_pos - SCROLL_STEP)
        else:
            limit = max(0, len(self.page.text) - SCROLL_STEP) if self.page else 0
            self.scroll_pos = min(limit, self.scroll_pos + SCROLL_STEP)

    def download(self, target) -> tuple[bytes, str]:
        el = self.resolve(target)
        if el.tag != "a" or not el.attrs.get("href"):
            raise LocatorError(f"element [{el.number}] is not a downloadable link")
        url = urljoin(self.current_url, el.attrs["href"])
        resp = self._fetch(url)
        return resp.content, str(resp.url)

    # -- observation -------------------------------------------------------

    def viewport_text(self) -> tuple[str, bool]:
        if self.page is None:
            return "", False
        text = self.page.text
        window = text[self.scroll_pos: self.scroll_pos + VIEWPORT_CHARS]
        truncated = len(text) > self.scroll_pos + VIEWPORT_CHARS
        return window, truncated

    def screenshot(self) -> bytes:
        """Render the current viewport text to a PNG. Crude, but it gives the
        vision path real image bytes with a content-stable hash."""
        from PIL import Image, ImageDraw

        text, _ = self.viewport_text()
        lines = text.split("\n")[:120] or [""]
        img = Image.new("RGB", (1024, 16 * (len(lines) + 2)), "white")
        draw = ImageDraw.Draw(img)
        for i, line in enumerate(lines):
            draw.text((8, 8 + 16 * i), line[:160], fill="black")
        out = io.BytesIO()
        img.save(out, format="PNG")
        return out.getvalue()


def absolutize(base: str, href: str) -> str:
    return urljoin(base, href)


def unescape(text: str) -> str:
    return html.unescape(text)
