"""Error-tolerant DOM construction on top of the stdlib HTML tokenizer."""

from __future__ import annotations

from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterator

VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input", "keygen",
    "link", "meta", "param", "source", "track", "wbr",
})


class HtmlEncodingError(ValueError):
    pass


@dataclass
class Comment:
    text: str


@dataclass
class Element:
    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list = field(default_factory=list)
    text: str = ""

    def iter(self) -> Iterator["Element"]:
        """Descendant elements in document order, excluding self."""
        stack = [c for c in reversed(self.children) if isinstance(c, Element)]
        while stack:
            el = stack.pop()
            yield el
            stack.extend(c for c in reversed(el.children) if isinstance(c, Element))


@dataclass
class DomTree:
    root: Element
    source_length: int = 0

    def elements(self) -> list[Element]:
        return list(self.root.iter())

    def comments(self) -> list[Comment]:
        out = []
        stack = [self.root]
        while stack:
            el = stack.pop()
            for c in el.children:
                if isinstance(c, Comment):
                    out.append(c)
                else:
                    stack.append(c)
        return out


class _Builder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("#document")
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        el = Element(tag, {})
        for name, value in attrs:
            # first occurrence wins, as browsers do
            el.attrs.setdefault(name, "" if value is None else value)
        self.stack[-1].children.append(el)
        if tag not in VOID_ELEMENTS:
            self.stack.append(el)

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag not in VOID_ELEMENTS:
            self.stack.pop()

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignored

    def handle_data(self, data):
        self.stack[-1].text += data

    def handle_comment(self, data):
        self.stack[-1].children.append(Comment(data))


def decode_html(content: bytes | str) -> str:
    if isinstance(content, str):
        return content
    try:
        return bytes(content).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise HtmlEncodingError(f"document is not valid UTF-8 at byte {exc.start}") from None


def parse_html(content: bytes | str) -> DomTree:
    """Parse possibly malformed HTML into a single tree; unclosed tags are
    closed at end of input."""
    text = decode_html(content)
    b = _Builder()
    b.feed(text)
    b.close()
    return DomTree(b.root, len(text))
