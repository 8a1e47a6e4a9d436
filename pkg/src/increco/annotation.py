"""The token-action annotation grammar.

A mention of cluster ``l`` over tokens ``x_i .. x_j`` linearizes to
``<m> x_i .. x_j | l </m>``. Nested mentions open outermost-first when starts
coincide and close innermost-first. Parsing is the exact inverse.

Annotated sequences mix four item kinds: document tokens (index-bearing),
surface tokens (text only, used inside entity memory blocks where provenance
is not part of the text), control tokens, and cluster ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

from .corpus import Chunk, CorpusError, Document, Mention


class AnnotationError(Exception):
    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"item {index}: {message}"
        super().__init__(message)
        self.index = index


class Ctl(Enum):
    """Control tokens; the value is the exact rendered form."""

    MENTION_OPEN = "<m>"
    MENTION_CLOSE = "</m>"
    SEP = "|"
    ENTITY_OPEN = "<e>"
    ENTITY_CLOSE = "</e>"
    TARGET_OPEN = "<target>"
    TARGET_CLOSE = "</target>"
    CONTEXT_OPEN = "<context>"
    CONTEXT_CLOSE = "</context>"


_CTL_BY_TEXT = {ctl.value: ctl for ctl in Ctl}


@dataclass(frozen=True)
class DocTok:
    """Reference to the document token at ``index``."""

    index: int


@dataclass(frozen=True)
class Surface:
    """A bare surface token (entity memory blocks)."""

    text: str


@dataclass(frozen=True)
class ClusterId:
    value: int


Item = Union[Ctl, DocTok, Surface, ClusterId]


@dataclass(frozen=True)
class AnnotatedSequence:
    """A stream of items over ``doc``. ``token_range`` is the contiguous
    document span covered by the DocTok items (None when there are none)."""

    doc: Document
    items: tuple[Item, ...]
    token_range: tuple[int, int] | None = None

    def __len__(self) -> int:
        return len(self.items)

    def doc_token_count(self) -> int:
        return sum(1 for item in self.items if isinstance(item, DocTok))


def _check_mentions(doc: Document, chunk: Chunk, mentions: Sequence[Mention]) -> None:
    lo, hi = chunk.token_range
    seen: dict[tuple[int, int], Mention] = {}
    for m in mentions:
        if m.start < lo or m.end > hi:
            raise AnnotationError(
                f"mention {m.span} outside chunk range ({lo}, {hi})"
            )
        if m.span in seen:
            raise AnnotationError(f"duplicate mention span {m.span}")
        seen[m.span] = m
    # wider-first at equal starts, so a same-start pair reads as nesting
    ordered = sorted(mentions, key=lambda m: (m.start, -m.end))
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if b.start >= a.end:
                break
            if b.end > a.end:  # a.start < b.start < a.end < b.end
                raise AnnotationError(f"crossing mentions {a.span} and {b.span}")


def linearize_chunk(
    doc: Document, chunk: Chunk, mentions: Sequence[Mention]
) -> AnnotatedSequence:
    """Emit the chunk's tokens with mention markup."""
    _check_mentions(doc, chunk, mentions)
    opens: dict[int, list[Mention]] = {}
    closes: dict[int, list[Mention]] = {}
    for m in mentions:
        opens.setdefault(m.start, []).append(m)
        closes.setdefault(m.end, []).append(m)
    lo, hi = chunk.token_range
    items: list[Item] = []
    for position in range(lo, hi + 1):
        # innermost (latest start) closes first
        for m in sorted(closes.get(position, []), key=lambda m: -m.start):
            items += [Ctl.SEP, ClusterId(m.cluster_id), Ctl.MENTION_CLOSE]
        if position == hi:
            break
        # widest span opens first
        for m in sorted(opens.get(position, []), key=lambda m: -m.end):
            items.append(Ctl.MENTION_OPEN)
        items.append(DocTok(position))
    return AnnotatedSequence(doc, tuple(items), chunk.token_range)


def parse_annotated(seq: AnnotatedSequence) -> tuple[Mention, ...]:
    """Exact inverse of linearize_chunk. Returns mentions sorted by
    (start, end, cluster_id)."""
    mentions: list[Mention] = []
    stack: list[int | None] = []  # start index, None until the first token
    pending: str | None = None  # "id" after SEP, "close" after the id
    pending_id = 0
    last: int | None = None
    count = 0
    for i, item in enumerate(seq.items):
        if pending == "id":
            if not isinstance(item, ClusterId):
                raise AnnotationError("separator not followed by a cluster id", i)
            pending, pending_id = "close", item.value
            continue
        if pending == "close":
            if item is not Ctl.MENTION_CLOSE:
                raise AnnotationError("cluster id not followed by mention close", i)
            start = stack.pop()
            if start is None:
                raise AnnotationError("empty mention", i)
            assert last is not None
            mentions.append(Mention(start, last + 1, pending_id))
            pending = None
            continue
        if isinstance(item, DocTok):
            if last is not None and item.index <= last:
                raise AnnotationError(
                    f"document tokens out of order ({item.index} after {last})", i
                )
            for depth, start in enumerate(stack):
                if start is None:
                    stack[depth] = item.index
            last = item.index
            count += 1
        elif item is Ctl.MENTION_OPEN:
            stack.append(None)
        elif item is Ctl.SEP:
            if not stack:
                raise AnnotationError("mention close on an empty mention stack", i)
            pending = "id"
        elif item is Ctl.MENTION_CLOSE:
            raise AnnotationError("mention close without separator and id", i)
        elif isinstance(item, ClusterId):
            raise AnnotationError("cluster id without preceding separator", i)
        else:
            raise AnnotationError(f"unexpected control token {item}", i)
    if pending is not None:
        raise AnnotationError("dangling mention close", len(seq.items))
    if stack:
        raise AnnotationError(
            f"{len(stack)} unclosed mention(s)", len(seq.items)
        )
    if seq.token_range is not None:
        lo, hi = seq.token_range
        if count != hi - lo or (count and last != hi - 1):
            raise AnnotationError(
                f"document tokens do not cover range ({lo}, {hi})"
            )
    return tuple(sorted(mentions, key=lambda m: (m.start, m.end, m.cluster_id)))


# ---------------------------------------------------------------------------
# Text form: the bit-exact interchange format with external predictors.

def render(seq: AnnotatedSequence) -> str:
    """Single-space-joined text form."""
    pieces: list[str] = []
    for item in seq.items:
        if isinstance(item, DocTok):
            pieces.append(seq.doc.tokens[item.index])
        elif isinstance(item, Surface):
            pieces.append(item.text)
        elif isinstance(item, ClusterId):
            pieces.append(str(item.value))
        else:
            pieces.append(item.value)
    return " ".join(pieces)


_CTL_LIKE = {"<m>", "</m>", "<e>", "</e>", "<target>", "</target>",
             "<context>", "</context>", "|"}


def scan(
    text: str, doc: Document, token_range: tuple[int, int] | None = None
) -> AnnotatedSequence:
    """Inverse of render.

    Document tokens must match ``doc`` in order over a contiguous range;
    pass ``token_range`` to pin it, otherwise the unique match is inferred.
    Tokens inside ``<e>``..``</e>`` blocks become Surface items.
    """
    words = text.split()
    items: list[Item | None] = []
    doc_positions: list[int] = []  # indices into items awaiting a DocTok
    surfaces: list[str] = []
    entity_depth = 0
    prev: Item | None = None
    for pos, word in enumerate(words):
        item: Item | None
        if word in _CTL_BY_TEXT:
            item = _CTL_BY_TEXT[word]
            if item is Ctl.ENTITY_OPEN:
                entity_depth += 1
            elif item is Ctl.ENTITY_CLOSE:
                if entity_depth == 0:
                    raise AnnotationError("entity close without open", pos)
                entity_depth -= 1
        elif word.isdigit() and prev is Ctl.SEP:
            item = ClusterId(int(word))
        elif word.startswith("<") and word.endswith(">"):
            raise AnnotationError(f"unknown control token {word!r}", pos)
        elif entity_depth > 0:
            item = Surface(word)
        else:
            item = None  # document token, aligned below
            doc_positions.append(len(items))
            surfaces.append(word)
        items.append(item)
        prev = item
    span = _align(surfaces, doc, token_range)
    if span is not None:
        for offset, position in enumerate(doc_positions):
            items[position] = DocTok(span[0] + offset)
    return AnnotatedSequence(doc, tuple(items), span)  # type: ignore[arg-type]


def _align(
    surfaces: list[str], doc: Document, token_range: tuple[int, int] | None
) -> tuple[int, int] | None:
    if token_range is not None:
        lo, hi = token_range
        if not 0 <= lo <= hi <= len(doc.tokens):
            raise AnnotationError(f"token range ({lo}, {hi}) out of bounds")
        if hi - lo != len(surfaces):
            raise AnnotationError(
                f"{len(surfaces)} document tokens for range ({lo}, {hi})"
            )
        for offset, word in enumerate(surfaces):
            if doc.tokens[lo + offset] != word:
                raise AnnotationError(
                    f"token {word!r} does not match document token "
                    f"{doc.tokens[lo + offset]!r} at index {lo + offset}",
                    offset,
                )
        return token_range
    if not surfaces:
        return None
    needle = tuple(surfaces)
    matches = [
        start
        for start in range(len(doc.tokens) - len(needle) + 1)
        if doc.tokens[start : start + len(needle)] == needle
    ]
    if not matches:
        raise AnnotationError("document tokens do not match the document")
    if len(matches) > 1:
        raise AnnotationError(
            "ambiguous alignment; pass an explicit token_range"
        )
    return (matches[0], matches[0] + len(needle))


def doc_items(doc: Document, token_range: tuple[int, int]) -> tuple[DocTok, ...]:
    return tuple(DocTok(i) for i in range(*token_range))


def grammar_counts(seq: AnnotatedSequence) -> dict[str, int]:
    """Counts of the mention-grammar tokens, for invariant checks."""
    counts = {"open": 0, "close": 0, "sep": 0, "id": 0}
    for item in seq.items:
        if item is Ctl.MENTION_OPEN:
            counts["open"] += 1
        elif item is Ctl.MENTION_CLOSE:
            counts["close"] += 1
        elif item is Ctl.SEP:
            counts["sep"] += 1
        elif isinstance(item, ClusterId):
            counts["id"] += 1
    return counts


def concat_items(sequences: Iterable[AnnotatedSequence]) -> tuple[Item, ...]:
    items: list[Item] = []
    for seq in sequences:
        items.extend(seq.items)
    return tuple(items)


def mention_surface(doc: Document, mention: Mention) -> tuple[str, ...]:
    if mention.end > len(doc.tokens):
        raise CorpusError(f"mention {mention.span} out of bounds")
    return doc.tokens[mention.start : mention.end]
