"""Incremental document state.

Two input layouts over a chunked document:

* full-prefix: every previously labelled chunk, verbatim, then the target.
* entity-centric: a compressed memory holding only entity mention tokens,
  an optional window of the annotated sentences immediately preceding the
  target, then the target.

Under recency ordering, every entity mentioned in a chunk moves to the
rightmost positions of the memory, ordered by its last mention.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .annotation import (
    AnnotatedSequence,
    ClusterId,
    Ctl,
    DocTok,
    Item,
    Surface,
    concat_items,
)
from .corpus import Chunk, Document, Mention


class StateError(Exception):
    pass


class Mode(Enum):
    FULL_PREFIX = "full-prefix"
    ENTITY_CENTRIC = "entity-centric"


class Ordering(Enum):
    RECENCY = "recency"
    DOCUMENT = "document"


@dataclass(frozen=True)
class PipelineConfig:
    mode: Mode = Mode.ENTITY_CENTRIC
    chunk_budget: int = 100
    context_budget: int = 100
    ordering: Ordering = Ordering.RECENCY
    max_nesting: int = 4


@dataclass(frozen=True)
class MentionText:
    """A mention's surface tokens with their provenance span."""

    span: tuple[int, int]
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Entity:
    cluster_id: int
    mentions: tuple[MentionText, ...]


@dataclass(frozen=True)
class EntityState:
    """The compressed memory: entities in their current presentation order.
    ``next_id`` equals the number of clusters seen so far."""

    entities: tuple[Entity, ...] = ()
    next_id: int = 0

    def by_id(self) -> dict[int, Entity]:
        return {e.cluster_id: e for e in self.entities}


def close_order(mention: Mention) -> tuple[int, int]:
    """Sort key giving the order mention closes are emitted by the grammar:
    by end position, inner (later start) before outer at equal ends."""
    return (mention.end, -mention.start)


def update_state(
    state: EntityState,
    doc: Document,
    mentions: Sequence[Mention],
    ordering: Ordering = Ordering.RECENCY,
) -> EntityState:
    """Fold one chunk's mentions into the memory.

    A mention whose cluster id equals ``state.next_id`` creates a new entity;
    a gap beyond that is an error.
    """
    if not mentions:
        return state
    ordered = sorted(mentions, key=close_order)
    entities = {e.cluster_id: list(e.mentions) for e in state.entities}
    order = [e.cluster_id for e in state.entities]
    next_id = state.next_id
    last_touch: dict[int, int] = {}
    for position, m in enumerate(ordered):
        if m.cluster_id > next_id:
            raise StateError(
                f"cluster id {m.cluster_id} skips ahead of next id {next_id}"
            )
        if m.cluster_id == next_id:
            entities[m.cluster_id] = []
            order.append(m.cluster_id)
            next_id += 1
        entities[m.cluster_id].append(
            MentionText(m.span, doc.tokens[m.start : m.end])
        )
        last_touch[m.cluster_id] = position
    if ordering is Ordering.RECENCY:
        touched = sorted(last_touch, key=last_touch.__getitem__)
        untouched = [cid for cid in order if cid not in last_touch]
        order = untouched + touched
    return EntityState(
        entities=tuple(
            Entity(cid, tuple(entities[cid])) for cid in order
        ),
        next_id=next_id,
    )


def linearize_state(doc: Document, state: EntityState) -> AnnotatedSequence:
    """One ``<e> <m> tokens </m> ... | id </e>`` block per entity, in state
    order. Mention blocks inside an entity carry no per-mention id."""
    items: list[Item] = []
    for entity in state.entities:
        items.append(Ctl.ENTITY_OPEN)
        for mention in entity.mentions:
            items.append(Ctl.MENTION_OPEN)
            items.extend(Surface(text) for text in mention.tokens)
            items.append(Ctl.MENTION_CLOSE)
        items += [Ctl.SEP, ClusterId(entity.cluster_id), Ctl.ENTITY_CLOSE]
    return AnnotatedSequence(doc, tuple(items), None)


# ---------------------------------------------------------------------------
# Context window

@dataclass(frozen=True)
class ContextWindow:
    """Whole annotated sentences immediately preceding the target."""

    sentences: tuple[tuple[Item, ...], ...]
    budget: int

    def item_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    def items(self) -> tuple[Item, ...]:
        return tuple(item for sentence in self.sentences for item in sentence)


def segment_sentences(
    doc: Document, history: Sequence[AnnotatedSequence]
) -> list[tuple[Item, ...]]:
    """Split the concatenated annotated history at sentence boundaries.

    Mention opens attach to the sentence of the following token; closes
    (separator, id, close bracket) to the sentence of the preceding one.
    """
    fragments: list[tuple[Item, ...]] = []
    current: list[Item] = []
    pending_opens: list[Item] = []
    current_sent: int | None = None
    for item in concat_items(history):
        if item is Ctl.MENTION_OPEN:
            pending_opens.append(item)
            continue
        if isinstance(item, DocTok):
            sent = doc.sentence_of(item.index)
            if current_sent is not None and sent != current_sent:
                fragments.append(tuple(current))
                current = []
            current_sent = sent
            current.extend(pending_opens)
            pending_opens.clear()
        current.append(item)
    current.extend(pending_opens)
    if current:
        fragments.append(tuple(current))
    return fragments


def take_context(
    sentence_fragments: Sequence[tuple[Item, ...]], budget: int
) -> ContextWindow:
    """Maximal suffix of whole sentences whose total item count fits the
    budget; empty when budget is 0 or even the last sentence exceeds it."""
    if budget < 0:
        raise StateError(f"context budget must be >= 0, got {budget}")
    taken: list[tuple[Item, ...]] = []
    total = 0
    for fragment in reversed(sentence_fragments):
        if total + len(fragment) > budget:
            break
        taken.append(fragment)
        total += len(fragment)
    return ContextWindow(tuple(reversed(taken)), budget)


# ---------------------------------------------------------------------------
# Input builders

def _target_items(doc: Document, chunk: Chunk) -> list[Item]:
    items: list[Item] = [Ctl.TARGET_OPEN]
    items.extend(DocTok(i) for i in range(*chunk.token_range))
    items.append(Ctl.TARGET_CLOSE)
    return items


def build_full_prefix_input(
    doc: Document, history: Sequence[AnnotatedSequence], target_chunk: Chunk
) -> AnnotatedSequence:
    """``labelled_1 .. labelled_n <target> raw target </target>``."""
    cursor = 0
    for seq in history:
        if seq.token_range is None or seq.token_range[0] != cursor:
            raise StateError(
                f"history chunks out of order at token {cursor}"
            )
        cursor = seq.token_range[1]
    if cursor != target_chunk.token_range[0]:
        raise StateError(
            f"history ends at token {cursor}, target starts at "
            f"{target_chunk.token_range[0]}"
        )
    items = list(concat_items(history)) + _target_items(doc, target_chunk)
    start = history[0].token_range[0] if history else target_chunk.token_range[0]
    return AnnotatedSequence(doc, tuple(items), (start, target_chunk.token_range[1]))


def build_entity_centric_input(
    doc: Document,
    state: EntityState,
    context: ContextWindow,
    target_chunk: Chunk,
) -> AnnotatedSequence:
    """Entity blocks, then the context window (omitted when empty), then the
    target. Everything outside entity spans and the window is absent."""
    items: list[Item] = list(linearize_state(doc, state).items)
    start = target_chunk.token_range[0]
    if context.sentences:
        items.append(Ctl.CONTEXT_OPEN)
        items.extend(context.items())
        items.append(Ctl.CONTEXT_CLOSE)
        first = next(
            item for item in context.items() if isinstance(item, DocTok)
        )
        start = first.index
    items += _target_items(doc, target_chunk)
    return AnnotatedSequence(doc, tuple(items), (start, target_chunk.token_range[1]))


def state_snapshot(state: EntityState) -> dict:
    """docjson sidecar form: {"entities": [{"id": .., "mentions": [..]}]}."""
    return {
        "entities": [
            {
                "id": entity.cluster_id,
                "mentions": [" ".join(m.tokens) for m in entity.mentions],
            }
            for entity in state.entities
        ]
    }


def observed_pairs(state: EntityState) -> set[tuple[str, int]]:
    """(mention text, cluster id) pairs held in the memory; compression must
    not lose any."""
    return {
        (" ".join(m.tokens), entity.cluster_id)
        for entity in state.entities
        for m in entity.mentions
    }


def iter_state_mentions(state: EntityState) -> Iterable[tuple[int, MentionText]]:
    for entity in state.entities:
        for mention in entity.mentions:
            yield entity.cluster_id, mention
