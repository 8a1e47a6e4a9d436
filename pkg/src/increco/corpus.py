"""Document model, CoNLL-2012 and docjson ingestion, chunking, fold splits.

Token indices throughout are word-level (whitespace/CoNLL tokens), half-open
spans ``[start, end)``. Cluster ids are dense non-negative integers assigned
in order of first mention.
"""

from __future__ import annotations

import json
import random
import re
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence


class CorpusError(Exception):
    """Malformed document data or file content."""


class ConllParseError(CorpusError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Mention:
    """A token span [start, end) belonging to cluster ``cluster_id``."""

    start: int
    end: int
    cluster_id: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise CorpusError(f"bad mention span ({self.start}, {self.end})")
        if self.cluster_id < 0:
            raise CorpusError(f"negative cluster id {self.cluster_id}")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class Cluster:
    """All mentions of one entity, ordered by (start, end)."""

    cluster_id: int
    mentions: tuple[Mention, ...]

    def __post_init__(self) -> None:
        if not self.mentions:
            raise CorpusError(f"cluster {self.cluster_id} is empty")
        spans = [m.span for m in self.mentions]
        if spans != sorted(spans):
            raise CorpusError(f"cluster {self.cluster_id} mentions out of order")
        if len(set(spans)) != len(spans):
            raise CorpusError(f"cluster {self.cluster_id} has duplicate spans")
        for m in self.mentions:
            if m.cluster_id != self.cluster_id:
                raise CorpusError(
                    f"mention {m.span} carries id {m.cluster_id}, "
                    f"expected {self.cluster_id}"
                )

    @property
    def spans(self) -> tuple[tuple[int, int], ...]:
        return tuple(m.span for m in self.mentions)


@dataclass(frozen=True)
class Chunk:
    """A contiguous run of whole sentences."""

    index: int
    sent_range: tuple[int, int]  # inclusive
    token_range: tuple[int, int]  # half-open

    @property
    def n_tokens(self) -> int:
        return self.token_range[1] - self.token_range[0]


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[str, ...]
    sentence_bounds: tuple[tuple[int, int], ...]
    pos: tuple[str, ...] | None = None
    ner_spans: tuple[tuple[int, int, str], ...] | None = None
    gold_clusters: tuple[Cluster, ...] | None = None

    def __post_init__(self) -> None:
        n = len(self.tokens)
        cursor = 0
        for start, end in self.sentence_bounds:
            if start != cursor or not start < end <= n:
                raise CorpusError(
                    f"{self.doc_id}: sentence bounds do not partition "
                    f"[0, {n}) (offending bound ({start}, {end}))"
                )
            cursor = end
        if cursor != n:
            raise CorpusError(f"{self.doc_id}: sentences cover {cursor} of {n} tokens")
        if self.pos is not None and len(self.pos) != n:
            raise CorpusError(
                f"{self.doc_id}: POS layer has {len(self.pos)} tags for {n} tokens"
            )
        if self.ner_spans is not None:
            for start, end, category in self.ner_spans:
                if not (0 <= start < end <= n):
                    raise CorpusError(
                        f"{self.doc_id}: NER span ({start}, {end}) out of bounds"
                    )
                if not category:
                    raise CorpusError(f"{self.doc_id}: empty NER category")
        if self.gold_clusters is not None:
            for position, cluster in enumerate(self.gold_clusters):
                if cluster.cluster_id != position:
                    raise CorpusError(
                        f"{self.doc_id}: cluster ids not dense "
                        f"(id {cluster.cluster_id} at position {position})"
                    )
                for m in cluster.mentions:
                    if m.end > n:
                        raise CorpusError(
                            f"{self.doc_id}: mention span {m.span} out of bounds"
                        )

    @property
    def n_sentences(self) -> int:
        return len(self.sentence_bounds)

    @cached_property
    def _sentence_starts(self) -> tuple[int, ...]:
        return tuple(start for start, _ in self.sentence_bounds)

    def sentence_of(self, index: int) -> int:
        """Sentence number containing token ``index``."""
        if not 0 <= index < len(self.tokens):
            raise CorpusError(f"token index {index} out of bounds")
        return bisect_right(self._sentence_starts, index) - 1

    def gold_mentions(self) -> tuple[Mention, ...]:
        if self.gold_clusters is None:
            return ()
        return tuple(m for c in self.gold_clusters for m in c.mentions)


def clusters_from_mentions(mentions: Iterable[Mention]) -> tuple[Cluster, ...]:
    """Group mentions into clusters, renumbering ids densely from 0 in order
    of each cluster's first mention."""
    by_id: dict[int, list[Mention]] = {}
    for m in mentions:
        by_id.setdefault(m.cluster_id, []).append(m)
    groups = sorted(
        (sorted(ms, key=lambda m: m.span) for ms in by_id.values()),
        key=lambda ms: ms[0].span,
    )
    return tuple(
        Cluster(i, tuple(Mention(m.start, m.end, i) for m in ms))
        for i, ms in enumerate(groups)
    )


def clusters_from_spans(span_groups: Iterable[Iterable[tuple[int, int]]]) -> tuple[Cluster, ...]:
    mentions = [
        Mention(start, end, i)
        for i, group in enumerate(span_groups)
        for start, end in group
    ]
    return clusters_from_mentions(mentions)


# ---------------------------------------------------------------------------
# CoNLL-2012

# v4 column layout: 0 doc id, 1 part, 2 word number, 3 word, 4 POS, 5 parse,
# 6 lemma, 7 frameset, 8 sense, 9 speaker, 10 named entities, ... , -1 coref
_MIN_COLUMNS = 12
_BEGIN_RE = re.compile(r"#begin document \((?P<name>.*)\); part (?P<part>\d+)")
_NER_SINGLE_RE = re.compile(r"^\((?P<cat>[A-Za-z_]+)\)$")
_NER_OPEN_RE = re.compile(r"^\((?P<cat>[A-Za-z_]+)\*$")
_COREF_ITEM_RE = re.compile(r"^(?P<open>\()?(?P<id>\d+)(?P<close>\))?$")


def read_conll(path: str) -> list[Document]:
    """Read a CoNLL-2012 file into one Document per ``#begin document``/part."""
    docs: list[Document] = []
    builder: _ConllDocBuilder | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#begin document"):
                match = _BEGIN_RE.match(line)
                if not match:
                    raise ConllParseError(f"bad begin line {line!r}", lineno)
                if builder is not None:
                    raise ConllParseError("begin without end", lineno)
                builder = _ConllDocBuilder(
                    f"{match.group('name')}#{match.group('part')}"
                )
                continue
            if line.startswith("#end document"):
                if builder is None:
                    raise ConllParseError("end without begin", lineno)
                docs.append(builder.finish())
                builder = None
                continue
            if line.startswith("#") or builder is None:
                continue
            if not line.strip():
                builder.end_sentence()
                continue
            builder.add_token(line.split(), lineno)
    if builder is not None:
        raise ConllParseError(f"{builder.doc_id}: missing #end document")
    return docs


class _ConllDocBuilder:
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        self.tokens: list[str] = []
        self.pos: list[str] = []
        self.bounds: list[tuple[int, int]] = []
        self.sent_start = 0
        self.ner: list[tuple[int, int, str]] = []
        self.ner_open: tuple[str, int] | None = None
        self.mentions: list[Mention] = []
        self.coref_open: dict[int, list[int]] = {}

    def add_token(self, columns: list[str], lineno: int) -> None:
        if len(columns) < _MIN_COLUMNS:
            raise ConllParseError(
                f"expected >= {_MIN_COLUMNS} columns, got {len(columns)}", lineno
            )
        index = len(self.tokens)
        self.tokens.append(columns[3])
        self.pos.append(columns[4])
        self._ner_field(columns[10], index, lineno)
        self._coref_field(columns[-1], index, lineno)

    def _ner_field(self, field: str, index: int, lineno: int) -> None:
        single = _NER_SINGLE_RE.match(field)
        opener = _NER_OPEN_RE.match(field)
        if single:
            self.ner.append((index, index + 1, single.group("cat")))
        elif opener:
            if self.ner_open is not None:
                raise ConllParseError("nested NER span", lineno)
            self.ner_open = (opener.group("cat"), index)
        elif field == "*)":
            if self.ner_open is None:
                raise ConllParseError("NER close without open", lineno)
            category, start = self.ner_open
            self.ner.append((start, index + 1, category))
            self.ner_open = None
        elif field != "*":
            raise ConllParseError(f"bad NER field {field!r}", lineno)

    def _coref_field(self, field: str, index: int, lineno: int) -> None:
        if field == "-":
            return
        for item in field.split("|"):
            match = _COREF_ITEM_RE.match(item)
            if not match:
                raise ConllParseError(f"bad coreference item {item!r}", lineno)
            cid = int(match.group("id"))
            if match.group("open"):
                if match.group("close"):
                    self.mentions.append(Mention(index, index + 1, cid))
                else:
                    self.coref_open.setdefault(cid, []).append(index)
            elif match.group("close"):
                starts = self.coref_open.get(cid)
                if not starts:
                    raise ConllParseError(
                        f"{self.doc_id}: unbalanced close for cluster {cid}", lineno
                    )
                self.mentions.append(Mention(starts.pop(), index + 1, cid))
            else:
                raise ConllParseError(f"bare coreference id {item!r}", lineno)

    def end_sentence(self) -> None:
        if len(self.tokens) > self.sent_start:
            self.bounds.append((self.sent_start, len(self.tokens)))
            self.sent_start = len(self.tokens)

    def finish(self) -> Document:
        self.end_sentence()
        if self.ner_open is not None:
            raise ConllParseError(f"{self.doc_id}: unclosed NER span")
        dangling = [cid for cid, starts in self.coref_open.items() if starts]
        if dangling:
            raise ConllParseError(
                f"{self.doc_id}: unbalanced open for cluster {dangling[0]}"
            )
        # CoNLL always carries the POS/NER/coref columns, so the layers are
        # present (possibly empty); all-"-" POS means no real tags were given.
        pos = tuple(self.pos) if any(tag != "-" for tag in self.pos) else None
        return Document(
            doc_id=self.doc_id,
            tokens=tuple(self.tokens),
            sentence_bounds=tuple(self.bounds),
            pos=pos,
            ner_spans=tuple(self.ner),
            gold_clusters=clusters_from_mentions(self.mentions),
        )


def write_conll(docs: Sequence[Document], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(_format_conll_doc(doc))


def _split_doc_id(doc_id: str) -> tuple[str, str]:
    name, sep, part = doc_id.rpartition("#")
    if sep and part.isdigit():
        return name, part
    return doc_id, "000"


def _format_conll_doc(doc: Document) -> str:
    name, part = _split_doc_id(doc.doc_id)
    ner_fields = _ner_fields(doc)
    coref_fields = _coref_fields(doc)
    lines = [f"#begin document ({name}); part {part}"]
    for start, end in doc.sentence_bounds:
        for index in range(start, end):
            columns = [
                name,
                str(int(part)),
                str(index - start),
                doc.tokens[index],
                doc.pos[index] if doc.pos else "-",
                "*",  # parse
                "-",  # lemma
                "-",  # frameset
                "-",  # sense
                "-",  # speaker
                ner_fields[index],
                coref_fields[index],
            ]
            lines.append("\t".join(columns))
        lines.append("")
    lines.append("#end document")
    return "\n".join(lines) + "\n"


def _ner_fields(doc: Document) -> list[str]:
    fields = ["*"] * len(doc.tokens)
    if not doc.ner_spans:
        return fields
    covered = [False] * len(doc.tokens)
    for start, end, category in sorted(doc.ner_spans):
        if any(covered[start:end]):
            raise CorpusError(
                f"{doc.doc_id}: overlapping NER spans cannot be written as CoNLL"
            )
        for i in range(start, end):
            covered[i] = True
        if end - start == 1:
            fields[start] = f"({category})"
        else:
            fields[start] = f"({category}*"
            fields[end - 1] = "*)"
    return fields


def _coref_fields(doc: Document) -> list[str]:
    pieces: list[list[str]] = [[] for _ in doc.tokens]
    mentions = sorted(doc.gold_mentions(), key=lambda m: (m.start, -m.end))
    for m in mentions:
        if m.end - m.start == 1:
            pieces[m.start].append(f"({m.cluster_id})")
        else:
            pieces[m.start].append(f"({m.cluster_id}")
            pieces[m.end - 1].append(f"{m.cluster_id})")
    return ["|".join(p) if p else "-" for p in pieces]


# ---------------------------------------------------------------------------
# docjson: one JSON object per line

def read_docjson(path: str) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if line.strip():
                docs.append(document_from_record(json.loads(line), where=f"line {lineno}"))
    return docs


def write_docjson(docs: Sequence[Document], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(json.dumps(document_to_record(doc), ensure_ascii=False))
            handle.write("\n")


def document_from_record(record: dict, where: str = "record") -> Document:
    for field in ("doc_id", "tokens", "sentences"):
        if field not in record:
            raise CorpusError(f"{where}: missing required field {field!r}")
    clusters = None
    if record.get("clusters") is not None:
        clusters = clusters_from_spans(
            [(start, end) for start, end in group] for group in record["clusters"]
        )
    return Document(
        doc_id=record["doc_id"],
        tokens=tuple(record["tokens"]),
        sentence_bounds=tuple((s, e) for s, e in record["sentences"]),
        pos=tuple(record["pos"]) if record.get("pos") is not None else None,
        ner_spans=tuple((s, e, c) for s, e, c in record["ner"])
        if record.get("ner") is not None
        else None,
        gold_clusters=clusters,
    )


def document_to_record(doc: Document) -> dict:
    record: dict = {
        "doc_id": doc.doc_id,
        "tokens": list(doc.tokens),
        "sentences": [list(b) for b in doc.sentence_bounds],
    }
    if doc.pos is not None:
        record["pos"] = list(doc.pos)
    if doc.ner_spans is not None:
        record["ner"] = [[s, e, c] for s, e, c in doc.ner_spans]
    if doc.gold_clusters is not None:
        record["clusters"] = [
            [list(span) for span in cluster.spans] for cluster in doc.gold_clusters
        ]
    return record


# ---------------------------------------------------------------------------
# Chunking and folds

def chunk_document(doc: Document, budget: int) -> tuple[Chunk, ...]:
    """Greedy sentence accumulation: a chunk closes at the end of the sentence
    that first brings it to >= budget tokens. The final chunk may be short."""
    if budget < 1:
        raise CorpusError(f"chunk budget must be >= 1, got {budget}")
    if not doc.sentence_bounds:
        raise CorpusError(f"{doc.doc_id}: cannot chunk a document with no sentences")
    chunks: list[Chunk] = []
    first_sent = 0
    for sent, (_, sent_end) in enumerate(doc.sentence_bounds):
        chunk_start = doc.sentence_bounds[first_sent][0]
        if sent_end - chunk_start >= budget:
            chunks.append(
                Chunk(len(chunks), (first_sent, sent), (chunk_start, sent_end))
            )
            first_sent = sent + 1
    if first_sent < doc.n_sentences:
        chunk_start = doc.sentence_bounds[first_sent][0]
        chunks.append(
            Chunk(
                len(chunks),
                (first_sent, doc.n_sentences - 1),
                (chunk_start, len(doc.tokens)),
            )
        )
    return tuple(chunks)


@dataclass(frozen=True)
class Fold:
    index: int
    train: tuple[Document, ...]
    dev: tuple[Document, ...]
    test: tuple[Document, ...]


def make_folds(corpus: Sequence[Document], k: int, seed: int) -> tuple[Fold, ...]:
    """Deterministic k-fold splits; fold i tests on group i and validates on
    group i+1 (mod k), giving the 80-10-10 pattern at k=10."""
    if k < 2:
        raise CorpusError(f"need k >= 2, got {k}")
    if k > len(corpus):
        raise CorpusError(f"k={k} exceeds corpus size {len(corpus)}")
    order = list(corpus)
    random.Random(seed).shuffle(order)
    base, extra = divmod(len(order), k)
    groups: list[list[Document]] = []
    cursor = 0
    for g in range(k):
        size = base + (1 if g < extra else 0)
        groups.append(order[cursor : cursor + size])
        cursor += size
    folds = []
    for i in range(k):
        dev_group = (i + 1) % k
        train = [
            doc
            for g, group in enumerate(groups)
            if g not in (i, dev_group)
            for doc in group
        ]
        folds.append(Fold(i, tuple(train), tuple(groups[dev_group]), tuple(groups[i])))
    return tuple(folds)
