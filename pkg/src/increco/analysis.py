"""Post-hoc analyses: compression ratio, the syntactic/overlap error
taxonomy, oracle link restoration, NER-augmented inference, and
pseudosingleton corpus augmentation.

The taxonomy heuristics need the gold POS layer; operations that require a
missing layer fail loudly rather than skipping.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .corpus import Cluster, CorpusError, Document, Mention, clusters_from_mentions
from .decode import AllowedActions, DecoderState, Hook
from .metrics import MentionKey, format_percent


class AnalysisError(Exception):
    pass


# ---------------------------------------------------------------------------
# Run logs and compression ratio

@dataclass(frozen=True)
class ChunkRecord:
    index: int
    input_len: int
    output_len: int


@dataclass(frozen=True)
class RunLog:
    mode: str
    docs: Mapping[str, tuple[ChunkRecord, ...]]

    def __post_init__(self) -> None:
        for doc_id, records in self.docs.items():
            if [r.index for r in records] != list(range(len(records))):
                raise AnalysisError(f"{doc_id}: chunk indices not contiguous")

    def to_json(self) -> str:
        payload = {
            "mode": self.mode,
            "docs": {
                doc_id: [
                    {"index": r.index, "input_len": r.input_len, "output_len": r.output_len}
                    for r in records
                ]
                for doc_id, records in sorted(self.docs.items())
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunLog":
        payload = json.loads(text)
        return RunLog(
            mode=payload["mode"],
            docs={
                doc_id: tuple(
                    ChunkRecord(r["index"], r["input_len"], r["output_len"])
                    for r in records
                )
                for doc_id, records in payload["docs"].items()
            },
        )


def compression_ratio(
    full_prefix_log: RunLog, entity_centric_log: RunLog
) -> tuple[dict[str, Fraction], Fraction]:
    """Per document: full-prefix last-chunk input length over entity-centric
    last-chunk input length; plus the mean over documents."""
    missing = set(full_prefix_log.docs) ^ set(entity_centric_log.docs)
    if missing:
        raise AnalysisError(
            f"document {sorted(missing)[0]!r} present in only one log"
        )
    ratios: dict[str, Fraction] = {}
    for doc_id, fp_records in full_prefix_log.docs.items():
        ec_records = entity_centric_log.docs[doc_id]
        if len(fp_records) != len(ec_records):
            raise AnalysisError(f"{doc_id}: chunk counts differ between logs")
        ratios[doc_id] = Fraction(
            fp_records[-1].input_len, ec_records[-1].input_len
        )
    mean = sum(ratios.values(), Fraction(0)) / len(ratios) if ratios else Fraction(0)
    return ratios, mean


def compression_csv(ratios: Mapping[str, Fraction], mean: Fraction) -> str:
    lines = ["doc_id,ratio"]
    lines += [f"{doc_id},{float(r):.4f}" for doc_id, r in sorted(ratios.items())]
    lines.append(f"MEAN,{float(mean):.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Mention taxonomy

class MentionCategory(Enum):
    NAMED_ENTITY = "named_entity"
    PRONOUN = "pronoun"
    INDEFINITE_NP = "indefinite_np"
    DEFINITE_NP = "definite_np"


class AntecedentRelation(Enum):
    FIRST_MENTION = "first_mention"
    EXACT_MATCH = "exact_match"
    PARTIAL_MATCH = "partial_match"
    NO_OVERLAP = "no_overlap"


_PRONOUN_TAGS = {"PRP", "PRP$"}
_NOMINAL_TAGS = {"NN", "NNS", "NNP", "NNPS"} | _PRONOUN_TAGS
_CLAUSE_TAGS = {"WDT", "WP", "WP$", "WRB"}
_DEFINITE_FIRST = {"the", "this", "that", "these", "those"}
_POSSESSIVE_PRONOUNS = {"my", "our", "your", "his", "her", "its", "their"}


def _require_pos(doc: Document) -> tuple[str, ...]:
    if doc.pos is None:
        raise AnalysisError(f"{doc.doc_id}: POS layer required")
    return doc.pos


def categorize_mention(doc: Document, mention: Mention) -> MentionCategory:
    """Heuristic syntactic category from gold POS tags.

    Head = rightmost nominal/pronominal token before any clause boundary;
    pronoun heads win, then proper-noun heads, then a definite first token.
    """
    pos = _require_pos(doc)
    tags = pos[mention.start : mention.end]
    words = doc.tokens[mention.start : mention.end]
    cut = len(tags)
    for i, (word, tag) in enumerate(zip(words, tags)):
        if tag in _CLAUSE_TAGS or word == ",":
            cut = i
            break
    head_tag = None
    for tag in reversed(tags[:cut]):
        if tag in _NOMINAL_TAGS:
            head_tag = tag
            break
    if head_tag in _PRONOUN_TAGS:
        return MentionCategory.PRONOUN
    if head_tag in ("NNP", "NNPS"):
        return MentionCategory.NAMED_ENTITY
    first_word = words[0].lower()
    first_is_possessive = (
        tags[0] == "PRP$"
        or first_word in _POSSESSIVE_PRONOUNS
        or (len(tags) > 1 and tags[1] == "POS")
    )
    if first_word in _DEFINITE_FIRST or first_is_possessive:
        return MentionCategory.DEFINITE_NP
    return MentionCategory.INDEFINITE_NP


def antecedent_relation(
    doc: Document, mention: Mention, cluster: Cluster
) -> AntecedentRelation:
    """String relation between a mention and its direct antecedent (the
    immediately preceding mention of the same cluster)."""
    spans = [m.span for m in cluster.mentions]
    if mention.span not in spans:
        raise AnalysisError(f"mention {mention.span} not in cluster")
    position = spans.index(mention.span)
    if position == 0:
        return AntecedentRelation.FIRST_MENTION
    antecedent = cluster.mentions[position - 1]
    own = [t.lower() for t in doc.tokens[mention.start : mention.end]]
    other = [t.lower() for t in doc.tokens[antecedent.start : antecedent.end]]
    if own == other:
        return AntecedentRelation.EXACT_MATCH
    if _contains(own, other) or _contains(other, own):
        return AntecedentRelation.PARTIAL_MATCH
    return AntecedentRelation.NO_OVERLAP


def _contains(haystack: list[str], needle: list[str]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    return any(
        haystack[i : i + len(needle)] == needle
        for i in range(len(haystack) - len(needle) + 1)
    )


def profile_mention(
    doc: Document, mention: Mention, cluster: Cluster
) -> tuple[MentionCategory, AntecedentRelation]:
    return (
        categorize_mention(doc, mention),
        antecedent_relation(doc, mention, cluster),
    )


# ---------------------------------------------------------------------------
# Missed-mention breakdown

BreakdownTable = Counter  # (MentionCategory, AntecedentRelation) -> count


def missed_mention_breakdown(
    doc: Document,
    pred_a_keys: Iterable[MentionKey],
    pred_b_keys: Iterable[MentionKey],
) -> BreakdownTable:
    """Profile the gold mentions pred_a detected but pred_b missed."""
    if doc.gold_clusters is None:
        raise AnalysisError(f"{doc.doc_id}: gold clusters required")
    a_keys = set(pred_a_keys)
    b_keys = set(pred_b_keys)
    table: BreakdownTable = Counter()
    for cluster in doc.gold_clusters:
        for mention in cluster.mentions:
            if mention.span in a_keys and mention.span not in b_keys:
                table[profile_mention(doc, mention, cluster)] += 1
    return table


def merge_breakdowns(tables: Iterable[BreakdownTable]) -> BreakdownTable:
    merged: BreakdownTable = Counter()
    for table in tables:
        merged.update(table)
    return merged


def breakdown_csv(table: BreakdownTable) -> str:
    total = sum(table.values())
    lines = ["category,relation,count,percent"]
    for category in MentionCategory:
        for relation in AntecedentRelation:
            count = table.get((category, relation), 0)
            percent = (
                format_percent(Fraction(count, total)) if total else "0.00"
            )
            lines.append(
                f"{category.value},{relation.value},{count},{percent}"
            )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Oracle link restoration (the four mention classes worth recovering)

RestoreFilter = tuple[MentionCategory, AntecedentRelation]

RESTORE_STEPS: tuple[RestoreFilter, ...] = (
    (MentionCategory.NAMED_ENTITY, AntecedentRelation.EXACT_MATCH),
    (MentionCategory.NAMED_ENTITY, AntecedentRelation.PARTIAL_MATCH),
    (MentionCategory.DEFINITE_NP, AntecedentRelation.EXACT_MATCH),
    (MentionCategory.DEFINITE_NP, AntecedentRelation.PARTIAL_MATCH),
)

_FILTER_NAMES = {
    "em-ne": RESTORE_STEPS[0],
    "pm-ne": RESTORE_STEPS[1],
    "em-def": RESTORE_STEPS[2],
    "pm-def": RESTORE_STEPS[3],
}


def parse_filters(text: str) -> tuple[RestoreFilter, ...]:
    filters = []
    for name in text.split(","):
        name = name.strip().lower()
        if not name:
            continue
        if name not in _FILTER_NAMES:
            raise AnalysisError(
                f"unknown filter {name!r}; expected {sorted(_FILTER_NAMES)}"
            )
        filters.append(_FILTER_NAMES[name])
    return tuple(filters)


def restore_gold_links(
    pred: Sequence[Iterable[MentionKey]],
    doc: Document,
    filters: Sequence[RestoreFilter],
) -> tuple[tuple[MentionKey, ...], ...]:
    """Add gold mentions matching the filters back into the prediction,
    linking each to the predicted cluster holding another mention of its
    gold cluster, or seeding a new cluster from its gold chain."""
    if doc.gold_clusters is None:
        raise AnalysisError(f"{doc.doc_id}: gold clusters required")
    clusters: list[set[MentionKey]] = [set(c) for c in pred]
    predicted: set[MentionKey] = {key for c in clusters for key in c}
    wanted = set(filters)
    for cluster in doc.gold_clusters:
        matching = [
            m
            for m in cluster.mentions
            if m.span not in predicted
            and profile_mention(doc, m, cluster) in wanted
        ]
        if not matching:
            continue
        home = next(
            (
                c
                for c in clusters
                if any(m.span in c for m in cluster.mentions)
            ),
            None,
        )
        if home is None:
            home = set()
            clusters.append(home)
        for m in matching:
            home.add(m.span)
            predicted.add(m.span)
    return tuple(tuple(sorted(c)) for c in clusters if c)


# ---------------------------------------------------------------------------
# NER-augmented inference

FORCE_CATEGORIES = ("GPE", "PERSON", "ORG")
MATCH_CATEGORIES = (
    "GPE", "ORG", "PERSON", "LAW", "FAC", "LANGUAGE",
    "EVENT", "PRODUCT", "LOC", "DATE", "WORK_OF_ART",
)


def ner_forced_starts(
    doc: Document, categories: Sequence[str] = FORCE_CATEGORIES
) -> Hook:
    """Decode hook: when the cursor sits on the left bound of an NER span of
    a listed category, the only allowed action is OPEN_MENTION. Forcing
    applies once per position; generation then continues as normal."""
    if doc.ner_spans is None:
        raise AnalysisError(f"{doc.doc_id}: NER layer required")
    allowed_categories = set(categories)
    lefts = {
        start
        for start, _, category in doc.ner_spans
        if category in allowed_categories
    }

    def hook(state: DecoderState, allowed: AllowedActions) -> AllowedActions:
        if state.cursor not in lefts or not allowed.open:
            return allowed
        # force once per position: an open mention starting here means the
        # forcing already happened (closed mentions always start earlier,
        # since closing requires the cursor to have advanced)
        if state.cursor in state.open_starts:
            return allowed
        return allowed.only_open()

    return hook


def ner_exact_match_augment(
    pred: Sequence[Iterable[MentionKey]],
    doc: Document,
    categories: Sequence[str] = MATCH_CATEGORIES,
) -> tuple[tuple[MentionKey, ...], ...]:
    """After inference, add NER spans that (1) exact-string-match each other
    (grouped as one new cluster) or (2) exact-string-match a mention in an
    existing predicted cluster (appended to the most recent such cluster)."""
    if doc.ner_spans is None:
        raise AnalysisError(f"{doc.doc_id}: NER layer required")
    allowed = set(categories)
    clusters: list[set[MentionKey]] = [set(c) for c in pred]
    predicted: set[MentionKey] = {key for c in clusters for key in c}

    def text_of(span: MentionKey) -> str:
        return " ".join(doc.tokens[span[0] : span[1]])

    spans = sorted(
        {
            (start, end)
            for start, end, category in doc.ner_spans
            if category in allowed and (start, end) not in predicted
        }
    )
    leftover: dict[str, list[MentionKey]] = {}
    for span in spans:
        surface = text_of(span)
        home: tuple[int, set[MentionKey]] | None = None
        for cluster in clusters:
            hits = [key for key in cluster if text_of(key) == surface]
            if hits:
                latest = max(hits)
                if home is None or latest > home[0]:
                    home = (latest[0], cluster)
        if home is not None:
            home[1].add(span)
            predicted.add(span)
        else:
            leftover.setdefault(surface, []).append(span)
    for group in leftover.values():
        if len(group) > 1:
            clusters.append(set(group))
    return tuple(tuple(sorted(c)) for c in clusters if c)


# ---------------------------------------------------------------------------
# Pseudosingleton augmentation

@dataclass(frozen=True)
class SingletonReport:
    accepted: int
    rejected: int


def add_pseudosingletons(
    docs: Sequence[Document], spans_by_doc: Mapping[str, Sequence[tuple[int, int]]]
) -> tuple[list[Document], SingletonReport]:
    """Each accepted span becomes a fresh size-1 cluster. Spans that collide
    exactly with a gold mention are rejected and counted."""
    augmented = []
    accepted = 0
    rejected = 0
    for doc in docs:
        spans = spans_by_doc.get(doc.doc_id, ())
        if not spans:
            augmented.append(doc)
            continue
        gold = doc.gold_clusters or ()
        existing = {m.span for c in gold for m in c.mentions}
        mentions = [m for c in gold for m in c.mentions]
        next_id = len(gold)
        for start, end in spans:
            if not (0 <= start < end <= len(doc.tokens)):
                raise AnalysisError(
                    f"{doc.doc_id}: pseudosingleton span ({start}, {end}) "
                    f"out of bounds"
                )
            if (start, end) in existing:
                rejected += 1
                continue
            mentions.append(Mention(start, end, next_id))
            existing.add((start, end))
            next_id += 1
            accepted += 1
        augmented.append(
            Document(
                doc_id=doc.doc_id,
                tokens=doc.tokens,
                sentence_bounds=doc.sentence_bounds,
                pos=doc.pos,
                ner_spans=doc.ner_spans,
                gold_clusters=clusters_from_mentions(mentions),
            )
        )
    return augmented, SingletonReport(accepted, rejected)


def read_singleton_spans(path: str) -> dict[str, list[tuple[int, int]]]:
    """Sidecar format: one {"doc_id": ..., "spans": [[start, end], ...]} per line."""
    spans: dict[str, list[tuple[int, int]]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if "doc_id" not in record or "spans" not in record:
                raise CorpusError(f"line {lineno}: need doc_id and spans")
            spans.setdefault(record["doc_id"], []).extend(
                (start, end) for start, end in record["spans"]
            )
    return spans
