"""Deterministic synthetic corpora for the test and acceptance suites.

Documents carry POS and NER layers plausible enough to exercise the
analysis heuristics; gold clusterings are random non-crossing mention sets
nested up to a configurable depth.
"""

from __future__ import annotations

import random
from typing import Sequence

from .corpus import Document, Mention, clusters_from_mentions

_COMMON = [
    ("park", "NN"), ("worker", "NN"), ("plan", "NN"), ("year", "NN"),
    ("city", "NN"), ("committee", "NN"), ("campaign", "NN"), ("cable", "NN"),
    ("car", "NN"), ("story", "NN"), ("software", "NN"), ("dream", "NN"),
    ("visitors", "NNS"), ("projects", "NNS"),
]
_VERBS = [
    ("opened", "VBD"), ("said", "VBD"), ("finished", "VBD"), ("chose", "VBD"),
    ("settled", "VBD"), ("announced", "VBD"), ("built", "VBD"),
]
_NAMES = [
    ("Alice", "NNP"), ("Bob", "NNP"), ("Hong", "NNP"), ("Kong", "NNP"),
    ("Disneyland", "NNP"), ("CNN", "NNP"), ("Avenue", "NNP"), ("Stars", "NNP"),
]
_PRONOUNS = [("he", "PRP"), ("she", "PRP"), ("they", "PRP"), ("it", "PRP")]
_DETERMINERS = [("the", "DT"), ("a", "DT"), ("this", "DT")]
_NER_CATEGORIES = ("PERSON", "ORG", "GPE", "FAC", "DATE")


def _sample_token(rng: random.Random) -> tuple[str, str]:
    roll = rng.random()
    if roll < 0.40:
        return rng.choice(_COMMON)
    if roll < 0.55:
        return rng.choice(_VERBS)
    if roll < 0.70:
        return rng.choice(_NAMES)
    if roll < 0.82:
        return rng.choice(_PRONOUNS)
    return rng.choice(_DETERMINERS)


def random_mention_spans(
    rng: random.Random,
    sentence_bounds: Sequence[tuple[int, int]],
    target_mass: int,
    max_depth: int = 3,
) -> list[tuple[int, int]]:
    """Non-crossing spans, each inside one sentence, nested up to max_depth,
    totalling roughly ``target_mass`` tokens."""
    spans: list[tuple[int, int]] = []
    mass = 0
    attempts = 0
    while mass < target_mass and attempts < 40 * max(1, target_mass):
        attempts += 1
        lo, hi = rng.choice(list(sentence_bounds))
        if hi - lo < 1:
            continue
        length = min(rng.randint(1, 5), hi - lo)
        start = rng.randint(lo, hi - length)
        candidate = (start, start + length)
        if _compatible(candidate, spans, max_depth):
            spans.append(candidate)
            mass += length
            # encourage explicit nesting below wide spans
            inner = candidate
            for _ in range(max_depth - 1):
                if inner[1] - inner[0] < 2 or rng.random() > 0.45:
                    break
                length = rng.randint(1, inner[1] - inner[0] - 1)
                start = rng.randint(inner[0], inner[1] - length)
                child = (start, start + length)
                if _compatible(child, spans, max_depth):
                    spans.append(child)
                    mass += length
                    inner = child
    return sorted(set(spans))


def _compatible(
    candidate: tuple[int, int], spans: Sequence[tuple[int, int]], max_depth: int
) -> bool:
    start, end = candidate
    depth = 1
    for s, e in spans:
        if (s, e) == candidate:
            return False
        if end <= s or e <= start:
            continue  # disjoint
        if s <= start and end <= e:
            depth += 1
            continue  # candidate nests inside
        if start <= s and e <= end:
            depth += 1
            continue  # candidate wraps it
        return False  # crossing
    return depth <= max_depth


def make_document(
    rng: random.Random,
    doc_id: str,
    n_sentences: int,
    sentence_len: tuple[int, int] = (5, 16),
    mention_density: float = 0.12,
    max_depth: int = 3,
    singleton_rate: float = 0.25,
) -> Document:
    tokens: list[str] = []
    pos: list[str] = []
    bounds: list[tuple[int, int]] = []
    for _ in range(n_sentences):
        length = rng.randint(*sentence_len)
        start = len(tokens)
        for _ in range(length - 1):
            word, tag = _sample_token(rng)
            tokens.append(word)
            pos.append(tag)
        tokens.append(".")
        pos.append(".")
        bounds.append((start, len(tokens)))

    target_mass = int(mention_density * len(tokens))
    spans = random_mention_spans(rng, bounds, target_mass, max_depth)
    mentions = _assign_clusters(rng, spans, singleton_rate)

    # NER spans never nest (matching OntoNotes), so skip overlaps
    ner: list[tuple[int, int, str]] = []
    taken = [False] * len(tokens)
    for start, end in spans:
        if rng.random() < 0.3 and not any(taken[start:end]):
            ner.append((start, end, rng.choice(_NER_CATEGORIES)))
            taken[start:end] = [True] * (end - start)

    return Document(
        doc_id=doc_id,
        tokens=tuple(tokens),
        sentence_bounds=tuple(bounds),
        pos=tuple(pos),
        ner_spans=tuple(sorted(set(ner))),
        gold_clusters=clusters_from_mentions(mentions),
    )


def _assign_clusters(
    rng: random.Random, spans: Sequence[tuple[int, int]], singleton_rate: float
) -> list[Mention]:
    if not spans:
        return []
    n_multi = max(1, round(len(spans) / 3))
    mentions = []
    next_group = 0
    groups: list[int] = []
    for span in spans:
        if rng.random() < singleton_rate or not groups:
            group = next_group
            next_group += 1
            groups.append(group)
        else:
            group = rng.choice(groups[: max(n_multi, 1)])
        mentions.append(Mention(span[0], span[1], group))
    return mentions


def make_corpus(
    n_docs: int,
    seed: int,
    n_sentences: tuple[int, int] = (8, 30),
    sentence_len: tuple[int, int] = (5, 16),
    mention_density: float = 0.12,
    max_depth: int = 3,
    prefix: str = "synth",
) -> list[Document]:
    rng = random.Random(seed)
    return [
        make_document(
            rng,
            doc_id=f"{prefix}/{i:04d}#000",
            n_sentences=rng.randint(*n_sentences),
            sentence_len=sentence_len,
            mention_density=mention_density,
            max_depth=max_depth,
        )
        for i in range(n_docs)
    ]


def make_compression_corpus(n_docs: int, seed: int) -> list[Document]:
    """Documents long enough for >= 4 chunks at budget 100, with mention
    token mass around 0.2 per token."""
    return make_corpus(
        n_docs,
        seed,
        n_sentences=(34, 44),
        sentence_len=(10, 16),
        mention_density=0.2,
        prefix="synth-cr",
    )
