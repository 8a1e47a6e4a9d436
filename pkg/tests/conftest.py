from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from increco.corpus import Document, clusters_from_spans


def make_doc(
    sentences: list[list[str]],
    clusters: list[list[tuple[int, int]]] | None = None,
    pos: list[str] | None = None,
    ner: list[tuple[int, int, str]] | None = None,
    doc_id: str = "doc#000",
) -> Document:
    tokens: list[str] = []
    bounds: list[tuple[int, int]] = []
    for sentence in sentences:
        bounds.append((len(tokens), len(tokens) + len(sentence)))
        tokens.extend(sentence)
    return Document(
        doc_id=doc_id,
        tokens=tuple(tokens),
        sentence_bounds=tuple(bounds),
        pos=tuple(pos) if pos is not None else None,
        ner_spans=tuple(ner) if ner is not None else None,
        gold_clusters=clusters_from_spans(clusters) if clusters is not None else None,
    )
