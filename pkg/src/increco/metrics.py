"""Reference coreference metrics: MUC, B3, CEAFe, their CoNLL average, and
mention detection P/R/F.

All internals use exact rational arithmetic so the CEAFe alignment can be
checked against brute force exactly. Corpus-level scores aggregate
numerators and denominators across documents, not per-document F1s.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

MentionKey = tuple[int, int]
Clustering = tuple[frozenset[MentionKey], ...]


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class PRF:
    precision: Fraction
    recall: Fraction

    @property
    def f1(self) -> Fraction:
        if self.precision + self.recall == 0:
            return Fraction(0)
        return 2 * self.precision * self.recall / (self.precision + self.recall)


@dataclass(frozen=True)
class Counts:
    """Precision and recall numerators/denominators, summable across docs."""

    p_num: Fraction = Fraction(0)
    p_den: Fraction = Fraction(0)
    r_num: Fraction = Fraction(0)
    r_den: Fraction = Fraction(0)

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(
            self.p_num + other.p_num,
            self.p_den + other.p_den,
            self.r_num + other.r_num,
            self.r_den + other.r_den,
        )

    def prf(self) -> PRF:
        precision = self.p_num / self.p_den if self.p_den else Fraction(0)
        recall = self.r_num / self.r_den if self.r_den else Fraction(0)
        return PRF(precision, recall)


def as_clustering(clusters: Iterable[Iterable[MentionKey]]) -> Clustering:
    """Canonicalize and validate: non-empty clusters, pairwise disjoint."""
    result = tuple(frozenset((s, e) for s, e in cluster) for cluster in clusters)
    seen: set[MentionKey] = set()
    for cluster in result:
        if not cluster:
            raise MetricsError("empty cluster")
        overlap = seen & cluster
        if overlap:
            raise MetricsError(f"mention {sorted(overlap)[0]} in two clusters")
        seen |= cluster
    return result


def _key_to_cluster(clustering: Clustering) -> dict[MentionKey, frozenset[MentionKey]]:
    return {key: cluster for cluster in clustering for key in cluster}


# ---------------------------------------------------------------------------
# MUC (link-based, Vilain et al.)

def muc_counts(gold: Clustering, pred: Clustering) -> Counts:
    def side(base: Clustering, other: Clustering) -> tuple[Fraction, Fraction]:
        other_of = _key_to_cluster(other)
        num = Fraction(0)
        den = Fraction(0)
        for cluster in base:
            if len(cluster) == 1:
                continue  # |K| - 1 = 0; drop from the denominator
            parts = {other_of[key] for key in cluster if key in other_of}
            absent = sum(1 for key in cluster if key not in other_of)
            partitions = len(parts) + absent
            num += len(cluster) - partitions
            den += len(cluster) - 1
        return num, den

    r_num, r_den = side(gold, pred)
    p_num, p_den = side(pred, gold)
    return Counts(p_num, p_den, r_num, r_den)


def muc(gold: Clustering, pred: Clustering) -> PRF:
    return muc_counts(gold, pred).prf()


# ---------------------------------------------------------------------------
# B3 (mention-based, Bagga & Baldwin)

def b_cubed_counts(gold: Clustering, pred: Clustering) -> Counts:
    def side(base: Clustering, other: Clustering) -> tuple[Fraction, Fraction]:
        other_of = _key_to_cluster(other)
        num = Fraction(0)
        den = Fraction(0)
        for cluster in base:
            for key in cluster:
                twin = other_of.get(key, frozenset())
                num += Fraction(len(cluster & twin), len(cluster))
                den += 1
        return num, den

    r_num, r_den = side(gold, pred)
    p_num, p_den = side(pred, gold)
    return Counts(p_num, p_den, r_num, r_den)


def b_cubed(gold: Clustering, pred: Clustering) -> PRF:
    return b_cubed_counts(gold, pred).prf()


# ---------------------------------------------------------------------------
# CEAFe (entity-based, Luo 2005, phi_4) over an exact optimal alignment

def phi4(a: frozenset[MentionKey], b: frozenset[MentionKey]) -> Fraction:
    return Fraction(2 * len(a & b), len(a) + len(b))


def ceaf_e_counts(gold: Clustering, pred: Clustering) -> Counts:
    if gold and pred:
        matrix = [[phi4(g, p) for p in pred] for g in gold]
        _, total = assignment_max(matrix)
    else:
        total = Fraction(0)
    return Counts(total, Fraction(len(pred)), total, Fraction(len(gold)))


def ceaf_e(gold: Clustering, pred: Clustering) -> PRF:
    return ceaf_e_counts(gold, pred).prf()


def assignment_max(
    score_matrix: Sequence[Sequence[Fraction | int]],
) -> tuple[tuple[tuple[int, int], ...], Fraction]:
    """Maximum-weight one-to-one matching (Kuhn-Munkres), exact for rational
    inputs. Returns the chosen (row, col) pairs and their total weight."""
    rows = len(score_matrix)
    cols = len(score_matrix[0]) if rows else 0
    if rows == 0 or cols == 0:
        return ((), Fraction(0))
    weights = [[Fraction(value) for value in row] for row in score_matrix]
    if any(len(row) != cols for row in weights):
        raise MetricsError("ragged score matrix")
    if any(value < 0 for row in weights for value in row):
        raise MetricsError("negative score")
    n = max(rows, cols)
    top = max(value for row in weights for value in row)
    # square min-cost matrix; padding cells cost the same as weight 0
    cost = [
        [
            top - weights[i][j] if i < rows and j < cols else top
            for j in range(n)
        ]
        for i in range(n)
    ]
    col_of_row = _hungarian_min(cost)
    pairs = tuple(
        (i, col_of_row[i])
        for i in range(rows)
        if col_of_row[i] < cols
    )
    total = sum((weights[i][j] for i, j in pairs), Fraction(0))
    return (pairs, total)


def _hungarian_min(cost: list[list[Fraction]]) -> list[int]:
    """Square min-cost assignment via the potentials method. Returns the
    column assigned to each row."""
    n = len(cost)
    infinity = sum((abs(c) for row in cost for c in row), Fraction(1))
    u = [Fraction(0)] * (n + 1)
    v = [Fraction(0)] * (n + 1)
    match = [0] * (n + 1)  # match[col 1..n] = row; 0 = free
    way = [0] * (n + 1)
    for row in range(1, n + 1):
        match[0] = row
        j0 = 0
        minv = [infinity] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = infinity
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    col_of_row = [0] * n
    for col in range(1, n + 1):
        if match[col]:
            col_of_row[match[col] - 1] = col - 1
    return col_of_row


# ---------------------------------------------------------------------------
# Aggregates

def conll_avg(muc_prf: PRF, b3_prf: PRF, ceafe_prf: PRF) -> Fraction:
    return (muc_prf.f1 + b3_prf.f1 + ceafe_prf.f1) / 3


def mention_counts(
    gold_keys: Iterable[MentionKey], pred_keys: Iterable[MentionKey]
) -> Counts:
    gold_set = set(gold_keys)
    pred_set = set(pred_keys)
    hits = Fraction(len(gold_set & pred_set))
    return Counts(hits, Fraction(len(pred_set)), hits, Fraction(len(gold_set)))


def mention_prf(
    gold_keys: Iterable[MentionKey], pred_keys: Iterable[MentionKey]
) -> PRF:
    return mention_counts(gold_keys, pred_keys).prf()


METRIC_NAMES = ("MENTION", "MUC", "B3", "CEAFE")


def score_documents(
    gold_by_doc: Mapping[str, Clustering], pred_by_doc: Mapping[str, Clustering]
) -> dict[str, PRF | Fraction]:
    """Corpus scores: counts are summed across documents, then turned into
    P/R/F1 per metric plus the CoNLL average."""
    missing = set(gold_by_doc) ^ set(pred_by_doc)
    if missing:
        raise MetricsError(f"document sets differ: {sorted(missing)[0]!r}")
    totals = {name: Counts() for name in METRIC_NAMES}
    for doc_id, gold in gold_by_doc.items():
        pred = pred_by_doc[doc_id]
        gold_keys = [key for cluster in gold for key in cluster]
        pred_keys = [key for cluster in pred for key in cluster]
        totals["MENTION"] += mention_counts(gold_keys, pred_keys)
        totals["MUC"] += muc_counts(gold, pred)
        totals["B3"] += b_cubed_counts(gold, pred)
        totals["CEAFE"] += ceaf_e_counts(gold, pred)
    scores: dict[str, PRF | Fraction] = {
        name: counts.prf() for name, counts in totals.items()
    }
    scores["CONLL"] = conll_avg(
        scores["MUC"], scores["B3"], scores["CEAFE"]  # type: ignore[arg-type]
    )
    return scores


def format_percent(value: Fraction, decimals: int = 2) -> str:
    """Exact half-up rendering of a rational as a percentage."""
    scale = 10 ** decimals
    scaled = value * 100 * scale
    whole = (scaled.numerator * 2 + scaled.denominator) // (2 * scaled.denominator)
    return f"{whole // scale}.{whole % scale:0{decimals}d}"


def format_scores(scores: Mapping[str, PRF | Fraction]) -> str:
    lines = []
    for name in METRIC_NAMES:
        prf = scores[name]
        assert isinstance(prf, PRF)
        lines.append(
            f"{name} {format_percent(prf.precision)} "
            f"{format_percent(prf.recall)} {format_percent(prf.f1)}"
        )
    conll = scores["CONLL"]
    assert isinstance(conll, Fraction)
    lines.append(f"CONLL {format_percent(conll)}")
    return "\n".join(lines)


def clustering_of(clusters: Iterable) -> Clustering:
    """Clustering from corpus Cluster objects or span groups."""
    groups = []
    for cluster in clusters:
        spans = getattr(cluster, "spans", None)
        groups.append(spans if spans is not None else cluster)
    return as_clustering(groups)
