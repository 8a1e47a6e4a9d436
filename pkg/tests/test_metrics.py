from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from increco.metrics import (
    MetricsError,
    as_clustering,
    assignment_max,
    b_cubed,
    ceaf_e,
    conll_avg,
    format_percent,
    format_scores,
    mention_prf,
    muc,
    score_documents,
)
from oracles import b3_brute, ceafe_brute, hungarian_brute, muc_brute

# the worked example: gold {a,b,c} vs pred {a,b},{c}
A, B, C = (0, 1), (2, 3), (4, 5)
GOLD = as_clustering([[A, B, C]])
PRED = as_clustering([[A, B], [C]])


def test_muc_worked_example():
    prf = muc(GOLD, PRED)
    assert prf.recall == Fraction(1, 2)
    assert prf.precision == 1
    assert prf.f1 == Fraction(2, 3)


def test_b_cubed_worked_example():
    prf = b_cubed(GOLD, PRED)
    assert prf.recall == Fraction(5, 9)
    assert prf.precision == 1
    assert prf.f1 == Fraction(5, 7)


def test_ceaf_e_worked_example():
    prf = ceaf_e(GOLD, PRED)
    assert prf.recall == Fraction(4, 5)
    assert prf.precision == Fraction(2, 5)
    assert prf.f1 == Fraction(8, 15)


def test_conll_avg_of_worked_example():
    value = conll_avg(muc(GOLD, PRED), b_cubed(GOLD, PRED), ceaf_e(GOLD, PRED))
    assert value == (Fraction(2, 3) + Fraction(5, 7) + Fraction(8, 15)) / 3
    assert value == Fraction(67, 105)
    assert format_percent(value) == "63.81"


def test_identity_scores_one():
    for metric in (muc, b_cubed, ceaf_e):
        prf = metric(GOLD, GOLD)
        assert prf.precision == prf.recall == prf.f1 == 1


def test_muc_all_singletons_has_zero_recall():
    singles = as_clustering([[A], [B], [C]])
    assert muc(GOLD, singles).recall == 0


def test_b_cubed_disjoint_mention_sets():
    other = as_clustering([[(10, 11), (12, 13)]])
    prf = b_cubed(GOLD, other)
    assert prf.precision == prf.recall == 0


def test_mention_prf_subset():
    prf = mention_prf([A, B, C, (9, 10)], [A, B])
    assert prf.precision == 1
    assert prf.recall == Fraction(1, 2)


def test_clustering_rejects_overlap_and_empty():
    with pytest.raises(MetricsError):
        as_clustering([[A, B], [B, C]])
    with pytest.raises(MetricsError):
        as_clustering([[]])


def test_assignment_max_single_row():
    pairs, total = assignment_max([[Fraction(4, 5), Fraction(1, 2)]])
    assert pairs == ((0, 0),)
    assert total == Fraction(4, 5)


def test_assignment_max_identity_diagonal():
    eye = [[Fraction(int(i == j)) for j in range(4)] for i in range(4)]
    pairs, total = assignment_max(eye)
    assert total == 4
    assert pairs == tuple((i, i) for i in range(4))


def test_assignment_max_empty():
    assert assignment_max([]) == ((), Fraction(0))


@pytest.mark.parametrize("seed", range(20))
def test_assignment_max_matches_brute_force(seed):
    rng = random.Random(seed)
    rows = rng.randint(1, 6)
    cols = rng.randint(1, 6)
    matrix = [
        [Fraction(rng.randint(0, 20), rng.randint(1, 9)) for _ in range(cols)]
        for _ in range(rows)
    ]
    _, total = assignment_max(matrix)
    assert total == hungarian_brute(matrix)


def random_clustering(rng: random.Random, n_clusters: int) -> tuple:
    keys = [(i, i + 1) for i in range(rng.randint(n_clusters, 14))]
    rng.shuffle(keys)
    groups = [[] for _ in range(n_clusters)]
    for i, key in enumerate(keys):
        groups[i % n_clusters].append(key)
    return as_clustering(g for g in groups if g)


@pytest.mark.parametrize("seed", range(30))
def test_metrics_match_brute_force(seed):
    rng = random.Random(1000 + seed)
    gold = random_clustering(rng, rng.randint(1, 5))
    pred = random_clustering(rng, rng.randint(1, 5))
    r, p = muc_brute(gold, pred)
    assert (muc(gold, pred).recall, muc(gold, pred).precision) == (r, p)
    r, p = b3_brute(gold, pred)
    assert (b_cubed(gold, pred).recall, b_cubed(gold, pred).precision) == (r, p)
    r, p = ceafe_brute(gold, pred)
    assert (ceaf_e(gold, pred).recall, ceaf_e(gold, pred).precision) == (r, p)


@pytest.mark.parametrize("seed", range(12))
def test_symmetry_precision_is_swapped_recall(seed):
    rng = random.Random(7000 + seed)
    x = random_clustering(rng, rng.randint(1, 4))
    y = random_clustering(rng, rng.randint(1, 4))
    for metric in (muc, b_cubed, ceaf_e):
        assert metric(x, y).precision == metric(y, x).recall


@given(st.integers(1, 5), st.integers(0, 10000))
def test_scores_bounded(n_clusters, seed):
    rng = random.Random(seed)
    gold = random_clustering(rng, n_clusters)
    pred = random_clustering(rng, rng.randint(1, 5))
    for metric in (muc, b_cubed, ceaf_e):
        prf = metric(gold, pred)
        assert 0 <= prf.precision <= 1
        assert 0 <= prf.recall <= 1
        assert 0 <= prf.f1 <= 1


@pytest.mark.parametrize("seed", range(12))
def test_matching_singleton_never_hurts_b3_or_ceafe(seed):
    rng = random.Random(20_000 + seed)
    gold = random_clustering(rng, rng.randint(1, 4))
    pred = random_clustering(rng, rng.randint(1, 4))
    extra = (99, 100)
    gold_plus = gold + (frozenset([extra]),)
    pred_plus = pred + (frozenset([extra]),)
    for metric in (b_cubed, ceaf_e):
        assert metric(gold_plus, pred_plus).f1 >= metric(gold, pred).f1


def test_score_documents_aggregates_counts():
    scores = score_documents({"d1": GOLD, "d2": GOLD}, {"d1": PRED, "d2": GOLD})
    # recall numerator/denominator sum across documents: (1 + 2) / (2 + 2)
    assert scores["MUC"].recall == Fraction(3, 4)
    with pytest.raises(MetricsError):
        score_documents({"d1": GOLD}, {"other": PRED})


def test_format_scores_block():
    text = format_scores(score_documents({"d": GOLD}, {"d": GOLD}))
    lines = text.splitlines()
    assert lines[0] == "MENTION 100.00 100.00 100.00"
    assert lines[-1] == "CONLL 100.00"
    assert [line.split()[0] for line in lines] == [
        "MENTION", "MUC", "B3", "CEAFE", "CONLL",
    ]
