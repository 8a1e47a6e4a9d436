from __future__ import annotations

import pytest

from increco.resolver import IncrementalCoreferenceResolver
from increco.synthetic import make_corpus


def test_get_set_params_round_trip():
    resolver = IncrementalCoreferenceResolver()
    params = resolver.get_params()
    assert params["mode"] == "entity-centric"
    assert params["chunk_budget"] == 100
    assert params["context_budget"] == 100
    assert params["ordering"] == "recency"
    resolver.set_params(mode="full-prefix", chunk_budget=50)
    assert resolver.get_params()["mode"] == "full-prefix"
    assert resolver.get_params()["chunk_budget"] == 50
    with pytest.raises(ValueError, match="invalid parameter"):
        resolver.set_params(banana=1)


def test_clone_by_params_like_sklearn():
    resolver = IncrementalCoreferenceResolver(mode="full-prefix", jobs=2)
    clone = IncrementalCoreferenceResolver(**resolver.get_params())
    assert clone.get_params() == resolver.get_params()


def test_predict_and_score_oracle():
    docs = make_corpus(3, seed=5, n_sentences=(4, 8))
    resolver = IncrementalCoreferenceResolver(chunk_budget=20)
    predictions = resolver.predict(docs)
    assert len(predictions) == len(docs)
    for doc, clusters in zip(docs, predictions):
        assert {c.spans for c in clusters} == {
            c.spans for c in doc.gold_clusters
        }
    assert resolver.score(docs) == 1.0


def test_parallel_jobs_match_sequential():
    docs = make_corpus(4, seed=9, n_sentences=(4, 6))
    sequential = IncrementalCoreferenceResolver(chunk_budget=15).predict(docs)
    parallel = IncrementalCoreferenceResolver(chunk_budget=15, jobs=4).predict(docs)
    assert sequential == parallel


def test_unknown_predictor_spec_rejected():
    docs = make_corpus(1, seed=1, n_sentences=(3, 4))
    resolver = IncrementalCoreferenceResolver(predictor="telepathy")
    with pytest.raises(ValueError, match="unknown predictor"):
        resolver.predict(docs)


def test_oracle_requires_gold():
    from conftest import make_doc

    doc = make_doc([["a", "b"]])
    resolver = IncrementalCoreferenceResolver()
    with pytest.raises(ValueError, match="gold clusters"):
        resolver.predict([doc])
