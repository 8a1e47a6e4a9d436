"""Top-level resolver with an sklearn-style parameter surface.

Parameters are stored verbatim in ``__init__`` and exposed through
``get_params``/``set_params`` so the resolver clones and composes like an
estimator; ``predict`` maps documents to clusterings and ``score`` returns
the corpus CoNLL F1 against the documents' gold clusters.
"""

from __future__ import annotations

import inspect
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Sequence

from .corpus import Cluster, Document
from .decode import (
    EndpointConfig,
    Hook,
    OraclePredictor,
    Predictor,
    RunResult,
    external_predictor,
    run_incremental,
)
from .metrics import clustering_of, score_documents
from .state import Mode, Ordering, PipelineConfig

PredictorSpec = (
    str | EndpointConfig | Predictor | Callable[[Document], Predictor]
)


class IncrementalCoreferenceResolver:
    """Incremental coreference resolution over chunked documents.

    Parameters
    ----------
    mode : "entity-centric" or "full-prefix"
    chunk_budget : tokens per chunk, rounded up to the nearest sentence
    context_budget : annotated items of preceding sentences kept in
        entity-centric inputs (ignored in full-prefix mode)
    ordering : "recency" or "document" entity ordering
    predictor : "oracle", a Predictor, an EndpointConfig / "tcp:..." /
        "stdio:..." address, or a callable mapping a document to a Predictor
    max_nesting : mention nesting depth bound during decoding
    jobs : documents processed in parallel
    """

    def __init__(
        self,
        mode: str = "entity-centric",
        chunk_budget: int = 100,
        context_budget: int = 100,
        ordering: str = "recency",
        predictor: PredictorSpec = "oracle",
        max_nesting: int = 4,
        jobs: int = 1,
    ):
        self.mode = mode
        self.chunk_budget = chunk_budget
        self.context_budget = context_budget
        self.ordering = ordering
        self.predictor = predictor
        self.max_nesting = max_nesting
        self.jobs = jobs

    # sklearn parameter protocol ------------------------------------------

    @classmethod
    def _param_names(cls) -> list[str]:
        signature = inspect.signature(cls.__init__)
        return [name for name in signature.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "IncrementalCoreferenceResolver":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}"
                )
            setattr(self, name, value)
        return self

    # ----------------------------------------------------------------------

    def config(self) -> PipelineConfig:
        return PipelineConfig(
            mode=Mode(self.mode),
            chunk_budget=self.chunk_budget,
            context_budget=self.context_budget,
            ordering=Ordering(self.ordering),
            max_nesting=self.max_nesting,
        )

    def _predictor_for(self, doc: Document) -> Predictor:
        spec = self.predictor
        if isinstance(spec, Predictor):
            return spec
        if isinstance(spec, EndpointConfig):
            return external_predictor(spec)
        if callable(spec):
            return spec(doc)
        if spec == "oracle":
            if doc.gold_clusters is None:
                raise ValueError(
                    f"{doc.doc_id}: oracle predictor needs gold clusters"
                )
            return OraclePredictor(doc)
        if isinstance(spec, str) and spec.partition(":")[0] in ("tcp", "stdio"):
            return external_predictor(spec)
        raise ValueError(f"unknown predictor spec {spec!r}")

    def run(
        self, docs: Sequence[Document], hooks: Sequence[Hook] = ()
    ) -> list[RunResult]:
        config = self.config()

        def one(doc: Document) -> RunResult:
            predictor = self._predictor_for(doc)
            owns = not isinstance(self.predictor, Predictor)
            try:
                return run_incremental(doc, config, predictor, hooks)
            finally:
                if owns:
                    predictor.close()

        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                return list(pool.map(one, docs))
        return [one(doc) for doc in docs]

    def predict(
        self, docs: Sequence[Document], hooks: Sequence[Hook] = ()
    ) -> list[tuple[Cluster, ...]]:
        return [result.clusters for result in self.run(docs, hooks)]

    def score(self, docs: Sequence[Document]) -> float:
        """Corpus CoNLL F1 against the documents' gold clusters."""
        results = self.run(docs)
        gold = {
            doc.doc_id: clustering_of(doc.gold_clusters or ()) for doc in docs
        }
        pred = {r.doc_id: clustering_of(r.clusters) for r in results}
        conll = score_documents(gold, pred)["CONLL"]
        assert isinstance(conll, Fraction)
        return float(conll)
