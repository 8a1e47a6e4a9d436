"""Incremental coreference resolution with entity-centric input compression,
constrained decoding over pluggable predictors, and reference metrics."""

from .annotation import (
    AnnotatedSequence,
    AnnotationError,
    ClusterId,
    Ctl,
    DocTok,
    Surface,
    linearize_chunk,
    parse_annotated,
    render,
    scan,
)
from .corpus import (
    Chunk,
    Cluster,
    CorpusError,
    Document,
    Mention,
    chunk_document,
    clusters_from_mentions,
    clusters_from_spans,
    make_folds,
    read_conll,
    read_docjson,
    write_conll,
    write_docjson,
)
from .decode import (
    Action,
    AllowedActions,
    DecodeError,
    DecoderState,
    EndpointConfig,
    OraclePredictor,
    Predictor,
    ProtocolError,
    RunResult,
    allowed_actions,
    decode_chunk,
    external_predictor,
    oracle_predictor,
    run_incremental,
    step,
)
from .metrics import (
    PRF,
    MetricsError,
    assignment_max,
    b_cubed,
    ceaf_e,
    conll_avg,
    format_scores,
    mention_prf,
    muc,
    score_documents,
)
from .resolver import IncrementalCoreferenceResolver
from .state import (
    ContextWindow,
    Entity,
    EntityState,
    Mode,
    Ordering,
    PipelineConfig,
    build_entity_centric_input,
    build_full_prefix_input,
    linearize_state,
    take_context,
    update_state,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
