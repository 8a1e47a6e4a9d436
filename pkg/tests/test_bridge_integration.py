"""Engine <-> bridge conformance over the wire protocol. Skipped when the
bridge is not built; the primary suite never needs it."""

from __future__ import annotations

import json
import shutil
import subprocess
import time
from pathlib import Path

import pytest

from increco.annotation import render
from increco.decode import (
    EndpointConfig,
    OraclePredictor,
    RecordingPredictor,
    external_predictor,
    run_incremental,
)
from increco.state import Mode, PipelineConfig
from increco.synthetic import make_corpus

BRIDGE_MAIN = Path(__file__).parent.parent / "bridge" / "dist" / "main.js"

pytestmark = pytest.mark.skipif(
    not BRIDGE_MAIN.exists() or shutil.which("node") is None,
    reason="bridge not built (run `npm run build` in bridge/)",
)


@pytest.fixture()
def recorded(tmp_path):
    (doc,) = make_corpus(1, seed=77, n_sentences=(6, 10))
    config = PipelineConfig(mode=Mode.FULL_PREFIX, chunk_budget=25)
    recorder = RecordingPredictor(OraclePredictor(doc))
    reference = run_incremental(doc, config, recorder)
    trace_path = tmp_path / "trace.json"
    trace_path.write_text(
        json.dumps({"doc_id": doc.doc_id, "chunks": recorder.chunks})
    )
    return doc, config, reference, trace_path


def test_replay_bridge_reproduces_gold_run_over_stdio(recorded):
    doc, config, reference, trace_path = recorded
    endpoint = EndpointConfig(
        "stdio", command=("node", str(BRIDGE_MAIN), "--mode", "replay",
                          "--replay", str(trace_path)),
    )
    predictor = external_predictor(endpoint)
    try:
        result = run_incremental(doc, config, predictor)
    finally:
        predictor.close()
    assert result.clusters == reference.clusters
    ours = [render(seq) for seq in result.decoded]
    theirs = [render(seq) for seq in reference.decoded]
    assert ours == theirs  # byte-identical annotated output


def test_replay_bridge_over_tcp(recorded, tmp_path):
    doc, config, reference, trace_path = recorded
    server = subprocess.Popen(
        ["node", str(BRIDGE_MAIN), "--mode", "replay", "--replay",
         str(trace_path), "--transport", "tcp", "--port", "0"],
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = server.stderr.readline()
        port = int(line.rsplit(":", 1)[1])
        predictor = external_predictor(f"tcp:127.0.0.1:{port}")
        try:
            result = run_incremental(doc, config, predictor)
        finally:
            predictor.close()
        assert result.clusters == reference.clusters
    finally:
        server.kill()
        server.wait(timeout=10)


def test_model_bridge_stays_in_mask(tmp_path):
    (doc,) = make_corpus(1, seed=5, n_sentences=(4, 6))
    checkpoint = tmp_path / "lm.json"
    checkpoint.write_text(json.dumps({
        "order": 2,
        "logprobs": {"": {"<m>": -6.0, "|": -6.5}},
        "fallback": -8.0,
    }))
    endpoint = EndpointConfig(
        "stdio", command=("node", str(BRIDGE_MAIN), "--mode", "model",
                          "--checkpoint", str(checkpoint)),
    )
    predictor = external_predictor(endpoint)
    try:
        config = PipelineConfig(mode=Mode.FULL_PREFIX, chunk_budget=20)
        # decode_chunk re-validates every returned action against the mask,
        # so completing at all means the server stayed legal throughout
        result = run_incremental(doc, config, predictor)
    finally:
        predictor.close()
    assert sum(log.output_len for log in result.chunk_logs) >= len(doc.tokens)
