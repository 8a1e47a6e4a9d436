from __future__ import annotations

import random

import pytest

from conftest import make_doc
from increco.annotation import parse_annotated, render
from increco.corpus import Mention, chunk_document
from increco.decode import (
    COPY,
    OPEN,
    Action,
    AllowedActions,
    DecodeError,
    DecoderState,
    OraclePredictor,
    Predictor,
    ProtocolError,
    RecordingPredictor,
    ScriptedPredictor,
    allowed_actions,
    close_with,
    decode_chunk,
    run_incremental,
    step,
)
from increco.metrics import b_cubed, ceaf_e, clustering_of, muc
from increco.state import Mode, Ordering, PipelineConfig, build_full_prefix_input
from increco.synthetic import make_corpus


def fresh(doc, known_ids=0, max_nesting=4):
    (chunk,) = chunk_document(doc, budget=10**6)
    return DecoderState.fresh(doc, chunk.token_range, known_ids, max_nesting), chunk


class RandomPredictor(Predictor):
    """Adversarial predictor: uniform over the allowed set."""

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def choose(self, input_seq, emitted, allowed):
        return self._rng.choice(list(allowed))


# ---------------------------------------------------------------------------
# Action masks and steps

def test_start_of_chunk_mask():
    state, _ = fresh(make_doc([["a", "b", "c"]]))
    assert allowed_actions(state) == AllowedActions(copy=True, open=True, n_close=0)


def test_mask_inside_open_mention():
    state, _ = fresh(make_doc([["a", "b", "c"]]), known_ids=2)
    state = step(step(state, OPEN), COPY)
    allowed = allowed_actions(state)
    assert COPY in allowed and OPEN in allowed
    assert close_with(0) in allowed and close_with(2) in allowed
    assert close_with(3) not in allowed
    assert list(allowed) == [COPY, OPEN, close_with(0), close_with(1), close_with(2)]


def test_all_copy_reaches_done():
    state, _ = fresh(make_doc([["a", "b", "c"]]))
    for _ in range(3):
        state = step(state, COPY)
    assert state.done
    with pytest.raises(DecodeError):
        allowed_actions(state)


def test_minimal_mention_emission():
    doc = make_doc([["w"]])
    state, _ = fresh(doc)
    state = step(step(step(state, OPEN), COPY), close_with(0))
    assert state.done
    assert render_state(doc, state) == "<m> w | 0 </m>"


def render_state(doc, state):
    from increco.annotation import AnnotatedSequence

    return render(AnnotatedSequence(doc, state.emitted, None))


def test_fresh_id_must_be_dense():
    state, _ = fresh(make_doc([["a", "b"]]), known_ids=2)
    state = step(step(state, OPEN), COPY)
    with pytest.raises(DecodeError, match="dense"):
        step(state, close_with(5))


def test_empty_mention_cannot_close():
    state, _ = fresh(make_doc([["a", "b"]]))
    state = step(state, OPEN)
    assert allowed_actions(state).n_close == 0
    with pytest.raises(DecodeError, match="empty"):
        step(state, close_with(0))


def test_nesting_cap():
    state, _ = fresh(make_doc([["a", "b"]]), max_nesting=2)
    state = step(step(state, OPEN), OPEN)
    assert OPEN not in allowed_actions(state)
    with pytest.raises(DecodeError, match="nesting"):
        step(state, OPEN)


def test_copy_past_end_rejected():
    state, _ = fresh(make_doc([["a"]]))
    state = step(state, COPY)
    assert state.done


# ---------------------------------------------------------------------------
# decode_chunk

def scripted_decode(doc, actions, known_ids=0):
    (chunk,) = chunk_document(doc, budget=10**6)
    input_seq = build_full_prefix_input(doc, [], chunk)
    return decode_chunk(
        ScriptedPredictor(actions), input_seq, chunk, known_ids=known_ids
    )


def test_scripted_nested_possessive_output():
    doc = make_doc([["Hong", "Kong", "'s", "software", "is", "known"]])
    actions = [
        OPEN, OPEN, COPY, COPY, COPY, close_with(7 - 6), COPY, close_with(0),
        COPY, COPY,
    ]
    # pipeline ids are dense from known_ids=1 here: inner closes first
    decoded = scripted_decode(doc, actions, known_ids=1)
    assert render(decoded) == (
        "<m> <m> Hong Kong 's | 1 </m> software | 0 </m> is known"
    )


def test_scripted_fresh_id_then_reuse():
    doc = make_doc([["Without", "planning", "it", "in", "advance", ",",
                     "they", "chose", "to", "settle"]])
    actions = [
        COPY, COPY, OPEN, COPY, close_with(8), COPY, COPY, COPY, COPY,
        OPEN, COPY, close_with(8), COPY, COPY,
    ]
    decoded = scripted_decode(doc, actions, known_ids=8)
    assert render(decoded) == (
        "Without planning <m> it | 8 </m> in advance , they "
        "<m> chose | 8 </m> to settle"
    )


def test_illegal_action_retried_then_fails():
    doc = make_doc([["a", "b"]])

    class Stubborn(Predictor):
        def __init__(self):
            self.calls = 0

        def choose(self, input_seq, emitted, allowed):
            self.calls += 1
            return close_with(0)

    stubborn = Stubborn()
    with pytest.raises(DecodeError, match="illegal action"):
        scripted = stubborn
        (chunk,) = chunk_document(doc, budget=10**6)
        decode_chunk(scripted, build_full_prefix_input(doc, [], chunk), chunk)
    assert stubborn.calls == 2


def test_recovering_predictor_passes_after_retry():
    doc = make_doc([["a"]])

    class Flaky(Predictor):
        def __init__(self):
            self.calls = 0

        def choose(self, input_seq, emitted, allowed):
            self.calls += 1
            return close_with(9) if self.calls == 1 else COPY

    (chunk,) = chunk_document(doc, budget=10**6)
    decoded = decode_chunk(Flaky(), build_full_prefix_input(doc, [], chunk), chunk)
    assert render(decoded) == "a"


@pytest.mark.parametrize("seed", range(50))
def test_adversarial_decode_always_parses(seed):
    rng = random.Random(seed)
    doc = make_doc([[f"w{i}" for i in range(rng.randint(1, 12))]])
    (chunk,) = chunk_document(doc, budget=10**6)
    input_seq = build_full_prefix_input(doc, [], chunk)
    decoded = decode_chunk(
        RandomPredictor(seed), input_seq, chunk, known_ids=rng.randint(0, 3)
    )
    mentions = parse_annotated(decoded)
    covered = [i for i in range(*chunk.token_range)]
    from increco.annotation import DocTok

    assert [it.index for it in decoded.items if isinstance(it, DocTok)] == covered
    for m in mentions:
        assert chunk.token_range[0] <= m.start < m.end <= chunk.token_range[1]


def test_exhaustive_no_dead_ends_small_targets():
    """Every reachable decoder state (targets <= 6 tokens, nesting <= 2) has
    a legal action and can reach DONE."""
    for n_tokens in range(1, 7):
        doc = make_doc([[f"w{i}" for i in range(n_tokens)]])
        start, _ = fresh(doc, known_ids=0, max_nesting=2)
        seen: dict[tuple, bool] = {}

        def key(state):
            return (state.cursor, state.open_starts, state.next_cluster_id)

        def explore(state) -> bool:
            """True iff DONE is reachable; asserts no dead ends on the way."""
            if state.done:
                return True
            k = key(state)
            if k in seen:
                return seen[k]
            seen[k] = False  # cycle guard; revisits within this walk fail fast
            allowed = list(allowed_actions(state))
            assert allowed, f"dead end at {k}"
            reachable = False
            for action in allowed:
                if explore(step(state, action)):
                    reachable = True
            assert reachable, f"DONE unreachable from {k}"
            seen[k] = True
            return True

        explore(start)


# ---------------------------------------------------------------------------
# Oracle predictor

def test_oracle_reproduces_gold_per_chunk():
    doc = make_doc(
        [["a", "b", "c", "d"], ["e", "f", "g", "h"]],
        clusters=[[(0, 2), (4, 5)], [(1, 2), (6, 8)]],
    )
    (chunk0, chunk1) = chunk_document(doc, 4)
    oracle = OraclePredictor(doc)
    input0 = build_full_prefix_input(doc, [], chunk0)
    decoded0 = decode_chunk(oracle, input0, chunk0, known_ids=0)
    # pipeline ids are dense in close order: the inner mention closes first
    assert render(decoded0) == "<m> a <m> b | 0 </m> | 1 </m> c d"
    history = [decoded0]
    input1 = build_full_prefix_input(doc, history, chunk1)
    decoded1 = decode_chunk(oracle, input1, chunk1, known_ids=2)
    assert render(decoded1) == "<m> e | 1 </m> f <m> g h | 0 </m>"


def test_oracle_zero_mentions_all_copy():
    doc = make_doc([["a", "b", "c"]], clusters=[])
    (chunk,) = chunk_document(doc, 100)
    decoded = decode_chunk(
        OraclePredictor(doc), build_full_prefix_input(doc, [], chunk), chunk
    )
    assert render(decoded) == "a b c"


def test_oracle_id_mapping_first_seen_in_later_chunk():
    # the gold cluster first closed in chunk 2 gets the next unused pipeline id
    doc = make_doc(
        [["a", "b", "c"], ["d", "e", "f"]],
        clusters=[[(4, 5)], [(0, 1), (5, 6)]],
    )
    config = PipelineConfig(mode=Mode.FULL_PREFIX, chunk_budget=3)
    result = run_incremental(doc, config, OraclePredictor(doc))
    assert [c.spans for c in result.clusters] == [((0, 1), (5, 6)), ((4, 5),)]


def test_oracle_rejects_crossing_gold():
    doc = make_doc([["a", "b", "c", "d"]])
    mentions = [Mention(0, 2, 0), Mention(1, 3, 1)]
    from increco.corpus import Cluster

    with pytest.raises(DecodeError, match="crossing"):
        OraclePredictor(
            doc,
            (Cluster(0, (mentions[0],)), Cluster(1, (Mention(1, 3, 1),))),
        )


def test_oracle_rejects_chunk_crossing_mention():
    doc = make_doc([["a", "b"], ["c", "d"]], clusters=[[(1, 3)]])
    config = PipelineConfig(mode=Mode.FULL_PREFIX, chunk_budget=2)
    with pytest.raises(DecodeError, match="crosses the chunk boundary"):
        run_incremental(doc, config, OraclePredictor(doc))


# ---------------------------------------------------------------------------
# run_incremental

def perfect(doc, config):
    result = run_incremental(doc, config, OraclePredictor(doc))
    gold = clustering_of(doc.gold_clusters)
    pred = clustering_of(result.clusters)
    return all(
        metric(gold, pred).f1 == 1 for metric in (muc, b_cubed, ceaf_e)
    ), result


@pytest.mark.parametrize("mode", [Mode.FULL_PREFIX, Mode.ENTITY_CENTRIC])
@pytest.mark.parametrize("ordering", [Ordering.RECENCY, Ordering.DOCUMENT])
def test_oracle_end_to_end_is_perfect(mode, ordering):
    docs = make_corpus(4, seed=11, n_sentences=(6, 12))
    for doc in docs:
        config = PipelineConfig(
            mode=mode, chunk_budget=30, context_budget=50, ordering=ordering
        )
        ok, _ = perfect(doc, config)
        assert ok


def test_single_chunk_doc_same_output_in_both_modes():
    doc = make_doc([["a", "b", "c"]], clusters=[[(0, 1)]])
    results = [
        run_incremental(
            doc, PipelineConfig(mode=mode, chunk_budget=100), OraclePredictor(doc)
        )
        for mode in (Mode.FULL_PREFIX, Mode.ENTITY_CENTRIC)
    ]
    assert results[0].decoded == results[1].decoded
    assert results[0].chunk_logs == results[1].chunk_logs


def test_full_prefix_input_lengths_nondecreasing():
    (doc,) = make_corpus(1, seed=3, n_sentences=(14, 16))
    config = PipelineConfig(mode=Mode.FULL_PREFIX, chunk_budget=20)
    result = run_incremental(doc, config, OraclePredictor(doc))
    lengths = [log.input_len for log in result.chunk_logs]
    assert len(lengths) >= 3
    assert all(a <= b for a, b in zip(lengths, lengths[1:]))


def test_recording_predictor_captures_trace():
    doc = make_doc([["a", "b"], ["c", "d"]], clusters=[[(0, 1), (2, 3)]])
    config = PipelineConfig(mode=Mode.FULL_PREFIX, chunk_budget=2)
    recorder = RecordingPredictor(OraclePredictor(doc))
    run_incremental(doc, config, recorder)
    assert recorder.chunks == [
        ["open", "copy", "close:0", "copy"],
        ["open", "copy", "close:0", "copy"],
    ]


def test_action_string_round_trip():
    for action in (COPY, OPEN, close_with(4)):
        assert Action.decode(action.encode()) == action
    with pytest.raises(ProtocolError):
        Action.decode("close:x")
    with pytest.raises(ProtocolError):
        Action.decode("jump")
