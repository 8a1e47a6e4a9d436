"""Constrained decoding.

A finite-state machine defines the legal next actions at every step; any
Predictor chooses among them and the engine re-validates, so the output is
grammar-valid by construction no matter what the predictor does.

Actions: COPY the next target token, OPEN a mention, or CLOSE the innermost
open mention with a cluster id (emitting ``| id </m>`` atomically). A fresh
id must equal the next unused integer, keeping ids dense.
"""

from __future__ import annotations

import json
import select
import socket
import subprocess
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterator, Sequence

from .annotation import (
    AnnotatedSequence,
    ClusterId,
    Ctl,
    DocTok,
    Item,
    parse_annotated,
    render,
)
from .corpus import Chunk, Cluster, Document, Mention, chunk_document
from .state import (
    EntityState,
    Mode,
    PipelineConfig,
    build_entity_centric_input,
    build_full_prefix_input,
    close_order,
    segment_sentences,
    take_context,
    update_state,
)


class DecodeError(Exception):
    pass


class ProtocolError(DecodeError):
    pass


class ActionKind(Enum):
    COPY = "copy"
    OPEN = "open"
    CLOSE = "close"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    cluster_id: int | None = None

    def encode(self) -> str:
        if self.kind is ActionKind.CLOSE:
            return f"close:{self.cluster_id}"
        return self.kind.value

    @staticmethod
    def decode(text: str) -> "Action":
        if text == "copy":
            return COPY
        if text == "open":
            return OPEN
        if text.startswith("close:"):
            payload = text[len("close:") :]
            if not payload.isdigit():
                raise ProtocolError(f"bad action string {text!r}")
            return close_with(int(payload))
        raise ProtocolError(f"bad action string {text!r}")


COPY = Action(ActionKind.COPY)
OPEN = Action(ActionKind.OPEN)

_CLOSE_CACHE: list[Action] = []


def close_with(cluster_id: int) -> Action:
    while len(_CLOSE_CACHE) <= cluster_id:
        _CLOSE_CACHE.append(Action(ActionKind.CLOSE, len(_CLOSE_CACHE)))
    return _CLOSE_CACHE[cluster_id]


@dataclass(frozen=True)
class AllowedActions:
    """The legal action set at one step. ``n_close`` legal close ids are
    0..n_close-1 (the last one is the fresh id)."""

    copy: bool = False
    open: bool = False
    n_close: int = 0

    def __contains__(self, action: object) -> bool:
        if not isinstance(action, Action):
            return False
        if action.kind is ActionKind.COPY:
            return self.copy
        if action.kind is ActionKind.OPEN:
            return self.open
        return action.cluster_id is not None and 0 <= action.cluster_id < self.n_close

    def __iter__(self) -> Iterator[Action]:
        if self.copy:
            yield COPY
        if self.open:
            yield OPEN
        for cid in range(self.n_close):
            yield close_with(cid)

    def __len__(self) -> int:
        return int(self.copy) + int(self.open) + self.n_close

    def only_open(self) -> "AllowedActions":
        return AllowedActions(copy=False, open=self.open, n_close=0)


@dataclass(frozen=True)
class DecoderState:
    doc: Document
    target: tuple[int, int]
    emitted: tuple[Item, ...] = ()
    cursor: int = -1  # set to target start in fresh()
    open_starts: tuple[int, ...] = ()
    next_cluster_id: int = 0
    max_nesting: int = 4

    @staticmethod
    def fresh(
        doc: Document,
        target: tuple[int, int],
        known_ids: int = 0,
        max_nesting: int = 4,
    ) -> "DecoderState":
        return DecoderState(
            doc=doc,
            target=target,
            cursor=target[0],
            next_cluster_id=known_ids,
            max_nesting=max_nesting,
        )

    @property
    def done(self) -> bool:
        return self.cursor == self.target[1] and not self.open_starts


def allowed_actions(state: DecoderState) -> AllowedActions:
    if state.done:
        raise DecodeError("no actions in the DONE phase")
    in_target = state.cursor < state.target[1]
    can_close = bool(state.open_starts) and state.cursor > state.open_starts[-1]
    return AllowedActions(
        copy=in_target,
        open=in_target and len(state.open_starts) < state.max_nesting,
        n_close=state.next_cluster_id + 1 if can_close else 0,
    )


def step(state: DecoderState, action: Action) -> DecoderState:
    """Apply one action, re-validating it against the grammar rules."""
    if state.done:
        raise DecodeError("step in the DONE phase")
    if action.kind is ActionKind.COPY:
        if state.cursor >= state.target[1]:
            raise DecodeError("copy past the end of the target")
        return replace(
            state,
            emitted=state.emitted + (DocTok(state.cursor),),
            cursor=state.cursor + 1,
        )
    if action.kind is ActionKind.OPEN:
        if state.cursor >= state.target[1]:
            raise DecodeError("mention opened at the end of the target")
        if len(state.open_starts) >= state.max_nesting:
            raise DecodeError(f"nesting deeper than {state.max_nesting}")
        return replace(
            state,
            emitted=state.emitted + (Ctl.MENTION_OPEN,),
            open_starts=state.open_starts + (state.cursor,),
        )
    if not state.open_starts:
        raise DecodeError("close without an open mention")
    if state.cursor == state.open_starts[-1]:
        raise DecodeError("close of an empty mention")
    cid = action.cluster_id
    if cid is None or cid > state.next_cluster_id:
        raise DecodeError(
            f"cluster id {cid} is not in 0..{state.next_cluster_id} "
            f"(fresh ids must be dense)"
        )
    return replace(
        state,
        emitted=state.emitted + (Ctl.SEP, ClusterId(cid), Ctl.MENTION_CLOSE),
        open_starts=state.open_starts[:-1],
        next_cluster_id=max(state.next_cluster_id, cid + 1),
    )


class Predictor(ABC):
    """Chooses one of the allowed actions at each step."""

    @abstractmethod
    def choose(
        self,
        input_seq: AnnotatedSequence,
        emitted: AnnotatedSequence,
        allowed: AllowedActions,
    ) -> Action:
        ...

    def close(self) -> None:  # transport teardown hook
        pass


Hook = Callable[[DecoderState, AllowedActions], AllowedActions]


def decode_chunk(
    predictor: Predictor,
    input_seq: AnnotatedSequence,
    target_chunk: Chunk,
    *,
    known_ids: int = 0,
    max_nesting: int = 4,
    hooks: Sequence[Hook] = (),
) -> AnnotatedSequence:
    """Drive the FSM with the predictor until the target is fully emitted."""
    doc = input_seq.doc
    state = DecoderState.fresh(doc, target_chunk.token_range, known_ids, max_nesting)
    budget = 10 * max(1, target_chunk.n_tokens)
    steps = 0
    while not state.done:
        if steps >= budget:
            raise DecodeError(
                f"step budget {budget} exceeded at step {steps}"
            )
        allowed = allowed_actions(state)
        for hook in hooks:
            allowed = hook(state, allowed)
        if len(allowed) == 0:
            raise DecodeError(f"hooks left no legal action at step {steps}")
        emitted = AnnotatedSequence(doc, state.emitted, None)
        try:
            action = predictor.choose(input_seq, emitted, allowed)
            if action not in allowed:
                # one retry with the same mask, then give up
                action = predictor.choose(input_seq, emitted, allowed)
                if action not in allowed:
                    raise DecodeError(
                        f"predictor returned illegal action {action.encode()} "
                        f"twice at step {steps}"
                    )
        except ProtocolError as err:
            raise ProtocolError(f"step {steps}: {err}") from err
        state = step(state, action)
        steps += 1
    return AnnotatedSequence(doc, state.emitted, target_chunk.token_range)


# ---------------------------------------------------------------------------
# Predictors

class OraclePredictor(Predictor):
    """Replays the gold annotation, mapping gold cluster ids through the
    running pipeline assignment (fresh ids in close order)."""

    def __init__(self, doc: Document, clusters: Sequence[Cluster] | None = None):
        if clusters is None:
            clusters = doc.gold_clusters or ()
        self._doc = doc
        self._mentions = [m for c in clusters for m in c.mentions]
        crossing = _find_crossing(self._mentions)
        if crossing:
            raise DecodeError(
                f"gold contains crossing mentions {crossing[0].span} "
                f"and {crossing[1].span}"
            )
        self._traces: dict[tuple[int, int], list[Action]] = {}

    def _trace(self, target: tuple[int, int]) -> list[Action]:
        trace = self._traces.get(target)
        if trace is None:
            trace = self._build_trace(target)
            self._traces[target] = trace
        return trace

    def _build_trace(self, target: tuple[int, int]) -> list[Action]:
        lo, hi = target
        for m in self._mentions:
            if m.start < hi < m.end or m.start < lo < m.end:
                raise DecodeError(
                    f"gold mention {m.span} crosses the chunk boundary "
                    f"({lo}, {hi})"
                )
        # Dense pipeline ids follow global close order, which chunking
        # preserves because chunks partition the document.
        mapping: dict[int, int] = {}
        for m in sorted(self._mentions, key=close_order):
            if m.end <= hi and m.cluster_id not in mapping:
                mapping[m.cluster_id] = len(mapping)
        inside = [m for m in self._mentions if lo <= m.start and m.end <= hi]
        opens: dict[int, list[Mention]] = {}
        closes: dict[int, list[Mention]] = {}
        for m in inside:
            opens.setdefault(m.start, []).append(m)
            closes.setdefault(m.end, []).append(m)
        actions: list[Action] = []
        for position in range(lo, hi + 1):
            for m in sorted(closes.get(position, []), key=lambda m: -m.start):
                actions.append(close_with(mapping[m.cluster_id]))
            if position == hi:
                break
            actions += [OPEN] * len(opens.get(position, []))
            actions.append(COPY)
        return actions

    def choose(
        self,
        input_seq: AnnotatedSequence,
        emitted: AnnotatedSequence,
        allowed: AllowedActions,
    ) -> Action:
        target = _target_range(input_seq)
        trace = self._trace(target)
        taken = sum(
            1
            for item in emitted.items
            if isinstance(item, DocTok) or item in (Ctl.MENTION_OPEN, Ctl.MENTION_CLOSE)
        )
        if taken >= len(trace):
            raise DecodeError("oracle trace exhausted")
        return trace[taken]


def oracle_predictor(doc: Document, clusters: Sequence[Cluster] | None = None) -> Predictor:
    return OraclePredictor(doc, clusters)


def _find_crossing(mentions: Sequence[Mention]) -> tuple[Mention, Mention] | None:
    ordered = sorted(mentions, key=lambda m: (m.start, -m.end))
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if b.start >= a.end:
                break
            if b.end > a.end:
                return (a, b)
    return None


def _target_range(input_seq: AnnotatedSequence) -> tuple[int, int]:
    items = input_seq.items
    try:
        open_at = items.index(Ctl.TARGET_OPEN)
        close_at = items.index(Ctl.TARGET_CLOSE)
    except ValueError:
        raise DecodeError("input has no target block") from None
    tokens = [
        item.index for item in items[open_at + 1 : close_at] if isinstance(item, DocTok)
    ]
    if not tokens:
        raise DecodeError("input has an empty target block")
    return (tokens[0], tokens[-1] + 1)


class ScriptedPredictor(Predictor):
    """Replays a fixed action list (for tests and recorded traces)."""

    def __init__(self, actions: Sequence[Action]):
        self._actions = list(actions)
        self._cursor = 0

    def choose(self, input_seq, emitted, allowed) -> Action:
        if self._cursor >= len(self._actions):
            raise DecodeError("scripted trace exhausted")
        action = self._actions[self._cursor]
        self._cursor += 1
        return action


class RecordingPredictor(Predictor):
    """Wraps a predictor and records the chosen actions per chunk."""

    def __init__(self, inner: Predictor):
        self._inner = inner
        self.chunks: list[list[str]] = []
        self._current_target: tuple[int, int] | None = None

    def choose(self, input_seq, emitted, allowed) -> Action:
        target = _target_range(input_seq)
        if target != self._current_target:
            self._current_target = target
            self.chunks.append([])
        action = self._inner.choose(input_seq, emitted, allowed)
        self.chunks[-1].append(action.encode())
        return action

    def close(self) -> None:
        self._inner.close()


# ---------------------------------------------------------------------------
# External predictor over newline-delimited JSON

@dataclass(frozen=True)
class EndpointConfig:
    """``stdio`` runs ``command`` as a subprocess; ``tcp`` connects to
    ``host:port``. One session per document."""

    transport: str  # "stdio" | "tcp"
    command: tuple[str, ...] = ()
    host: str = "127.0.0.1"
    port: int = 0
    timeout: float = 30.0

    @staticmethod
    def parse(text: str) -> "EndpointConfig":
        kind, _, rest = text.partition(":")
        if kind == "tcp":
            host, _, port = rest.rpartition(":")
            if not host or not port.isdigit():
                raise ProtocolError(f"bad tcp endpoint {text!r}")
            return EndpointConfig("tcp", host=host, port=int(port))
        if kind == "stdio":
            if not rest:
                raise ProtocolError(f"bad stdio endpoint {text!r}")
            return EndpointConfig("stdio", command=tuple(rest.split()))
        raise ProtocolError(f"unknown endpoint transport {text!r}")


PROTOCOL_VERSION = 1


class ExternalPredictor(Predictor):
    def __init__(self, endpoint: EndpointConfig):
        self._endpoint = endpoint
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._reader = None
        self._writer = None
        self._open()

    def _open(self) -> None:
        cfg = self._endpoint
        try:
            if cfg.transport == "stdio":
                self._proc = subprocess.Popen(
                    cfg.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                )
                self._reader = self._proc.stdout
                self._writer = self._proc.stdin
            elif cfg.transport == "tcp":
                self._sock = socket.create_connection(
                    (cfg.host, cfg.port), timeout=cfg.timeout
                )
                handle = self._sock.makefile("rw", encoding="utf-8", newline="\n")
                self._reader = handle
                self._writer = handle
            else:
                raise ProtocolError(f"unknown transport {cfg.transport!r}")
        except OSError as err:
            raise ProtocolError(f"cannot reach predictor server: {err}") from err
        reply = self._round_trip({"type": "hello", "version": PROTOCOL_VERSION})
        if reply.get("type") != "hello":
            raise ProtocolError(f"bad handshake reply {reply!r}")

    def _round_trip(self, message: dict) -> dict:
        try:
            self._writer.write(json.dumps(message) + "\n")
            self._writer.flush()
            if self._proc is not None:
                ready, _, _ = select.select(
                    [self._reader], [], [], self._endpoint.timeout
                )
                if not ready:
                    raise ProtocolError(
                        f"timeout after {self._endpoint.timeout}s waiting "
                        f"for the predictor server"
                    )
            line = self._reader.readline()
        except (OSError, ValueError) as err:
            raise ProtocolError(f"transport failure: {err}") from err
        if not line:
            raise ProtocolError("predictor server closed the connection")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as err:
            raise ProtocolError(f"bad JSON from server: {line!r}") from err
        if reply.get("type") == "error":
            raise ProtocolError(f"server error: {reply.get('message')}")
        return reply

    def choose(self, input_seq, emitted, allowed) -> Action:
        reply = self._round_trip(
            {
                "type": "choose",
                "input": render(input_seq),
                "emitted": render(emitted),
                "allowed": [action.encode() for action in allowed],
            }
        )
        if reply.get("type") != "action" or "action" not in reply:
            raise ProtocolError(f"bad choose reply {reply!r}")
        return Action.decode(reply["action"])

    def close(self) -> None:
        try:
            if self._writer is not None:
                self._writer.write(json.dumps({"type": "bye"}) + "\n")
                self._writer.flush()
        except (OSError, ValueError):
            pass
        if self._sock is not None:
            self._sock.close()
        if self._proc is not None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()


def external_predictor(endpoint: EndpointConfig | str) -> Predictor:
    if isinstance(endpoint, str):
        endpoint = EndpointConfig.parse(endpoint)
    return ExternalPredictor(endpoint)


# ---------------------------------------------------------------------------
# The incremental loop

@dataclass(frozen=True)
class ChunkLog:
    index: int
    input_len: int
    output_len: int


@dataclass(frozen=True)
class RunResult:
    doc_id: str
    mode: Mode
    clusters: tuple[Cluster, ...]
    chunk_logs: tuple[ChunkLog, ...]
    decoded: tuple[AnnotatedSequence, ...]
    final_state: EntityState


def run_incremental(
    doc: Document,
    config: PipelineConfig,
    predictor: Predictor,
    hooks: Sequence[Hook] = (),
) -> RunResult:
    """Chunk the document, decode each chunk with inputs built per mode, and
    merge the per-chunk mentions into document-level clusters."""
    chunks = chunk_document(doc, config.chunk_budget)
    history: list[AnnotatedSequence] = []
    state = EntityState()
    by_id: dict[int, list[Mention]] = {}
    logs: list[ChunkLog] = []
    for chunk in chunks:
        if config.mode is Mode.FULL_PREFIX:
            input_seq = build_full_prefix_input(doc, history, chunk)
        else:
            fragments = segment_sentences(doc, history)
            context = take_context(fragments, config.context_budget)
            input_seq = build_entity_centric_input(doc, state, context, chunk)
        try:
            decoded = decode_chunk(
                predictor,
                input_seq,
                chunk,
                known_ids=state.next_id,
                max_nesting=config.max_nesting,
                hooks=hooks,
            )
        except DecodeError as err:
            raise DecodeError(f"{doc.doc_id} chunk {chunk.index}: {err}") from err
        mentions = parse_annotated(decoded)
        logs.append(ChunkLog(chunk.index, len(input_seq.items), len(decoded.items)))
        history.append(decoded)
        state = update_state(state, doc, mentions, config.ordering)
        for m in mentions:
            by_id.setdefault(m.cluster_id, []).append(m)
    # mention sets: the grammar can annotate one span twice in a cluster
    clusters = tuple(
        Cluster(cid, tuple(sorted(set(by_id[cid]), key=lambda m: m.span)))
        for cid in sorted(by_id)
    )
    return RunResult(
        doc_id=doc.doc_id,
        mode=config.mode,
        clusters=clusters,
        chunk_logs=tuple(logs),
        decoded=tuple(history),
        final_state=state,
    )
