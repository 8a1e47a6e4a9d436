/**
 * Replay mode: serve a recorded action trace, one action per choose request.
 *
 * Trace files hold the action strings per chunk, either as a bare array of
 * arrays or wrapped as {"doc_id": .., "chunks": [[..], ..]}. Each session
 * replays the trace from the beginning (one session per document).
 */

import { readFileSync } from "node:fs";
import { ProtocolError, isActionString } from "./protocol.js";

export interface Trace {
  docId?: string;
  chunks: string[][];
}

export function loadTrace(path: string): Trace {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`cannot load replay file ${path}: ${String(err)}`);
  }
  const chunks = Array.isArray(raw)
    ? raw
    : (raw as Record<string, unknown>)?.chunks;
  if (
    !Array.isArray(chunks) ||
    !chunks.every(
      (chunk) =>
        Array.isArray(chunk) &&
        chunk.every((a) => typeof a === "string" && isActionString(a)),
    )
  ) {
    throw new Error(
      `replay file ${path} must hold arrays of action strings per chunk`,
    );
  }
  const docId = Array.isArray(raw)
    ? undefined
    : ((raw as Record<string, unknown>).doc_id as string | undefined);
  return { docId, chunks: chunks as string[][] };
}

export class ReplaySource {
  private readonly actions: string[];
  private cursor = 0;

  constructor(trace: Trace) {
    this.actions = trace.chunks.flat();
  }

  next(): string {
    if (this.cursor >= this.actions.length) {
      throw new ProtocolError("replay trace exhausted");
    }
    return this.actions[this.cursor++];
  }

  remaining(): number {
    return this.actions.length - this.cursor;
  }
}
