import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { loadTrace, ReplaySource } from "../dist/replay.js";
import { Session, replayChooser } from "../dist/session.js";
import { serialize } from "../dist/protocol.js";

const TRACE = {
  doc_id: "doc#000",
  chunks: [
    ["open", "copy", "close:0", "copy"],
    ["copy", "open", "copy", "close:0"],
  ],
};

function traceFile(payload: unknown): string {
  const dir = mkdtempSync(join(tmpdir(), "bridge-replay-"));
  const path = join(dir, "trace.json");
  writeFileSync(path, JSON.stringify(payload));
  return path;
}

describe("loadTrace", () => {
  it("accepts wrapped and bare layouts", () => {
    expect(loadTrace(traceFile(TRACE)).chunks).toHaveLength(2);
    expect(loadTrace(traceFile(TRACE.chunks)).chunks).toHaveLength(2);
    expect(loadTrace(traceFile(TRACE)).docId).toBe("doc#000");
  });

  it("rejects malformed traces and missing files", () => {
    expect(() => loadTrace(traceFile({ chunks: [["jump"]] }))).toThrow(
      /action strings/,
    );
    expect(() => loadTrace("/nonexistent/trace.json")).toThrow(/cannot load/);
  });
});

describe("ReplaySource", () => {
  it("serves actions across chunk boundaries and then errors", () => {
    const source = new ReplaySource(loadTrace(traceFile(TRACE)));
    const served: string[] = [];
    while (source.remaining() > 0) served.push(source.next());
    expect(served).toEqual(TRACE.chunks.flat());
    expect(() => source.next()).toThrow(/exhausted/);
  });
});

describe("replay session", () => {
  it("reproduces the recorded trace byte-identically", () => {
    const session = new Session(replayChooser(loadTrace(traceFile(TRACE))));
    const hello = session.handleLine(
      JSON.stringify({ type: "hello", version: 1 }),
    );
    expect(serialize(hello)).toBe('{"type":"hello","version":1}\n');
    const wire: string[] = [];
    for (const action of TRACE.chunks.flat()) {
      const reply = session.handleLine(
        JSON.stringify({
          type: "choose",
          input: "<target> w w w w </target>",
          emitted: "",
          allowed: ["copy", "open", "close:0", "close:1"],
        }),
      );
      wire.push(serialize(reply));
      expect(reply).toEqual({ type: "action", action });
    }
    expect(wire.join("")).toBe(
      TRACE.chunks
        .flat()
        .map((a) => `{"type":"action","action":"${a}"}\n`)
        .join(""),
    );
    expect(session.handleLine(JSON.stringify({ type: "bye" }))).toEqual({
      type: "bye",
    });
    expect(session.closed).toBe(true);
  });

  it("answers with an error when the trace leaves the mask", () => {
    const session = new Session(
      replayChooser(loadTrace(traceFile({ chunks: [["close:4"]] }))),
    );
    session.handleLine(JSON.stringify({ type: "hello", version: 1 }));
    const reply = session.handleLine(
      JSON.stringify({
        type: "choose",
        input: "<target> w </target>",
        emitted: "",
        allowed: ["copy"],
      }),
    );
    expect(reply.type).toBe("error");
  });

  it("requires hello before choose and flags bad versions", () => {
    const session = new Session(replayChooser(loadTrace(traceFile(TRACE))));
    const early = session.handleLine(
      JSON.stringify({
        type: "choose",
        input: "<target> w </target>",
        emitted: "",
        allowed: ["copy"],
      }),
    );
    expect(early.type).toBe("error");
    const wrong = session.handleLine(
      JSON.stringify({ type: "hello", version: 99 }),
    );
    expect(wrong.type).toBe("error");
  });
});
