import { describe, expect, it } from "vitest";
import {
  ModelChooser,
  actionContinuation,
  emittedDocTokenCount,
  targetTokens,
} from "../dist/model.js";
import { NgramModel } from "../dist/ngram.js";
import { Session, modelChooser } from "../dist/session.js";

const INPUT = "<e> <m> Alice </m> | 0 </e> <target> Alice saw Bob </target>";

describe("rendered-string helpers", () => {
  it("extracts target tokens", () => {
    expect(targetTokens(INPUT)).toEqual(["Alice", "saw", "Bob"]);
    expect(() => targetTokens("no target here")).toThrow(/target/);
  });

  it("counts emitted document tokens, skipping markup and ids", () => {
    expect(emittedDocTokenCount("")).toBe(0);
    expect(emittedDocTokenCount("<m> Alice | 0 </m> saw")).toBe(2);
    expect(emittedDocTokenCount("<m> Alice | 12 </m>")).toBe(1);
  });

  it("maps actions to their continuations", () => {
    expect(actionContinuation("copy", "saw")).toEqual(["saw"]);
    expect(actionContinuation("open", "saw")).toEqual(["<m>"]);
    expect(actionContinuation("close:3", "saw")).toEqual(["|", "3", "</m>"]);
  });
});

describe("ModelChooser", () => {
  const model = new NgramModel({
    order: 2,
    logprobs: {
      "": { "<m>": -3, "|": -4, Alice: -1, saw: -1, Bob: -1 },
      Alice: { "|": -0.5, saw: -2 },
      "|": { "0": -0.2, "1": -3 },
    },
    fallback: -10,
  });

  it("returns the singleton mask without scoring", () => {
    const chooser = new ModelChooser(model);
    expect(chooser.choose(INPUT, "", ["copy"])).toBe("copy");
  });

  it("prefers the best first token and breaks ties on continuations", () => {
    const chooser = new ModelChooser(model);
    // at the start, copying "Alice" (-1) beats "<m>" (-3)
    expect(chooser.choose(INPUT, "", ["copy", "open"])).toBe("copy");
    // after "Alice", closing "|" (-0.5) beats copying "saw" (-2); the
    // first token ties between close ids, so id 0 (-0.2) wins over id 1
    expect(
      chooser.choose(INPUT, "<m> Alice", ["copy", "close:0", "close:1"]),
    ).toBe("close:0");
  });

  it("stays inside the mask for a 1000-step fuzz session", () => {
    const session = new Session(modelChooser(new ModelChooser(model)));
    expect(
      session.handleLine(JSON.stringify({ type: "hello", version: 1 })),
    ).toEqual({ type: "hello", version: 1 });
    let seed = 20260810;
    const rand = () => {
      // xorshift; deterministic fuzz
      seed ^= seed << 13;
      seed ^= seed >>> 17;
      seed ^= seed << 5;
      return (seed >>> 0) / 2 ** 32;
    };
    let steps = 0;
    while (steps < 1000) {
      const n = 1 + Math.floor(rand() * 8);
      const words = Array.from({ length: n }, (_, i) => `w${i}`);
      const input = `<target> ${words.join(" ")} </target>`;
      let cursor = 0;
      let depth = 0;
      let opensAt: number[] = [];
      let nextId = Math.floor(rand() * 3);
      const emitted: string[] = [];
      while (cursor < n || depth > 0) {
        const allowed: string[] = [];
        if (cursor < n) allowed.push("copy");
        if (cursor < n && depth < 4) allowed.push("open");
        if (depth > 0 && cursor > opensAt[opensAt.length - 1]) {
          for (let id = 0; id <= nextId; id++) allowed.push(`close:${id}`);
        }
        const reply = session.handleLine(
          JSON.stringify({
            type: "choose",
            input,
            emitted: emitted.join(" "),
            allowed,
          }),
        );
        expect(reply.type).toBe("action");
        if (reply.type !== "action") throw new Error("fuzz failed");
        expect(allowed).toContain(reply.action);
        steps++;
        if (reply.action === "copy") {
          emitted.push(words[cursor]);
          cursor++;
        } else if (reply.action === "open") {
          emitted.push("<m>");
          opensAt.push(cursor);
          depth++;
        } else {
          const id = reply.action.slice("close:".length);
          emitted.push("|", id, "</m>");
          opensAt.pop();
          depth--;
          nextId = Math.max(nextId, Number(id) + 1);
        }
        if (steps >= 1000 && depth === 0) break;
      }
    }
    expect(steps).toBeGreaterThanOrEqual(1000);
  });
});
