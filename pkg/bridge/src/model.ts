/**
 * Model mode: map each allowed action to its rendered continuation, score it
 * with the language model, and return the best legal action. The mask is
 * what keeps the output grammatical; the model only ranks within it.
 *
 * Scoring follows first-token masking: the primary score is the first token
 * of the rendered action ("copy" -> the next target token, "open" -> "<m>",
 * "close:n" -> "|"); ties fall back to the whole continuation ("| n </m>"),
 * then to mask order. Cluster ids rendered as multiple tokens share a first
 * token by construction, which is exactly why the tie-breaks exist.
 */

import { NgramModel } from "./ngram.js";
import { ProtocolError } from "./protocol.js";

const CONTROL_TOKENS = new Set([
  "<m>", "</m>", "|", "<e>", "</e>",
  "<target>", "</target>", "<context>", "</context>",
]);

/** Target-chunk tokens from a rendered input string. */
export function targetTokens(input: string): string[] {
  const words = input.split(/\s+/).filter((w) => w.length > 0);
  const open = words.indexOf("<target>");
  const close = words.indexOf("</target>");
  if (open < 0 || close < 0 || close < open) {
    throw new ProtocolError("input has no <target> block");
  }
  return words.slice(open + 1, close);
}

/** Document tokens already emitted (skips markup and cluster ids). */
export function emittedDocTokenCount(emitted: string): number {
  const words = emitted.split(/\s+/).filter((w) => w.length > 0);
  let count = 0;
  for (let i = 0; i < words.length; i++) {
    if (CONTROL_TOKENS.has(words[i])) continue;
    if (/^\d+$/.test(words[i]) && words[i - 1] === "|") continue;
    count++;
  }
  return count;
}

export function actionContinuation(
  action: string,
  nextTargetToken: string | undefined,
): string[] {
  if (action === "copy") {
    if (nextTargetToken === undefined) {
      throw new ProtocolError("copy allowed but the target is exhausted");
    }
    return [nextTargetToken];
  }
  if (action === "open") {
    return ["<m>"];
  }
  const id = action.slice("close:".length);
  return ["|", id, "</m>"];
}

export class ModelChooser {
  constructor(private readonly model: NgramModel) {}

  choose(input: string, emitted: string, allowed: string[]): string {
    if (allowed.length === 1) {
      return allowed[0]; // singleton mask needs no model call
    }
    const target = targetTokens(input);
    const next = target[emittedDocTokenCount(emitted)];
    const context = emitted.split(/\s+/).filter((w) => w.length > 0);
    let best = allowed[0];
    let bestFirst = -Infinity;
    let bestTotal = -Infinity;
    for (const action of allowed) {
      const continuation = actionContinuation(action, next);
      const first = this.model.score(context, continuation[0]);
      const total = this.model.scoreContinuation(context, continuation);
      if (first > bestFirst || (first === bestFirst && total > bestTotal)) {
        best = action;
        bestFirst = first;
        bestTotal = total;
      }
    }
    return best;
  }
}
