/**
 * A word-level n-gram language model loaded from a JSON checkpoint. This is
 * the "model" a bridge process wraps when no neural checkpoint is around:
 * anything that yields next-token log-probabilities fits the masking step.
 *
 * Checkpoint shape:
 *   {
 *     "order": 2,
 *     "logprobs": { "<ctx tokens joined by space>": { "token": lp, .. }, .. },
 *     "fallback": -12.0
 *   }
 *
 * Lookups back off from the full (order-1)-token context to shorter ones and
 * finally to the "" context; unseen tokens score ``fallback``.
 */

import { readFileSync } from "node:fs";

export interface NgramCheckpoint {
  order: number;
  logprobs: Record<string, Record<string, number>>;
  fallback: number;
}

export function loadCheckpoint(path: string): NgramModel {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`cannot load model checkpoint ${path}: ${String(err)}`);
  }
  const ckpt = raw as Partial<NgramCheckpoint>;
  if (
    typeof ckpt.order !== "number" ||
    ckpt.order < 1 ||
    typeof ckpt.logprobs !== "object" ||
    ckpt.logprobs === null ||
    typeof ckpt.fallback !== "number"
  ) {
    throw new Error(
      `model checkpoint ${path} needs numeric order, logprobs table, fallback`,
    );
  }
  return new NgramModel(ckpt as NgramCheckpoint);
}

export class NgramModel {
  constructor(private readonly ckpt: NgramCheckpoint) {}

  /** log P(token | context), backing off to shorter contexts. */
  score(context: string[], token: string): number {
    const window = context.slice(-(this.ckpt.order - 1));
    for (let from = 0; from <= window.length; from++) {
      const key = window.slice(from).join(" ");
      const row = this.ckpt.logprobs[key];
      if (row && token in row) {
        return row[token];
      }
    }
    return this.ckpt.fallback;
  }

  /** Total log-probability of a continuation. */
  scoreContinuation(context: string[], tokens: string[]): number {
    let total = 0;
    const running = [...context];
    for (const token of tokens) {
      total += this.score(running, token);
      running.push(token);
    }
    return total;
  }
}
