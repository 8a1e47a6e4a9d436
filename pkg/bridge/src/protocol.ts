/**
 * Wire protocol: newline-delimited JSON over stdio or TCP.
 *
 * Session: client sends {"type":"hello","version":1}, server echoes it.
 * Each {"type":"choose","input":..,"emitted":..,"allowed":[..]} is answered
 * with {"type":"action","action":..}; {"type":"bye"} ends the session.
 * Malformed requests get {"type":"error","message":..}.
 */

export const PROTOCOL_VERSION = 1;

export interface HelloMsg {
  type: "hello";
  version: number;
}

export interface ChooseMsg {
  type: "choose";
  input: string;
  emitted: string;
  allowed: string[];
}

export interface ByeMsg {
  type: "bye";
}

export type Request = HelloMsg | ChooseMsg | ByeMsg;

export interface ActionMsg {
  type: "action";
  action: string;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type Response = HelloMsg | ActionMsg | ErrorMsg | ByeMsg;

export class ProtocolError extends Error {}

const ACTION_RE = /^(copy|open|close:\d+)$/;

export function isActionString(text: string): boolean {
  return ACTION_RE.test(text);
}

export function parseRequest(line: string): Request {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new ProtocolError(`not JSON: ${line.slice(0, 80)}`);
  }
  if (typeof raw !== "object" || raw === null || !("type" in raw)) {
    throw new ProtocolError("request has no type");
  }
  const msg = raw as Record<string, unknown>;
  switch (msg.type) {
    case "hello": {
      if (typeof msg.version !== "number") {
        throw new ProtocolError("hello without version");
      }
      return { type: "hello", version: msg.version };
    }
    case "choose": {
      if (typeof msg.input !== "string" || typeof msg.emitted !== "string") {
        throw new ProtocolError("choose needs string input and emitted");
      }
      if (
        !Array.isArray(msg.allowed) ||
        msg.allowed.length === 0 ||
        !msg.allowed.every(
          (a) => typeof a === "string" && isActionString(a),
        )
      ) {
        throw new ProtocolError("choose needs a non-empty action mask");
      }
      return {
        type: "choose",
        input: msg.input,
        emitted: msg.emitted,
        allowed: msg.allowed as string[],
      };
    }
    case "bye":
      return { type: "bye" };
    default:
      throw new ProtocolError(`unknown request type ${String(msg.type)}`);
  }
}

export function serialize(msg: Response): string {
  return JSON.stringify(msg) + "\n";
}
