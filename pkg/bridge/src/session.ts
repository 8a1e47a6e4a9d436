/**
 * One protocol session: hello, a stream of choose requests, bye. The chooser
 * is mode-specific (replay or model); every reply to choose is validated to
 * lie inside the request mask before it leaves the server.
 */

import { ModelChooser } from "./model.js";
import {
  ChooseMsg,
  PROTOCOL_VERSION,
  ProtocolError,
  Request,
  Response,
  parseRequest,
} from "./protocol.js";
import { ReplaySource, Trace } from "./replay.js";

export type Chooser = (msg: ChooseMsg) => string;

export function replayChooser(trace: Trace): Chooser {
  const source = new ReplaySource(trace);
  return () => source.next();
}

export function modelChooser(chooser: ModelChooser): Chooser {
  return (msg) => chooser.choose(msg.input, msg.emitted, msg.allowed);
}

export class Session {
  private greeted = false;
  private done = false;

  constructor(private readonly chooser: Chooser) {}

  get closed(): boolean {
    return this.done;
  }

  handleLine(line: string): Response {
    let request: Request;
    try {
      request = parseRequest(line);
    } catch (err) {
      return { type: "error", message: (err as Error).message };
    }
    try {
      return this.handle(request);
    } catch (err) {
      if (err instanceof ProtocolError) {
        return { type: "error", message: err.message };
      }
      return { type: "error", message: `internal: ${String(err)}` };
    }
  }

  private handle(request: Request): Response {
    switch (request.type) {
      case "hello":
        if (request.version !== PROTOCOL_VERSION) {
          return {
            type: "error",
            message: `unsupported protocol version ${request.version}`,
          };
        }
        this.greeted = true;
        return { type: "hello", version: PROTOCOL_VERSION };
      case "choose": {
        if (!this.greeted) {
          return { type: "error", message: "choose before hello" };
        }
        const action = this.chooser(request);
        if (!request.allowed.includes(action)) {
          // replay traces can desync from the engine; never answer outside
          // the mask
          return {
            type: "error",
            message: `chosen action ${action} is outside the mask`,
          };
        }
        return { type: "action", action };
      }
      case "bye":
        this.done = true;
        return { type: "bye" };
    }
  }
}
