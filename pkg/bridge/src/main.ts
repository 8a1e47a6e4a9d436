/**
 * Entry point.
 *
 *   node dist/main.js --mode replay --replay trace.json [--transport stdio]
 *   node dist/main.js --mode model --checkpoint lm.json --transport tcp --port 9321
 */

import { loadCheckpoint } from "./ngram.js";
import { ModelChooser } from "./model.js";
import { loadTrace } from "./replay.js";
import { serveStdio, serveTcp } from "./server.js";
import { Chooser, modelChooser, replayChooser } from "./session.js";

interface Args {
  mode: "replay" | "model";
  replay?: string;
  checkpoint?: string;
  transport: "stdio" | "tcp";
  port: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { mode: "replay", transport: "stdio", port: 9321 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = () => {
      const v = argv[++i];
      if (v === undefined) throw new Error(`${flag} needs a value`);
      return v;
    };
    switch (flag) {
      case "--mode": {
        const v = value();
        if (v !== "replay" && v !== "model") {
          throw new Error(`--mode must be replay or model, got ${v}`);
        }
        args.mode = v;
        break;
      }
      case "--replay":
        args.replay = value();
        break;
      case "--checkpoint":
        args.checkpoint = value();
        break;
      case "--transport": {
        const v = value();
        if (v !== "stdio" && v !== "tcp") {
          throw new Error(`--transport must be stdio or tcp, got ${v}`);
        }
        args.transport = v;
        break;
      }
      case "--port":
        args.port = Number(value());
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  return args;
}

function makeChooserFactory(args: Args): () => Chooser {
  if (args.mode === "replay") {
    if (!args.replay) throw new Error("--mode replay needs --replay FILE");
    const trace = loadTrace(args.replay); // startup error if malformed
    return () => replayChooser(trace);
  }
  if (!args.checkpoint) throw new Error("--mode model needs --checkpoint FILE");
  const model = loadCheckpoint(args.checkpoint);
  return () => modelChooser(new ModelChooser(model));
}

async function main(): Promise<void> {
  let args: Args;
  let factory: () => Chooser;
  try {
    args = parseArgs(process.argv.slice(2));
    factory = makeChooserFactory(args);
  } catch (err) {
    process.stderr.write(`startup error: ${(err as Error).message}\n`);
    process.exit(2);
  }
  if (args.transport === "stdio") {
    await serveStdio(factory);
    process.exit(0); // stdin would otherwise keep the loop alive
  } else {
    serveTcp(args.port, factory);
  }
}

void main();
