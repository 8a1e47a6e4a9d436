/**
 * Transports: stdio (one session on stdin/stdout) and TCP (one session per
 * connection). Logs go to stderr; protocol traffic never does.
 */

import { createInterface } from "node:readline";
import { createServer, Server, Socket } from "node:net";
import { Chooser, Session } from "./session.js";
import { serialize } from "./protocol.js";

export function serveStdio(makeChooser: () => Chooser): Promise<void> {
  const session = new Session(makeChooser());
  const reader = createInterface({ input: process.stdin, terminal: false });
  return new Promise((resolve) => {
    reader.on("line", (line) => {
      if (!line.trim()) return;
      const reply = session.handleLine(line);
      process.stdout.write(serialize(reply));
      if (session.closed) {
        reader.close();
        resolve();
      }
    });
    reader.on("close", () => resolve());
  });
}

export function serveTcp(port: number, makeChooser: () => Chooser): Server {
  const server = createServer((socket: Socket) => {
    const session = new Session(makeChooser());
    let buffer = "";
    socket.on("data", (data) => {
      buffer += data.toString("utf-8");
      let newline;
      while ((newline = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newline);
        buffer = buffer.slice(newline + 1);
        if (!line.trim()) continue;
        socket.write(serialize(session.handleLine(line)));
        if (session.closed) {
          socket.end();
          return;
        }
      }
    });
    socket.on("error", (err) => {
      process.stderr.write(`connection error: ${err.message}\n`);
    });
  });
  server.listen(port, "127.0.0.1", () => {
    const address = server.address();
    const bound = typeof address === "object" && address ? address.port : port;
    process.stderr.write(`listening on 127.0.0.1:${bound}\n`);
  });
  return server;
}
