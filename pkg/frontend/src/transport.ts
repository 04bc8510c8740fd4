/**
 * Transports: a browser WebSocket and a raw TCP socket (node only).
 *
 * Both deliver parsed engine messages in arrival order and accept outbound
 * messages on a single serialized channel, so the rest of the console never
 * knows which one it is running on.
 */

import type { EngineMessage, OutboundMessage } from "./protocol.js";
import { LineSplitter, encodeMessage, parseEngineMessage } from "./protocol.js";

export interface TransportHandlers {
  onMessage: (msg: EngineMessage) => void;
  onClose: () => void;
  onError: (err: Error) => void;
}

export interface Transport {
  send(msg: OutboundMessage): void;
  close(): void;
}

/** Browser transport; one JSON object per WebSocket message. */
export function connectWebSocket(url: string, handlers: TransportHandlers): Transport {
  const socket = new WebSocket(url);
  socket.onmessage = (event) => {
    try {
      handlers.onMessage(parseEngineMessage(String(event.data)));
    } catch (err) {
      handlers.onError(err as Error);
    }
  };
  socket.onclose = () => handlers.onClose();
  socket.onerror = () => handlers.onError(new Error("websocket error"));
  return {
    send(msg) {
      socket.send(JSON.stringify(msg));
    },
    close() {
      socket.close();
    },
  };
}

/** Node transport for tests and terminal use; newline-framed JSON. */
export async function connectTcp(
  host: string,
  port: number,
  handlers: TransportHandlers,
): Promise<Transport> {
  const net = await import("node:net");
  const splitter = new LineSplitter();
  const socket: import("node:net").Socket = await new Promise((resolve, reject) => {
    const s = net.createConnection({ host, port }, () => resolve(s));
    s.once("error", reject);
  });
  socket.setEncoding("utf-8");
  socket.on("data", (chunk: string) => {
    for (const line of splitter.push(chunk)) {
      try {
        handlers.onMessage(parseEngineMessage(line));
      } catch (err) {
        handlers.onError(err as Error);
      }
    }
  });
  socket.on("close", () => handlers.onClose());
  socket.on("error", (err: Error) => handlers.onError(err));
  return {
    send(msg) {
      socket.write(encodeMessage(msg));
    },
    close() {
      socket.end();
    },
  };
}
