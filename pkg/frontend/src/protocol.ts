/**
 * Wire types for the engine's session endpoint.
 *
 * The engine speaks newline-framed JSON over TCP and the same objects one
 * per message over a WebSocket. Inbound messages carry everything the
 * screen shows; the console adds nothing of its own.
 */

export interface SnapshotMessage {
  type: "snapshot";
  status: string;
  page: number;
  budget: number;
  selections_used: number;
  num_stimuli: number;
  codes: string;
  transcript: string[];
  transcript_path?: string;
  error?: string;
}

export interface KeywordsMessage {
  type: "keywords";
  category: string;
  pages: string[][];
  page: number;
  specials: string[];
  transcript: string[];
}

export interface TraceMessage {
  type: "trace";
  frame_index: number;
  bit: number;
  accuracies: number[];
  decided: boolean;
}

export interface DecisionMessage {
  type: "decision";
  kind: "Selected" | "Timeout";
  stimulus: number;
  frames: number;
  selection_time_ms: number;
}

export interface AnswerMessage {
  type: "answer";
  text: string;
  action: string;
  transcript: string[];
}

export interface EndMessage {
  type: "end";
  transcript?: string[];
  error?: string;
}

export type EngineMessage =
  | SnapshotMessage
  | KeywordsMessage
  | TraceMessage
  | DecisionMessage
  | AnswerMessage
  | EndMessage;

export type OutboundMessage =
  | { type: "question"; text: string }
  | { type: "attend"; stimulus: number }
  | { type: "end" };

const INBOUND_TYPES = new Set([
  "snapshot",
  "keywords",
  "trace",
  "decision",
  "answer",
  "end",
]);

export class ProtocolError extends Error {}

export function parseEngineMessage(line: string): EngineMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new ProtocolError(`not JSON: ${line.slice(0, 80)}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("message is not an object");
  }
  const type = (raw as { type?: unknown }).type;
  if (typeof type !== "string" || !INBOUND_TYPES.has(type)) {
    throw new ProtocolError(`unknown message type ${JSON.stringify(type)}`);
  }
  return raw as EngineMessage;
}

export function encodeMessage(msg: OutboundMessage): string {
  return JSON.stringify(msg) + "\n";
}

/** Reassembles newline-framed messages from arbitrary chunk boundaries. */
export class LineSplitter {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const parts = this.buffer.split("\n");
    this.buffer = parts.pop() ?? "";
    return parts.filter((line) => line.length > 0);
  }
}
