import { describe, expect, it } from "vitest";

import {
  LineSplitter,
  ProtocolError,
  encodeMessage,
  parseEngineMessage,
} from "../src/protocol.js";

describe("parseEngineMessage", () => {
  it("accepts every inbound type", () => {
    for (const type of ["snapshot", "keywords", "trace", "decision", "answer", "end"]) {
      expect(parseEngineMessage(JSON.stringify({ type })).type).toBe(type);
    }
  });

  it("rejects unknown types", () => {
    expect(() => parseEngineMessage('{"type": "question"}')).toThrow(ProtocolError);
    expect(() => parseEngineMessage('{"type": 3}')).toThrow(ProtocolError);
    expect(() => parseEngineMessage("{}")).toThrow(ProtocolError);
  });

  it("rejects non-JSON and non-objects", () => {
    expect(() => parseEngineMessage("not json")).toThrow(ProtocolError);
    expect(() => parseEngineMessage("42")).toThrow(ProtocolError);
    expect(() => parseEngineMessage("null")).toThrow(ProtocolError);
  });

  it("keeps payload fields", () => {
    const msg = parseEngineMessage(
      '{"type": "decision", "kind": "Selected", "stimulus": 3, "frames": 20, "selection_time_ms": 1200}',
    );
    expect(msg).toEqual({
      type: "decision",
      kind: "Selected",
      stimulus: 3,
      frames: 20,
      selection_time_ms: 1200,
    });
  });
});

describe("encodeMessage", () => {
  it("frames outbound messages with a newline", () => {
    expect(encodeMessage({ type: "question", text: "Hi?" })).toBe(
      '{"type":"question","text":"Hi?"}\n',
    );
    expect(encodeMessage({ type: "attend", stimulus: 9 })).toBe(
      '{"type":"attend","stimulus":9}\n',
    );
    expect(encodeMessage({ type: "end" })).toBe('{"type":"end"}\n');
  });
});

describe("LineSplitter", () => {
  it("reassembles lines across chunk boundaries", () => {
    const splitter = new LineSplitter();
    expect(splitter.push('{"a": 1}\n{"b"')).toEqual(['{"a": 1}']);
    expect(splitter.push(": 2}\n")).toEqual(['{"b": 2}']);
    expect(splitter.push("")).toEqual([]);
  });

  it("handles several lines in one chunk and skips blanks", () => {
    const splitter = new LineSplitter();
    expect(splitter.push("one\ntwo\n\nthree\n")).toEqual(["one", "two", "three"]);
  });

  it("holds incomplete trailing data", () => {
    const splitter = new LineSplitter();
    expect(splitter.push("partial")).toEqual([]);
    expect(splitter.push(" line\n")).toEqual(["partial line"]);
  });
});
