import { describe, expect, it } from "vitest";

import {
  CodebookFormatError,
  parseCodebook,
  previewFrame,
  previewStates,
} from "../src/flicker.js";

// Exactly what the engine's codes export produces for the default setup.
const EXPORT =
  "degree=5\n" +
  "taps=2,5\n" +
  "shift_step=3\n" +
  "1000010101110110001111100110100\n" +
  "0010101110110001111100110100100\n" +
  "0101110110001111100110100100001\n" +
  "1110110001111100110100100001010\n" +
  "0110001111100110100100001010111\n" +
  "0001111100110100100001010111011\n" +
  "1111100110100100001010111011000\n" +
  "1100110100100001010111011000111\n" +
  "0110100100001010111011000111110\n" +
  "0100100001010111011000111110011\n";

describe("parseCodebook", () => {
  it("reads the header and the ten code rows", () => {
    const codebook = parseCodebook(EXPORT);
    expect(codebook.degree).toBe(5);
    expect(codebook.taps).toEqual([2, 5]);
    expect(codebook.shiftStep).toBe(3);
    expect(codebook.rows).toHaveLength(10);
    expect(codebook.rows.every((row) => row.length === 31)).toBe(true);
    // Each row is the base rotated by 3 more positions.
    const base = codebook.rows[0]!;
    for (let s = 1; s < 10; s += 1) {
      const expected = base.map((_, i) => base[(i + 3 * s) % 31]);
      expect(codebook.rows[s]).toEqual(expected);
    }
  });

  it("rejects missing headers and bad rows", () => {
    expect(() => parseCodebook("degree=5\n101\n")).toThrow(CodebookFormatError);
    expect(() => parseCodebook("degree=5\ntaps=2,5\nshift_step=3\n10a\n")).toThrow(
      CodebookFormatError,
    );
    expect(() => parseCodebook("degree=5\ntaps=2,5\nshift_step=3\n101\n1\n")).toThrow(
      CodebookFormatError,
    );
  });
});

describe("preview stepping", () => {
  it("advances at the reduced display rate", () => {
    expect(previewFrame(0, 4)).toBe(0);
    expect(previewFrame(249, 4)).toBe(0);
    expect(previewFrame(250, 4)).toBe(1);
    expect(previewFrame(1000, 4)).toBe(4);
    expect(previewFrame(-5, 4)).toBe(0);
  });

  it("replays each code with wraparound", () => {
    const codebook = parseCodebook(EXPORT);
    const at0 = previewStates(codebook, 0);
    expect(at0).toHaveLength(10);
    expect(at0[0]).toBe(1); // base code starts 1000...
    expect(at0[1]).toBe(0);
    expect(previewStates(codebook, 31)).toEqual(at0);
  });
});
