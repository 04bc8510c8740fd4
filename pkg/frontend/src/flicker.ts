/**
 * Decorative flicker preview from the engine's codebook export.
 *
 * The preview replays the on/off patterns at a reduced, display-safe rate.
 * It carries no timing authority: decoding runs on the engine's logical
 * frame clock, so a browser that cannot hold a steady rate changes nothing.
 */

export const PREVIEW_RATE_HZ = 4;

export interface Codebook {
  degree: number;
  taps: number[];
  shiftStep: number;
  rows: number[][];
}

export class CodebookFormatError extends Error {}

export function parseCodebook(text: string): Codebook {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length < 4) {
    throw new CodebookFormatError("codebook export too short");
  }
  const header: Record<string, string> = {};
  let row = 0;
  while (row < lines.length && lines[row]!.includes("=")) {
    const [key, value] = lines[row]!.split("=", 2);
    header[key!] = value ?? "";
    row += 1;
  }
  for (const key of ["degree", "taps", "shift_step"]) {
    if (!(key in header)) {
      throw new CodebookFormatError(`missing header line ${key}`);
    }
  }
  const rows = lines.slice(row).map((line, i) => {
    if (!/^[01]+$/.test(line)) {
      throw new CodebookFormatError(`row ${i} is not a 0/1 string`);
    }
    return [...line].map((ch) => (ch === "1" ? 1 : 0));
  });
  if (rows.length === 0) {
    throw new CodebookFormatError("no code rows");
  }
  const width = rows[0]!.length;
  if (rows.some((r) => r.length !== width)) {
    throw new CodebookFormatError("code rows differ in length");
  }
  return {
    degree: Number(header["degree"]),
    taps: header["taps"]!.split(",").map(Number),
    shiftStep: Number(header["shift_step"]),
    rows,
  };
}

/** Preview frame index after elapsedMs of wall time, at the reduced rate. */
export function previewFrame(elapsedMs: number, rateHz: number = PREVIEW_RATE_HZ): number {
  return Math.max(0, Math.floor((elapsedMs * rateHz) / 1000));
}

/** On/off state of every tile at one preview frame (patterns wrap). */
export function previewStates(codebook: Codebook, frame: number): number[] {
  return codebook.rows.map((row) => row[frame % row.length] ?? 0);
}
