/**
 * Pure screen model: ViewState in, lines of text out.
 *
 * Keeping the renderer DOM-free means the whole screen is testable in
 * node; the browser entry point only has to put these lines into panes.
 */

import type { ViewState } from "./state.js";

const SPARK_LEVELS = " .:-=+*#";

function sparkline(series: number[], width = 31): string {
  const tail = series.slice(-width);
  return tail
    .map((v) => {
      const clamped = Math.min(1, Math.max(0, v));
      const idx = Math.min(SPARK_LEVELS.length - 1, Math.floor(clamped * SPARK_LEVELS.length));
      return SPARK_LEVELS[idx];
    })
    .join("");
}

export function tileLabels(state: ViewState): string[] {
  return [...state.keywordTiles, ...state.specialTiles];
}

export function renderTiles(state: ViewState): string[] {
  if (!state.optionsOnScreen) {
    return [];
  }
  const labels = tileLabels(state);
  return labels.map((label, i) => `[${i}] ${label}`);
}

export function renderBanner(state: ViewState): string | null {
  if (state.banner === null) {
    return null;
  }
  const b = state.banner;
  return `${b.kind}: stimulus ${b.stimulus} after ${b.frames} frames (${b.selectionTimeMs} ms)`;
}

export function renderTraces(state: ViewState): string[] {
  if (state.framesStreamed === 0) {
    return [];
  }
  return state.accuracySeries.map((series, i) => {
    const last = series[series.length - 1] ?? 0;
    return `${String(i).padStart(2)} ${sparkline(series)} ${last.toFixed(2)}`;
  });
}

export interface Screen {
  header: string[];
  question: string;
  tiles: string[];
  traces: string[];
  banner: string | null;
  answer: string;
  /** Exactly the engine's transcript lines; the pane adds nothing. */
  transcript: string[];
  error: string | null;
}

export function render(state: ViewState): Screen {
  const header = [
    state.goal,
    `status ${state.status || "-"} | page ${state.page} | ` +
      `selections ${state.selectionsUsed}/${state.budget} | ${state.connection}`,
  ];
  if (state.category) {
    header.push(`category ${state.category}`);
  }
  return {
    header,
    question: state.question,
    tiles: renderTiles(state),
    traces: renderTraces(state),
    banner: renderBanner(state),
    answer: state.answer,
    transcript: state.transcript,
    error: state.error,
  };
}
