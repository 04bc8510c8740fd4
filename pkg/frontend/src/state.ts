/**
 * View state and the pure reducer that applies engine messages to it.
 *
 * The console never computes decoding logic: every number on screen (the
 * accuracy series, the decision banner, the budget) is copied verbatim from
 * an engine message, and the transcript pane is the engine's transcript
 * line list, unmodified.
 */

import type { DecisionMessage, EngineMessage } from "./protocol.js";
import { ProtocolError } from "./protocol.js";

export const KEYWORD_TILES = 6;
export const SPECIAL_TILES = 4;

export type Connection = "connecting" | "open" | "ended";

export interface DecisionBanner {
  kind: "Selected" | "Timeout";
  stimulus: number;
  frames: number;
  selectionTimeMs: number;
}

export interface ViewState {
  connection: Connection;
  goal: string;
  status: string;
  error: string | null;
  question: string;
  category: string;
  keywordTiles: string[];
  specialTiles: string[];
  page: number;
  pages: string[][];
  optionsOnScreen: boolean;
  budget: number;
  selectionsUsed: number;
  numStimuli: number;
  codes: string;
  /** One series per stimulus; every series has exactly framesStreamed points. */
  accuracySeries: number[][];
  framesStreamed: number;
  banner: DecisionBanner | null;
  answer: string;
  transcript: string[];
  transcriptPath: string | null;
}

export function initialState(): ViewState {
  return {
    connection: "connecting",
    goal: "",
    status: "",
    error: null,
    question: "",
    category: "",
    keywordTiles: [],
    specialTiles: [],
    page: 0,
    pages: [],
    optionsOnScreen: false,
    budget: 0,
    selectionsUsed: 0,
    numStimuli: 0,
    codes: "",
    accuracySeries: [],
    framesStreamed: 0,
    banner: null,
    answer: "",
    transcript: [],
    transcriptPath: null,
  };
}

function banner(msg: DecisionMessage): DecisionBanner {
  return {
    kind: msg.kind,
    stimulus: msg.stimulus,
    frames: msg.frames,
    selectionTimeMs: msg.selection_time_ms,
  };
}

export function applyMessage(state: ViewState, msg: EngineMessage): ViewState {
  switch (msg.type) {
    case "snapshot": {
      return {
        ...state,
        connection: "open",
        goal: msg.transcript[0] ?? "",
        status: msg.status,
        error: msg.error ?? null,
        page: msg.page,
        budget: msg.budget,
        selectionsUsed: msg.selections_used,
        numStimuli: msg.num_stimuli,
        codes: msg.codes,
        transcript: msg.transcript,
        transcriptPath: msg.transcript_path ?? state.transcriptPath,
      };
    }
    case "keywords": {
      const tiles = msg.pages[msg.page];
      if (tiles === undefined || tiles.length !== KEYWORD_TILES) {
        throw new ProtocolError(`keyword page must have ${KEYWORD_TILES} tiles`);
      }
      if (msg.specials.length !== SPECIAL_TILES) {
        throw new ProtocolError(`expected ${SPECIAL_TILES} special tiles`);
      }
      const numStimuli = KEYWORD_TILES + SPECIAL_TILES;
      return {
        ...state,
        error: null,
        category: msg.category,
        pages: msg.pages,
        page: msg.page,
        keywordTiles: tiles,
        specialTiles: msg.specials,
        optionsOnScreen: true,
        numStimuli,
        accuracySeries: Array.from({ length: numStimuli }, () => []),
        framesStreamed: 0,
        banner: null,
        transcript: msg.transcript,
      };
    }
    case "trace": {
      if (msg.accuracies.length !== state.accuracySeries.length) {
        throw new ProtocolError("trace width does not match the stimulus count");
      }
      return {
        ...state,
        accuracySeries: state.accuracySeries.map((series, i) => [
          ...series,
          msg.accuracies[i] ?? 0,
        ]),
        framesStreamed: state.framesStreamed + 1,
      };
    }
    case "decision": {
      return { ...state, banner: banner(msg), optionsOnScreen: false };
    }
    case "answer": {
      return { ...state, answer: msg.text, transcript: msg.transcript };
    }
    case "end": {
      return {
        ...state,
        connection: "ended",
        optionsOnScreen: false,
        error: msg.error ?? state.error,
        transcript: msg.transcript ?? state.transcript,
      };
    }
  }
}

/** Remember the operator's question locally; the engine echoes it in the
 * transcript, this is only so the screen shows it while keywords load. */
export function noteQuestion(state: ViewState, text: string): ViewState {
  return { ...state, question: text };
}
