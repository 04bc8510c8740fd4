/**
 * Operator commands and their one-to-one mapping onto outbound messages.
 *
 * Commands that the engine would reject anyway (attending with no options
 * on screen) are rejected locally so a slow connection cannot queue
 * nonsense.
 */

import type { OutboundMessage } from "./protocol.js";
import type { ViewState } from "./state.js";

export type OperatorCommand =
  | { kind: "AskQuestion"; text: string }
  | { kind: "Attend"; stimulus: number }
  | { kind: "StartStimulation" }
  | { kind: "Reset" };

export class NotConnected extends Error {}
export class CommandRejected extends Error {}

/**
 * Returns the protocol message for a command, or null for commands that
 * are purely local (starting the decorative flicker preview sends
 * nothing; the stimulation itself is driven by the attend message).
 */
export function dispatch(state: ViewState, cmd: OperatorCommand): OutboundMessage | null {
  if (state.connection !== "open") {
    throw new NotConnected(`connection is ${state.connection}`);
  }
  switch (cmd.kind) {
    case "AskQuestion": {
      if (!cmd.text.trim()) {
        throw new CommandRejected("question is empty");
      }
      if (state.optionsOnScreen) {
        throw new CommandRejected("options are on screen; resolve the selection first");
      }
      return { type: "question", text: cmd.text };
    }
    case "Attend": {
      if (!state.optionsOnScreen) {
        throw new CommandRejected("no options on screen to attend to");
      }
      if (!Number.isInteger(cmd.stimulus) || cmd.stimulus < 0 || cmd.stimulus >= state.numStimuli) {
        throw new CommandRejected(`stimulus must be 0..${state.numStimuli - 1}`);
      }
      return { type: "attend", stimulus: cmd.stimulus };
    }
    case "StartStimulation":
      if (!state.optionsOnScreen) {
        throw new CommandRejected("nothing to flicker yet");
      }
      return null;
    case "Reset":
      return { type: "end" };
  }
}
