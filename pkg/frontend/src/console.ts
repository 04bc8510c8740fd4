/**
 * The operator console: one transport, one view state, serialized commands.
 */

import type { OperatorCommand } from "./dispatch.js";
import { dispatch } from "./dispatch.js";
import type { EngineMessage } from "./protocol.js";
import type { Transport } from "./transport.js";
import type { ViewState } from "./state.js";
import { applyMessage, initialState, noteQuestion } from "./state.js";

export type StateListener = (state: ViewState) => void;

export class OperatorConsole {
  private state: ViewState = initialState();
  private transport: Transport | null = null;
  private listeners: StateListener[] = [];

  getState(): ViewState {
    return this.state;
  }

  onChange(listener: StateListener): void {
    this.listeners.push(listener);
  }

  attachTransport(transport: Transport): void {
    this.transport = transport;
  }

  /** Inbound messages are applied in arrival order. */
  receive(msg: EngineMessage): void {
    this.setState(applyMessage(this.state, msg));
  }

  connectionLost(): void {
    if (this.state.connection !== "ended") {
      this.setState({ ...this.state, connection: "ended" });
    }
  }

  command(cmd: OperatorCommand): void {
    const outbound = dispatch(this.state, cmd);
    if (cmd.kind === "AskQuestion") {
      this.setState(noteQuestion(this.state, cmd.text));
    }
    if (outbound !== null) {
      if (this.transport === null) {
        throw new Error("no transport attached");
      }
      this.transport.send(outbound);
    }
  }

  private setState(next: ViewState): void {
    this.state = next;
    for (const listener of this.listeners) {
      listener(next);
    }
  }
}
