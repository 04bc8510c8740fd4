/**
 * Browser entry point: binds the console to the page.
 *
 * Everything interesting lives in the DOM-free modules; this file only
 * wires events to commands and paints Screen lines into panes.
 */

import { OperatorConsole } from "./console.js";
import { CommandRejected, NotConnected } from "./dispatch.js";
import { PREVIEW_RATE_HZ, parseCodebook, previewFrame, previewStates } from "./flicker.js";
import { render } from "./render.js";
import { connectWebSocket } from "./transport.js";

function pane(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing pane #${id}`);
  }
  return el;
}

function main(): void {
  const consoleCore = new OperatorConsole();
  const url = `ws://${location.host}/ws`;
  const transport = connectWebSocket(url, {
    onMessage: (msg) => consoleCore.receive(msg),
    onClose: () => consoleCore.connectionLost(),
    onError: (err) => {
      pane("error").textContent = err.message;
    },
  });
  consoleCore.attachTransport(transport);

  const tilesPane = pane("tiles");
  let flickerStart: number | null = null;

  consoleCore.onChange((state) => {
    const screen = render(state);
    pane("header").textContent = screen.header.join("\n");
    pane("question").textContent = screen.question;
    pane("traces").textContent = screen.traces.join("\n");
    pane("banner").textContent = screen.banner ?? "";
    pane("answer").textContent = screen.answer;
    pane("transcript").textContent = screen.transcript.join("\n");
    pane("error").textContent = screen.error ?? "";

    tilesPane.replaceChildren(
      ...screen.tiles.map((label, i) => {
        const button = document.createElement("button");
        button.textContent = label;
        button.dataset["stimulus"] = String(i);
        button.onclick = () => safely(() => consoleCore.command({ kind: "Attend", stimulus: i }));
        return button;
      }),
    );
  });

  function safely(run: () => void): void {
    try {
      run();
    } catch (err) {
      if (err instanceof CommandRejected || err instanceof NotConnected) {
        pane("error").textContent = err.message;
        return;
      }
      throw err;
    }
  }

  const form = pane("ask") as HTMLFormElement;
  const input = pane("question-input") as HTMLInputElement;
  form.onsubmit = (event) => {
    event.preventDefault();
    safely(() => consoleCore.command({ kind: "AskQuestion", text: input.value }));
    input.value = "";
  };

  pane("flicker-toggle").onclick = () =>
    safely(() => {
      consoleCore.command({ kind: "StartStimulation" });
      flickerStart = performance.now();
    });

  // Decorative preview only: tile highlights replay the codes at a reduced
  // rate while the engine's logical clock does the real timing.
  function paintFlicker(now: number): void {
    const codes = consoleCore.getState().codes;
    if (flickerStart !== null && codes) {
      const frame = previewFrame(now - flickerStart, PREVIEW_RATE_HZ);
      const states = previewStates(parseCodebook(codes), frame);
      const buttons = tilesPane.querySelectorAll("button");
      buttons.forEach((button, i) => {
        button.classList.toggle("on", states[i] === 1);
      });
    }
    requestAnimationFrame(paintFlicker);
  }
  requestAnimationFrame(paintFlicker);
}

main();
