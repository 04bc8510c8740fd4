"""Session endpoint for operator consoles.

One engine session per connection, speaking line-delimited JSON messages
with a "type" field drawn from a closed set: snapshot, question, keywords,
attend, trace, decision, answer, end.  The session core is transport
agnostic; a raw TCP server (newline-framed) and a FastAPI WebSocket app
wrap the same object.

Inbound: question, attend, end.  Outbound: snapshot, keywords, trace,
decision, answer, end.  Messages that change the transcript carry the full
transcript line list, so a console pane can mirror the session's transcript
file exactly at any moment.
"""

import asyncio
import json
import os
from dataclasses import dataclass

from . import decoder, dialogue, stimulus
from .errors import BindFailure, EngineError
from .harness import (
    EngineConfig,
    build_engine,
    derive_seed,
    load_knowledge_base,
    make_provider,
    simulate_trial,
    tile_to_selection,
)

MESSAGE_TYPES = ("snapshot", "question", "keywords", "attend", "trace", "decision", "answer", "end")


class EngineSession:
    """State machine behind one console connection."""

    def __init__(self, config=None, model=None, transcript_path=None, goal="Live session"):
        self.bundle = build_engine(config)
        self.config = self.bundle.config
        self.model = model
        self.transcript_path = transcript_path
        self.session = dialogue.DialogueSession(
            provider=make_provider(self.config),
            knowledge_base=load_knowledge_base(self.config),
            budget=self.config.budget,
        )
        self.writer = dialogue.TranscriptWriter()
        self.writer.scenario_header("LIVE", goal)
        self.trial_counter = 0
        self.closed = False
        self._flush_transcript()

    # -- helpers

    def _flush_transcript(self):
        if self.transcript_path:
            with open(self.transcript_path, "w", encoding="utf-8") as fh:
                fh.write(self.writer.text())

    def _transcript_lines(self):
        return list(self.writer.lines)

    def _keywords_message(self):
        state = self.session.state
        page = state.current_page
        return {
            "type": "keywords",
            "category": state.category,
            "pages": [list(p) for p in state.keyword_pages],
            "page": page,
            "specials": list(dialogue.special_labels(page)),
            "transcript": self._transcript_lines(),
        }

    def snapshot(self, error=None):
        state = self.session.state
        msg = {
            "type": "snapshot",
            "status": state.status,
            "page": state.current_page,
            "budget": state.budget,
            "selections_used": state.selections_used,
            "num_stimuli": self.config.num_stimuli,
            "codes": stimulus.export_codebook(self.bundle.codebook),
            "transcript": self._transcript_lines(),
        }
        if self.transcript_path:
            msg["transcript_path"] = self.transcript_path
        if error is not None:
            msg["error"] = error
        return msg

    # -- message handling

    def handle(self, msg):
        """Yield the reply messages for one inbound message."""
        if self.closed:
            yield {"type": "end", "error": "session already ended"}
            return
        mtype = msg.get("type")
        if mtype == "question":
            yield from self._on_question(msg)
        elif mtype == "attend":
            yield from self._on_attend(msg)
        elif mtype == "end":
            self.closed = True
            self.writer.separator()
            self._flush_transcript()
            yield {"type": "end", "transcript": self._transcript_lines()}
        else:
            yield self.snapshot(error=f"unsupported message type {mtype!r}")

    def _on_question(self, msg):
        text = msg.get("text", "")
        try:
            self.session.ingest_question(text)
        except EngineError as exc:
            yield self.snapshot(error=str(exc))
            return
        self.writer.question(text)
        self._flush_transcript()
        yield self._keywords_message()

    def _on_attend(self, msg):
        state = self.session.state
        if state.status != dialogue.AWAITING_SELECTION:
            yield self.snapshot(error="no options on screen to attend to")
            return
        tile = msg.get("stimulus")
        if not isinstance(tile, int) or not 0 <= tile < self.config.num_stimuli:
            yield self.snapshot(error=f"attend stimulus must be 0..{self.config.num_stimuli - 1}")
            return

        page_index = state.current_page
        page = state.keyword_pages[page_index]
        traces = []
        outcome = self._decode(tile, traces.append)
        for rec in traces:
            yield {
                "type": "trace",
                "frame_index": rec.frame_index,
                "bit": rec.bit,
                "accuracies": list(rec.accuracies),
                "decided": rec.decided,
            }
        yield {
            "type": "decision",
            "kind": outcome.kind,
            "stimulus": outcome.stimulus,
            "frames": outcome.frames_to_decision,
            "selection_time_ms": outcome.selection_time_ms,
        }
        selection = tile_to_selection(outcome.stimulus)
        self.writer.options(page, page_index, selection)
        action = self.session.apply_selection(selection)
        if action.kind == "RepageOnly":
            self._flush_transcript()
            yield self._keywords_message()
            return
        if action.text is not None:
            self.writer.answer(action.text)
        if action.kind == "EndScenario":
            self.closed = True
            self.writer.separator()
        self._flush_transcript()
        if action.text is not None:
            yield {
                "type": "answer",
                "text": action.text,
                "action": action.kind,
                "transcript": self._transcript_lines(),
            }
        if self.closed:
            yield {"type": "end", "transcript": self._transcript_lines()}

    def _decode(self, tile, on_push):
        seed = derive_seed(self.config.master_seed, f"serve-trial:{self.trial_counter}")
        self.trial_counter += 1
        if self.model is None:
            # No trained model loaded: stream the ground-truth bits.
            state = decoder.DecoderState(num_stimuli=self.config.num_stimuli)
            for frame in self.bundle.timeline.frames:
                bit = frame.states[tile]
                outcome = decoder.push_prediction(
                    state, bit, self.bundle.codebook, self.bundle.decoder_config
                )
                on_push(
                    decoder.TrialLogRecord(
                        frame.frame_index,
                        int(bit),
                        tuple(state.accuracies)
                        if state.accuracies is not None
                        else (0.0,) * self.config.num_stimuli,
                        outcome is not None,
                    )
                )
                if outcome is not None:
                    return outcome
            return outcome
        segment = simulate_trial(self.bundle, tile, self.config.noise_sigma, seed)
        return decoder.run_offline(
            segment,
            self.bundle.timeline,
            self.model,
            self.bundle.codebook,
            self.bundle.decoder_config,
            on_push=on_push,
        )


@dataclass
class _SessionCounter:
    value: int = 0

    def next(self):
        self.value += 1
        return self.value


def _transcript_path(transcript_dir, counter):
    if not transcript_dir:
        return None
    os.makedirs(transcript_dir, exist_ok=True)
    return os.path.join(transcript_dir, f"session-{counter.next()}.txt")


async def serve_tcp(config=None, host="127.0.0.1", port=8750, model=None,
                    transcript_dir=None, ready_event=None):
    """Newline-framed JSON over TCP; one session per connection."""
    counter = _SessionCounter()

    async def on_connect(reader, writer):
        session = EngineSession(
            config=config,
            model=model,
            transcript_path=_transcript_path(transcript_dir, counter),
        )
        try:
            writer.write((json.dumps(session.snapshot()) + "\n").encode("utf-8"))
            await writer.drain()
            while True:
                line = await reader.readline()
                if not line:
                    break
                try:
                    msg = json.loads(line.decode("utf-8"))
                except json.JSONDecodeError:
                    msg = {"type": "malformed"}
                for reply in session.handle(msg):
                    writer.write((json.dumps(reply) + "\n").encode("utf-8"))
                    await writer.drain()
        finally:
            writer.close()

    try:
        server = await asyncio.start_server(on_connect, host, port)
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    if ready_event is not None:
        ready_event.set()
    async with server:
        await server.serve_forever()


def run_tcp_server(config=None, host="127.0.0.1", port=8750, model=None, transcript_dir=None):
    asyncio.run(serve_tcp(config, host, port, model, transcript_dir))


def create_app(config=None, model=None, transcript_dir=None):
    """FastAPI application exposing the same protocol over a WebSocket."""
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI(title="baisim session endpoint")
    counter = _SessionCounter()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        session = EngineSession(
            config=config,
            model=model,
            transcript_path=_transcript_path(transcript_dir, counter),
        )
        await websocket.send_text(json.dumps(session.snapshot()))
        try:
            while True:
                try:
                    msg = json.loads(await websocket.receive_text())
                except json.JSONDecodeError:
                    msg = {"type": "malformed"}
                for reply in session.handle(msg):
                    await websocket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass

    return app
