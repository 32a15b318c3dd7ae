"""Newline-delimited JSON server for the decoder wire protocol.

Ops: hello, score, correct, similarity.  One response per request, in
request order; score requests that arrive together on a connection are
batched through the model internally.  Ids concurrently in flight must be
unique; duplicates are rejected with an error response.  Per-request
failures answer with an error object and the server stays up.
"""

from __future__ import annotations

import base64
import json
import select
import socketserver
import threading

from .correct import Corrector
from .model import ByteLm
from .similarity import SimilarityScorer

ALPHABET = 256
MAX_BATCH = 64


class BridgeState:
    def __init__(
        self,
        lm: ByteLm,
        model_name: str = "byte-t5",
        corrector: Corrector | None = None,
        similarity: SimilarityScorer | None = None,
    ) -> None:
        self.lm = lm
        self.model_name = model_name
        self.corrector = corrector
        self.similarity = similarity
        self.lock = threading.Lock()  # model inference is serialized


def _b64(field: str, req: dict) -> bytes:
    value = req.get(field)
    if not isinstance(value, str):
        raise ValueError(f"missing field {field}")
    return base64.b64decode(value, validate=True)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        state: BridgeState = self.server.state  # type: ignore[attr-defined]
        self._buf = bytearray()
        while True:
            batch = self._read_batch()
            if batch is None:
                return
            replies = self._process(state, batch)
            payload = b"".join(
                (json.dumps(r, separators=(",", ":")) + "\n").encode("utf-8")
                for r in replies
            )
            try:
                self.request.sendall(payload)
            except OSError:
                return

    # -- line framing -------------------------------------------------------

    def _pop_line(self) -> bytes | None:
        idx = self._buf.find(b"\n")
        if idx < 0:
            return None
        line = bytes(self._buf[:idx])
        del self._buf[:idx + 1]
        return line

    def _read_batch(self) -> list[bytes] | None:
        """One blocking line, then whatever extra lines are already pending."""
        while (first := self._pop_line()) is None:
            try:
                data = self.request.recv(65536)
            except OSError:
                return None
            if not data:
                return None
            self._buf += data
        lines = [first]
        while len(lines) < MAX_BATCH:
            line = self._pop_line()
            if line is not None:
                lines.append(line)
                continue
            ready, _, _ = select.select([self.request], [], [], 0)
            if not ready:
                break
            try:
                data = self.request.recv(65536)
            except OSError:
                break
            if not data:
                break
            self._buf += data
        return lines

    # -- request handling ----------------------------------------------------

    def _process(self, state: BridgeState, lines: list[bytes]) -> list[dict]:
        requests: list[dict | None] = []
        replies: list[dict | None] = [None] * len(lines)
        seen_ids: set = set()
        for i, raw in enumerate(lines):
            raw = raw.strip()
            if not raw:
                requests.append(None)
                replies[i] = {"error": "empty request"}
                continue
            try:
                req = json.loads(raw)
                if not isinstance(req, dict):
                    raise ValueError("request is not an object")
            except (json.JSONDecodeError, ValueError) as exc:
                requests.append(None)
                replies[i] = {"error": f"malformed request: {exc}"}
                continue
            if req.get("op") != "hello":
                req_id = req.get("id")
                if req_id is None:
                    requests.append(None)
                    replies[i] = {"error": "missing id"}
                    continue
                if req_id in seen_ids:
                    requests.append(None)
                    replies[i] = {"id": req_id, "error": "duplicate id in flight"}
                    continue
                seen_ids.add(req_id)
            requests.append(req)

        # batch the score requests through one model call
        score_rows = [i for i, r in enumerate(requests)
                      if r is not None and r.get("op") == "score"]
        if score_rows:
            payload = []
            good_rows = []
            for i in score_rows:
                req = requests[i]
                try:
                    payload.append((_b64("context_b64", req),
                                    _b64("continuation_b64", req)))
                    good_rows.append(i)
                except (ValueError, TypeError) as exc:
                    replies[i] = {"id": req.get("id"), "error": str(exc)}
            if good_rows:
                with state.lock:
                    scored = state.lm.batch_score(payload)
                for i, (logprob, truncated) in zip(good_rows, scored):
                    reply = {"id": requests[i].get("id"), "logprob": logprob}
                    if truncated:
                        reply["truncated"] = True
                    replies[i] = reply

        for i, req in enumerate(requests):
            if replies[i] is not None or req is None:
                continue
            replies[i] = self._dispatch(state, req)
        return [r for r in replies if r is not None]

    def _dispatch(self, state: BridgeState, req: dict) -> dict:
        op = req.get("op")
        req_id = req.get("id")
        try:
            if op == "hello":
                return {"ok": True, "model": state.model_name, "alphabet": ALPHABET}
            if op == "correct":
                if state.corrector is None:
                    return {"id": req_id, "error": "no correction model loaded"}
                text = _b64("text_b64", req)
                with state.lock:
                    fixed = state.corrector.correct(text)
                return {"id": req_id,
                        "text_b64": base64.b64encode(fixed).decode("ascii")}
            if op == "similarity":
                if state.similarity is None:
                    return {"id": req_id, "error": "no similarity model loaded"}
                value = state.similarity.similarity(_b64("a_b64", req),
                                                    _b64("b_b64", req))
                return {"id": req_id, "similarity": value}
            return {"id": req_id, "error": f"unknown op {op!r}"}
        except Exception as exc:  # per-request failure; server stays up
            return {"id": req_id, "error": f"{type(exc).__name__}: {exc}"}


class BridgeServer:
    """Threaded TCP server; one thread per connection, serialized inference."""

    def __init__(self, state: BridgeState, host: str = "127.0.0.1",
                 port: int = 0) -> None:
        self._server = socketserver.ThreadingTCPServer((host, port), _Handler)
        self._server.daemon_threads = True
        self._server.state = state  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address
        return f"{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "BridgeServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()
