"""HTTP service exposing generation, chat sessions and diagnostics.

JSON over HTTP, schema version "v1". The checkpoint is an immutable shared
snapshot; sessions live in memory with per-session locking so concurrent
requests to different sessions proceed in parallel.
"""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .inference import ChatSession, GenerationRequest, ModelBundle, chat_turn, generate

SCHEMA = "v1"


class RequestError(Exception):
    def __init__(self, status: int, field: str, message: str):
        super().__init__(message)
        self.status = status
        self.field = field


def _require(body: dict, field: str, types, message: str):
    value = body.get(field)
    if value is None or not isinstance(value, types):
        raise RequestError(400, field, message)
    return value


def _optional_beta(body: dict):
    beta = body.get("beta")
    if beta is None:
        return None
    if not isinstance(beta, (int, float)) or isinstance(beta, bool):
        raise RequestError(400, "beta", "beta must be a number")
    if not 0.0 <= float(beta) <= 1.0:
        raise RequestError(422, "beta", "beta must lie in [0, 1]")
    return float(beta)


def diagnostics_payload(result) -> dict:
    """Everything the UI renders: switch decision, provenance, drift words,
    and top alternatives per step."""
    fact_attention = [s.fact_attention for s in result.steps]
    mean_fact_attention = []
    if fact_attention and fact_attention[0]:
        k = len(fact_attention[0])
        mean_fact_attention = [
            sum(step[i] for step in fact_attention) / len(fact_attention)
            for i in range(k)
        ]
    return {
        "beta_predicted": result.beta_predicted,
        "beta_used": result.beta_used,
        "seed": result.seed,
        "tokens": result.tokens,
        "provenance": [
            {"token": tok, "source": tag}
            for tok, tag in zip(result.tokens, result.provenance)
        ],
        "drift_words": {
            "contextual": result.drift_contextual,
            "factual": result.drift_factual,
            "origin": result.drift_origin,
        },
        "fact_attention": mean_fact_attention,
        "steps": [
            {
                "divergent_prob": s.divergent_prob,
                "mix_weights": s.mix_weights,
                "fact_attention": s.fact_attention,
                "renormalized": s.renormalized,
                "sampled_token": s.sampled_token,
                "provenance": s.provenance,
                "top_candidates": s.top_candidates,
            }
            for s in result.steps
        ],
    }


class ServiceState:
    def __init__(self, bundle: ModelBundle, checkpoint_hash: str):
        self.bundle = bundle
        self.checkpoint_hash = checkpoint_hash
        self.started = time.monotonic()
        self.sessions: dict[str, ChatSession] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def session(self, session_id: str, create: bool = False):
        with self._registry_lock:
            if session_id not in self.sessions:
                if not create:
                    return None, None
                self.sessions[session_id] = ChatSession(
                    session_id=session_id,
                    seed_base=abs(hash(session_id)) % (2 ** 31),
                )
                self.session_locks[session_id] = threading.Lock()
            return self.sessions[session_id], self.session_locks[session_id]

    # -- handlers -----------------------------------------------------------

    def health(self) -> dict:
        return {
            "schema": SCHEMA,
            "status": "ok",
            "checkpoint": self.checkpoint_hash,
            "uptime_s": time.monotonic() - self.started,
        }

    def generate(self, body: dict) -> dict:
        context = _require(body, "context", list,
                           "context must be a list of utterance strings")
        if not context or not all(isinstance(c, str) for c in context):
            raise RequestError(400, "context", "context must be non-empty strings")
        facts = body.get("facts")
        if facts is not None and (not isinstance(facts, list)
                                  or not all(isinstance(f, str) for f in facts)):
            raise RequestError(400, "facts", "facts must be a list of strings")
        request = GenerationRequest(
            context=context,
            facts=facts,
            fact_pool=body.get("fact_pool"),
            beta=_optional_beta(body),
            k=int(body.get("k", 10)),
            max_length=int(body.get("max_length", 32)),
            seed=int(body.get("seed", 0)),
        )
        try:
            result = generate(request, self.bundle)
        except ValueError as exc:
            raise RequestError(400, "request", str(exc)) from exc
        return {
            "schema": SCHEMA,
            "text": result.text,
            "diagnostics": diagnostics_payload(result),
        }

    def chat(self, body: dict) -> dict:
        session_id = _require(body, "session_id", str, "session_id is required")
        text = _require(body, "text", str, "text is required")
        if not text.strip():
            raise RequestError(400, "text", "text must be non-empty")
        beta = _optional_beta(body)
        facts = body.get("facts")
        if facts is not None:
            if not isinstance(facts, list) or not all(isinstance(f, str) for f in facts):
                raise RequestError(400, "facts", "facts must be a list of strings")
            if len(facts) > 4:
                raise RequestError(422, "facts", "at most 4 facts are allowed")
        session, lock = self.session(session_id, create=True)
        with lock:
            if facts is not None:
                session.fact_pool = list(facts)
            seed = body.get("seed")
            result = chat_turn(session, self.bundle, text, beta=beta,
                               k=int(body.get("k", 10)),
                               seed=None if seed is None else int(seed))
        return {
            "schema": SCHEMA,
            "session_id": session_id,
            "text": result.text,
            "diagnostics": diagnostics_payload(result),
        }

    def transcript(self, session_id: str) -> dict:
        session, lock = self.session(session_id, create=False)
        if session is None:
            raise RequestError(404, "session_id", f"unknown session {session_id!r}")
        with lock:
            records = [dict(rec) for rec in session.transcript]
        return {"schema": SCHEMA, "session_id": session_id, "transcript": records}


class Handler(BaseHTTPRequestHandler):
    state: ServiceState  # set by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: dict) -> None:
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(raw)

    def _error(self, status: int, field: str, message: str) -> None:
        self._send(status, {"schema": SCHEMA,
                            "error": {"field": field, "message": message}})

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw.decode("utf-8")) if raw else {}
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise RequestError(400, "body", "request body must be JSON") from None
        if not isinstance(body, dict):
            raise RequestError(400, "body", "request body must be a JSON object")
        return body

    def do_GET(self):
        try:
            if self.path == "/v1/health":
                self._send(200, self.state.health())
            elif self.path.startswith("/v1/session/"):
                session_id = self.path[len("/v1/session/"):]
                self._send(200, self.state.transcript(session_id))
            else:
                self._error(404, "path", f"unknown endpoint {self.path}")
        except RequestError as exc:
            self._error(exc.status, exc.field, str(exc))

    def do_POST(self):
        try:
            body = self._body()
            if self.path == "/v1/generate":
                self._send(200, self.state.generate(body))
            elif self.path == "/v1/chat":
                self._send(200, self.state.chat(body))
            else:
                self._error(404, "path", f"unknown endpoint {self.path}")
        except RequestError as exc:
            self._error(exc.status, exc.field, str(exc))

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()


def make_server(bundle: ModelBundle, checkpoint_hash: str,
                port: int = 8777, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    state = ServiceState(bundle, checkpoint_hash)
    handler = type("BoundHandler", (Handler,), {"state": state})
    server = ThreadingHTTPServer((host, port), handler)
    server.state = state
    return server


def serve_forever(bundle: ModelBundle, checkpoint_hash: str, port: int,
                  host: str = "127.0.0.1") -> None:
    server = make_server(bundle, checkpoint_hash, port, host)
    print(f"condiv service listening on http://{host}:{server.server_address[1]}/v1")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
