"""Shared fixtures: a scripted local HTTP endpoint for remote-agent tests."""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class StubServer:
    """Local chat endpoint that replays a scripted response queue.

    Each queued entry may carry a body, an HTTP status and an artificial
    delay.  An empty queue answers with an empty 200 body.  Every request
    payload is recorded for assertions.
    """

    def __init__(self):
        self.script: list[dict] = []
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(n)) if n else None
                with outer._lock:
                    outer.requests.append(payload)
                    entry = outer.script.pop(0) if outer.script else {"body": ""}
                if entry.get("delay"):
                    time.sleep(entry["delay"])
                body = entry.get("body", "").encode()
                self.send_response(entry.get("status", 200))
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *_args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def push(self, body: str, status: int = 200, delay: float = 0.0):
        self.script.append({"body": body, "status": status, "delay": delay})

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()
