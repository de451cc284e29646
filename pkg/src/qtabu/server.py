"""Loopback HTTP annealer implementing the remote-backend wire protocol.

POST a JSON body ``{"n_vars", "offset", "entries", "num_reads", "seed"}``
and receive ``{"samples": [{"bits": ..., "energy": ...}, ...]}``; sampling
runs the local simulated annealer, so a remote client pointed here must
reproduce local results bit for bit under the same seed.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .anneal import AnnealSchedule, anneal_qubo
from .qubo import qubo_from_entries


class _Handler(BaseHTTPRequestHandler):
    server_version = "QtabuLoopback/0.1"

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:  # type: ignore[attr-defined]
            super().log_message(fmt, *args)

    def do_POST(self) -> None:
        token = self.server.token  # type: ignore[attr-defined]
        if token is not None:
            auth = self.headers.get("Authorization", "")
            if auth != f"Bearer {token}":
                self.send_error(401, "bad token")
                return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length))
            n_vars = int(body["n_vars"])
            entries = [(int(i), int(j), float(c)) for i, j, c in body["entries"]]
            offset = float(body.get("offset", 0.0))
            num_reads = int(body.get("num_reads", 100))
            seed = body.get("seed")
            seed = 0 if seed is None else int(seed)
        except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
            self.send_error(400, f"bad request: {exc}")
            return
        qubo = qubo_from_entries(n_vars, entries, offset=offset)
        schedule = self.server.schedule  # type: ignore[attr-defined]
        samples = anneal_qubo(qubo, num_reads, seed, schedule)
        payload = json.dumps(
            {"samples": [{"bits": b, "energy": e} for b, e in samples]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


class LoopbackAnnealerServer:
    """Threaded test server; use as a context manager or start()/stop()."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        token: str | None = None,
        schedule: AnnealSchedule | None = None,
        verbose: bool = False,
    ) -> None:
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.token = token  # type: ignore[attr-defined]
        self._httpd.schedule = schedule  # type: ignore[attr-defined]
        self._httpd.verbose = verbose  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/solve"

    def start(self) -> "LoopbackAnnealerServer":
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def __enter__(self) -> "LoopbackAnnealerServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
