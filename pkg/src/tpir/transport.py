"""TCP transport: one framed PIRQ in, one framed PIRA out per connection."""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .protocol import Answer, Query, RecordSet, server_answer
from .wire import WireError, decode_message, encode_message, frame, read_frame

log = logging.getLogger(__name__)


class TransportError(RuntimeError):
    pass


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            query = decode_message(read_frame(self.request))
            if not isinstance(query, Query):
                raise WireError("expected a query message")
            ans = server_answer(query, self.server.records)
        except (WireError, ValueError) as exc:
            # no error message type on the wire; dropping the connection signals failure
            log.warning("rejected request from %s: %s", self.client_address, exc)
            return
        self.request.sendall(frame(encode_message(ans)))


class PirServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], records: RecordSet):
        self.records = records
        super().__init__(address, _Handler)


def serve(records: RecordSet, host: str = "127.0.0.1", port: int = 0) -> PirServer:
    """Bind a server; call ``serve_forever`` on the result (``port=0`` picks a free port)."""
    return PirServer((host, port), records)


def serve_in_thread(records: RecordSet, host: str = "127.0.0.1", port: int = 0) -> PirServer:
    srv = serve(records, host, port)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    return srv


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise TransportError(f"endpoint {text!r} is not host:port")
    return host or "127.0.0.1", int(port)


def ask(endpoint: tuple[str, int], query: Query, timeout: float = 30.0) -> Answer:
    with socket.create_connection(endpoint, timeout=timeout) as sock:
        sock.sendall(frame(encode_message(query)))
        try:
            msg = decode_message(read_frame(sock), server=query.server)
        except WireError as exc:
            raise TransportError(f"server {query.server} at {endpoint}: {exc}") from exc
    if not isinstance(msg, Answer):
        raise TransportError(f"server {query.server} did not answer with an answer message")
    return msg


def fetch_answers(endpoints: Sequence[tuple[str, int]], queries: Sequence[Query], timeout: float = 30.0) -> list[Answer]:
    """Send query j to endpoint j concurrently."""
    if len(endpoints) != len(queries):
        raise TransportError(f"{len(queries)} queries but {len(endpoints)} endpoints")
    with ThreadPoolExecutor(max_workers=len(queries)) as pool:
        futures = [pool.submit(ask, ep, qj, timeout) for ep, qj in zip(endpoints, queries)]
        try:
            return [f.result() for f in futures]
        except OSError as exc:
            raise TransportError(str(exc)) from exc
