"""HTTP facade for the in-process depot.

Translates the wire protocol onto :meth:`curator.depot.Depot.handle`, so
the facade adds transport and auth but no semantics of its own. Error
bodies are always ``{"error": <kind>}`` with the status fixed per kind.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .depot import Depot
from .errors import BindError, CuratorError, InvalidMeta

logger = logging.getLogger(__name__)

_STATUS_BY_KIND = {
    "AuthFailure": 401,
    "NotFound": 404,
    "Conflict": 409,
    "AlreadyMinted": 409,
    "NothingToPublish": 409,
    "InvalidMeta": 422,
}

_ARTICLE_PATH = re.compile(r"^/v1/articles/(\d+)$")
_ACTION_PATH = re.compile(r"^/v1/articles/(\d+)/(files|tags|authors|publish)$")


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    depot: Depot
    token: str


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "curator-depot"

    server: _Server

    def log_message(self, format, *args):
        logger.debug("%s - %s", self.address_string(), format % args)

    def _send(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_kind(self, kind: str) -> None:
        self._send(_STATUS_BY_KIND.get(kind, 500), {"error": kind})

    def _read_body(self) -> bytes:
        # Always drain the body, even on auth failure, or the next
        # request on a keep-alive connection starts mid-stream.
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _read_json(self, raw: bytes) -> dict:
        if not raw:
            return {}
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, ValueError):
            raise InvalidMeta("request body is not valid JSON")
        if not isinstance(payload, dict):
            raise InvalidMeta("request body must be a JSON object")
        return payload

    def _authorized(self) -> bool:
        return self.headers.get("Authorization") == f"token {self.server.token}"

    def _dispatch(self, method: str) -> None:
        raw = self._read_body() if method == "POST" else b""
        if not self._authorized():
            self._send_error_kind("AuthFailure")
            return
        try:
            self._route(method, raw)
        except CuratorError as exc:
            self._send_error_kind(exc.kind)
        except Exception:
            logger.exception("unhandled facade failure on %s %s", method, self.path)
            self._send(500, {"error": "InternalError"})

    def _route(self, method: str, raw: bytes) -> None:
        split = urlsplit(self.path)
        path = split.path
        depot = self.server.depot

        if method == "POST" and path == "/v1/articles":
            record = depot.handle("create_article", self._read_json(raw))
            self._send(201, {"article_id": record["article_id"]})
            return

        if method == "GET" and path == "/v1/articles/search":
            values = parse_qs(split.query).get("tag", [])
            tag = values[0] if values else None
            items = depot.handle("search_by_tag", {"tag": tag})
            self._send(200, {"items": items})
            return

        match = _ARTICLE_PATH.match(path)
        if method == "GET" and match:
            record = depot.handle("get_article", {"article_id": int(match.group(1))})
            self._send(200, record)
            return

        match = _ACTION_PATH.match(path)
        if method == "POST" and match:
            article_id = int(match.group(1))
            action = match.group(2)
            if action == "files":
                entry = depot.handle(
                    "upload_file",
                    {
                        "article_id": article_id,
                        "name": self.headers.get("X-File-Name"),
                        "content": raw,
                    },
                )
                self._send(201, entry)
                return
            if action == "tags":
                body = self._read_json(raw)
                record = depot.handle(
                    "add_tag", {"article_id": article_id, "tag": body.get("tag")}
                )
                self._send(200, record)
                return
            if action == "authors":
                body = self._read_json(raw)
                record = depot.handle(
                    "add_authors",
                    {"article_id": article_id, "author_ids": body.get("author_ids")},
                )
                self._send(200, record)
                return
            if action == "publish":
                self._read_json(raw)
                result = depot.handle("publish_article", {"article_id": article_id})
                self._send(200, result)
                return

        self._send_error_kind("NotFound")

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


def _split_bind(bind_address: str) -> tuple[str, int]:
    host, sep, port_text = str(bind_address).rpartition(":")
    if not sep:
        host, port_text = "", bind_address
    try:
        port = int(port_text)
    except ValueError:
        raise BindError(f"invalid bind address {bind_address!r}, want host:port")
    return host or "127.0.0.1", port


class DepotHttpServer:
    """Wire-protocol facade bound to a host:port.

    ``start`` serves on a background thread and returns self; ``stop`` is
    idempotent and releases the socket. ``serve_until_interrupt`` keeps
    the calling thread serving, for the foreground CLI mode.
    """

    def __init__(self, bind_address: str, depot: Depot, token: str):
        host, port = _split_bind(bind_address)
        try:
            self._httpd = _Server((host, port), _Handler)
        except OSError as exc:
            raise BindError(
                f"cannot bind {bind_address}: {exc.strerror or exc}"
            ) from exc
        self._httpd.depot = depot
        self._httpd.token = token
        self._thread: threading.Thread | None = None

    @property
    def depot(self) -> Depot:
        return self._httpd.depot

    @property
    def address(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"{host}:{port}"

    @property
    def base_url(self) -> str:
        return f"http://{self.address}"

    def start(self) -> "DepotHttpServer":
        if self._thread is None:
            # the short poll makes stop() return promptly
            self._thread = threading.Thread(
                target=lambda: self._httpd.serve_forever(poll_interval=0.05),
                name="depot-http",
                daemon=True,
            )
            self._thread.start()
            logger.info("depot facade listening on %s", self.address)
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self._httpd.shutdown()
            self._thread.join()
            self._thread = None
        self._httpd.server_close()

    def serve_until_interrupt(self) -> None:
        try:
            self._httpd.serve_forever()
        except KeyboardInterrupt:
            logger.info("interrupt received, shutting down")
        finally:
            self._httpd.server_close()


def serve_http(bind_address: str, depot: Depot | None = None, token: str = "") -> DepotHttpServer:
    """Start a facade for ``depot`` (a fresh one when omitted) and return it."""
    return DepotHttpServer(bind_address, depot or Depot(), token).start()
