"""Local HTTP control API: status, profile swap, transcript inject, events.

Request/response endpoints are plain JSON; the push channels are served as
a server-sent event stream (``GET /v1/events?channel=...``). Binding is
loopback by default: this drives synthetic input on the local machine, and
remote control of someone's keyboard is a safety hazard, not a feature.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import queue
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .profiles import parse_profile, serialize_profile
from .runtime import CHANNELS, Session
from .speech import parse_transcript_line

log = logging.getLogger(__name__)

DEFAULT_LISTEN = "127.0.0.1:8537"
LISTEN_ENV_VAR = "FACEKEY_LISTEN"

_SWAP_TIMEOUT_S = 5.0


def parse_listen_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


class ControlService:
    """Wraps a ThreadingHTTPServer around one engine session."""

    def __init__(
        self,
        session: Session | None,
        host: str = "127.0.0.1",
        port: int = 0,
        ui_dir: str | Path | None = None,
    ):
        self.session = session
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self._writer_lock = threading.Lock()
        handler = _make_handler(self)
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    def start(self) -> tuple[str, int]:
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="facekey-http", daemon=True
        )
        self._thread.start()
        log.info("control service listening on %s:%d", *self.address)
        return self.address

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=2.0)


class TranscriptSocketListener:
    """Accepts ``spoken_end_ms<TAB>text`` lines on a local TCP or unix socket
    and queues them to the session; any recognizer can feed the engine."""

    def __init__(self, session: Session, locator: str):
        self.session = session
        self._closed = False
        try:
            if "/" in locator or os.sep in locator:
                self._path = locator
                if os.path.exists(locator):
                    os.unlink(locator)
                self._server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
                self._server.bind(locator)
            else:
                host, _, port = locator.rpartition(":")
                self._path = None
                self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
                self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
                self._server.bind((host or "127.0.0.1", int(port)))
        except (OSError, ValueError) as exc:
            raise OSError(f"cannot listen for transcripts on {locator!r}: {exc}") from exc
        self._server.settimeout(0.2)
        self._server.listen(1)
        self._thread = threading.Thread(
            target=self._accept_loop, name="facekey-transcripts", daemon=True
        )
        self._thread.start()

    @property
    def address(self):
        if self._path is not None:
            return self._path
        return self._server.getsockname()

    def _accept_loop(self) -> None:
        while not self._closed:
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with conn:
                conn.settimeout(0.2)
                buf = b""
                while not self._closed:
                    try:
                        chunk = conn.recv(4096)
                    except socket.timeout:
                        continue
                    except OSError:
                        break
                    if not chunk:
                        break
                    buf += chunk
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        if not line.strip():
                            continue
                        try:
                            event = parse_transcript_line(
                                line.decode("utf-8"), received_ms=self.session.now_ms()
                            )
                        except (ValueError, UnicodeDecodeError) as exc:
                            self.session.telemetry.error("transcript-parse", str(exc))
                            continue
                        self.session.submit_transcript(event)

    def close(self) -> None:
        self._closed = True
        try:
            self._server.close()
        except OSError:
            pass
        self._thread.join(timeout=2.0)
        if self._path and os.path.exists(self._path):
            os.unlink(self._path)


def _make_handler(service: ControlService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            log.debug("%s - %s", self.address_string(), fmt % args)

        # -- helpers ---------------------------------------------------------

        def _json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self._cors()
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _text(self, status: int, body: str, content_type: str) -> None:
            data = body.encode("utf-8")
            self.send_response(status)
            self._cors()
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _cors(self) -> None:
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type, If-Match")

        def _body(self) -> bytes:
            length = int(self.headers.get("Content-Length") or 0)
            return self.rfile.read(length) if length else b""

        def _session(self) -> Session | None:
            if service.session is None:
                self._json(503, {"error": "engine not started"})
                return None
            return service.session

        # -- routing ----------------------------------------------------------

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/v1/status":
                self._get_status()
            elif url.path == "/v1/profile":
                self._get_profile()
            elif url.path == "/v1/events":
                self._get_events(url)
            else:
                self._static(url.path)

        def do_PUT(self):
            if urlparse(self.path).path == "/v1/profile":
                self._put_profile()
            else:
                self._json(404, {"error": "not found"})

        def do_POST(self):
            path = urlparse(self.path).path
            if path == "/v1/transcript":
                self._post_transcript()
            elif path == "/v1/record":
                self._post_record()
            else:
                self._json(404, {"error": "not found"})

        # -- endpoints ----------------------------------------------------------

        def _get_status(self):
            session = self._session()
            if session is None:
                return
            self._json(200, session.status_snapshot())

        def _get_profile(self):
            session = self._session()
            if session is None:
                return
            self._text(200, serialize_profile(session.profile), "application/json")

        def _put_profile(self):
            session = self._session()
            if session is None:
                return
            result = parse_profile(self._body().decode("utf-8"))
            if not result.ok:
                self._json(422, {"errors": result.errors, "warnings": result.warnings})
                return
            if_match = self.headers.get("If-Match")
            with service._writer_lock:  # one writer at a time
                if if_match is not None and if_match.strip() != str(session.version):
                    self._json(
                        409,
                        {"error": "version mismatch", "version": session.version},
                    )
                    return
                ack = session.submit_profile(result.profile)
                if not ack.wait(_SWAP_TIMEOUT_S):
                    self._json(503, {"error": "engine is not applying frames"})
                    return
            self._json(
                200,
                {
                    "applied_frame_index": ack.frame_index,
                    "version": ack.version,
                    "warnings": result.warnings,
                },
            )

        def _post_transcript(self):
            session = self._session()
            if session is None:
                return
            try:
                payload = json.loads(self._body() or b"{}")
                text = payload["text"]
            except (json.JSONDecodeError, KeyError):
                self._json(400, {"error": "body must be JSON with a 'text' field"})
                return
            event = session.inject_transcript(text)
            self._json(202, {"received_ms": event.received_ms, "spoken_end_ms": event.spoken_end_ms})

        def _post_record(self):
            session = self._session()
            if session is None:
                return
            try:
                payload = json.loads(self._body() or b"{}")
                on = bool(payload["on"])
                path = payload.get("path")
            except (json.JSONDecodeError, KeyError):
                self._json(400, {"error": "body must be JSON with 'on' and optional 'path'"})
                return
            if on and not path:
                self._json(400, {"error": "'path' required to start recording"})
                return
            ack = session.set_recording(path, on)
            if not ack.wait(_SWAP_TIMEOUT_S):
                self._json(503, {"error": "engine is not applying frames"})
                return
            if not ack.ok:
                self._json(422, {"error": ack.error})
                return
            self._json(200, {"recording": on, "path": path})

        def _get_events(self, url):
            session = self._session()
            if session is None:
                return
            channel = (parse_qs(url.query).get("channel") or [""])[0]
            if channel not in CHANNELS:
                self._json(400, {"error": f"channel must be one of {', '.join(CHANNELS)}"})
                return
            sub = session.broadcaster.subscribe(channel)
            self.send_response(200)
            self._cors()
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.end_headers()
            try:
                while True:
                    try:
                        payload = sub.get(timeout=2.0)
                    except queue.Empty:
                        self.wfile.write(b": keepalive\n\n")
                        self.wfile.flush()
                        continue
                    data = json.dumps(payload)
                    self.wfile.write(f"data: {data}\n\n".encode("utf-8"))
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                session.broadcaster.unsubscribe(sub)

        # -- static UI -------------------------------------------------------------

        def _static(self, path: str):
            if service.ui_dir is None:
                if path == "/":
                    self._json(200, {"service": "facekey", "endpoints": ["/v1/status", "/v1/profile", "/v1/events"]})
                else:
                    self._json(404, {"error": "not found"})
                return
            rel = path.lstrip("/") or "index.html"
            target = (service.ui_dir / rel).resolve()
            if not str(target).startswith(str(service.ui_dir)) or not target.is_file():
                self._json(404, {"error": "not found"})
                return
            content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            data = target.read_bytes()
            self.send_response(200)
            self._cors()
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler
