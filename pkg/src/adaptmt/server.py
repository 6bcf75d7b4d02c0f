"""HTTP translation server: the bridge between editor clients and the models.

JSON over HTTP/1.1 with Basic authentication. Endpoints:

    POST /api/v1/translate   {project_id, segments: [{id, src}]}
    POST /api/v1/update      {project_id, segment_id, src, post_edit}
    GET  /api/v1/status/<project_id>
    GET  /api/v1/health                      (no auth, liveness only)

Every response is a JSON object; errors carry ``{"code", "message"}``.
Each project is guarded by a writer-preferring reader-writer lock:
translations run concurrently, updates run exclusively and in FIFO
arrival order, with a bounded queue (409 when full). Updates on one
project never block requests on another.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import json
import logging
import secrets
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .adaptation import AdaptiveSession, TrainingPair, load_config
from .errors import AdaptMtError, NumericError

logger = logging.getLogger(__name__)

#: Updates waiting on one project beyond this bound are rejected with 409.
MAX_PENDING_UPDATES = 64

_PBKDF2_ITERATIONS = 50_000


class ApiError(Exception):
    """Maps directly to an HTTP error response."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


# -- credentials ----------------------------------------------------------------


class CredentialStore:
    """Salted-hash credential file with per-project authorization lists.

    Plaintext passwords exist only transiently in :meth:`add_user` and
    :meth:`check`; the file stores PBKDF2-SHA256 hashes.
    """

    def __init__(self):
        self._users: dict[str, dict] = {}

    def add_user(self, username: str, password: str, projects: list[str] | None = None) -> None:
        if not username or not password:
            raise ValueError("username and password must be non-empty")
        salt = secrets.token_hex(16)
        self._users[username] = {
            "salt": salt,
            "password_hash": _hash_password(password, salt),
            "projects": list(projects) if projects else ["*"],
        }

    def check(self, username: str, password: str) -> bool:
        user = self._users.get(username)
        if user is None:
            return False
        return hmac.compare_digest(user["password_hash"], _hash_password(password, user["salt"]))

    def authorized(self, username: str, project_id: str) -> bool:
        user = self._users.get(username)
        if user is None:
            return False
        return "*" in user["projects"] or project_id in user["projects"]

    def save(self, path) -> None:
        payload = {"users": [{"username": name, **entry} for name, entry in self._users.items()]}
        Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CredentialStore":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        store = cls()
        for entry in payload["users"]:
            store._users[entry["username"]] = {
                "salt": entry["salt"],
                "password_hash": entry["password_hash"],
                "projects": list(entry["projects"]),
            }
        return store


def _hash_password(password: str, salt: str) -> str:
    digest = hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), bytes.fromhex(salt), _PBKDF2_ITERATIONS
    )
    return digest.hex()


# -- per-project locking ----------------------------------------------------------


class ProjectLock:
    """Writer-preferring RW lock with FIFO writer tickets and a bounded queue."""

    def __init__(self, max_pending: int = MAX_PENDING_UPDATES):
        self._cond = threading.Condition()
        self._max_pending = max_pending
        self._readers = 0
        self._writer_active = False
        self._next_ticket = 0
        self._serving = 0
        self._waiting_writers = 0

    def acquire_read(self) -> None:
        with self._cond:
            while self._writer_active or self._waiting_writers > 0:
                self._cond.wait()
            self._readers += 1

    def release_read(self) -> None:
        with self._cond:
            self._readers -= 1
            self._cond.notify_all()

    def acquire_write(self) -> bool:
        """Queue for exclusive access; False when the queue is full."""
        with self._cond:
            if self._waiting_writers >= self._max_pending:
                return False
            ticket = self._next_ticket
            self._next_ticket += 1
            self._waiting_writers += 1
            while ticket != self._serving or self._readers > 0 or self._writer_active:
                self._cond.wait()
            self._waiting_writers -= 1
            self._writer_active = True
            return True

    def release_write(self) -> None:
        with self._cond:
            self._writer_active = False
            self._serving += 1
            self._cond.notify_all()


# -- registry ---------------------------------------------------------------------


class ModelRegistry:
    """Per-project sessions, loaded lazily from a directory of config files.

    ``<config_root>/<project_id>.cfg`` describes each project; sessions are
    created on first use and kept for the lifetime of the service.
    """

    def __init__(self, config_root):
        self.config_root = Path(config_root)
        self._sessions: dict[str, AdaptiveSession] = {}
        self._locks: dict[str, ProjectLock] = {}
        self._load_lock = threading.Lock()

    def project_ids(self) -> list[str]:
        return sorted(p.stem for p in self.config_root.glob("*.cfg"))

    def has_project(self, project_id: str) -> bool:
        return (self.config_root / f"{project_id}.cfg").is_file()

    def config_path(self, project_id: str):
        path = self.config_root / f"{project_id}.cfg"
        if not path.is_file():
            raise KeyError(project_id)
        return path

    def is_loaded(self, project_id: str) -> bool:
        return project_id in self._sessions

    def session(self, project_id: str) -> AdaptiveSession:
        with self._load_lock:
            existing = self._sessions.get(project_id)
            if existing is not None:
                return existing
            config = load_config(self.config_path(project_id))
            if config.project_id != project_id:
                raise AdaptMtError(
                    f"config file {project_id}.cfg declares project_id {config.project_id!r}"
                )
            session = AdaptiveSession.from_config(config)
            self._sessions[project_id] = session
            return session

    def lock(self, project_id: str) -> ProjectLock:
        with self._load_lock:
            lock = self._locks.get(project_id)
            if lock is None:
                lock = self._locks[project_id] = ProjectLock()
            return lock

    def loaded_sessions(self) -> list[AdaptiveSession]:
        with self._load_lock:
            return list(self._sessions.values())


# -- service core -------------------------------------------------------------------


def _require(body: dict, field: str, kind=str):
    if field not in body:
        raise ApiError(422, "invalid_request", f"missing field '{field}'")
    value = body[field]
    if kind is str and (not isinstance(value, str) or not value):
        raise ApiError(422, "invalid_request", f"field '{field}' must be a non-empty string")
    if kind is list and not isinstance(value, list):
        raise ApiError(422, "invalid_request", f"field '{field}' must be a list")
    return value


class TranslationService:
    """Protocol logic, independent of the HTTP plumbing."""

    def __init__(self, registry: ModelRegistry, credentials: CredentialStore):
        self.registry = registry
        self.credentials = credentials

    # Every handler returns (http_status, json_payload).

    def _project(self, username: str, project_id: str) -> AdaptiveSession:
        if not self.registry.has_project(project_id):
            raise ApiError(404, "unknown_project", f"no such project: {project_id}")
        if not self.credentials.authorized(username, project_id):
            raise ApiError(403, "forbidden", f"user not authorized for project {project_id}")
        try:
            return self.registry.session(project_id)
        except AdaptMtError as exc:
            raise ApiError(500, "project_load_failed", str(exc)) from exc

    def translate(self, username: str, body: dict) -> tuple[int, dict]:
        project_id = _require(body, "project_id")
        segments = _require(body, "segments", list)
        for i, seg in enumerate(segments):
            if not isinstance(seg, dict) or "id" not in seg:
                raise ApiError(422, "invalid_request", f"segments[{i}] missing field 'id'")
            if "src" not in seg or not isinstance(seg["src"], str):
                raise ApiError(422, "invalid_request", f"segments[{i}] missing field 'src'")
        session = self._project(username, project_id)
        lock = self.registry.lock(project_id)
        out = []
        for seg in segments:
            lock.acquire_read()
            try:
                try:
                    text, hyp_id = session.translate_segment(seg["src"])
                except ValueError as exc:
                    raise ApiError(422, "untranslatable_segment", f"segment {seg['id']!r}: {exc}")
                out.append(
                    {
                        "id": seg["id"],
                        "tgt": text,
                        "hypothesis_id": hyp_id,
                        "model_updates_seen": session.updates_applied,
                    }
                )
            finally:
                lock.release_read()
        return 200, {"segments": out}

    def update(self, username: str, body: dict) -> tuple[int, dict]:
        project_id = _require(body, "project_id")
        segment_id = _require(body, "segment_id", kind=object)
        src = _require(body, "src")
        post_edit = _require(body, "post_edit")
        session = self._project(username, project_id)
        lock = self.registry.lock(project_id)
        if not lock.acquire_write():
            raise ApiError(409, "update_queue_full", "too many updates in flight for this project")
        try:
            pair = TrainingPair(source=src, post_edit=post_edit, segment_id=str(segment_id))
            try:
                report = session.confirm_and_update(pair)
            except NumericError as exc:
                raise ApiError(
                    500, "update_failed", f"update rolled back after numeric error: {exc}"
                )
            except ValueError as exc:
                raise ApiError(422, "invalid_request", str(exc))
            return 200, {
                "accepted": True,
                "pre_loss": report.pre_loss,
                "post_loss": report.post_loss,
                "updates_applied": session.updates_applied,
            }
        finally:
            lock.release_write()

    def status(self, username: str, project_id: str) -> tuple[int, dict]:
        if not self.registry.has_project(project_id):
            raise ApiError(404, "unknown_project", f"no such project: {project_id}")
        if not self.credentials.authorized(username, project_id):
            raise ApiError(403, "forbidden", f"user not authorized for project {project_id}")
        config = load_config(self.registry.config_path(project_id))
        loaded = self.registry.is_loaded(project_id)
        updates = 0
        last_update = None
        if loaded:
            session = self.registry.session(project_id)
            updates = session.updates_applied
            last_update = session.last_update_time
        return 200, {
            "project_id": project_id,
            "model_loaded": loaded,
            "updates_applied": updates,
            "last_update_time": last_update,
            "src_lang": config.src_lang,
            "tgt_lang": config.tgt_lang,
        }

    def shutdown_flush(self) -> None:
        """Persist every loaded session to its configured checkpoint path."""
        for session in self.registry.loaded_sessions():
            lock = self.registry.lock(session.config.project_id)
            if lock.acquire_write():
                try:
                    session.checkpoint()
                finally:
                    lock.release_write()


# -- HTTP plumbing --------------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service: TranslationService = None  # set by serve()

    def log_message(self, fmt, *args):
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload: dict, extra_headers: dict | None = None) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        for name, value in (extra_headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _authenticate(self) -> str:
        header = self.headers.get("Authorization", "")
        if header.startswith("Basic "):
            try:
                decoded = base64.b64decode(header[6:]).decode("utf-8")
                username, _, password = decoded.partition(":")
            except (binascii.Error, UnicodeDecodeError):
                username = password = ""
            if username and self.service.credentials.check(username, password):
                return username
        raise ApiError(401, "unauthenticated", "valid credentials required")

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0) or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw.decode("utf-8")) if raw else {}
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ApiError(422, "invalid_json", f"request body is not valid JSON: {exc}")
        if not isinstance(body, dict):
            raise ApiError(422, "invalid_json", "request body must be a JSON object")
        return body

    def _dispatch(self, method: str) -> None:
        try:
            path = self.path.rstrip("/") or "/"
            if method == "GET" and path == "/api/v1/health":
                self._send(200, {"status": "ok"})
                return
            if method == "GET" and path.startswith("/api/v1/status/"):
                username = self._authenticate()
                project_id = path[len("/api/v1/status/") :]
                self._send(*self.service.status(username, project_id))
                return
            if method == "POST" and path == "/api/v1/translate":
                username = self._authenticate()
                self._send(*self.service.translate(username, self._read_body()))
                return
            if method == "POST" and path == "/api/v1/update":
                username = self._authenticate()
                self._send(*self.service.update(username, self._read_body()))
                return
            if path in ("/api/v1/translate", "/api/v1/update") or path.startswith("/api/v1/status"):
                raise ApiError(405, "method_not_allowed", f"{method} not supported on {path}")
            raise ApiError(404, "not_found", f"unknown endpoint {path}")
        except ApiError as exc:
            headers = {"WWW-Authenticate": 'Basic realm="adaptmt"'} if exc.status == 401 else None
            self._send(exc.status, {"code": exc.code, "message": exc.message}, headers)
        except Exception as exc:  # protocol totality: always answer JSON
            logger.exception("unhandled error serving %s %s", method, self.path)
            self._send(500, {"code": "internal_error", "message": str(exc)})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


class ServerHandle:
    """A running service; ``shutdown()`` stops it and flushes checkpoints."""

    def __init__(self, httpd: ThreadingHTTPServer, thread: threading.Thread, service: TranslationService):
        self._httpd = httpd
        self._thread = thread
        self.service = service
        self.address = httpd.server_address  # (host, port) with the real port

    @property
    def url(self) -> str:
        host, port = self.address[0], self.address[1]
        return f"http://{host}:{port}"

    def shutdown(self, flush: bool = True) -> None:
        self._httpd.shutdown()
        self._thread.join(timeout=30)
        self._httpd.server_close()
        if flush:
            self.service.shutdown_flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.shutdown()


def serve(registry: ModelRegistry, bind_address: str, credentials: CredentialStore) -> ServerHandle:
    """Start the service on ``host:port`` (port 0 picks a free one)."""
    host, _, port_text = bind_address.rpartition(":")
    if not host or not port_text:
        raise ValueError(f"bind address must be 'host:port', got {bind_address!r}")
    service = TranslationService(registry, credentials)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    httpd = ThreadingHTTPServer((host, int(port_text)), handler)
    httpd.daemon_threads = True
    thread = threading.Thread(target=httpd.serve_forever, name="adaptmt-server", daemon=True)
    thread.start()
    return ServerHandle(httpd, thread, service)
