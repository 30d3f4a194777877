"""Shared fixtures: a local HTTP server with a request log, isolated environments, manifests."""

import hashlib
import logging
import os
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, List, Optional, Sequence
from urllib.parse import urlsplit

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from datadep.locate import Platform, build_load_path  # noqa: E402
from datadep.manifest import Manifest, write_manifest  # noqa: E402

ABC_SHA256 = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Route:
    """What the fixture server answers for one path"""

    def __init__(
        self,
        body: bytes = b"",
        status: int = 200,
        headers: Optional[Dict[str, str]] = None,
        redirect: Optional[str] = None,
        head_status: Optional[int] = None,
        delay: float = 0.0,
        chunk_delay: float = 0.0,
        chunk_size: int = 64 * 1024,
        bodies: Optional[Sequence[bytes]] = None,
    ):
        self.body = body
        self.status = status
        self.headers = headers or {}
        self.redirect = redirect
        self.head_status = head_status
        self.delay = delay
        self.chunk_delay = chunk_delay
        self.chunk_size = chunk_size
        self.bodies = list(bodies) if bodies else None
        self.hits = 0

    def next_body(self) -> bytes:
        self.hits += 1
        if self.bodies:
            return self.bodies[min(self.hits, len(self.bodies)) - 1]
        return self.body


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self):
        self.server.owner.serve(self, head=False)

    def do_HEAD(self):
        self.server.owner.serve(self, head=True)

    def log_message(self, format, *args):
        pass


class FixtureServer:
    def __init__(self):
        self.routes: Dict[str, Route] = {}
        self.requests: List[tuple] = []
        self.throttle = True
        self._lock = threading.Lock()
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.httpd.daemon_threads = True
        self.httpd.owner = self
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def base(self) -> str:
        return f"http://127.0.0.1:{self.httpd.server_address[1]}"

    def url(self, path: str) -> str:
        return self.base + path

    def route(self, path: str, *args, **kwargs) -> str:
        self.routes[path] = Route(*args, **kwargs)
        return self.url(path)

    def gets(self, path: Optional[str] = None) -> List[tuple]:
        with self._lock:
            return [
                r for r in self.requests if r[0] == "GET" and (path is None or r[1] == path)
            ]

    def clear_log(self) -> None:
        with self._lock:
            self.requests.clear()

    def serve(self, handler: BaseHTTPRequestHandler, head: bool) -> None:
        path = urlsplit(handler.path).path
        with self._lock:
            self.requests.append(("HEAD" if head else "GET", path, dict(handler.headers)))
            route = self.routes.get(path)

        try:
            if route is None:
                self._send(handler, 404, b"not found", {}, head)
                return
            if route.delay:
                time.sleep(route.delay)
            if head and route.head_status is not None:
                self._send(handler, route.head_status, b"", {}, head)
                return
            if route.redirect is not None:
                self._send(handler, 302, b"", {"Location": route.redirect}, head)
                return
            with self._lock:
                body = route.next_body()
            self._send(
                handler,
                route.status,
                body,
                route.headers,
                head,
                route.chunk_size,
                route.chunk_delay if self.throttle else 0.0,
            )
        except (BrokenPipeError, ConnectionResetError):
            pass

    @staticmethod
    def _send(handler, status, body, headers, head, chunk_size=64 * 1024, chunk_delay=0.0):
        handler.send_response(status)
        for key, value in headers.items():
            handler.send_header(key, value)
        handler.send_header("Content-Length", str(len(body)))
        handler.end_headers()
        if head:
            return
        for start in range(0, len(body), chunk_size):
            handler.wfile.write(body[start : start + chunk_size])
            if chunk_delay:
                handler.wfile.flush()
                time.sleep(chunk_delay)

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logger = logging.getLogger("datadep")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True


@pytest.fixture
def server():
    fixture = FixtureServer()
    yield fixture
    fixture.close()


@pytest.fixture
def workdir(tmp_path):
    path = tmp_path / "work"
    path.mkdir()
    return path


@pytest.fixture
def env(tmp_path) -> Dict[str, str]:
    """Environment with a private home and store that auto-accepts downloads."""
    home = tmp_path / "home"
    home.mkdir()
    return {
        "HOME": str(home),
        "DATADEP_STORE": str(tmp_path / "store"),
        "DATADEP_ALWAYS_ACCEPT": "true",
    }


@pytest.fixture
def load_path(env, workdir):
    return build_load_path(env, Platform.POSIX, str(workdir))


@pytest.fixture
def store(env) -> Path:
    return Path(env["DATADEP_STORE"])


@pytest.fixture
def cli_env(env, workdir, monkeypatch) -> Dict[str, Optional[str]]:
    """Environment for CliRunner: isolated, run from ``workdir``."""
    monkeypatch.chdir(workdir)
    cleared = {
        "DATADEP_LOAD_PATH": None,
        "DATADEP_DISABLE_DOWNLOAD": None,
        "DATADEP_MANIFEST": None,
        "DATADEP_LOG_LEVEL": None,
        "DATADEP_TIMEOUT": None,
        "XDG_DATA_HOME": None,
    }
    return {**cleared, **env}


@pytest.fixture
def write_manifest_file(workdir):
    def write(*specs) -> Path:
        path = workdir / "DataDeps.toml"
        path.write_text(write_manifest(Manifest(tuple(specs))), encoding="utf-8")
        return path

    return write


def subprocess_env(env: Dict[str, str]) -> Dict[str, str]:
    """Environment for ``python -m datadep`` child processes."""
    child = {
        key: value
        for key, value in os.environ.items()
        if not key.startswith("DATADEP_") and key != "XDG_DATA_HOME"
    }
    child.update(env)
    child["PYTHONPATH"] = os.pathsep.join(
        filter(None, [str(REPO_ROOT), os.environ.get("PYTHONPATH")])
    )
    return child
