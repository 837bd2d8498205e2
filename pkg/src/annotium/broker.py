"""Execution broker: external programs run as pipeline components.

The engine never spawns child processes itself. A small, long-lived helper
process (started from this module via ``python -m annotium.broker``) does
the spawning, so forking stays cheap no matter how large the engine grows,
crashes are contained in one place, and every external execution passes a
single auditable request log.

Transport is newline-delimited JSON over the helper's standard streams:

    request:  {"req": int, "argv": [str], "timeout": float, "doc": <interchange>}
              {"req": int, "ping": true}
    response: {"req": int, "exit": int, "stderr": str, "doc": <interchange>?,
               "pid": int?, "wall_ms": float?, "error": "timeout"|"spawn"|"output-not-json"?}
              {"req": int, "pong": true}

Wrapper programs themselves see none of this: they read one interchange
document on stdin, write one on stdout and exit 0 (see docs/wrapper-protocol.md).
"""

from __future__ import annotations

import json
import queue
import re
import shlex
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional

from annotium.components import ComponentDescriptor, ComponentKind
from annotium.model import Document
from annotium.storage import (
    ParseError,
    ValidationFailedError,
    document_from_obj,
    document_to_obj,
    export_document,
)

DEFAULT_TIMEOUT = 60.0
PING_DEADLINE = 5.0
_STDERR_CAP = 65536


class BrokerError(Exception):
    """The broker itself is unusable (as opposed to a failing wrapper)."""


class SpawnError(BrokerError):
    """The helper process could not be started or never became responsive."""


class BrokerDownError(BrokerError):
    """The helper died and one automatic restart did not recover it."""


class WrapperError(Exception):
    """Base class for failures of an external wrapper execution."""


class ExecTimeoutError(WrapperError):
    """The child exceeded its time budget and was killed."""

    def __init__(self, argv: list[str], timeout: float, pid: Optional[int]) -> None:
        super().__init__(f"{argv[0]!r} exceeded {timeout}s and was killed")
        self.pid = pid


class NonZeroExitError(WrapperError):
    def __init__(self, code: int, stderr: str) -> None:
        super().__init__(f"wrapper exited {code}: {stderr.strip()[:500]}")
        self.code = code
        self.stderr = stderr


class ProtocolError(WrapperError):
    """The wrapper's output was not a valid interchange document."""


class CommandTemplateError(WrapperError):
    """The descriptor's command template references an unbound parameter."""


@dataclass
class ExecRequest:
    argv: list[str]
    doc: dict
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class ExecResult:
    exit_code: int
    doc: Optional[dict]
    stderr: str
    wall_ms: float
    pid: Optional[int] = None


@dataclass
class LoggedRequest:
    req: int
    argv: list[str]


class Broker:
    """Engine-side handle to the helper process.

    Requests are serialized (one child at a time); callers may block
    concurrently and are served in order. If the helper dies mid-request it
    is restarted once, with the request counter preserved, before
    :class:`BrokerDownError` surfaces.
    """

    def __init__(self, helper_argv: Optional[list[str]] = None, ping_timeout: float = PING_DEADLINE):
        self._helper_argv = list(helper_argv) if helper_argv else [sys.executable, "-m", "annotium.broker"]
        self._ping_timeout = ping_timeout
        self._proc: Optional[subprocess.Popen] = None
        self._responses: "queue.Queue[Optional[str]]" = queue.Queue()
        self._reader: Optional[threading.Thread] = None
        self._req = 0
        self._lock = threading.Lock()
        self.request_log: list[LoggedRequest] = []

    # -- lifecycle

    def start(self) -> "Broker":
        """Start the helper if needed; idempotent while it is alive."""
        with self._lock:
            if self._alive():
                return self
            self._spawn_locked()
            frame = self._roundtrip_locked({"ping": True}, self._ping_timeout)
            if frame is None or not frame.get("pong"):
                self._stop_locked()
                raise SpawnError(f"helper {self._helper_argv!r} did not answer ping")
            return self

    def _alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    @property
    def alive(self) -> bool:
        return self._alive()

    @property
    def helper_pid(self) -> Optional[int]:
        return self._proc.pid if self._proc else None

    def _spawn_locked(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self._helper_argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise SpawnError(f"cannot start helper {self._helper_argv!r}: {exc}") from exc
        self._responses = queue.Queue()
        self._reader = threading.Thread(
            target=_pump_lines, args=(self._proc.stdout, self._responses), daemon=True
        )
        self._reader.start()

    def stop(self) -> None:
        with self._lock:
            self._stop_locked()

    def _stop_locked(self) -> None:
        proc, self._proc = self._proc, None
        if proc is not None and proc.poll() is None:
            proc.kill()
            proc.wait()

    # -- protocol

    def _roundtrip_locked(self, body: dict, deadline: float) -> Optional[dict]:
        """One request/response exchange; None signals a dead helper."""
        self._req += 1
        frame = {"req": self._req, **body}
        line = json.dumps(frame, ensure_ascii=False) + "\n"
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(line.encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            return None
        try:
            raw = self._responses.get(timeout=deadline)
        except queue.Empty:
            return None
        if raw is None:  # reader hit EOF: helper exited
            return None
        try:
            response = json.loads(raw)
        except json.JSONDecodeError:
            return None
        if response.get("req") != self._req:
            return None
        return response

    def ping(self, timeout: Optional[float] = None) -> bool:
        with self._lock:
            if not self._alive():
                return False
            frame = self._roundtrip_locked({"ping": True}, timeout or self._ping_timeout)
            return bool(frame and frame.get("pong"))

    def execute(self, request: ExecRequest) -> dict:
        """Run one external program via the helper; returns the raw response.

        The read deadline leaves the helper room to enforce the child
        timeout itself and still report back.
        """
        self.start()
        body = {"argv": request.argv, "timeout": request.timeout, "doc": request.doc}
        deadline = request.timeout + 30.0
        with self._lock:
            response = self._roundtrip_locked(body, deadline)
            self.request_log.append(LoggedRequest(self._req, list(request.argv)))
            if response is not None:
                return response
            # helper died: restart once with the counter preserved, retry once
            self._stop_locked()
            self._spawn_locked()
            pong = self._roundtrip_locked({"ping": True}, self._ping_timeout)
            if pong is None or not pong.get("pong"):
                raise BrokerDownError("helper did not come back after restart")
            response = self._roundtrip_locked(body, deadline)
            self.request_log.append(LoggedRequest(self._req, list(request.argv)))
            if response is None:
                raise BrokerDownError("helper died again while retrying request")
            return response


def _pump_lines(stream, out: "queue.Queue[Optional[str]]") -> None:
    for line in iter(stream.readline, b""):
        out.put(line.decode("utf-8", errors="replace"))
    out.put(None)


_default_broker: Optional[Broker] = None
_default_lock = threading.Lock()


def start_broker(helper_argv: Optional[list[str]] = None, ping_timeout: float = PING_DEADLINE) -> Broker:
    """Start (or return) the process-wide default broker."""
    global _default_broker
    with _default_lock:
        if _default_broker is None:
            _default_broker = Broker(helper_argv, ping_timeout)
        return _default_broker.start()


def stop_broker() -> None:
    global _default_broker
    with _default_lock:
        if _default_broker is not None:
            _default_broker.stop()
            _default_broker = None


def exec_external(broker: Broker, request: ExecRequest) -> ExecResult:
    """Execute one external program and map the response to typed outcomes."""
    response = broker.execute(request)
    error = response.get("error")
    stderr = response.get("stderr", "")
    pid = response.get("pid")
    if error == "timeout":
        raise ExecTimeoutError(request.argv, request.timeout, pid)
    if error == "spawn":
        raise NonZeroExitError(int(response.get("exit", -1)), stderr or "cannot spawn child")
    exit_code = int(response.get("exit", -1))
    if exit_code != 0:
        raise NonZeroExitError(exit_code, stderr)
    if error == "output-not-json" or "doc" not in response or response["doc"] is None:
        raise ProtocolError(
            f"wrapper {request.argv[0]!r} did not produce an interchange document"
        )
    return ExecResult(
        exit_code=exit_code,
        doc=response["doc"],
        stderr=stderr,
        wall_ms=float(response.get("wall_ms", 0.0)),
        pid=pid,
    )


_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def build_argv(command: str, params: Mapping[str, Any]) -> list[str]:
    """Split a command template and substitute ``{param}`` placeholders.

    Splitting happens before substitution, so parameter values are never
    word-split or shell-interpreted: each template word maps to exactly one
    argv element.
    """
    words = shlex.split(command)

    def substitute(word: str) -> str:
        def repl(match: "re.Match[str]") -> str:
            name = match.group(1)
            if name not in params:
                raise CommandTemplateError(f"command references unbound parameter {name!r}")
            return str(params[name])

        return _PLACEHOLDER.sub(repl, word)

    return [substitute(w) for w in words]


def wrap_external_component(
    descriptor: ComponentDescriptor, timeout: float = DEFAULT_TIMEOUT
) -> Callable[[Document, Mapping[str, Any], Broker], None]:
    """Adapt a WRAPPER descriptor into an engine-callable component.

    The returned callable ships the document to the external program through
    the broker and, only after the returned document validates cleanly,
    replaces the in-memory document's content. On any failure the original
    document is left untouched.
    """
    if descriptor.kind is not ComponentKind.WRAPPER or not descriptor.command:
        raise ValueError(f"{descriptor.name!r} is not a wrapper component")

    def run(doc: Document, params: Mapping[str, Any], broker: Broker) -> None:
        argv = build_argv(descriptor.command or "", params)
        export_document(doc)  # refuse to ship an invalid document
        request = ExecRequest(argv=argv, doc=document_to_obj(doc), timeout=timeout)
        result = exec_external(broker, request)
        try:
            returned = document_from_obj(result.doc)
        except ParseError as exc:
            raise ProtocolError(f"wrapper returned malformed document: {exc}") from None
        violations = returned.validate()
        if violations:
            raise ValidationFailedError(violations)
        doc.assign(returned)

    return run


# ---------------------------------------------------------------------------
# Helper-process main loop (runs as ``python -m annotium.broker``)


def _serve_exec(frame: dict) -> dict:
    argv = frame["argv"]
    timeout = float(frame.get("timeout", DEFAULT_TIMEOUT))
    payload = json.dumps(frame["doc"], ensure_ascii=False).encode("utf-8")
    started = time.perf_counter()
    try:
        child = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
    except OSError as exc:
        return {"exit": -1, "stderr": str(exc), "error": "spawn"}
    try:
        stdout, stderr = child.communicate(payload, timeout=timeout)
    except subprocess.TimeoutExpired:
        child.kill()
        child.communicate()
        return {
            "exit": -1,
            "stderr": f"killed after {timeout}s",
            "error": "timeout",
            "pid": child.pid,
            "wall_ms": (time.perf_counter() - started) * 1000.0,
        }
    wall_ms = (time.perf_counter() - started) * 1000.0
    response: dict = {
        "exit": child.returncode,
        "stderr": stderr.decode("utf-8", errors="replace")[:_STDERR_CAP],
        "pid": child.pid,
        "wall_ms": wall_ms,
    }
    if child.returncode == 0:
        try:
            response["doc"] = json.loads(stdout.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            response["doc"] = None
            response["error"] = "output-not-json"
    return response


def helper_main() -> int:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    for line in iter(stdin.readline, b""):
        try:
            frame = json.loads(line)
        except json.JSONDecodeError:
            continue
        if frame.get("ping"):
            response = {"req": frame.get("req"), "pong": True}
        else:
            response = _serve_exec(frame)
            response["req"] = frame.get("req")
        stdout.write(json.dumps(response, ensure_ascii=False).encode("utf-8") + b"\n")
        stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(helper_main())
